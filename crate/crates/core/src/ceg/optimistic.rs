//! CEG_O and CEG_OCR construction.

use std::collections::{HashMap, HashSet};

use num_rational::Ratio;

use super::{Ceg, CegKind, CegVertex, EdgeKind, Provenance};
use crate::bits::EdgeSet;
use crate::catalogue::{canonical_form, closing_demands, Catalogue, PatternKey};
use crate::error::{Error, Result};
use crate::query::{connected_edge_sets, cycles, QueryGraph};

struct Candidate {
    to: usize,
    rate: Ratio<u64>,
    kind: EdgeKind,
    prov: Provenance,
}

struct Counts<'a> {
    q: &'a QueryGraph,
    cat: &'a Catalogue,
    cache: HashMap<EdgeSet, (PatternKey, u64)>,
}

impl Counts<'_> {
    fn get(&mut self, s: EdgeSet) -> Result<(PatternKey, u64)> {
        if let Some(hit) = self.cache.get(&s) {
            return Ok(hit.clone());
        }
        let key = canonical_form(self.q, s)?.key;
        let n = self.cat.count_key(&key).ok_or_else(|| {
            let sub = self.q.induced(s).map(|g| g.to_string()).unwrap_or_default();
            Error::MissingStatistic(format!("count of pattern {key} ({sub})"))
        })?;
        self.cache.insert(s, (key.clone(), n));
        Ok((key, n))
    }
}

/// CEG_O: vertices are ∅ and the connected subqueries with at least
/// `min(h, |Q|)` edges. Start edges carry `counts[S]`; extension edges
/// `S -> S'` carry `counts[E] / counts[I]` for every connected `E ⊆ S'` of
/// size `min(h, |S'|)` covering `S' \ S`, with `I = E \ (S' \ S)` non-empty
/// and connected. When some out-edge of a vertex closes a query cycle, only
/// such edges are kept.
pub fn build_ceg_o(q: &QueryGraph, cat: &Catalogue) -> Result<Ceg> {
    build(q, cat, false)
}

/// CEG_OCR: CEG_O, except that a hop adding exactly the last edge of a
/// cycle longer than `h` takes that cycle's closing rate. Hops that close
/// such a cycle while adding further edges are dropped. If one hop closes
/// several long cycles, the shortest cycle's rate is used and
/// [`Ceg::overlapping_cycles`] is set.
pub fn build_ceg_ocr(q: &QueryGraph, cat: &Catalogue) -> Result<Ceg> {
    build(q, cat, true)
}

fn build(q: &QueryGraph, cat: &Catalogue, ocr: bool) -> Result<Ceg> {
    let h = cat.h();
    let m = q.num_edges();
    let k0 = h.min(m);
    let mut vsets = vec![EdgeSet::EMPTY];
    vsets.extend(connected_edge_sets(q, m).into_iter().filter(|s| s.len() >= k0));
    let index: HashMap<EdgeSet, usize> = vsets.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let top = index[&q.all_edges()];
    let mut ceg = Ceg::new(
        if ocr { CegKind::Ocr } else { CegKind::O },
        vsets.iter().map(|&s| CegVertex::Edges(s)).collect(),
        0,
        top,
    );

    let mut by_size: Vec<Vec<EdgeSet>> = vec![Vec::new(); h + 1];
    for s in connected_edge_sets(q, h) {
        by_size[s.len()].push(s);
    }
    let cycle_sets: Vec<EdgeSet> = cycles(q).cycles.iter().map(|c| c.edges).collect();
    let closes_cycle = |s: EdgeSet, t: EdgeSet| cycle_sets.iter().any(|&c| c.is_subset(t) && !c.is_subset(s));

    let demands = if ocr { closing_demands(q, h) } else { Vec::new() };
    let mut closing_rates = Vec::with_capacity(demands.len());
    for d in &demands {
        let r = cat
            .closing_rate(&d.key)
            .ok_or_else(|| Error::MissingStatistic(format!("closing rate {}", d.key)))?;
        closing_rates.push(r);
    }

    let mut counts = Counts {
        q,
        cat,
        cache: HashMap::new(),
    };

    for (si, &s) in vsets.iter().enumerate() {
        if s == q.all_edges() {
            continue;
        }
        let mut cands: Vec<Candidate> = Vec::new();
        if s.is_empty() {
            for (ti, &t) in vsets.iter().enumerate().filter(|(_, t)| t.len() == k0) {
                let (key, n) = counts.get(t)?;
                cands.push(Candidate {
                    to: ti,
                    rate: Ratio::from_integer(n),
                    kind: EdgeKind::Start,
                    prov: Provenance::Markov {
                        extended: t,
                        extended_key: key,
                        intersection: EdgeSet::EMPTY,
                        intersection_key: None,
                    },
                });
            }
        } else {
            for (ti, &t) in vsets.iter().enumerate() {
                if t == s || !s.is_subset(t) {
                    continue;
                }
                let d = t.minus(s);
                let e_size = h.min(t.len());
                if d.len() >= e_size {
                    continue;
                }
                for &e in &by_size[e_size] {
                    if !d.is_subset(e) || !e.is_subset(t) {
                        continue;
                    }
                    let i = e.minus(d);
                    if i.is_empty() || !q.is_connected(i) {
                        continue;
                    }
                    let (ekey, ne) = counts.get(e)?;
                    let (ikey, ni) = counts.get(i)?;
                    let rate = if ni == 0 { Ratio::from_integer(0) } else { Ratio::new(ne, ni) };
                    cands.push(Candidate {
                        to: ti,
                        rate,
                        kind: EdgeKind::Extension,
                        prov: Provenance::Markov {
                            extended: e,
                            extended_key: ekey,
                            intersection: i,
                            intersection_key: Some(ikey),
                        },
                    });
                }
            }
        }

        if cands.iter().any(|c| closes_cycle(s, vsets[c.to])) {
            cands.retain(|c| closes_cycle(s, vsets[c.to]));
        }

        let mut replaced: HashSet<usize> = HashSet::new();
        for c in cands {
            let t = vsets[c.to];
            let d = t.minus(s);
            let hits: Vec<usize> = (0..demands.len())
                .filter(|&j| demands[j].cycle.is_subset(t) && demands[j].cycle.without(demands[j].closing).is_subset(s))
                .collect();
            if hits.is_empty() || s.is_empty() {
                ceg.add_edge(si, c.to, c.rate, c.kind, c.prov);
                continue;
            }
            if d.len() > 1 || !replaced.insert(c.to) {
                continue;
            }
            let distinct_cycles: HashSet<EdgeSet> = hits.iter().map(|&j| demands[j].cycle).collect();
            if distinct_cycles.len() > 1 {
                ceg.overlapping_cycles = true;
            }
            let j = *hits
                .iter()
                .min_by_key(|&&j| (demands[j].cycle.len(), j))
                .expect("non-empty hits");
            ceg.add_edge(
                si,
                c.to,
                closing_rates[j],
                EdgeKind::CycleClosing,
                Provenance::Closing {
                    cycle: demands[j].cycle,
                    closing: demands[j].closing,
                    key: demands[j].key.clone(),
                },
            );
        }
    }
    Ok(ceg)
}
