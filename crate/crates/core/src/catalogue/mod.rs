//! The statistics store: Markov-table counts of small connected patterns,
//! max-degree statistics over those patterns, and sampled cycle-closing
//! rates.

mod canon;
pub mod persist;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use canon::{canonical_form, canonical_key, pattern_query, CanonicalForm, PatternKey, MAX_PATTERN_VARS};
pub use persist::{load, save, CATALOGUE_VERSION};

use crate::bits::{EdgeSet, VarSet};
use crate::error::{Error, Result};
use crate::exec;
use crate::graph::{validate_label, LabeledGraph, VertexId};
use crate::oracle::{count_hom, degree_table, sample_label_paths, WalkStep};
use crate::query::{connected_edge_sets, cycle_walk, cycles, QEdge, QueryGraph, Subquery};

/// A query-edge label together with the direction a walk traverses it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirLabel {
    pub label: String,
    pub forward: bool,
}

impl fmt::Display for DirLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.label, if self.forward { '+' } else { '-' })
    }
}

/// Key of a cycle-closing statistic. The walk starts with `prev`, ends with
/// `next`, and has `len` steps; a closure is a `close` edge from the walk's
/// last vertex back to its first. `len == None` is the marginal over lengths.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClosingKey {
    pub prev: DirLabel,
    pub close: DirLabel,
    pub next: DirLabel,
    pub len: Option<usize>,
}

impl ClosingKey {
    pub fn marginal(&self) -> ClosingKey {
        ClosingKey {
            len: None,
            ..self.clone()
        }
    }

    fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Malformed(format!("bad closing-rate key {s:?}"));
        let parts: Vec<&str> = s.split('|').collect();
        let [p, c, n, l] = parts[..] else { return Err(bad()) };
        let dir = |t: &str| -> Result<DirLabel> {
            let (label, d) = t.split_at(t.len().checked_sub(1).ok_or_else(bad)?);
            validate_label(label).map_err(|_| bad())?;
            match d {
                "+" => Ok(DirLabel { label: label.into(), forward: true }),
                "-" => Ok(DirLabel { label: label.into(), forward: false }),
                _ => Err(bad()),
            }
        };
        let len = match l {
            "*" => None,
            _ => Some(l.parse().map_err(|_| bad())?),
        };
        Ok(ClosingKey {
            prev: dir(p)?,
            close: dir(c)?,
            next: dir(n)?,
            len,
        })
    }
}

impl fmt::Display for ClosingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}|{}|", self.prev, self.close, self.next)?;
        match self.len {
            Some(l) => write!(f, "{l}"),
            None => f.write_str("*"),
        }
    }
}

/// Samples drawn and closing edges found.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosingRate {
    pub samples: u64,
    pub closures: u64,
}

impl ClosingRate {
    /// `closures / samples`; zero when nothing was sampled.
    pub fn rate(&self) -> Ratio<u64> {
        if self.samples == 0 {
            Ratio::from_integer(0)
        } else {
            Ratio::new(self.closures, self.samples)
        }
    }
}

/// One cycle-closing hop a query needs: closing `closing` completes `cycle`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosingDemand {
    pub cycle: EdgeSet,
    pub closing: usize,
    pub key: ClosingKey,
    /// Walk shape: first and last steps fixed, middle steps free.
    pub steps: Vec<WalkStep>,
}

/// Cycle-closing statistics needed by a query: one per (cycle longer than
/// `h`, closing edge of that cycle).
pub fn closing_demands(q: &QueryGraph, h: usize) -> Vec<ClosingDemand> {
    let mut out = Vec::new();
    for c in cycles(q).cycles.iter().filter(|c| c.len() > h) {
        for closing in c.edges.iter() {
            let walk = cycle_walk(q, c.edges, closing);
            let dl = |(j, fwd): (usize, bool)| DirLabel {
                label: q.edge(j).label.clone(),
                forward: fwd,
            };
            let first = walk[0];
            let last = *walk.last().expect("cycle longer than h >= 2");
            let key = ClosingKey {
                prev: dl(first),
                close: DirLabel {
                    label: q.edge(closing).label.clone(),
                    forward: true,
                },
                next: dl(last),
                len: Some(walk.len()),
            };
            let mut steps = vec![WalkStep::new(&key.prev.label, key.prev.forward)];
            steps.extend((0..walk.len() - 2).map(|_| WalkStep::any()));
            steps.push(WalkStep::new(&key.next.label, key.next.forward));
            out.push(ClosingDemand {
                cycle: c.edges,
                closing,
                key,
                steps,
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CatalogueMeta {
    pub h: usize,
    pub graph_fingerprint: String,
    pub graph_vertices: usize,
    pub graph_edges: usize,
    pub seed: u64,
    /// Walks sampled per closing key; 0 means every walk was enumerated.
    pub walk_budget: usize,
    /// `workload` or `exhaustive`.
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Catalogue {
    pub meta: CatalogueMeta,
    counts: BTreeMap<PatternKey, u64>,
    deg_stats: BTreeMap<PatternKey, BTreeMap<(VarSet, VarSet), u64>>,
    closing_rates: BTreeMap<ClosingKey, ClosingRate>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CatalogueConfig {
    pub h: usize,
    /// Walks per closing key; 0 enumerates every walk.
    pub walk_budget: usize,
    pub seed: u64,
    pub deg_stats: bool,
    pub closing_rates: bool,
}

impl Default for CatalogueConfig {
    fn default() -> Self {
        CatalogueConfig {
            h: 2,
            walk_budget: 1000,
            seed: 0,
            deg_stats: true,
            closing_rates: true,
        }
    }
}

pub enum PatternSource<'a> {
    Workload(&'a [QueryGraph]),
    /// Every connected pattern of at most `h` edges over the graph's labels.
    /// Self-loop patterns are not generated.
    Exhaustive,
}

/// Largest number of patterns exhaustive mode is willing to build.
pub const EXHAUSTIVE_PATTERN_LIMIT: usize = 200_000;
/// Largest number of walks enumerated for one closing key when the walk budget is 0.
pub const EXHAUSTIVE_WALK_LIMIT: u64 = 10_000_000;

impl Catalogue {
    pub fn empty(meta: CatalogueMeta) -> Self {
        Catalogue {
            meta,
            counts: BTreeMap::new(),
            deg_stats: BTreeMap::new(),
            closing_rates: BTreeMap::new(),
        }
    }

    pub fn h(&self) -> usize {
        self.meta.h
    }

    pub fn counts(&self) -> &BTreeMap<PatternKey, u64> {
        &self.counts
    }

    pub fn deg_stats(&self) -> &BTreeMap<PatternKey, BTreeMap<(VarSet, VarSet), u64>> {
        &self.deg_stats
    }

    pub fn closing_rates(&self) -> &BTreeMap<ClosingKey, ClosingRate> {
        &self.closing_rates
    }

    pub fn insert_count(&mut self, key: PatternKey, n: u64) {
        self.counts.insert(key, n);
    }

    pub fn insert_deg(&mut self, key: PatternKey, x: VarSet, y: VarSet, d: u64) {
        self.deg_stats.entry(key).or_default().insert((x, y), d);
    }

    pub fn insert_closing(&mut self, key: ClosingKey, r: ClosingRate) {
        self.closing_rates.insert(key, r);
    }

    pub fn count_key(&self, key: &PatternKey) -> Option<u64> {
        self.counts.get(key).copied()
    }

    /// Stored count of the pattern `s` spans.
    pub fn count(&self, s: &Subquery<'_>) -> Option<u64> {
        self.count_edges(s.query(), s.edges())
    }

    pub fn count_edges(&self, q: &QueryGraph, edges: EdgeSet) -> Option<u64> {
        let f = canonical_form(q, edges).ok()?;
        self.count_key(&f.key)
    }

    /// `deg(X, Y, S)` with `X`, `Y` given as variables of `s`'s parent query.
    pub fn max_deg(&self, s: &Subquery<'_>, x: VarSet, y: VarSet) -> Option<u64> {
        self.max_deg_edges(s.query(), s.edges(), x, y)
    }

    pub fn max_deg_edges(&self, q: &QueryGraph, edges: EdgeSet, x: VarSet, y: VarSet) -> Option<u64> {
        let vars = q.vars_of(edges);
        if !x.is_subset(y) || !y.is_subset(vars) {
            return None;
        }
        let f = canonical_form(q, edges).ok()?;
        self.deg_key(&f.key, f.map_vars(x), f.map_vars(y))
    }

    pub fn deg_key(&self, key: &PatternKey, x: VarSet, y: VarSet) -> Option<u64> {
        self.deg_stats.get(key)?.get(&(x, y)).copied()
    }

    pub fn closing_rate(&self, key: &ClosingKey) -> Option<Ratio<u64>> {
        self.closing_rates.get(key).map(ClosingRate::rate)
    }

    pub fn closing_stat(&self, key: &ClosingKey) -> Option<ClosingRate> {
        self.closing_rates.get(key).copied()
    }

    /// Rough in-memory size in bytes.
    pub fn approx_bytes(&self) -> usize {
        let counts: usize = self.counts.keys().map(|k| k.0.len() + 32).sum();
        let degs: usize = self
            .deg_stats
            .iter()
            .map(|(k, m)| k.0.len() + 32 + m.len() * 24)
            .sum();
        let rates: usize = self
            .closing_rates
            .keys()
            .map(|k| k.prev.label.len() + k.close.label.len() + k.next.label.len() + 64)
            .sum();
        counts + degs + rates
    }
}

/// Builds a catalogue for the given patterns over `g`.
pub fn build_catalogue(g: &LabeledGraph, source: PatternSource<'_>, config: CatalogueConfig) -> Result<Catalogue> {
    if config.h < 2 {
        return Err(Error::Config(format!("h must be at least 2, got {}", config.h)));
    }
    let (patterns, demands, source_name) = match source {
        PatternSource::Workload(qs) => {
            let mut keys = BTreeSet::new();
            let mut demands = Vec::new();
            for q in qs {
                for s in connected_edge_sets(q, config.h) {
                    keys.insert(canonical_form(q, s)?.key);
                }
                if config.closing_rates {
                    demands.extend(closing_demands(q, config.h));
                }
            }
            (keys, demands, "workload")
        }
        PatternSource::Exhaustive => (exhaustive_patterns(g, config.h)?, Vec::new(), "exhaustive"),
    };

    let mut cat = Catalogue::empty(CatalogueMeta {
        h: config.h,
        graph_fingerprint: g.fingerprint(),
        graph_vertices: g.num_vertices(),
        graph_edges: g.num_edges(),
        seed: config.seed,
        walk_budget: config.walk_budget,
        source: source_name.to_string(),
    });

    let keys: Vec<PatternKey> = patterns.into_iter().collect();
    let stats = exec::map(&keys, |k| pattern_stats(g, k, config.deg_stats));
    for (k, st) in keys.into_iter().zip(stats) {
        let (n, degs) = st?;
        cat.counts.insert(k.clone(), n);
        if config.deg_stats {
            cat.deg_stats.insert(k, degs);
        }
    }

    let mut unique: BTreeMap<ClosingKey, Vec<WalkStep>> = BTreeMap::new();
    for d in demands {
        unique.entry(d.key).or_insert(d.steps);
    }
    let entries: Vec<(ClosingKey, Vec<WalkStep>)> = unique.into_iter().collect();
    let rates = exec::map(&entries, |(k, steps)| {
        measure_closing(g, k, steps, config.walk_budget, derive_seed(config.seed, &k.to_string()))
    });
    for ((k, _), r) in entries.into_iter().zip(rates) {
        let r = r?;
        let m = cat.closing_rates.entry(k.marginal()).or_default();
        m.samples += r.samples;
        m.closures += r.closures;
        cat.closing_rates.insert(k, r);
    }
    Ok(cat)
}

type PatternStats = (u64, BTreeMap<(VarSet, VarSet), u64>);

fn pattern_stats(g: &LabeledGraph, key: &PatternKey, with_degs: bool) -> Result<PatternStats> {
    let p = pattern_query(key)?;
    if !with_degs {
        return Ok((count_hom(g, &p), BTreeMap::new()));
    }
    let all = p.all_vars();
    let pairs: Vec<(VarSet, VarSet)> = all
        .subsets()
        .flat_map(|y| y.subsets().map(move |x| (x, y)))
        .collect();
    let degs = degree_table(g, &p, &pairs);
    let n = pairs
        .iter()
        .zip(&degs)
        .find(|(&(x, y), _)| x.is_empty() && y == all)
        .map(|(_, &d)| d)
        .expect("pair (∅, vars) requested");
    Ok((n, pairs.into_iter().zip(degs).collect()))
}

/// Stable per-key seed so rates do not depend on build order.
pub(crate) fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn closes(g: &LabeledGraph, key: &ClosingKey, walk: &[VertexId]) -> bool {
    let (first, last) = (walk[0], *walk.last().expect("non-empty walk"));
    g.relation(&key.close.label).contains(last, first)
}

/// Samples (or, with budget 0, enumerates) walks for `key` and counts closures.
pub fn measure_closing(
    g: &LabeledGraph,
    key: &ClosingKey,
    steps: &[WalkStep],
    budget: usize,
    seed: u64,
) -> Result<ClosingRate> {
    if budget > 0 {
        let s = sample_label_paths(g, steps, budget, seed);
        let closures = s.walks.iter().filter(|w| closes(g, key, w)).count() as u64;
        return Ok(ClosingRate {
            samples: s.attempts as u64,
            closures,
        });
    }
    let mut rate = ClosingRate::default();
    let mut walk = Vec::with_capacity(steps.len() + 1);
    let Some((first, rest)) = steps.split_first() else {
        return Ok(rate);
    };
    let label = first.label.as_deref().unwrap_or_default();
    let r = g.relation(label);
    for &(s, d) in r.tuples() {
        let (a, b) = if first.forward == Some(false) { (d, s) } else { (s, d) };
        walk.clear();
        walk.push(a);
        walk.push(b);
        enumerate_walks(g, key, rest, &mut walk, &mut rate)?;
    }
    Ok(rate)
}

fn enumerate_walks(
    g: &LabeledGraph,
    key: &ClosingKey,
    steps: &[WalkStep],
    walk: &mut Vec<VertexId>,
    rate: &mut ClosingRate,
) -> Result<()> {
    let Some((step, rest)) = steps.split_first() else {
        rate.samples += 1;
        if closes(g, key, walk) {
            rate.closures += 1;
        }
        if rate.samples > EXHAUSTIVE_WALK_LIMIT {
            return Err(Error::Config(format!(
                "more than {EXHAUSTIVE_WALK_LIMIT} walks for closing key {key}; use a sampling budget"
            )));
        }
        return Ok(());
    };
    let at = *walk.last().expect("non-empty walk");
    let label = step.label.as_deref().map(|l| g.label_id(l));
    if matches!(label, Some(None)) {
        return Ok(());
    }
    let label = label.flatten();
    for inc in g.incident(at) {
        if label.is_some_and(|l| inc.label != l) || step.forward.is_some_and(|f| inc.outgoing != f) {
            continue;
        }
        walk.push(inc.other);
        enumerate_walks(g, key, rest, walk, rate)?;
        walk.pop();
    }
    Ok(())
}

fn exhaustive_patterns(g: &LabeledGraph, h: usize) -> Result<BTreeSet<PatternKey>> {
    let labels = g.labels();
    let l = labels.len().max(1);
    // Each added edge picks a label, a direction and an attachment point.
    let mut estimate: usize = 1;
    for k in 1..=h {
        estimate = estimate.saturating_mul(l.saturating_mul(2 * (k + 1)));
    }
    if estimate > EXHAUSTIVE_PATTERN_LIMIT * 16 {
        return Err(Error::Config(format!(
            "exhaustive catalogue over {} labels with h={h} is too large; use a workload",
            labels.len()
        )));
    }
    let mut all = BTreeSet::new();
    let mut layer: BTreeSet<PatternKey> = BTreeSet::new();
    for label in labels {
        let q = QueryGraph::new(
            vec!["v0".into(), "v1".into()],
            vec![QEdge {
                src: 0,
                dst: 1,
                label: label.clone(),
            }],
        )?;
        layer.insert(canonical_key(&q)?);
    }
    all.extend(layer.iter().cloned());
    for _ in 1..h {
        let mut next = BTreeSet::new();
        for key in &layer {
            let p = pattern_query(key)?;
            let n = p.num_vars();
            for label in labels {
                let mut grow = |src: usize, dst: usize, vars: usize| -> Result<()> {
                    let mut edges = p.edges().to_vec();
                    edges.push(QEdge {
                        src,
                        dst,
                        label: label.clone(),
                    });
                    let names = (0..vars).map(|i| format!("v{i}")).collect();
                    if let Ok(q) = QueryGraph::new(names, edges) {
                        next.insert(canonical_key(&q)?);
                    }
                    Ok(())
                };
                for u in 0..n {
                    grow(u, n, n + 1)?;
                    grow(n, u, n + 1)?;
                    for v in 0..n {
                        if u != v {
                            grow(u, v, n)?;
                        }
                    }
                }
            }
        }
        if all.len() + next.len() > EXHAUSTIVE_PATTERN_LIMIT {
            return Err(Error::Config("exhaustive catalogue exceeds the pattern limit".into()));
        }
        all.extend(next.iter().cloned());
        layer = next;
    }
    Ok(all)
}
