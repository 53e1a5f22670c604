//! Exact match counting and random-walk sampling over a [`LabeledGraph`].
//!
//! Counting uses homomorphism semantics: distinct query variables may bind
//! the same vertex, so the count equals the size of the natural join of the
//! query's relations.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::VarSet;
use crate::error::{Error, Result};
use crate::exec;
use crate::graph::{LabeledGraph, Relation, VertexId};
use crate::query::QueryGraph;

pub type MatchCount = u64;

#[derive(Clone, Copy, Debug)]
enum Step<'g> {
    /// Bind both endpoints from the relation's tuple list.
    Scan { rel: Relation<'g>, src: usize, dst: usize },
    /// `from` is bound; bind `to` through the forward or reverse index.
    Extend { rel: Relation<'g>, from: usize, to: usize, forward: bool },
    /// Both endpoints bound; filter.
    Check { rel: Relation<'g>, src: usize, dst: usize },
}

/// Greedy connected matching order. Starts from the smallest relation and
/// prefers closing checks, then the smallest relation adjacent to the bound
/// prefix. Returns `None` if some relation is empty.
fn plan<'g>(g: &'g LabeledGraph, q: &QueryGraph) -> Option<Vec<Step<'g>>> {
    let rels: Vec<Relation<'g>> = q.edges().iter().map(|e| g.relation(&e.label)).collect();
    if rels.iter().any(Relation::is_empty) {
        return None;
    }
    let m = q.num_edges();
    let mut used = vec![false; m];
    let mut bound = VarSet::EMPTY;
    let mut steps = Vec::with_capacity(m);
    let first = (0..m).min_by_key(|&i| (rels[i].len(), i)).expect("non-empty query");
    let e = q.edge(first);
    steps.push(Step::Scan {
        rel: rels[first],
        src: e.src,
        dst: e.dst,
    });
    used[first] = true;
    bound = bound.with(e.src).with(e.dst);
    while steps.len() < m {
        let candidates = (0..m).filter(|&i| !used[i] && q.edge_vars(i).intersects(bound));
        let next = candidates
            .min_by_key(|&i| (!q.edge_vars(i).is_subset(bound), rels[i].len(), i))
            .expect("query is connected");
        let e = q.edge(next);
        let step = match (bound.contains(e.src), bound.contains(e.dst)) {
            (true, true) => Step::Check {
                rel: rels[next],
                src: e.src,
                dst: e.dst,
            },
            (true, false) => Step::Extend {
                rel: rels[next],
                from: e.src,
                to: e.dst,
                forward: true,
            },
            (false, true) => Step::Extend {
                rel: rels[next],
                from: e.dst,
                to: e.src,
                forward: false,
            },
            (false, false) => unreachable!("candidate shares a bound variable"),
        };
        steps.push(step);
        used[next] = true;
        bound = bound.with(e.src).with(e.dst);
    }
    Some(steps)
}

fn count_from(steps: &[Step<'_>], binding: &mut [VertexId]) -> u64 {
    let Some((step, rest)) = steps.split_first() else {
        return 1;
    };
    match *step {
        Step::Scan { .. } => unreachable!("scan is always the first step"),
        Step::Check { rel, src, dst } => {
            if rel.contains(binding[src], binding[dst]) {
                count_from(rest, binding)
            } else {
                0
            }
        }
        Step::Extend { rel, from, to, forward } => {
            let nbrs = if forward {
                rel.out_neighbors(binding[from])
            } else {
                rel.in_neighbors(binding[from])
            };
            if rest.is_empty() {
                return nbrs.len() as u64;
            }
            let mut total = 0;
            for &v in nbrs {
                binding[to] = v;
                total += count_from(rest, binding);
            }
            total
        }
    }
}

fn scan_parts<'g>(steps: &[Step<'g>]) -> (Relation<'g>, usize, usize) {
    match steps[0] {
        Step::Scan { rel, src, dst } => (rel, src, dst),
        _ => unreachable!("plan starts with a scan"),
    }
}

/// Exact number of homomorphic matches of `q` in `g`.
pub fn count_hom(g: &LabeledGraph, q: &QueryGraph) -> MatchCount {
    let Some(steps) = plan(g, q) else { return 0 };
    let (rel, src, dst) = scan_parts(&steps);
    let n = q.num_vars();
    exec::sum_u64(rel.tuples(), |&(s, d)| {
        if src == dst && s != d {
            return 0;
        }
        let mut binding = vec![0; n];
        binding[src] = s;
        binding[dst] = d;
        count_from(&steps[1..], &mut binding)
    })
}

fn exists_from(steps: &[Step<'_>], binding: &mut [VertexId]) -> bool {
    let Some((step, rest)) = steps.split_first() else {
        return true;
    };
    match *step {
        Step::Scan { .. } => unreachable!("scan is always the first step"),
        Step::Check { rel, src, dst } => rel.contains(binding[src], binding[dst]) && exists_from(rest, binding),
        Step::Extend { rel, from, to, forward } => {
            let nbrs = if forward {
                rel.out_neighbors(binding[from])
            } else {
                rel.in_neighbors(binding[from])
            };
            nbrs.iter().any(|&v| {
                binding[to] = v;
                exists_from(rest, binding)
            })
        }
    }
}

/// Whether `q` has at least one match; stops at the first one.
pub fn has_match(g: &LabeledGraph, q: &QueryGraph) -> bool {
    let Some(steps) = plan(g, q) else { return false };
    let (rel, src, dst) = scan_parts(&steps);
    let mut binding = vec![0; q.num_vars()];
    rel.tuples().iter().any(|&(s, d)| {
        if src == dst && s != d {
            return false;
        }
        binding[src] = s;
        binding[dst] = d;
        exists_from(&steps[1..], &mut binding)
    })
}

fn visit_from<F: FnMut(&[VertexId])>(steps: &[Step<'_>], binding: &mut [VertexId], f: &mut F) {
    let Some((step, rest)) = steps.split_first() else {
        f(binding);
        return;
    };
    match *step {
        Step::Scan { .. } => unreachable!("scan is always the first step"),
        Step::Check { rel, src, dst } => {
            if rel.contains(binding[src], binding[dst]) {
                visit_from(rest, binding, f);
            }
        }
        Step::Extend { rel, from, to, forward } => {
            let nbrs = if forward {
                rel.out_neighbors(binding[from])
            } else {
                rel.in_neighbors(binding[from])
            };
            for &v in nbrs {
                binding[to] = v;
                visit_from(rest, binding, f);
            }
        }
    }
}

/// Calls `f` once per match with the binding indexed by query variable.
pub fn for_each_match<F: FnMut(&[VertexId])>(g: &LabeledGraph, q: &QueryGraph, mut f: F) {
    let Some(steps) = plan(g, q) else { return };
    let (rel, src, dst) = scan_parts(&steps);
    let mut binding = vec![0; q.num_vars()];
    for &(s, d) in rel.tuples() {
        if src == dst && s != d {
            continue;
        }
        binding[src] = s;
        binding[dst] = d;
        visit_from(&steps[1..], &mut binding, &mut f);
    }
}

fn project(binding: &[VertexId], vars: VarSet) -> Vec<VertexId> {
    vars.iter().map(|v| binding[v]).collect()
}

/// `deg(X, Y, Q)`: the largest number of distinct `Y`-bindings sharing one
/// `X`-binding, over all matches of `q`. Zero when `q` has no match.
pub fn group_degree(g: &LabeledGraph, q: &QueryGraph, x: VarSet, y: VarSet) -> Result<u64> {
    if !x.is_subset(y) || !y.is_subset(q.all_vars()) {
        return Err(Error::Validation(format!(
            "group_degree needs X ⊆ Y ⊆ vars, got X={x:?} Y={y:?}"
        )));
    }
    Ok(*degree_table(g, q, &[(x, y)]).first().expect("one request"))
}

/// Computes `deg(X, Y, q)` for every requested pair with one pass over the
/// matches. Pairs must satisfy `X ⊆ Y ⊆ vars(q)`.
pub fn degree_table(g: &LabeledGraph, q: &QueryGraph, pairs: &[(VarSet, VarSet)]) -> Vec<u64> {
    let all = q.all_vars();
    // Distinct projections are only needed for strict subsets of the variables;
    // projections onto all variables are the matches themselves.
    let mut partial: Vec<VarSet> = pairs
        .iter()
        .map(|&(_, y)| y)
        .filter(|&y| y != all && !y.is_empty())
        .collect();
    partial.sort();
    partial.dedup();
    let mut full_x: Vec<VarSet> = pairs
        .iter()
        .filter(|&&(_, y)| y == all)
        .map(|&(x, _)| x)
        .collect();
    full_x.sort();
    full_x.dedup();

    let mut projections: Vec<HashSet<Vec<VertexId>>> = vec![HashSet::new(); partial.len()];
    let mut per_x: Vec<HashMap<Vec<VertexId>, u64>> = vec![HashMap::new(); full_x.len()];
    let mut any = false;
    for_each_match(g, q, |b| {
        any = true;
        for (set, &y) in projections.iter_mut().zip(&partial) {
            set.insert(project(b, y));
        }
        for (map, &x) in per_x.iter_mut().zip(&full_x) {
            *map.entry(project(b, x)).or_default() += 1;
        }
    });

    pairs
        .iter()
        .map(|&(x, y)| {
            if !any {
                0
            } else if y.is_empty() {
                1
            } else if y == all {
                let i = full_x.binary_search(&x).expect("collected");
                per_x[i].values().copied().max().unwrap_or(0)
            } else {
                let i = partial.binary_search(&y).expect("collected");
                max_group(&projections[i], y, x)
            }
        })
        .collect()
}

fn max_group(tuples: &HashSet<Vec<VertexId>>, y: VarSet, x: VarSet) -> u64 {
    // Positions of X's variables inside a Y-tuple.
    let pos: Vec<usize> = y
        .iter()
        .enumerate()
        .filter(|&(_, v)| x.contains(v))
        .map(|(i, _)| i)
        .collect();
    let mut groups: HashMap<Vec<VertexId>, u64> = HashMap::new();
    for t in tuples {
        let key: Vec<VertexId> = pos.iter().map(|&i| t[i]).collect();
        *groups.entry(key).or_default() += 1;
    }
    groups.values().copied().max().unwrap_or(0)
}

/// One step of a label walk. `None` fields match anything.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WalkStep {
    pub label: Option<String>,
    /// `Some(true)` walks along the edge direction, `Some(false)` against it.
    pub forward: Option<bool>,
}

impl WalkStep {
    pub fn new(label: &str, forward: bool) -> Self {
        WalkStep {
            label: Some(label.to_string()),
            forward: Some(forward),
        }
    }

    pub fn any() -> Self {
        WalkStep {
            label: None,
            forward: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WalkSample {
    /// Completed walks as vertex sequences of length `steps + 1`.
    pub walks: Vec<Vec<VertexId>>,
    /// Attempts made, including dead ends.
    pub attempts: usize,
}

/// Samples `p` random walks realizing `steps`.
///
/// Each attempt picks a uniformly random data edge (with orientation)
/// matching the first step, then at every later step moves along a
/// uniformly chosen incident edge matching that step. An attempt that finds
/// no matching continuation is a dead end: it counts toward `attempts` but
/// yields no walk. If nothing matches the first step, no attempt is made.
pub fn sample_label_paths(g: &LabeledGraph, steps: &[WalkStep], p: usize, seed: u64) -> WalkSample {
    let Some((first, rest)) = steps.split_first() else {
        return WalkSample::default();
    };
    let starts = start_candidates(g, first);
    if starts.is_empty() {
        return WalkSample::default();
    }
    let resolved: Vec<(Option<crate::graph::LabelId>, Option<bool>, bool)> = rest
        .iter()
        .map(|s| {
            let id = s.label.as_deref().map(|l| g.label_id(l));
            // An unknown label can never match.
            (id.flatten(), s.forward, matches!(id, Some(None)))
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut walks = Vec::with_capacity(p);
    let mut buf = Vec::new();
    'attempt: for _ in 0..p {
        let &(a, b) = starts.choose(&mut rng).expect("non-empty");
        let mut walk = Vec::with_capacity(steps.len() + 1);
        walk.push(a);
        walk.push(b);
        for &(label, forward, impossible) in &resolved {
            if impossible {
                continue 'attempt;
            }
            let at = *walk.last().expect("non-empty walk");
            buf.clear();
            buf.extend(
                g.incident(at)
                    .iter()
                    .filter(|inc| label.is_none_or(|l| inc.label == l))
                    .filter(|inc| forward.is_none_or(|f| inc.outgoing == f))
                    .map(|inc| inc.other),
            );
            if buf.is_empty() {
                continue 'attempt;
            }
            walk.push(buf[rng.gen_range(0..buf.len())]);
        }
        walks.push(walk);
    }
    WalkSample { walks, attempts: p }
}

/// Oriented edges `(from, to)` matching a walk step.
fn start_candidates(g: &LabeledGraph, step: &WalkStep) -> Vec<(VertexId, VertexId)> {
    let labels: Vec<&str> = match &step.label {
        Some(l) => vec![l.as_str()],
        None => g.labels().iter().map(String::as_str).collect(),
    };
    let mut out = Vec::new();
    for l in labels {
        let r = g.relation(l);
        if step.forward != Some(false) {
            out.extend_from_slice(r.tuples());
        }
        if step.forward != Some(true) {
            out.extend(r.tuples().iter().map(|&(s, d)| (d, s)));
        }
    }
    out
}
