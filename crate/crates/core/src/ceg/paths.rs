//! Path algorithms over a CEG: enumeration, minimum-weight paths, and exact
//! per-hop-count aggregates computed without enumerating.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{to_big, Ceg, PathEstimate};
use crate::error::{Error, Result};

pub const DEFAULT_PATH_CAP: usize = 1_000_000;

/// Largest number of distinct partial estimates tracked per vertex by
/// [`pstar_path`].
const DISTINCT_VALUE_CAP: usize = 200_000;

/// Topological order of the vertices, or `None` if the graph has a cycle.
pub(crate) fn topo_order(ceg: &Ceg) -> Option<Vec<usize>> {
    let n = ceg.num_vertices();
    let mut indeg = vec![0usize; n];
    for e in &ceg.edges {
        indeg[e.to] += 1;
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&v| indeg[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for &e in &ceg.out[v] {
            let t = ceg.edges[e].to;
            indeg[t] -= 1;
            if indeg[t] == 0 {
                ready.push(Reverse(t));
            }
        }
    }
    (order.len() == n).then_some(order)
}

fn require_dag(ceg: &Ceg) -> Result<Vec<usize>> {
    topo_order(ceg).ok_or_else(|| Error::Validation(format!("CEG_{} has a cycle; path enumeration needs a DAG", ceg.kind)))
}

/// Vertices from which `top` is reachable.
pub(crate) fn reaches_top(ceg: &Ceg) -> Vec<bool> {
    let n = ceg.num_vertices();
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &ceg.edges {
        rev[e.to].push(e.from);
    }
    let mut seen = vec![false; n];
    seen[ceg.top] = true;
    let mut queue = VecDeque::from([ceg.top]);
    while let Some(v) = queue.pop_front() {
        for &u in &rev[v] {
            if !seen[u] {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    seen
}

fn reachable_from_bottom(ceg: &Ceg) -> Vec<bool> {
    let mut seen = vec![false; ceg.num_vertices()];
    seen[ceg.bottom] = true;
    let mut queue = VecDeque::from([ceg.bottom]);
    while let Some(v) = queue.pop_front() {
        for &e in &ceg.out[v] {
            let t = ceg.edges[e].to;
            if !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    seen
}

fn unreachable(ceg: &Ceg) -> Error {
    Error::Unreachable(format!("no bottom-to-top path in CEG_{}; statistics are missing", ceg.kind))
}

/// The first bottom-to-top path in out-edge order.
pub fn first_path(ceg: &Ceg) -> Result<PathEstimate> {
    require_dag(ceg)?;
    let live = reaches_top(ceg);
    if !live[ceg.bottom] {
        return Err(unreachable(ceg));
    }
    let mut edges = Vec::new();
    let mut v = ceg.bottom;
    while v != ceg.top {
        let e = *ceg.out[v]
            .iter()
            .find(|&&e| live[ceg.edges[e].to])
            .expect("live vertex has a live successor");
        edges.push(e);
        v = ceg.edges[e].to;
    }
    Ok(PathEstimate::from_edges(ceg, edges))
}

/// Number of bottom-to-top paths (saturating).
pub fn path_count(ceg: &Ceg) -> Result<u128> {
    let order = require_dag(ceg)?;
    let mut ways = vec![0u128; ceg.num_vertices()];
    ways[ceg.top] = 1;
    for &v in order.iter().rev() {
        if v == ceg.top {
            continue;
        }
        ways[v] = ceg.out[v]
            .iter()
            .fold(0u128, |acc, &e| acc.saturating_add(ways[ceg.edges[e].to]));
    }
    Ok(ways[ceg.bottom])
}

/// Calls `f` with the edge list of every bottom-to-top path, in
/// depth-first order over each vertex's out-edges. Needs a DAG.
pub fn for_each_path<F: FnMut(&[usize])>(ceg: &Ceg, mut f: F) -> Result<()> {
    require_dag(ceg)?;
    let live = reaches_top(ceg);
    if !live[ceg.bottom] {
        return Ok(());
    }
    let mut stack: Vec<(usize, usize)> = vec![(ceg.bottom, 0)];
    let mut path: Vec<usize> = Vec::new();
    while let Some(&mut (v, ref mut next)) = stack.last_mut() {
        if v == ceg.top {
            f(&path);
            stack.pop();
            path.pop();
            continue;
        }
        match ceg.out[v][*next..].iter().position(|&e| live[ceg.edges[e].to]) {
            Some(off) => {
                let e = ceg.out[v][*next + off];
                *next += off + 1;
                path.push(e);
                stack.push((ceg.edges[e].to, 0));
            }
            None => {
                stack.pop();
                path.pop();
            }
        }
    }
    Ok(())
}

/// All bottom-to-top paths with their estimates; fails if there are more
/// than `cap`.
pub fn enumerate_paths_capped(ceg: &Ceg, cap: usize) -> Result<Vec<PathEstimate>> {
    if path_count(ceg)? > cap as u128 {
        return Err(Error::EnumerationOverflow { cap });
    }
    let mut out = Vec::new();
    for_each_path(ceg, |p| out.push(PathEstimate::from_edges(ceg, p.to_vec())))?;
    Ok(out)
}

/// [`enumerate_paths_capped`] with the default cap of 10^6 paths.
pub fn enumerate_paths(ceg: &Ceg) -> Result<Vec<PathEstimate>> {
    enumerate_paths_capped(ceg, DEFAULT_PATH_CAP)
}

type Best = Option<(BigRational, usize)>;

fn better(a: &(BigRational, usize), b: &Best) -> bool {
    match b {
        None => true,
        Some(b) => (&a.0, a.1) < (&b.0, b.1),
    }
}

/// A minimum-weight bottom-to-top path. Ties go to fewer hops, then to the
/// lexicographically smallest vertex sequence. DAGs are solved by dynamic
/// programming for any non-negative rates. Graphs with cycles (CEG_M with
/// projection edges) need rates that are 0 or at least 1: a path through a
/// zero-rate edge wins outright, otherwise Dijkstra runs on exact products.
pub fn min_weight_path(ceg: &Ceg) -> Result<PathEstimate> {
    let live = reaches_top(ceg);
    if !live[ceg.bottom] {
        return Err(unreachable(ceg));
    }
    let best = match topo_order(ceg) {
        Some(order) => dag_best(ceg, &order),
        None => {
            let from_bottom = reachable_from_bottom(ceg);
            let zero_on_path = ceg
                .edges
                .iter()
                .any(|e| e.rate.is_zero() && from_bottom[e.from] && live[e.to]);
            if zero_on_path {
                return Ok(zero_path(ceg));
            }
            if let Some(e) = ceg.edges.iter().find(|e| e.rate < num_rational::Ratio::one()) {
                return Err(Error::Validation(format!(
                    "rate {} below 1 in a cyclic CEG; minimum paths need rates of at least 1",
                    e.rate
                )));
            }
            dijkstra_best(ceg)
        }
    };
    Ok(follow_tight(ceg, &best))
}

/// Backward DP: for each vertex, the least (product, hops) to the top.
fn dag_best(ceg: &Ceg, order: &[usize]) -> Vec<Best> {
    let mut best: Vec<Best> = vec![None; ceg.num_vertices()];
    best[ceg.top] = Some((BigRational::one(), 0));
    for &v in order.iter().rev() {
        if v == ceg.top {
            continue;
        }
        for &e in &ceg.out[v] {
            let ed = &ceg.edges[e];
            if let Some((w, h)) = &best[ed.to] {
                let cand = (to_big(ed.rate) * w, h + 1);
                if better(&cand, &best[v]) {
                    best[v] = Some(cand);
                }
            }
        }
    }
    best
}

/// Dijkstra from the top over reversed edges; rates are at least 1, so
/// (product, hops) only grows along a path.
fn dijkstra_best(ceg: &Ceg) -> Vec<Best> {
    let n = ceg.num_vertices();
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in ceg.edges.iter().enumerate() {
        rev[e.to].push(i);
    }
    let mut best: Vec<Best> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    best[ceg.top] = Some((BigRational::one(), 0));
    heap.push(Reverse((BigRational::one(), 0usize, ceg.top)));
    while let Some(Reverse((w, h, v))) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        for &e in &rev[v] {
            let ed = &ceg.edges[e];
            if done[ed.from] {
                continue;
            }
            let cand = (to_big(ed.rate) * &w, h + 1);
            if better(&cand, &best[ed.from]) {
                best[ed.from] = Some(cand.clone());
                heap.push(Reverse((cand.0, cand.1, ed.from)));
            }
        }
    }
    best
}

/// Walks forward from the bottom along edges that keep (product, hops)
/// optimal, always stepping to the smallest next vertex.
fn follow_tight(ceg: &Ceg, best: &[Best]) -> PathEstimate {
    let mut edges = Vec::new();
    let mut v = ceg.bottom;
    while v != ceg.top {
        let (w, h) = best[v].clone().expect("bottom reaches top");
        let step = ceg.out[v]
            .iter()
            .copied()
            .filter(|&e| {
                let ed = &ceg.edges[e];
                match &best[ed.to] {
                    Some((wt, ht)) => ht + 1 == h && to_big(ed.rate) * wt == w,
                    None => false,
                }
            })
            .min_by_key(|&e| (ceg.edges[e].to, e))
            .expect("an optimal successor exists");
        edges.push(step);
        v = ceg.edges[step].to;
    }
    PathEstimate::from_edges(ceg, edges)
}

/// Fewest-hop path that uses at least one zero-rate edge, smallest vertex
/// sequence among those.
fn zero_path(ceg: &Ceg) -> PathEstimate {
    let n = ceg.num_vertices();
    // State (v, used_zero) is encoded as 2v + used_zero.
    let mut rev: Vec<Vec<(usize, usize)>> = vec![Vec::new(); 2 * n];
    for (i, e) in ceg.edges.iter().enumerate() {
        for used in 0..2 {
            let next = if e.rate.is_zero() { 1 } else { used };
            rev[2 * e.to + next].push((2 * e.from + used, i));
        }
    }
    let mut dist = vec![usize::MAX; 2 * n];
    let goal = 2 * ceg.top + 1;
    dist[goal] = 0;
    let mut queue = VecDeque::from([goal]);
    while let Some(s) = queue.pop_front() {
        for &(p, _) in &rev[s] {
            if dist[p] == usize::MAX {
                dist[p] = dist[s] + 1;
                queue.push_back(p);
            }
        }
    }
    let mut edges = Vec::new();
    let mut s = 2 * ceg.bottom;
    while s != goal {
        let v = s / 2;
        let used = s % 2;
        let step = ceg.out[v]
            .iter()
            .copied()
            .filter(|&e| {
                let ed = &ceg.edges[e];
                let t = 2 * ed.to + if ed.rate.is_zero() { 1 } else { used };
                dist[t] != usize::MAX && dist[t] + 1 == dist[s]
            })
            .min_by_key(|&e| (ceg.edges[e].to, e))
            .expect("a zero path exists");
        let ed = &ceg.edges[step];
        s = 2 * ed.to + if ed.rate.is_zero() { 1 } else { used };
        edges.push(step);
    }
    PathEstimate::from_edges(ceg, edges)
}

/// Aggregates over all bottom-to-top paths with a given hop count.
#[derive(Clone, Debug, PartialEq)]
pub struct HopStats {
    pub count: u128,
    pub sum: BigRational,
    pub min: BigRational,
    pub max: BigRational,
    /// Sum of log2 estimates, for the geometric mean; `None` once a zero
    /// estimate is seen.
    pub log_sum: Option<f64>,
    min_back: Option<usize>,
    max_back: Option<usize>,
}

impl HopStats {
    fn seed() -> Self {
        HopStats {
            count: 1,
            sum: BigRational::one(),
            min: BigRational::one(),
            max: BigRational::one(),
            log_sum: Some(0.0),
            min_back: None,
            max_back: None,
        }
    }

    fn absorb(&mut self, rate: &BigRational, log_rate: f64, prev: &HopStats, edge: usize) {
        self.count = self.count.saturating_add(prev.count);
        self.sum += rate * &prev.sum;
        let lo = rate * &prev.min;
        if lo < self.min {
            self.min = lo;
            self.min_back = Some(edge);
        }
        let hi = rate * &prev.max;
        if hi > self.max {
            self.max = hi;
            self.max_back = Some(edge);
        }
        self.log_sum = match (self.log_sum, prev.log_sum) {
            (Some(a), Some(b)) if log_rate.is_finite() => Some(a + b + log_rate * prev.count as f64),
            _ => None,
        };
    }

    fn first(rate: &BigRational, log_rate: f64, prev: &HopStats, edge: usize) -> Self {
        HopStats {
            count: prev.count,
            sum: rate * &prev.sum,
            min: rate * &prev.min,
            max: rate * &prev.max,
            log_sum: prev
                .log_sum
                .filter(|_| log_rate.is_finite())
                .map(|b| b + log_rate * prev.count as f64),
            min_back: Some(edge),
            max_back: Some(edge),
        }
    }

    pub fn mean(&self) -> BigRational {
        &self.sum / BigRational::from_integer((self.count as i128).into())
    }
}

/// Per-hop-count path aggregates at the top vertex, with back pointers to
/// recover the minimum and maximum paths.
#[derive(Clone, Debug)]
pub struct PathStats {
    per_vertex: Vec<BTreeMap<usize, HopStats>>,
    top: usize,
}

impl PathStats {
    /// Aggregates at the top, keyed by hop count.
    pub fn at_top(&self) -> &BTreeMap<usize, HopStats> {
        &self.per_vertex[self.top]
    }

    pub fn total_paths(&self) -> u128 {
        self.at_top().values().fold(0u128, |a, s| a.saturating_add(s.count))
    }

    fn trace(&self, ceg: &Ceg, hops: usize, use_max: bool) -> PathEstimate {
        let mut edges = Vec::with_capacity(hops);
        let mut v = self.top;
        let mut h = hops;
        while h > 0 {
            let st = &self.per_vertex[v][&h];
            let e = if use_max { st.max_back } else { st.min_back }.expect("non-bottom entry has a back edge");
            edges.push(e);
            v = ceg.edges[e].from;
            h -= 1;
        }
        edges.reverse();
        PathEstimate::from_edges(ceg, edges)
    }

    /// The smallest-estimate path with exactly `hops` edges.
    pub fn min_path(&self, ceg: &Ceg, hops: usize) -> PathEstimate {
        self.trace(ceg, hops, false)
    }

    /// The largest-estimate path with exactly `hops` edges.
    pub fn max_path(&self, ceg: &Ceg, hops: usize) -> PathEstimate {
        self.trace(ceg, hops, true)
    }
}

/// Exact count, sum, minimum and maximum of path estimates per hop count,
/// by dynamic programming over a DAG.
pub fn path_stats(ceg: &Ceg) -> Result<PathStats> {
    let order = require_dag(ceg)?;
    let live = reaches_top(ceg);
    if !live[ceg.bottom] {
        return Err(unreachable(ceg));
    }
    let mut per_vertex: Vec<BTreeMap<usize, HopStats>> = vec![BTreeMap::new(); ceg.num_vertices()];
    per_vertex[ceg.bottom].insert(0, HopStats::seed());
    for &v in &order {
        if per_vertex[v].is_empty() || v == ceg.top {
            continue;
        }
        let here = std::mem::take(&mut per_vertex[v]);
        for &e in &ceg.out[v] {
            let ed = &ceg.edges[e];
            if !live[ed.to] {
                continue;
            }
            let rate = to_big(ed.rate);
            for (&h, st) in &here {
                match per_vertex[ed.to].get_mut(&(h + 1)) {
                    Some(slot) => slot.absorb(&rate, ed.log_weight, st, e),
                    None => {
                        per_vertex[ed.to].insert(h + 1, HopStats::first(&rate, ed.log_weight, st, e));
                    }
                }
            }
        }
        per_vertex[v] = here;
    }
    Ok(PathStats {
        per_vertex,
        top: ceg.top,
    })
}

/// `max(c/e, e/c)`, with `e = 0` treated as infinitely bad. With `c = 0`
/// the smaller estimate is closer.
fn qerror_cmp(a: &BigRational, b: &BigRational, c: &BigRational) -> Ordering {
    if c.is_zero() {
        return a.cmp(b);
    }
    let q = |e: &BigRational| -> Option<BigRational> {
        if e.is_zero() {
            None
        } else if e >= c {
            Some(e / c)
        } else {
            Some(c / e)
        }
    };
    match (q(a), q(b)) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Greater,
        (Some(_), None) => Ordering::Less,
        (Some(x), Some(y)) => x.cmp(&y),
    }
}

/// The path whose estimate is closest to `true_count` in q-error; ties go
/// to the smaller estimate. Tracks the distinct partial estimates at each
/// vertex rather than enumerating paths.
pub fn pstar_path(ceg: &Ceg, true_count: u64) -> Result<PathEstimate> {
    let order = require_dag(ceg)?;
    let live = reaches_top(ceg);
    if !live[ceg.bottom] {
        return Err(unreachable(ceg));
    }
    // value -> (edge into this vertex, value at its source)
    type Back = BTreeMap<BigRational, Option<(usize, BigRational)>>;
    let mut values: Vec<Back> = vec![BTreeMap::new(); ceg.num_vertices()];
    values[ceg.bottom].insert(BigRational::one(), None);
    for &v in &order {
        if values[v].is_empty() || v == ceg.top {
            continue;
        }
        let here: Vec<BigRational> = values[v].keys().cloned().collect();
        for &e in &ceg.out[v] {
            let ed = &ceg.edges[e];
            if !live[ed.to] {
                continue;
            }
            let rate = to_big(ed.rate);
            for x in &here {
                values[ed.to].entry(&rate * x).or_insert_with(|| Some((e, x.clone())));
            }
            if values[ed.to].len() > DISTINCT_VALUE_CAP {
                return Err(Error::EnumerationOverflow { cap: DISTINCT_VALUE_CAP });
            }
        }
    }
    let c = BigRational::from_integer(true_count.into());
    let best = values[ceg.top]
        .keys()
        .min_by(|a, b| qerror_cmp(a, b, &c).then_with(|| a.cmp(b)))
        .cloned()
        .expect("top is reachable");
    let mut edges = Vec::new();
    let mut v = ceg.top;
    let mut x = best;
    while let Some(Some((e, prev))) = values[v].get(&x).cloned() {
        edges.push(e);
        v = ceg.edges[e].from;
        x = prev;
    }
    edges.reverse();
    Ok(PathEstimate::from_edges(ceg, edges))
}
