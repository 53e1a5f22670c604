//! Conjunctive queries over binary relations, written as query graphs.
//!
//! A query `A(a1, a2) ⋈ B(a2, a3)` is the graph `a1 -A-> a2 -B-> a3`. Query
//! edges are indexed `0..m` in file order and variables `0..n` in order of
//! first appearance. Two query edges are adjacent when they share a variable.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};

use crate::bits::{EdgeSet, VarSet};
use crate::error::{Error, Result};
use crate::graph::validate_label;

/// Label placeholder for template edges that still need a label.
pub const WILDCARD_LABEL: &str = "?";

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QEdge {
    pub src: usize,
    pub dst: usize,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QueryGraph {
    vars: Vec<String>,
    edges: Vec<QEdge>,
}

impl QueryGraph {
    /// Builds and validates a query: non-empty, connected, no repeated edge.
    pub fn new(vars: Vec<String>, edges: Vec<QEdge>) -> Result<Self> {
        let q = QueryGraph { vars, edges };
        q.validate()?;
        Ok(q)
    }

    /// Builds a query from `(src, dst, label)` triples over named variables.
    pub fn from_triples<S: AsRef<str>>(triples: &[(S, S, S)]) -> Result<Self> {
        let mut vars: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut var = |name: &str| -> usize {
            if let Some(&i) = index.get(name) {
                return i;
            }
            vars.push(name.to_string());
            index.insert(name.to_string(), vars.len() - 1);
            vars.len() - 1
        };
        let mut edges = Vec::with_capacity(triples.len());
        for (s, d, l) in triples {
            let src = var(s.as_ref());
            let dst = var(d.as_ref());
            edges.push(QEdge {
                src,
                dst,
                label: l.as_ref().to_string(),
            });
        }
        QueryGraph::new(vars, edges)
    }

    fn validate(&self) -> Result<()> {
        if self.edges.is_empty() {
            return Err(Error::Validation("query has no edges".into()));
        }
        if self.edges.len() > EdgeSet::CAPACITY {
            return Err(Error::Validation(format!(
                "query has {} edges; at most {} supported",
                self.edges.len(),
                EdgeSet::CAPACITY
            )));
        }
        if self.vars.len() > VarSet::CAPACITY {
            return Err(Error::Validation(format!(
                "query has {} variables; at most {} supported",
                self.vars.len(),
                VarSet::CAPACITY
            )));
        }
        let mut names = HashSet::new();
        for v in &self.vars {
            if !names.insert(v) {
                return Err(Error::Validation(format!("duplicate variable {v}")));
            }
        }
        let mut seen = HashSet::new();
        for e in &self.edges {
            if e.src >= self.vars.len() || e.dst >= self.vars.len() {
                return Err(Error::Validation("edge refers to unknown variable".into()));
            }
            if !seen.insert(e) {
                return Err(Error::Validation(format!(
                    "duplicate query edge {} -{}-> {}",
                    self.vars[e.src], e.label, self.vars[e.dst]
                )));
            }
        }
        let used = self
            .edges
            .iter()
            .fold(VarSet::EMPTY, |s, e| s.with(e.src).with(e.dst));
        if used.len() != self.vars.len() {
            return Err(Error::Validation("variable not used by any edge".into()));
        }
        if !self.is_connected(self.all_edges()) {
            return Err(Error::Validation("query is disconnected".into()));
        }
        Ok(())
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn edges(&self) -> &[QEdge] {
        &self.edges
    }

    pub fn edge(&self, i: usize) -> &QEdge {
        &self.edges[i]
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn all_edges(&self) -> EdgeSet {
        EdgeSet::full(self.edges.len())
    }

    pub fn all_vars(&self) -> VarSet {
        VarSet::full(self.vars.len())
    }

    pub fn edge_vars(&self, i: usize) -> VarSet {
        let e = &self.edges[i];
        VarSet::singleton(e.src).with(e.dst)
    }

    /// Variables touched by the edges in `set`.
    pub fn vars_of(&self, set: EdgeSet) -> VarSet {
        set.iter()
            .fold(VarSet::EMPTY, |acc, i| acc.union(self.edge_vars(i)))
    }

    /// Edges adjacent to edge `i` (sharing a variable), excluding `i`.
    pub fn neighbors(&self, i: usize) -> EdgeSet {
        let vi = self.edge_vars(i);
        (0..self.edges.len())
            .filter(|&j| j != i && self.edge_vars(j).intersects(vi))
            .fold(EdgeSet::EMPTY, EdgeSet::with)
    }

    /// Whether `set` is non-empty and connected through shared variables.
    pub fn is_connected(&self, set: EdgeSet) -> bool {
        let Some(start) = set.first() else {
            return false;
        };
        let mut reached = EdgeSet::singleton(start);
        let mut frontier_vars = self.edge_vars(start);
        loop {
            let grow = set
                .minus(reached)
                .iter()
                .filter(|&j| self.edge_vars(j).intersects(frontier_vars))
                .fold(EdgeSet::EMPTY, EdgeSet::with);
            if grow.is_empty() {
                break;
            }
            reached = reached.union(grow);
            frontier_vars = frontier_vars.union(self.vars_of(grow));
        }
        reached == set
    }

    /// The induced sub-query on `set`, keeping variable names and the
    /// relative order of edges and variables.
    pub fn induced(&self, set: EdgeSet) -> Result<QueryGraph> {
        let vars_set = self.vars_of(set);
        let remap: HashMap<usize, usize> = vars_set
            .iter()
            .enumerate()
            .map(|(new, old)| (old, new))
            .collect();
        let vars = vars_set.iter().map(|v| self.vars[v].clone()).collect();
        let edges = set
            .iter()
            .map(|i| {
                let e = &self.edges[i];
                QEdge {
                    src: remap[&e.src],
                    dst: remap[&e.dst],
                    label: e.label.clone(),
                }
            })
            .collect();
        QueryGraph::new(vars, edges)
    }

    /// Same shape with every label replaced by `f(edge index, old label)`.
    pub fn relabel<F: FnMut(usize, &str) -> String>(&self, mut f: F) -> QueryGraph {
        QueryGraph {
            vars: self.vars.clone(),
            edges: self
                .edges
                .iter()
                .enumerate()
                .map(|(i, e)| QEdge {
                    src: e.src,
                    dst: e.dst,
                    label: f(i, &e.label),
                })
                .collect(),
        }
    }

    /// Text in the query-file format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.edges {
            let _ = writeln!(s, "{} -{}-> {}", self.vars[e.src], e.label, self.vars[e.dst]);
        }
        s
    }
}

impl fmt::Display for QueryGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .edges
            .iter()
            .map(|e| format!("{}-{}->{}", self.vars[e.src], e.label, self.vars[e.dst]))
            .collect();
        f.write_str(&parts.join(", "))
    }
}

fn parse_edge_line(line: &str, lineno: usize, allow_wildcard: bool) -> Result<(String, String, String)> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    let [src, arrow, dst] = toks[..] else {
        return Err(Error::parse(lineno, format!("expected `aX -label-> aY`, got {line:?}")));
    };
    let label = arrow
        .strip_prefix('-')
        .and_then(|a| a.strip_suffix("->"))
        .ok_or_else(|| Error::parse(lineno, format!("malformed edge arrow {arrow:?}")))?;
    if !(allow_wildcard && label == WILDCARD_LABEL) {
        validate_label(label).map_err(|m| Error::parse(lineno, m))?;
    }
    Ok((src.to_string(), dst.to_string(), label.to_string()))
}

fn parse_edges(text: &str, allow_wildcard: bool) -> Result<QueryGraph> {
    let mut triples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        triples.push(parse_edge_line(t, i + 1, allow_wildcard)?);
    }
    QueryGraph::from_triples(&triples)
}

/// Parses a query file: one `aX -label-> aY` edge per line, `#` comments.
pub fn parse_query(text: &str) -> Result<QueryGraph> {
    parse_edges(text, false)
}

/// Parses a template: like a query, but `?` marks an edge awaiting a label.
pub fn parse_template(text: &str) -> Result<QueryGraph> {
    parse_edges(text, true)
}

/// A named query inside a workload or template file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedQuery {
    pub id: String,
    pub template: String,
    pub query: QueryGraph,
}

fn parse_blocks(text: &str, header: &str, allow_wildcard: bool) -> Result<Vec<NamedQuery>> {
    let mut out = Vec::new();
    let mut current: Option<(String, String, String)> = None;
    let flush = |cur: Option<(String, String, String)>, out: &mut Vec<NamedQuery>| -> Result<()> {
        if let Some((id, template, body)) = cur {
            let query = parse_edges(&body, allow_wildcard)
                .map_err(|e| Error::Validation(format!("{header} {id}: {e}")))?;
            out.push(NamedQuery { id, template, query });
        }
        Ok(())
    };
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut toks = t.split_whitespace();
        if toks.next() == Some(header) {
            let id = toks
                .next()
                .ok_or_else(|| Error::parse(i + 1, format!("`{header}` needs a name")))?
                .to_string();
            let template = toks.next().unwrap_or(&id).to_string();
            flush(current.take(), &mut out)?;
            current = Some((id, template, String::new()));
        } else {
            let Some((_, _, body)) = current.as_mut() else {
                return Err(Error::parse(i + 1, format!("edge before any `{header}` header")));
            };
            // Keep line numbers meaningful for errors inside the block.
            parse_edge_line(t, i + 1, allow_wildcard)?;
            body.push_str(t);
            body.push('\n');
        }
    }
    flush(current, &mut out)?;
    Ok(out)
}

/// Parses a workload file: blocks headed by `query <id> [template]`.
pub fn parse_workload(text: &str) -> Result<Vec<NamedQuery>> {
    parse_blocks(text, "query", false)
}

/// Parses a template file. Files without `template <name>` headers hold a
/// single template called `default_name`.
pub fn parse_templates(text: &str, default_name: &str) -> Result<Vec<NamedQuery>> {
    let has_header = text
        .lines()
        .any(|l| l.split_whitespace().next() == Some("template"));
    if has_header {
        parse_blocks(text, "template", true)
    } else {
        Ok(vec![NamedQuery {
            id: default_name.to_string(),
            template: default_name.to_string(),
            query: parse_template(text)?,
        }])
    }
}

pub fn write_workload(queries: &[NamedQuery]) -> String {
    let mut s = String::new();
    for (i, q) in queries.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        let _ = writeln!(s, "query {} {}", q.id, q.template);
        s.push_str(&q.query.to_text());
    }
    s
}

/// A connected subset of a query's edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Subquery<'q> {
    query: &'q QueryGraph,
    edges: EdgeSet,
}

impl<'q> Subquery<'q> {
    pub fn new(query: &'q QueryGraph, edges: EdgeSet) -> Result<Self> {
        if !edges.is_subset(query.all_edges()) {
            return Err(Error::Validation("subquery edge out of range".into()));
        }
        if !query.is_connected(edges) {
            return Err(Error::Validation(format!("subquery {edges:?} is not connected")));
        }
        Ok(Subquery { query, edges })
    }

    pub fn query(&self) -> &'q QueryGraph {
        self.query
    }

    pub fn edges(&self) -> EdgeSet {
        self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn vars(&self) -> VarSet {
        self.query.vars_of(self.edges)
    }
}

/// All connected edge subsets with at most `max_edges` edges, each once, in
/// lexicographic order of their sorted edge-index lists.
pub fn connected_subqueries(q: &QueryGraph, max_edges: usize) -> Vec<Subquery<'_>> {
    connected_edge_sets(q, max_edges)
        .into_iter()
        .map(|edges| Subquery { query: q, edges })
        .collect()
}

pub(crate) fn connected_edge_sets(q: &QueryGraph, max_edges: usize) -> Vec<EdgeSet> {
    let m = q.num_edges();
    let nbrs: Vec<EdgeSet> = (0..m).map(|i| q.neighbors(i)).collect();
    let mut seen: HashSet<EdgeSet> = HashSet::new();
    let mut layer: Vec<EdgeSet> = (0..m).map(EdgeSet::singleton).collect();
    if max_edges == 0 {
        return Vec::new();
    }
    seen.extend(layer.iter().copied());
    for _ in 1..max_edges {
        let mut next = Vec::new();
        for s in &layer {
            let frontier = s
                .iter()
                .fold(EdgeSet::EMPTY, |acc, i| acc.union(nbrs[i]))
                .minus(*s);
            for j in frontier.iter() {
                let t = s.with(j);
                if seen.insert(t) {
                    next.push(t);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        layer = next;
    }
    let mut all: Vec<EdgeSet> = seen.into_iter().collect();
    all.sort_by(|a, b| a.lex_cmp(*b));
    all
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cycle {
    pub edges: EdgeSet,
}

impl Cycle {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CycleSet {
    pub cycles: Vec<Cycle>,
}

impl CycleSet {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    /// Cycles fully inside `set`.
    pub fn within(&self, set: EdgeSet) -> impl Iterator<Item = &Cycle> {
        self.cycles.iter().filter(move |c| c.edges.is_subset(set))
    }
}

/// All simple cycles of the undirected query multigraph. Parallel query
/// edges form 2-cycles and self-loops 1-cycles.
pub fn cycles(q: &QueryGraph) -> CycleSet {
    let m = q.num_edges();
    let mut found = Vec::new();
    // Each cycle is found once: rooted at its lowest edge `e0 = (u, v)`, as the
    // unique path from `v` back to `u` through higher-indexed edges.
    for e0 in 0..m {
        let QEdge { src: u, dst: v, .. } = q.edges[e0];
        if u == v {
            found.push(Cycle {
                edges: EdgeSet::singleton(e0),
            });
            continue;
        }
        let mut stack = vec![(v, EdgeSet::singleton(e0), VarSet::singleton(v))];
        while let Some((at, used, visited)) = stack.pop() {
            for j in (e0 + 1)..m {
                if used.contains(j) {
                    continue;
                }
                let e = &q.edges[j];
                if e.src == e.dst {
                    continue;
                }
                let next = if e.src == at {
                    e.dst
                } else if e.dst == at {
                    e.src
                } else {
                    continue;
                };
                if next == u {
                    found.push(Cycle { edges: used.with(j) });
                } else if !visited.contains(next) {
                    stack.push((next, used.with(j), visited.with(next)));
                }
            }
        }
    }
    found.sort_by(|a, b| a.edges.lex_cmp(b.edges));
    found.dedup();
    CycleSet { cycles: found }
}

/// Orders the edges of `cycle` other than `closing` as a walk from the
/// closing edge's destination back to its source. Each step records the
/// query edge and whether it is traversed along its direction.
pub fn cycle_walk(q: &QueryGraph, cycle: EdgeSet, closing: usize) -> Vec<(usize, bool)> {
    let QEdge { src: end, dst: start, .. } = q.edges[closing];
    let mut remaining = cycle.without(closing);
    let mut at = start;
    let mut out = Vec::with_capacity(remaining.len());
    while let Some(j) = remaining
        .iter()
        .find(|&j| q.edges[j].src == at || q.edges[j].dst == at)
    {
        let e = &q.edges[j];
        let forward = e.src == at;
        at = if forward { e.dst } else { e.src };
        out.push((j, forward));
        remaining = remaining.without(j);
    }
    debug_assert_eq!(at, end);
    out
}

/// The running 5-edge fork: `a1-A->a2-B->a3`, and `a3` fans out via C, D, E.
pub fn fork5() -> QueryGraph {
    parse_query("a1 -A-> a2\na2 -B-> a3\na3 -C-> a4\na3 -D-> a5\na3 -E-> a6\n")
        .expect("static query")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_connected(q: &QueryGraph, max: usize) -> usize {
        let m = q.num_edges();
        (1u64..(1 << m))
            .map(EdgeSet)
            .filter(|s| s.len() <= max && q.is_connected(*s))
            .count()
    }

    /// Counts simple cycles by testing every edge subset: every touched
    /// variable must have degree two and the subset must be connected.
    fn brute_cycles(q: &QueryGraph) -> usize {
        let m = q.num_edges();
        (1u64..(1 << m))
            .map(EdgeSet)
            .filter(|s| {
                let mut deg = vec![0; q.num_vars()];
                for i in s.iter() {
                    deg[q.edge(i).src] += 1;
                    deg[q.edge(i).dst] += 1;
                }
                deg.iter().all(|&d| d == 0 || d == 2) && q.is_connected(*s)
            })
            .count()
    }

    #[test]
    fn parse_single_edge() {
        let q = parse_query("a1 -A-> a2").unwrap();
        assert_eq!(q.num_edges(), 1);
        assert_eq!(q.num_vars(), 2);
    }

    #[test]
    fn parse_fork() {
        let q = fork5();
        assert_eq!(q.num_vars(), 6);
        assert_eq!(q.num_edges(), 5);
        assert_eq!(q.edge(3).label, "D");
    }

    #[test]
    fn parse_errors() {
        let err = parse_query("a1 -A-> a2\na3 -B-> a4\n").unwrap_err();
        assert!(err.to_string().contains("disconnected"), "{err}");
        let err = parse_query("a1 -A-> a2\na1 -A-> a2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        assert!(matches!(parse_query("a1 A a2"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_query("a1 -?-> a2").is_err());
        assert!(parse_template("a1 -?-> a2").is_ok());
        assert!(parse_query("").is_err());
    }

    #[test]
    fn subquery_counts() {
        let one = parse_query("a1 -A-> a2").unwrap();
        assert_eq!(connected_subqueries(&one, 1).len(), 1);

        let tri = parse_query("a -R-> b\nb -S-> c\nc -T-> a\n").unwrap();
        assert_eq!(connected_subqueries(&tri, 2).len(), 6);

        let q = fork5();
        for max in 1..=5 {
            assert_eq!(connected_subqueries(&q, max).len(), brute_connected(&q, max));
        }
    }

    #[test]
    fn subqueries_are_lex_sorted_and_closed_upward() {
        let q = fork5();
        let subs = connected_subqueries(&q, 3);
        for w in subs.windows(2) {
            assert_eq!(w[0].edges().lex_cmp(w[1].edges()), std::cmp::Ordering::Less);
        }
        for s in subs.iter().filter(|s| s.len() < 3) {
            assert!(subs
                .iter()
                .any(|t| t.len() == s.len() + 1 && s.edges().is_subset(t.edges())));
        }
    }

    #[test]
    fn cycle_enumeration() {
        assert!(cycles(&fork5()).is_empty());
        let square = parse_query("a1 -A-> a2\na2 -B-> a3\na3 -C-> a4\na4 -D-> a1\n").unwrap();
        let cs = cycles(&square);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs.cycles[0].len(), 4);

        let k4 = parse_query("a -A-> b\na -A-> c\na -A-> d\nb -A-> c\nb -A-> d\nc -A-> d\n").unwrap();
        let cs = cycles(&k4);
        assert_eq!(cs.len(), 7);
        assert_eq!(cs.cycles.iter().filter(|c| c.len() == 3).count(), 4);
        assert_eq!(cs.cycles.iter().filter(|c| c.len() == 4).count(), 3);
        assert_eq!(cs.len(), brute_cycles(&k4));

        let digon = parse_query("a -A-> b\nb -B-> a\n").unwrap();
        assert_eq!(cycles(&digon).len(), 1);
    }

    #[test]
    fn walk_around_cycle() {
        let square = parse_query("a1 -A-> a2\na2 -B-> a3\na4 -C-> a3\na4 -D-> a1\n").unwrap();
        // Closing D (a4 -> a1): start at a1, end at a4.
        let w = cycle_walk(&square, square.all_edges(), 3);
        assert_eq!(w, vec![(0, true), (1, true), (2, false)]);
    }

    #[test]
    fn workload_round_trip() {
        let qs = vec![
            NamedQuery {
                id: "q0".into(),
                template: "path".into(),
                query: parse_query("a1 -A-> a2\na2 -B-> a3").unwrap(),
            },
            NamedQuery {
                id: "q1".into(),
                template: "edge".into(),
                query: parse_query("x -C-> y").unwrap(),
            },
        ];
        let text = write_workload(&qs);
        assert_eq!(parse_workload(&text).unwrap(), qs);
    }

    #[test]
    fn template_files() {
        let one = parse_templates("a -?-> b\nb -?-> c\n", "p2").unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].id, "p2");
        let two = parse_templates("template t1\na -?-> b\ntemplate t2\na -?-> b\nb -X-> a\n", "x").unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[1].query.num_edges(), 2);
    }

    use proptest::prelude::*;

    fn arb_query() -> impl Strategy<Value = QueryGraph> {
        (2usize..=6, proptest::collection::vec((0usize..6, 0usize..6, 0u8..3), 1..=8)).prop_filter_map(
            "connected",
            |(n, raw)| {
                let triples: Vec<(String, String, String)> = raw
                    .into_iter()
                    .map(|(s, d, l)| (format!("v{}", s % n), format!("v{}", d % n), ((b'A' + l) as char).to_string()))
                    .collect();
                let mut dedup = triples.clone();
                dedup.sort();
                dedup.dedup();
                QueryGraph::from_triples(&dedup).ok()
            },
        )
    }

    proptest! {
        #[test]
        fn cycles_match_subset_brute_force(q in arb_query()) {
            prop_assert_eq!(cycles(&q).len(), brute_cycles(&q));
            for c in &cycles(&q).cycles {
                prop_assert!(q.is_connected(c.edges));
            }
        }

        #[test]
        fn connected_subqueries_match_brute_force(q in arb_query(), max in 1usize..=4) {
            prop_assert_eq!(connected_subqueries(&q, max).len(), brute_connected(&q, max));
        }
    }
}
