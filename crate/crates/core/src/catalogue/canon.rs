//! Canonical keys for small directed edge-labeled patterns.
//!
//! A key is the lexicographically smallest edge encoding over all orderings
//! of the pattern's variables, written as `n:s>d:L,s>d:L,...` with edges
//! sorted. Patterns are small (at most a handful of edges), so trying every
//! ordering is cheap.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bits::{EdgeSet, VarSet};
use crate::error::{Error, Result};
use crate::query::{QEdge, QueryGraph};

/// Largest variable count accepted by [`canonical_form`].
pub const MAX_PATTERN_VARS: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PatternKey(pub String);

impl fmt::Display for PatternKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A canonical key plus the variable renaming that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalForm {
    pub key: PatternKey,
    /// Parent-query variable index -> canonical variable index.
    var_map: Vec<Option<usize>>,
}

impl CanonicalForm {
    /// Rewrites a set of parent-query variables in canonical numbering.
    /// Variables outside the pattern are dropped.
    pub fn map_vars(&self, vars: VarSet) -> VarSet {
        vars.iter()
            .filter_map(|v| self.var_map.get(v).copied().flatten())
            .fold(VarSet::EMPTY, VarSet::with)
    }

    pub fn num_vars(&self) -> usize {
        self.var_map.iter().flatten().count()
    }
}

type Encoded<'a> = Vec<(usize, usize, &'a str)>;

fn encode<'a>(edges: &[&'a QEdge], perm: &[usize]) -> Encoded<'a> {
    let mut out: Encoded<'a> = edges
        .iter()
        .map(|e| (perm[e.src], perm[e.dst], e.label.as_str()))
        .collect();
    out.sort_unstable();
    out
}

fn render(n: usize, enc: &Encoded<'_>) -> String {
    let body: Vec<String> = enc.iter().map(|(s, d, l)| format!("{s}>{d}:{l}")).collect();
    format!("{n}:{}", body.join(","))
}

/// Heap's algorithm over `0..n`; calls `f` with each permutation.
fn for_each_permutation<F: FnMut(&[usize])>(n: usize, mut f: F) {
    let mut a: Vec<usize> = (0..n).collect();
    let mut c = vec![0; n];
    f(&a);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            f(&a);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Canonical form of the sub-pattern of `q` spanned by `edges`.
pub fn canonical_form(q: &QueryGraph, edges: EdgeSet) -> Result<CanonicalForm> {
    let vars = q.vars_of(edges);
    let n = vars.len();
    if n > MAX_PATTERN_VARS {
        return Err(Error::Validation(format!(
            "pattern has {n} variables; canonical keys support at most {MAX_PATTERN_VARS}"
        )));
    }
    let local: Vec<usize> = vars.to_vec();
    let mut to_local = vec![usize::MAX; q.num_vars()];
    for (i, &v) in local.iter().enumerate() {
        to_local[v] = i;
    }
    let owned: Vec<QEdge> = edges
        .iter()
        .map(|i| {
            let e = q.edge(i);
            QEdge {
                src: to_local[e.src],
                dst: to_local[e.dst],
                label: e.label.clone(),
            }
        })
        .collect();
    let refs: Vec<&QEdge> = owned.iter().collect();

    let mut best: Option<(Encoded<'_>, Vec<usize>)> = None;
    for_each_permutation(n, |perm| {
        let enc = encode(&refs, perm);
        if best.as_ref().is_none_or(|(b, _)| enc < *b) {
            best = Some((enc, perm.to_vec()));
        }
    });
    let (enc, perm) = best.expect("at least one permutation");
    let mut var_map = vec![None; q.num_vars()];
    for (i, &v) in local.iter().enumerate() {
        var_map[v] = Some(perm[i]);
    }
    Ok(CanonicalForm {
        key: PatternKey(render(n, &enc)),
        var_map,
    })
}

/// Key of a whole query.
pub fn canonical_key(q: &QueryGraph) -> Result<PatternKey> {
    Ok(canonical_form(q, q.all_edges())?.key)
}

/// Rebuilds the pattern a key encodes, with variables named `v0, v1, ...`
/// in canonical order.
pub fn pattern_query(key: &PatternKey) -> Result<QueryGraph> {
    let bad = || Error::Malformed(format!("bad pattern key {key}"));
    let (n, body) = key.0.split_once(':').ok_or_else(bad)?;
    let n: usize = n.parse().map_err(|_| bad())?;
    let vars: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut edges = Vec::new();
    for part in body.split(',') {
        let (ends, label) = part.split_once(':').ok_or_else(bad)?;
        let (s, d) = ends.split_once('>').ok_or_else(bad)?;
        let src: usize = s.parse().map_err(|_| bad())?;
        let dst: usize = d.parse().map_err(|_| bad())?;
        if src >= n || dst >= n {
            return Err(bad());
        }
        edges.push(QEdge {
            src,
            dst,
            label: label.to_string(),
        });
    }
    QueryGraph::new(vars, edges).map_err(|e| Error::Malformed(format!("pattern key {key}: {e}")))
}
