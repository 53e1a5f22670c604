//! Turning unlabeled query templates into labeled, non-empty queries.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{LabeledGraph, VertexId};
use crate::oracle::has_match;
use crate::query::{NamedQuery, QueryGraph};

/// Attempts made in uniform-labels mode before giving up.
pub const UNIFORM_ATTEMPTS: usize = 100;
/// Upper bound on embedding attempts in edge-at-a-time mode.
pub const EMBED_ATTEMPTS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstantiateMode {
    /// Label every edge uniformly at random; keep the instance if it has a match.
    UniformLabels,
    /// Grow a random embedding one query edge at a time and copy its labels.
    EdgeAtATime,
}

impl std::str::FromStr for InstantiateMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" | "uniform-labels" => Ok(InstantiateMode::UniformLabels),
            "edge" | "edge-at-a-time" => Ok(InstantiateMode::EdgeAtATime),
            _ => Err(format!("unknown instantiation mode {s:?}")),
        }
    }
}

/// Labels `template` so that the result has at least one match in `g`.
/// Returns `None` when the attempt budget or the time limit runs out.
pub fn instantiate_template(
    template: &QueryGraph,
    g: &LabeledGraph,
    seed: u64,
    mode: InstantiateMode,
    time_limit: Option<Duration>,
) -> Option<QueryGraph> {
    if g.labels().is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deadline = time_limit.map(|d| Instant::now() + d);
    let expired = || deadline.is_some_and(|d| Instant::now() >= d);
    match mode {
        InstantiateMode::UniformLabels => {
            for _ in 0..UNIFORM_ATTEMPTS {
                if expired() {
                    return None;
                }
                let labeled = template.relabel(|_, _| g.labels().choose(&mut rng).expect("labels").clone());
                // Two parallel template edges may draw the same label.
                let Ok(q) = QueryGraph::new(labeled.vars().to_vec(), labeled.edges().to_vec()) else {
                    continue;
                };
                if has_match(g, &q) {
                    return Some(q);
                }
            }
            None
        }
        InstantiateMode::EdgeAtATime => {
            let order = connected_order(template);
            for _ in 0..EMBED_ATTEMPTS {
                if expired() {
                    return None;
                }
                if let Some(q) = try_embed(template, g, &order, &mut rng) {
                    return Some(q);
                }
            }
            None
        }
    }
}

/// Query edges in an order where each edge after the first touches an
/// earlier one.
fn connected_order(q: &QueryGraph) -> Vec<usize> {
    let mut order = vec![0];
    let mut reached = q.edge_vars(0);
    while order.len() < q.num_edges() {
        let next = (0..q.num_edges())
            .find(|i| !order.contains(i) && q.edge_vars(*i).intersects(reached))
            .expect("query is connected");
        reached = reached.union(q.edge_vars(next));
        order.push(next);
    }
    order
}

fn try_embed(template: &QueryGraph, g: &LabeledGraph, order: &[usize], rng: &mut ChaCha8Rng) -> Option<QueryGraph> {
    let mut binding: Vec<Option<VertexId>> = vec![None; template.num_vars()];
    let mut labels = vec![String::new(); template.num_edges()];
    let all_edges = g.num_edges();
    for &i in order {
        let e = template.edge(i);
        match (binding[e.src], binding[e.dst]) {
            (None, None) => {
                // Only the first edge; pick a uniform data edge.
                let k = rng.gen_range(0..all_edges);
                let (s, d, l) = nth_edge(g, k);
                if e.src == e.dst && s != d {
                    return None;
                }
                binding[e.src] = Some(s);
                binding[e.dst] = Some(d);
                labels[i] = l.to_string();
            }
            (Some(s), None) => {
                let out: Vec<_> = g.incident(s).iter().filter(|inc| inc.outgoing).collect();
                let inc = out.choose(rng)?;
                binding[e.dst] = Some(inc.other);
                labels[i] = g.label_name(inc.label).to_string();
            }
            (None, Some(d)) => {
                let inc: Vec<_> = g.incident(d).iter().filter(|inc| !inc.outgoing).collect();
                let inc = inc.choose(rng)?;
                binding[e.src] = Some(inc.other);
                labels[i] = g.label_name(inc.label).to_string();
            }
            (Some(s), Some(d)) => {
                let between: Vec<_> = g
                    .incident(s)
                    .iter()
                    .filter(|inc| inc.outgoing && inc.other == d)
                    .collect();
                let inc = between.choose(rng)?;
                labels[i] = g.label_name(inc.label).to_string();
            }
        }
    }
    let q = template.relabel(|i, _| labels[i].clone());
    QueryGraph::new(q.vars().to_vec(), q.edges().to_vec()).ok()
}

fn nth_edge(g: &LabeledGraph, mut k: usize) -> (VertexId, VertexId, &str) {
    for l in g.labels() {
        let r = g.relation(l);
        if k < r.len() {
            let (s, d) = r.tuples()[k];
            return (s, d, l);
        }
        k -= r.len();
    }
    unreachable!("index below edge count")
}

/// Generates up to `per_template` instances of each template. Instances are
/// named `<template>-<n>`; failed draws are skipped.
pub fn generate_workload(
    g: &LabeledGraph,
    templates: &[NamedQuery],
    per_template: usize,
    seed: u64,
    mode: InstantiateMode,
    time_limit: Option<Duration>,
) -> Vec<NamedQuery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for t in templates {
        let mut made = 0;
        for _ in 0..per_template {
            let sub = rng.gen::<u64>();
            if let Some(query) = instantiate_template(&t.query, g, sub, mode, time_limit) {
                out.push(NamedQuery {
                    id: format!("{}-{made}", t.id),
                    template: t.id.clone(),
                    query,
                });
                made += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_graph;
    use crate::oracle::count_hom;
    use crate::query::parse_template;

    #[test]
    fn single_label_graph() {
        let g = parse_graph("1 2 L\n2 3 L\n").unwrap();
        let t = parse_template("a -?-> b\nb -?-> c\n").unwrap();
        let q = instantiate_template(&t, &g, 3, InstantiateMode::UniformLabels, None).unwrap();
        assert!(q.edges().iter().all(|e| e.label == "L"));
        assert_eq!(count_hom(&g, &q), 1);

        let t = parse_template("a -?-> b\nb -?-> c\nc -?-> d\n").unwrap();
        assert!(instantiate_template(&t, &g, 3, InstantiateMode::UniformLabels, None).is_none());
    }

    #[test]
    fn deterministic_for_seed() {
        let text: String = (0..60).map(|i| format!("{} {} {}\n", i % 13, (i * 7) % 11, ["A", "B", "C"][i % 3])).collect();
        let g = parse_graph(&text).unwrap();
        let t = parse_template("a -?-> b\nb -?-> c\nc -?-> a\n").unwrap();
        for mode in [InstantiateMode::UniformLabels, InstantiateMode::EdgeAtATime] {
            let a = instantiate_template(&t, &g, 11, mode, None);
            let b = instantiate_template(&t, &g, 11, mode, None);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn embedded_instances_are_non_empty() {
        let text: String = (0..200).map(|i| format!("{} {} {}\n", i % 23, (i * 5 + 1) % 19, ["A", "B"][i % 2])).collect();
        let g = parse_graph(&text).unwrap();
        let t = parse_template("a -?-> b\nb -?-> c\nc -?-> d\nd -?-> a\n").unwrap();
        for seed in 0..20 {
            if let Some(q) = instantiate_template(&t, &g, seed, InstantiateMode::EdgeAtATime, None) {
                assert!(count_hom(&g, &q) >= 1);
            }
        }
    }
}
