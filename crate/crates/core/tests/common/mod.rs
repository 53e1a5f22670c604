//! Shared instance generators and independent oracles for the
//! integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use ceg_core::catalogue::{build_catalogue, Catalogue, CatalogueConfig, PatternSource};
use ceg_core::fixtures::{random_graph, random_template, skewed_graph};
use ceg_core::graph::{LabeledGraph, VertexId};
use ceg_core::query::QueryGraph;
use ceg_core::workload::{instantiate_template, InstantiateMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub seed: u64,
    pub graph: LabeledGraph,
    pub query: QueryGraph,
    pub cyclic: bool,
}

/// Non-empty (graph, query) pairs: graphs with at most 1000 edges and
/// 8 labels, queries with `edges` edges and at most `max_vars` variables.
pub fn instances(seed: u64, n: usize, edges: std::ops::RangeInclusive<usize>, max_vars: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let s: u64 = rng.gen();
        let labels = rng.gen_range(2..=8);
        let vertices = rng.gen_range(60..=400);
        let m_data = rng.gen_range(200..=1000);
        let graph = if rng.gen_bool(0.5) {
            random_graph(s, vertices, m_data, labels)
        } else {
            skewed_graph(s, vertices, m_data, labels)
        };
        let m = rng.gen_range(edges.clone());
        let cyclic = m >= 3 && rng.gen_bool(0.5);
        let template = random_template(&mut rng, m, cyclic);
        if template.num_vars() > max_vars {
            continue;
        }
        let mode = if rng.gen_bool(0.5) {
            InstantiateMode::UniformLabels
        } else {
            InstantiateMode::EdgeAtATime
        };
        if let Some(query) = instantiate_template(&template, &graph, rng.gen(), mode, None) {
            out.push(Instance {
                seed: s,
                graph,
                query,
                cyclic,
            });
        }
    }
    out
}

pub fn catalogue(g: &LabeledGraph, q: &QueryGraph, h: usize) -> Catalogue {
    let config = CatalogueConfig {
        h,
        ..Default::default()
    };
    build_catalogue(g, PatternSource::Workload(std::slice::from_ref(q)), config).expect("catalogue builds")
}

/// Every homomorphism, found by joining the relations one query edge at a
/// time in the given order over full scans.
pub fn nested_loop_matches(g: &LabeledGraph, q: &QueryGraph) -> Vec<Vec<VertexId>> {
    let rels: Vec<Vec<(VertexId, VertexId)>> = q
        .edges()
        .iter()
        .map(|e| {
            let mut v: Vec<(VertexId, VertexId)> = g
                .edges()
                .into_iter()
                .filter(|t| t.2 == e.label)
                .map(|t| (t.0, t.1))
                .collect();
            v.sort_unstable();
            v
        })
        .collect();
    let mut out = Vec::new();
    let mut binding: Vec<Option<VertexId>> = vec![None; q.num_vars()];
    join(q, &rels, 0, &mut binding, &mut out);
    out
}

fn join(
    q: &QueryGraph,
    rels: &[Vec<(VertexId, VertexId)>],
    i: usize,
    binding: &mut Vec<Option<VertexId>>,
    out: &mut Vec<Vec<VertexId>>,
) {
    if i == rels.len() {
        out.push(binding.iter().map(|b| b.expect("all vars bound")).collect());
        return;
    }
    let e = q.edge(i);
    for &(s, d) in &rels[i] {
        let (old_s, old_d) = (binding[e.src], binding[e.dst]);
        if old_s.is_some_and(|x| x != s) || old_d.is_some_and(|x| x != d) {
            continue;
        }
        binding[e.src] = Some(s);
        if binding[e.dst].is_some_and(|x| x != d) {
            binding[e.src] = old_s;
            continue;
        }
        binding[e.dst] = Some(d);
        join(q, rels, i + 1, binding, out);
        binding[e.src] = old_s;
        binding[e.dst] = old_d;
    }
}

/// `max` over X-bindings of the number of distinct Y-bindings.
pub fn group_degree_oracle(matches: &[Vec<VertexId>], x: &[usize], y: &[usize]) -> u64 {
    let mut groups: HashMap<Vec<VertexId>, BTreeSet<Vec<VertexId>>> = HashMap::new();
    for m in matches {
        let kx: Vec<VertexId> = x.iter().map(|&v| m[v]).collect();
        let ky: Vec<VertexId> = y.iter().map(|&v| m[v]).collect();
        groups.entry(kx).or_default().insert(ky);
    }
    groups.values().map(|s| s.len() as u64).max().unwrap_or(0)
}
