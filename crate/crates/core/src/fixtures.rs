//! Small named graphs and queries used by tests, benches and the CLI, plus
//! seeded random generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{parse_graph, LabeledGraph, VertexId};
use crate::query::{parse_query, QEdge, QueryGraph};

/// Edge list of fixture F1. B-edge `10 -> 11` has three incoming A-edges
/// and two outgoing C-edges; B-edge `20 -> 21` has one of each. Hence
/// `|B| = 2`, `|A B| = 4`, `|B C| = 3` and `|A B C| = 3*2 + 1*1 = 7`.
pub const F1_EDGES: &str = "\
# fixture F1
10 11 B
20 21 B
1 10 A
2 10 A
3 10 A
4 20 A
11 30 C
11 31 C
21 40 C
";

pub fn f1_graph() -> LabeledGraph {
    parse_graph(F1_EDGES).expect("static fixture")
}

/// `a1 -A-> a2 -B-> a3 -C-> a4`.
pub fn q3p() -> QueryGraph {
    parse_query("a1 -A-> a2\na2 -B-> a3\na3 -C-> a4\n").expect("static query")
}

/// The 5-edge fork: `a1 -A-> a2 -B-> a3`, then C, D, E out of `a3`.
pub fn q5f() -> QueryGraph {
    crate::query::fork5()
}

/// Directed 4-cycle `a1 -A-> a2 -B-> a3 -C-> a4 -D-> a1`.
pub fn square() -> QueryGraph {
    parse_query("a1 -A-> a2\na2 -B-> a3\na3 -C-> a4\na4 -D-> a1\n").expect("static query")
}

/// Triangle `a -R-> b -S-> c -T-> a`.
pub fn triangle() -> QueryGraph {
    parse_query("a -R-> b\nb -S-> c\nc -T-> a\n").expect("static query")
}

/// R, S and T each hold `{(i, i) : i = 1..n}`.
pub fn identity_graph(n: u64) -> LabeledGraph {
    LabeledGraph::from_edges((1..=n).flat_map(|i| [(i, i, "R"), (i, i, "S"), (i, i, "T")])).expect("static labels")
}

/// Label names `A, B, ...` for generated graphs.
pub fn label_names(k: usize) -> Vec<String> {
    (0..k)
        .map(|i| {
            if i < 26 {
                ((b'A' + i as u8) as char).to_string()
            } else {
                format!("L{i}")
            }
        })
        .collect()
}

/// Uniform random graph: `edges` draws of (src, dst, label), duplicates
/// collapsed, so the result may hold slightly fewer edges.
pub fn random_graph(seed: u64, vertices: u64, edges: usize, labels: usize) -> LabeledGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = label_names(labels);
    let triples: Vec<(VertexId, VertexId, String)> = (0..edges)
        .map(|_| {
            (
                rng.gen_range(0..vertices),
                rng.gen_range(0..vertices),
                names[rng.gen_range(0..labels)].clone(),
            )
        })
        .collect();
    LabeledGraph::from_edges(triples).expect("generated labels are valid")
}

/// Random graph with a skewed degree distribution: endpoints are drawn so
/// low vertex ids are much more likely, and each label has its own density.
pub fn skewed_graph(seed: u64, vertices: u64, edges: usize, labels: usize) -> LabeledGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = label_names(labels);
    let weights: Vec<f64> = (0..labels).map(|i| 1.0 / (i as f64 + 1.0)).collect();
    let total: f64 = weights.iter().sum();
    let pick_label = |rng: &mut ChaCha8Rng| {
        let mut x = rng.gen::<f64>() * total;
        for (i, w) in weights.iter().enumerate() {
            if x < *w {
                return i;
            }
            x -= w;
        }
        labels - 1
    };
    let skew = |rng: &mut ChaCha8Rng| -> VertexId {
        let u: f64 = rng.gen();
        ((u * u * u) * vertices as f64) as VertexId
    };
    let triples: Vec<(VertexId, VertexId, String)> = (0..edges)
        .map(|_| {
            let l = pick_label(&mut rng);
            (skew(&mut rng), rng.gen_range(0..vertices), names[l].clone())
        })
        .collect();
    LabeledGraph::from_edges(triples).expect("generated labels are valid")
}

/// A graph with correlated labels: random background edges plus planted
/// out-stars and directed 4-cycles. Star centers emit runs of one label;
/// cycles go around with labels A, B, C, D.
pub fn correlated_graph(seed: u64, background: usize, stars: usize, cycles: usize) -> LabeledGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = label_names(6);
    let n: VertexId = 5_000;
    let mut triples: Vec<(VertexId, VertexId, String)> = Vec::new();
    for _ in 0..background {
        triples.push((rng.gen_range(0..n), rng.gen_range(0..n), names[rng.gen_range(0..6)].clone()));
    }
    for _ in 0..stars {
        let c = rng.gen_range(0..n);
        let l1 = rng.gen_range(0..6);
        let l2 = (l1 + 1 + rng.gen_range(0..5)) % 6;
        for _ in 0..rng.gen_range(5..40) {
            triples.push((c, rng.gen_range(0..n), names[l1].clone()));
        }
        for _ in 0..rng.gen_range(1..10) {
            triples.push((rng.gen_range(0..n), c, names[l2].clone()));
        }
    }
    for _ in 0..cycles {
        let vs: Vec<VertexId> = (0..4).map(|_| rng.gen_range(0..n)).collect();
        for i in 0..4 {
            triples.push((vs[i], vs[(i + 1) % 4], names[i].clone()));
        }
    }
    LabeledGraph::from_edges(triples).expect("generated labels are valid")
}

/// A random connected template with `m` edges, all labeled `?`. Acyclic
/// templates are trees; cyclic ones have `vars` variables and at least one
/// cycle.
pub fn random_template(rng: &mut ChaCha8Rng, m: usize, cyclic: bool) -> QueryGraph {
    let n = if cyclic {
        let least = (2..).find(|k| k * (k - 1) / 2 >= m).expect("some size fits");
        rng.gen_range(least.min(m)..=m)
    } else {
        m + 1
    };
    let vars: Vec<String> = (1..=n).map(|i| format!("a{i}")).collect();
    let mut edges: Vec<QEdge> = Vec::new();
    let mut pairs = std::collections::HashSet::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        let (s, d) = if rng.gen() { (u, v) } else { (v, u) };
        pairs.insert((s.min(d), s.max(d)));
        edges.push(QEdge {
            src: s,
            dst: d,
            label: "?".into(),
        });
    }
    let mut all_pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|p| !pairs.contains(p))
        .collect();
    all_pairs.shuffle(rng);
    while edges.len() < m {
        let (a, b) = all_pairs.pop().expect("enough vertex pairs for the requested edges");
        let (s, d) = if rng.gen() { (a, b) } else { (b, a) };
        edges.push(QEdge {
            src: s,
            dst: d,
            label: "?".into(),
        });
    }
    QueryGraph::new(vars, edges).expect("generated template is connected")
}
