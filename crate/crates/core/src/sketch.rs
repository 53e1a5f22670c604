//! Bound sketches: hash-partition the relations on selected join
//! attributes, estimate each of the K resulting subqueries separately and
//! add the estimates up.

use num_rational::{BigRational, Ratio};
use num_traits::Zero;

use crate::bits::VarSet;
use crate::catalogue::{build_catalogue, closing_demands, Catalogue, CatalogueConfig, PatternSource};
use crate::ceg::{build_ceg_m, first_path, min_weight_path, path_stats, to_big, to_f64, Ceg, CegKind, CegVertex, PathEstimate, Provenance};
use crate::error::{Error, Result};
use crate::estimators::{aggregate, molp_on, optimistic_ceg, Aggr, AvgMode, Estimate, HeuristicChoice};
use crate::exec;
use crate::graph::{LabeledGraph, VertexId};
use crate::query::QueryGraph;

const HASH_MUL: u64 = 0x9E37_79B9_7F4A_7C15;

/// Bucket of vertex `v` among `parts` buckets.
pub fn bucket(v: VertexId, seed: u64, parts: u64) -> u64 {
    ((v ^ seed).wrapping_mul(HASH_MUL) >> 32) % parts
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeTag {
    Bound,
    Unbound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassifiedEdge {
    pub edge: usize,
    pub tag: EdgeTag,
    /// Variables the edge adds to the subquery.
    pub extension: VarSet,
}

fn vertex_vars(q: &QueryGraph, v: CegVertex) -> VarSet {
    match v {
        CegVertex::Vars(s) => s,
        CegVertex::Edges(s) => q.vars_of(s),
    }
}

/// Tags each path edge. Degree edges are unbound when `X = ∅`; start edges
/// are unbound; every other edge extends an existing subquery and is bound.
pub fn classify_edges(ceg: &Ceg, q: &QueryGraph, path: &PathEstimate) -> Vec<ClassifiedEdge> {
    path.edges
        .iter()
        .map(|&e| {
            let ed = &ceg.edges[e];
            let from = vertex_vars(q, ceg.vertices[ed.from]);
            let to = vertex_vars(q, ceg.vertices[ed.to]);
            let unbound = match ceg.provenance(e) {
                Provenance::Degree { x, .. } => x.is_empty(),
                Provenance::Markov { intersection, .. } => intersection.is_empty(),
                _ => false,
            };
            ClassifiedEdge {
                edge: e,
                tag: if unbound { EdgeTag::Unbound } else { EdgeTag::Bound },
                extension: to.minus(from),
            }
        })
        .collect()
}

/// Variables shared by at least two query edges.
pub fn join_attrs(q: &QueryGraph) -> VarSet {
    let mut seen = VarSet::EMPTY;
    let mut twice = VarSet::EMPTY;
    for i in 0..q.num_edges() {
        let vs = q.edge_vars(i);
        twice = twice.union(seen.intersect(vs));
        seen = seen.union(vs);
    }
    twice
}

/// Join attributes that no bound edge of the path extends to.
pub fn sketch_attrs(q: &QueryGraph, classified: &[ClassifiedEdge]) -> VarSet {
    let bound = classified
        .iter()
        .filter(|c| c.tag == EdgeTag::Bound)
        .fold(VarSet::EMPTY, |a, c| a.union(c.extension));
    join_attrs(q).minus(bound)
}

#[derive(Clone, Debug)]
pub struct SketchPlan {
    pub path: PathEstimate,
    pub classified: Vec<ClassifiedEdge>,
    pub s: VarSet,
    pub k: u64,
    pub per_attr: u64,
    /// Per query edge, the partitioned variables `S ∩ vars(edge)`.
    pub partition_attrs: Vec<VarSet>,
    /// Per query edge, the number of pieces its relation is split into.
    pub pieces: Vec<u64>,
    pub seed: u64,
}

/// One of the K subqueries: a bucket per attribute of S (in variable order),
/// the relabeled query and the graph of the relation pieces it reads.
#[derive(Clone, Debug)]
pub struct Component {
    pub buckets: Vec<u64>,
    pub query: QueryGraph,
    pub graph: LabeledGraph,
}

fn integer_root(k: u64, n: u32) -> Option<u64> {
    let guess = (k as f64).powf(1.0 / n as f64).round() as u64;
    (guess.saturating_sub(1)..=guess + 1).find(|&b| b.checked_pow(n) == Some(k))
}

/// The per-attribute bucket count for budget `k` over `|S| = s` attributes.
pub fn per_attr_parts(k: u64, s: usize) -> Result<u64> {
    if s == 0 {
        return Err(Error::Sketch("no partition attributes".into()));
    }
    match integer_root(k, s as u32) {
        Some(b) if b >= 2 => Ok(b),
        _ => Err(Error::Sketch(format!(
            "K = {k} is not the {s}-th power of an integer >= 2"
        ))),
    }
}

fn piece_label(label: &str, src: Option<u64>, dst: Option<u64>) -> String {
    let mut s = format!("{label}~");
    if let Some(b) = src {
        s.push_str(&format!("s{b}"));
    }
    if let Some(b) = dst {
        s.push_str(&format!("d{b}"));
    }
    s
}

/// Plans a sketch from `path` and materializes its K components. `k = 1`
/// gives the single component `(q, g)`.
pub fn make_sketch(
    q: &QueryGraph,
    g: &LabeledGraph,
    ceg: &Ceg,
    path: &PathEstimate,
    k: u64,
    seed: u64,
) -> Result<(SketchPlan, Vec<Component>)> {
    if k == 0 {
        return Err(Error::Sketch("K must be positive".into()));
    }
    let classified = classify_edges(ceg, q, path);
    let s = sketch_attrs(q, &classified);
    if k == 1 {
        let plan = SketchPlan {
            path: path.clone(),
            classified,
            s,
            k,
            per_attr: 1,
            partition_attrs: vec![VarSet::EMPTY; q.num_edges()],
            pieces: vec![1; q.num_edges()],
            seed,
        };
        let comp = Component {
            buckets: Vec::new(),
            query: q.clone(),
            graph: g.clone(),
        };
        return Ok((plan, vec![comp]));
    }
    let b = per_attr_parts(k, s.len())?;
    let attrs = s.to_vec();
    let partition_attrs: Vec<VarSet> = (0..q.num_edges()).map(|i| q.edge_vars(i).intersect(s)).collect();
    let pieces: Vec<u64> = partition_attrs.iter().map(|pa| b.pow(pa.len() as u32)).collect();
    let plan = SketchPlan {
        path: path.clone(),
        classified,
        s,
        k,
        per_attr: b,
        partition_attrs,
        pieces,
        seed,
    };

    let assignments: Vec<Vec<u64>> = (0..k)
        .map(|mut j| {
            let mut digits = vec![0; attrs.len()];
            for d in digits.iter_mut().rev() {
                *d = j % b;
                j /= b;
            }
            digits
        })
        .collect();
    let components = exec::map(&assignments, |buckets| {
        let of = |var: usize| attrs.iter().position(|&a| a == var).map(|i| buckets[i]);
        let mut triples: Vec<(VertexId, VertexId, String)> = Vec::new();
        let query = q.relabel(|i, label| {
            let e = q.edge(i);
            let (bs, bd) = (of(e.src), of(e.dst));
            if bs.is_none() && bd.is_none() {
                label.to_string()
            } else {
                piece_label(label, bs, bd)
            }
        });
        for (i, e) in q.edges().iter().enumerate() {
            let (bs, bd) = (of(e.src), of(e.dst));
            let name = &query.edge(i).label;
            for &(u, v) in g.relation(&e.label).tuples() {
                if bs.is_some_and(|x| bucket(u, seed, b) != x) || bd.is_some_and(|x| bucket(v, seed, b) != x) {
                    continue;
                }
                triples.push((u, v, name.clone()));
            }
        }
        let graph = LabeledGraph::from_edges(triples)?;
        Ok(Component {
            buckets: buckets.clone(),
            query,
            graph,
        })
    });
    let components = components.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((plan, components))
}

/// The estimator a sketch refines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SketchBase {
    Molp,
    Optimistic { kind: CegKind, choice: HeuristicChoice },
}

#[derive(Clone, Debug)]
pub struct SketchEstimate {
    pub estimate: Estimate,
    /// The unpartitioned base estimate.
    pub base: Estimate,
    /// `None` when sketching fell back to K = 1.
    pub plan: Option<SketchPlan>,
    pub component_values: Vec<BigRational>,
}

fn component_config(config: &CatalogueConfig, base: SketchBase) -> CatalogueConfig {
    CatalogueConfig {
        deg_stats: base == SketchBase::Molp,
        closing_rates: matches!(base, SketchBase::Optimistic { kind: CegKind::Ocr, .. }),
        ..*config
    }
}

/// Evaluates the fixed formula of an optimistic path on a component's
/// statistics.
fn path_formula(ceg: &Ceg, path: &PathEstimate, comp: &Component, cat: &Catalogue) -> Result<BigRational> {
    let q = &comp.query;
    let count = |s| {
        cat.count_edges(q, s)
            .ok_or_else(|| Error::MissingStatistic(format!("component count for edges {s:?}")))
    };
    let mut value = BigRational::from_integer(1.into());
    for &e in &path.edges {
        let rate: Ratio<u64> = match ceg.provenance(e) {
            Provenance::Markov {
                extended, intersection, ..
            } => {
                let num = count(*extended)?;
                if intersection.is_empty() {
                    Ratio::from_integer(num)
                } else {
                    let den = count(*intersection)?;
                    if den == 0 {
                        Ratio::from_integer(0)
                    } else {
                        Ratio::new(num, den)
                    }
                }
            }
            Provenance::Closing { cycle, closing, .. } => {
                let d = closing_demands(q, cat.h())
                    .into_iter()
                    .find(|d| d.cycle == *cycle && d.closing == *closing)
                    .ok_or_else(|| Error::MissingStatistic("component closing demand".into()))?;
                cat.closing_rate(&d.key)
                    .ok_or_else(|| Error::MissingStatistic(format!("closing rate {}", d.key)))?
            }
            other => {
                return Err(Error::Sketch(format!("unexpected edge provenance {other:?} on an optimistic path")))
            }
        };
        value *= to_big(rate);
        if value.is_zero() {
            break;
        }
    }
    Ok(value)
}

/// The base estimate and the path its sketch is planned from.
fn base_path(q: &QueryGraph, cat: &Catalogue, base: SketchBase) -> Result<(Ceg, Estimate, PathEstimate)> {
    match base {
        SketchBase::Molp => {
            let ceg = build_ceg_m(q, cat, false)?;
            let est = molp_on(&ceg)?;
            let path = min_weight_path(&ceg)?;
            Ok((ceg, est, path))
        }
        SketchBase::Optimistic { kind, choice } => {
            let ceg = optimistic_ceg(q, cat, kind)?;
            let stats = path_stats(&ceg)?;
            let est = aggregate(&ceg, &stats, choice, AvgMode::Arithmetic)?;
            let path = match (&est.chosen_path, choice.aggr) {
                (Some(p), Aggr::Max | Aggr::Min) => p.clone(),
                _ => first_path(&ceg)?,
            };
            Ok((ceg, est, path))
        }
    }
}

/// Sum of the base estimator over the K components. The sketch path is the
/// unpartitioned CEG_M minimum path for MOLP and the heuristic's chosen
/// path for optimistic bases. Falls back to the plain base estimate when no
/// join attribute is left to partition on.
pub fn estimate_with_sketch(
    q: &QueryGraph,
    g: &LabeledGraph,
    k: u64,
    base: SketchBase,
    config: &CatalogueConfig,
) -> Result<SketchEstimate> {
    let cat = build_catalogue(g, PatternSource::Workload(std::slice::from_ref(q)), component_config(config, base))?;
    estimate_with_sketch_cat(q, g, &cat, k, base, config)
}

/// As [`estimate_with_sketch`], reusing an unpartitioned catalogue.
pub fn estimate_with_sketch_cat(
    q: &QueryGraph,
    g: &LabeledGraph,
    cat: &Catalogue,
    k: u64,
    base: SketchBase,
    config: &CatalogueConfig,
) -> Result<SketchEstimate> {
    let (ceg, base_est, path) = base_path(q, cat, base)?;
    let s = sketch_attrs(q, &classify_edges(&ceg, q, &path));
    if k == 1 || s.is_empty() {
        return Ok(SketchEstimate {
            estimate: base_est.clone(),
            base: base_est,
            plan: None,
            component_values: Vec::new(),
        });
    }
    let (plan, comps) = make_sketch(q, g, &ceg, &path, k, config.seed)?;
    let comp_config = component_config(config, base);
    let values = exec::map(&comps, |comp| -> Result<BigRational> {
        let ccat = build_catalogue(
            &comp.graph,
            PatternSource::Workload(std::slice::from_ref(&comp.query)),
            comp_config,
        )?;
        match base {
            SketchBase::Molp => Ok(molp_on(&build_ceg_m(&comp.query, &ccat, false)?)?.exact),
            SketchBase::Optimistic { .. } => path_formula(&ceg, &path, comp, &ccat),
        }
    });
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    let total = values.iter().fold(BigRational::zero(), |a, v| a + v);
    let estimate = Estimate {
        value: to_f64(&total),
        exact: total,
        method: format!("{}/sketch{k}", base_est.method),
        considered_paths: base_est.considered_paths,
        chosen_path: Some(path),
        ceg_kind: base_est.ceg_kind,
        overlapping_cycles: base_est.overlapping_cycles,
    };
    Ok(SketchEstimate {
        estimate,
        base: base_est,
        plan: Some(plan),
        component_values: values,
    })
}
