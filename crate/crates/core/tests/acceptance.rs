//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::OnceLock;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ceg_core::bits::{EdgeSet, VarSet};
use ceg_core::catalogue::CatalogueConfig;
use ceg_core::ceg::{
    build_ceg_d, build_ceg_m, build_ceg_o, for_each_path, min_weight_path, path_count, rate_product, Ceg, CegKind,
    CegVertex, CoverEntry, PathEstimate,
};
use ceg_core::estimators::{
    estimate_all_heuristics, estimate_molp, estimate_optimistic, optimistic_ceg, pstar_on, Aggr, Estimate,
    HeuristicChoice, Hop,
};
use ceg_core::eval::{qerror_exact, run_workload, summarize_values, Method, QErrorSummary, RunConfig};
use ceg_core::fixtures::{correlated_graph, f1_graph, identity_graph, label_names, q3p, q5f, random_template, triangle};
use ceg_core::graph::{LabeledGraph, Position};
use ceg_core::oracle::count_hom;
use ceg_core::query::{connected_subqueries, parse_template, NamedQuery, QueryGraph};
use ceg_core::sketch::{classify_edges, estimate_with_sketch_cat, make_sketch, per_attr_parts, sketch_attrs, SketchBase};
use ceg_core::workload::{generate_workload, InstantiateMode};
use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{catalogue, instances, Instance};

type Criterion = (&'static str, Duration, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn big(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn ratio(n: u64, d: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn c1_fixture_arithmetic() -> Outcome {
    let g = f1_graph();
    let q = q3p();
    let cat = catalogue(&g, &q, 2);
    let est = estimate_optimistic(&q, &cat, CegKind::O, HeuristicChoice::new(Hop::MaxHop, Aggr::Max))
        .expect("estimate");
    let truth = count_hom(&g, &q);
    let qe = qerror_exact(truth, &est.exact).expect("q-error");
    let pass = est.exact == big(6) && truth == 7 && qe.ratio == Some(ratio(7, 6)) && qe.underestimate;
    outcome(
        pass,
        format!(
            "estimate {} true {} q-error {} {}",
            est.exact,
            truth,
            qe.ratio.map_or("inf".into(), |r| r.to_string()),
            if qe.underestimate { "(under)" } else { "(over)" }
        ),
    )
}

fn c2_path_products() -> Outcome {
    let a = rate_product(&[Ratio::from_integer(4), Ratio::new(3, 2), Ratio::new(5, 2), Ratio::new(7, 2)]);
    let b = rate_product(&[7, 3, 2, 1, 3].map(Ratio::from_integer));
    outcome(a == ratio(105, 2) && b == big(126), format!("{a} = 52.5, {b} = 126"))
}

/// Five labels with distinct frequencies; retried until every size-1 and
/// size-2 pattern count differs.
fn c3_graph() -> LabeledGraph {
    let q = q5f();
    let labels = label_names(5);
    for seed in 0u64.. {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut triples = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            for _ in 0..40 + 23 * i {
                triples.push((rng.gen_range(0..60u64), rng.gen_range(0..60u64), l.as_str()));
            }
        }
        let g = LabeledGraph::from_edges(triples).unwrap();
        let counts: Vec<u64> = connected_subqueries(&q, 2)
            .iter()
            .map(|s| count_hom(&g, &q.induced(s.edges()).unwrap()))
            .collect();
        let distinct: BTreeSet<u64> = counts.iter().copied().collect();
        if distinct.len() == counts.len() {
            return g;
        }
    }
    unreachable!()
}

fn c3_fork_paths() -> Outcome {
    let q = q5f();
    let g = c3_graph();
    let cat = catalogue(&g, &q, 2);
    let ceg = build_ceg_o(&q, &cat).expect("CEG_O");
    let total = path_count(&ceg).expect("count");
    let mut values = BTreeSet::new();
    let mut from_ab = 0u64;
    let ab = EdgeSet::from_indices([0, 1]);
    for_each_path(&ceg, |edges| {
        values.insert(PathEstimate::from_edges(&ceg, edges.to_vec()).estimate);
        if ceg.vertices[ceg.edges[edges[0]].to] == CegVertex::Edges(ab) {
            from_ab += 1;
        }
    })
    .expect("paths");
    let collapsed_paths = all_path_products(&ceg).len();
    let pass = total == 36 && values.len() == 7;
    outcome(
        pass,
        format!(
            "{total} paths (36 expected), {} distinct estimates (7 expected); {collapsed_paths} paths after merging parallel edges, {from_ab} start at {{A,B}}",
            values.len()
        ),
    )
}

/// Per-instance results shared by criteria 4 and 9.
struct Checked {
    molp_safe: bool,
    order_violations: Vec<String>,
    pstar_violations: Vec<String>,
    pstar_skipped: bool,
    cyclic: bool,
}

fn check_instance(inst: &Instance) -> Checked {
    let q = &inst.query;
    let cat = catalogue(&inst.graph, q, 2);
    let truth = count_hom(&inst.graph, q);
    let molp = estimate_molp(q, &cat).expect("molp");
    let mut out = Checked {
        molp_safe: molp.exact >= big(truth),
        order_violations: Vec::new(),
        pstar_violations: Vec::new(),
        pstar_skipped: false,
        cyclic: inst.cyclic,
    };
    for kind in [CegKind::O, CegKind::Ocr] {
        let ceg = optimistic_ceg(q, &cat, kind).expect("optimistic CEG");
        let all = estimate_all_heuristics(&ceg).expect("heuristics");
        let get = |h, a| -> &Estimate { &all.iter().find(|(c, _)| *c == HeuristicChoice::new(h, a)).unwrap().1 };
        for hop in [Hop::MaxHop, Hop::MinHop, Hop::AllHops] {
            if !(get(hop, Aggr::Min).exact <= get(hop, Aggr::Avg).exact && get(hop, Aggr::Avg).exact <= get(hop, Aggr::Max).exact) {
                out.order_violations.push(format!("{kind} {hop} min/avg/max"));
            }
        }
        if get(Hop::AllHops, Aggr::Max).exact < get(Hop::MaxHop, Aggr::Max).exact {
            out.order_violations.push(format!("{kind} all-hops-max < max-hop-max"));
        }
        if get(Hop::AllHops, Aggr::Min).exact > get(Hop::MinHop, Aggr::Min).exact {
            out.order_violations.push(format!("{kind} all-hops-min > min-hop-min"));
        }
        match pstar_on(&ceg, truth) {
            Ok(p) => {
                let pq = qerror_exact(truth, &p.exact).expect("c >= 1").ratio;
                for (c, e) in &all {
                    let hq = qerror_exact(truth, &e.exact).expect("c >= 1").ratio;
                    let ok = match (&pq, &hq) {
                        (_, None) => true,
                        (None, Some(_)) => false,
                        (Some(a), Some(b)) => a <= b,
                    };
                    if !ok {
                        out.pstar_violations.push(format!("{kind}/{c}"));
                    }
                }
            }
            Err(ceg_core::Error::EnumerationOverflow { .. }) => out.pstar_skipped = true,
            Err(e) => panic!("pstar: {e}"),
        }
    }
    out
}

struct SafetyRun {
    checked: Vec<Checked>,
    elapsed: Duration,
}

fn safety_run() -> &'static SafetyRun {
    static RUN: OnceLock<SafetyRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let t = Instant::now();
        let insts = instances(4004, 500, 3..=8, 12);
        let checked = ceg_core::exec::map(&insts, check_instance);
        SafetyRun {
            checked,
            elapsed: t.elapsed(),
        }
    })
}

fn c4_molp_safety() -> Outcome {
    let run = safety_run();
    let n = run.checked.len();
    let safe = run.checked.iter().filter(|c| c.molp_safe).count();
    let cyclic = run.checked.iter().filter(|c| c.cyclic).count();
    outcome(
        n >= 500 && safe == n && run.elapsed < Duration::from_secs(120),
        format!("{safe}/{n} safe ({cyclic} cyclic), {:.1}s", run.elapsed.as_secs_f64()),
    )
}

fn c9_orderings() -> Outcome {
    let run = safety_run();
    let order: usize = run.checked.iter().map(|c| c.order_violations.len()).sum();
    let mut pstar: BTreeMap<String, usize> = BTreeMap::new();
    for c in &run.checked {
        for v in &c.pstar_violations {
            *pstar.entry(v.clone()).or_default() += 1;
        }
    }
    let skipped = run.checked.iter().filter(|c| c.pstar_skipped).count();
    let pv: usize = pstar.values().sum();
    let detail = format!(
        "{} instances: {order} aggregator/path-set violations, {pv} P* violations {:?}, {skipped} P* skipped at the distinct-value cap",
        run.checked.len(),
        pstar
    );
    outcome(order == 0 && pv == 0 && skipped == 0, detail)
}

/// Parallel edges collapsed to the cheapest, keyed by (from, to).
fn collapsed(ceg: &Ceg) -> HashMap<usize, Vec<(usize, BigRational)>> {
    let mut best: HashMap<(usize, usize), BigRational> = HashMap::new();
    for e in &ceg.edges {
        let r = ratio(*e.rate.numer(), *e.rate.denom());
        best.entry((e.from, e.to))
            .and_modify(|b| {
                if r < *b {
                    *b = r.clone();
                }
            })
            .or_insert(r);
    }
    let mut adj: HashMap<usize, Vec<(usize, BigRational)>> = HashMap::new();
    for ((f, t), r) in best {
        adj.entry(f).or_default().push((t, r));
    }
    adj
}

/// Every (bottom, top) path's product over the collapsed graph.
fn all_path_products(ceg: &Ceg) -> Vec<BigRational> {
    let adj = collapsed(ceg);
    let mut out = Vec::new();
    let mut stack = vec![(ceg.bottom, BigRational::from_integer(1.into()))];
    while let Some((v, w)) = stack.pop() {
        if v == ceg.top {
            out.push(w);
            continue;
        }
        if let Some(next) = adj.get(&v) {
            for (t, r) in next {
                stack.push((*t, &w * r));
            }
        }
    }
    out
}

fn small_instances() -> &'static Vec<(Instance, ceg_core::catalogue::Catalogue)> {
    static SMALL: OnceLock<Vec<(Instance, ceg_core::catalogue::Catalogue)>> = OnceLock::new();
    SMALL.get_or_init(|| {
        instances(5005, 120, 3..=8, 6)
            .into_iter()
            .map(|i| {
                let c = catalogue(&i.graph, &i.query, 2);
                (i, c)
            })
            .collect()
    })
}

fn c5_min_path_consistency() -> Outcome {
    let insts = small_instances();
    let res = ceg_core::exec::map(insts, |(i, cat)| {
        let m = build_ceg_m(&i.query, cat, false).expect("CEG_M");
        let dp = min_weight_path(&m).expect("min path").estimate;
        let en = all_path_products(&m).into_iter().min().expect("a path");
        dp == en
    });
    let ok = res.iter().filter(|&&b| b).count();
    outcome(ok == res.len(), format!("{ok}/{} instances agree", res.len()))
}

fn c6_projection() -> Outcome {
    let insts = small_instances();
    let res = ceg_core::exec::map(insts, |(i, cat)| {
        let a = min_weight_path(&build_ceg_m(&i.query, cat, false).expect("CEG_M")).expect("path");
        let b = min_weight_path(&build_ceg_m(&i.query, cat, true).expect("CEG_M")).expect("path");
        a.estimate == b.estimate
    });
    let ok = res.iter().filter(|&&b| b).count();
    outcome(ok == res.len(), format!("{ok}/{} instances agree", res.len()))
}

fn random_cover(q: &QueryGraph, rng: &mut ChaCha8Rng) -> Vec<CoverEntry> {
    let subs: Vec<EdgeSet> = connected_subqueries(q, 2).into_iter().map(|s| s.edges()).collect();
    let mut cover = Vec::new();
    let mut covered = VarSet::EMPTY;
    while covered != q.all_vars() {
        let p = *subs.choose(rng).unwrap();
        let opts: Vec<_> = q.vars_of(p).subsets().filter(|s| !s.is_empty()).collect();
        let a = *opts.choose(rng).unwrap();
        cover.push(CoverEntry { pattern: p, vars: a });
        covered = covered.union(a);
    }
    cover
}

fn c7_cover_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7007);
    let insts = small_instances();
    let mut covers = 0;
    let mut bad = 0;
    let mut paths = 0usize;
    for (i, cat) in insts.iter().take(60) {
        let molp = min_weight_path(&build_ceg_m(&i.query, cat, false).unwrap()).unwrap().estimate;
        let cover = random_cover(&i.query, &mut rng);
        let d = build_ceg_d(&i.query, cat, &cover).expect("CEG_D");
        let all = all_path_products(&d);
        paths += all.len();
        bad += all.iter().filter(|w| **w < molp).count();
        covers += 1;
    }
    outcome(covers >= 50 && bad == 0, format!("{covers} covers, {paths} CEG_D paths, {bad} below the MOLP bound"))
}

fn c8_triangle() -> Outcome {
    let g = identity_graph(100);
    let q = triangle();
    let truth = count_hom(&g, &q);
    let cat = catalogue(&g, &q, 2);
    let molp = estimate_molp(&q, &cat).expect("molp");
    let d = |l: &str| g.relation(l).max_degree(Position::Src) as u64;
    let cover = d("R") * d("S") * d("T");
    let pass = truth == 100 && molp.exact >= big(100) && cover == 1;
    outcome(pass, format!("true {truth}, MOLP {}, cyclic cover product {cover} < {truth}", molp.exact))
}

fn c10_sketch() -> Outcome {
    let config = CatalogueConfig::default();
    let mut sketched = 0;
    let mut rows = 0;
    let mut additive = 0;
    let mut bounded = 0;
    let mut not_better = Vec::new();
    let mut below_truth = 0;
    let mut seed = 10010;
    while sketched < 100 {
        let batch = instances(seed, 40, 3..=6, 7);
        seed += 1;
        let results = ceg_core::exec::map(&batch, |i| {
            let cat = catalogue(&i.graph, &i.query, 2);
            let truth = count_hom(&i.graph, &i.query);
            let m = build_ceg_m(&i.query, &cat, false).unwrap();
            let path = min_weight_path(&m).unwrap();
            let s = sketch_attrs(&i.query, &classify_edges(&m, &i.query, &path));
            let mut out = Vec::new();
            for k in [4u64, 16] {
                if s.is_empty() || per_attr_parts(k, s.len()).is_err() {
                    continue;
                }
                let (_, comps) = make_sketch(&i.query, &i.graph, &m, &path, k, config.seed).unwrap();
                let sum: u64 = comps.iter().map(|c| count_hom(&c.graph, &c.query)).sum();
                let est = estimate_with_sketch_cat(&i.query, &i.graph, &cat, k, SketchBase::Molp, &config).unwrap();
                out.push((k, sum == truth, est.estimate.exact.clone() >= big(truth), est.estimate.exact <= est.base.exact, i.query.to_string()));
            }
            out
        });
        for found in results {
            if found.is_empty() {
                continue;
            }
            sketched += 1;
            for (k, add, safe, better, q) in found {
                rows += 1;
                additive += usize::from(add);
                below_truth += usize::from(!safe);
                if safe && better {
                    bounded += 1;
                } else if !better {
                    not_better.push(format!("K={k} {}", q.replace('\n', "; ")));
                }
            }
        }
    }
    let pass = additive == rows && bounded == rows;
    let mut detail = format!(
        "{sketched} instances, {rows} sketches: {additive} additive, {bounded} within [true, unsketched], {below_truth} below true, {} above unsketched",
        not_better.len()
    );
    if let Some(first) = not_better.first() {
        detail.push_str(&format!("; e.g. {first}"));
    }
    outcome(pass, detail)
}

fn c11_summary_fixture() -> Outcome {
    let v = [
        -1.25, 0.25, 0.0, 2.5, -0.375, 0.875, 0.125, -2.25, 1.125, 0.375, -0.125, 3.75, 0.625, -0.75, 0.0, 1.75, -0.0625,
        0.5, -5.0, 0.75,
    ];
    let s = summarize_values(&v);
    let want = QErrorSummary {
        n: 20,
        p25: Some(-0.1875),
        p50: Some(0.1875),
        p75: Some(0.78125),
        trimmed_mean: Some(0.22569444444444445),
        zero_estimates: 0,
        invalid: 0,
        failed: 0,
    };
    outcome(
        s == want,
        format!(
            "p25 {:?} p50 {:?} p75 {:?} trimmed {:?}",
            s.p25.unwrap(),
            s.p50.unwrap(),
            s.p75.unwrap(),
            s.trimmed_mean.unwrap()
        ),
    )
}

fn table(res: &ceg_core::eval::RunResult, methods: &[Method]) -> String {
    let mut s = String::from("      method                          n      p25      p50      p75  trimmed zero failed\n");
    for m in methods {
        let r = &res.summary.methods[&m.to_string()];
        let f = |x: Option<f64>| x.map_or("       -".into(), |v| format!("{v:8.3}"));
        s.push_str(&format!(
            "      {:<30} {:>3} {} {} {} {} {:>4} {:>6}\n",
            m.to_string(),
            r.n,
            f(r.p25),
            f(r.p50),
            f(r.p75),
            f(r.trimmed_mean),
            r.zero_estimates,
            r.failed
        ));
    }
    s
}

fn c12_informational() -> Outcome {
    let g = correlated_graph(1212, 9000, 250, 600);
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let acyclic: Vec<NamedQuery> = (3..=4)
        .map(|m| NamedQuery {
            id: format!("acyclic{m}"),
            template: format!("acyclic{m}"),
            query: random_template(&mut rng, m, false),
        })
        .collect();
    let wl = generate_workload(&g, &acyclic, 15, 1212, InstantiateMode::EdgeAtATime, None);
    let o_methods: Vec<Method> = HeuristicChoice::all()
        .into_iter()
        .map(|choice| Method::Optimistic {
            kind: CegKind::O,
            choice,
        })
        .collect();
    let config = RunConfig::default();
    let a = run_workload(&g, &wl, &o_methods, &config).expect("acyclic run");
    let best = o_methods
        .iter()
        .min_by(|x, y| {
            let t = |m: &Method| a.summary.methods[&m.to_string()].trimmed_mean.unwrap_or(f64::INFINITY).abs();
            t(x).total_cmp(&t(y))
        })
        .unwrap();

    let square = NamedQuery {
        id: "cycle4".into(),
        template: "cycle4".into(),
        query: parse_template("a -?-> b\nb -?-> c\nc -?-> d\nd -?-> a\n").unwrap(),
    };
    let cyc = generate_workload(&g, &[square], 15, 1313, InstantiateMode::EdgeAtATime, None);
    let c_methods = vec![
        Method::Optimistic {
            kind: CegKind::O,
            choice: HeuristicChoice::new(Hop::MinHop, Aggr::Min),
        },
        Method::Optimistic {
            kind: CegKind::Ocr,
            choice: HeuristicChoice::new(Hop::MaxHop, Aggr::Max),
        },
    ];
    let b = run_workload(&g, &cyc, &c_methods, &config).expect("cyclic run");
    let detail = format!(
        "graph {} edges; (a) {} acyclic queries, best trimmed mean: {best}\n{}      (b) {} 4-cycle queries\n{}",
        g.num_edges(),
        wl.len(),
        table(&a, &o_methods),
        cyc.len(),
        table(&b, &c_methods)
    );
    outcome(g.num_edges() >= 10_000, detail)
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 fixture F1 arithmetic", Duration::from_secs(1), c1_fixture_arithmetic),
        ("2 path-product arithmetic", Duration::from_secs(1), c2_path_products),
        ("3 fork-query path count", Duration::from_secs(1), c3_fork_paths),
        ("4 MOLP safety", Duration::from_secs(120), c4_molp_safety),
        ("5 min-path consistency", Duration::from_secs(60), c5_min_path_consistency),
        ("6 projection-edge elimination", Duration::from_secs(60), c6_projection),
        ("7 CEG_D dominance", Duration::from_secs(60), c7_cover_dominance),
        ("8 triangle counterexample", Duration::from_secs(1), c8_triangle),
        ("9 aggregator and P* orderings", Duration::from_secs(120), c9_orderings),
        ("10 bound-sketch correctness", Duration::from_secs(120), c10_sketch),
        ("11 evaluation math fixture", Duration::from_secs(1), c11_summary_fixture),
        ("12 informational trend run", Duration::from_secs(300), c12_informational),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, limit, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let t = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f));
        let elapsed = t.elapsed();
        let (pass, detail) = match res {
            Ok(o) => (o.pass && elapsed <= limit, o.detail),
            Err(p) => {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        failed += usize::from(!pass);
        println!(
            "{} criterion {name}: {detail} [{:.2}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
