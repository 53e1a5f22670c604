//! q-error records and summaries, and workload runs over several methods.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::catalogue::{build_catalogue, Catalogue, CatalogueConfig, PatternSource};
use crate::ceg::{path_count, CegKind};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_all_heuristics, molp_on, optimistic_ceg, pstar_on, Estimate, HeuristicChoice,
};
use crate::exec;
use crate::graph::LabeledGraph;
use crate::oracle::count_hom;
use crate::query::{NamedQuery, QueryGraph};
use crate::sketch::{estimate_with_sketch_cat, SketchBase};

/// Exact q-error `max(c/e, e/c)`; `ratio` is `None` for `e = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct QError {
    pub ratio: Option<BigRational>,
    pub underestimate: bool,
}

pub fn qerror_exact(c: u64, e: &BigRational) -> Result<QError> {
    if c == 0 {
        return Err(Error::Validation("true count is 0; q-error undefined".into()));
    }
    let c = BigRational::from_integer(c.into());
    if e.is_zero() {
        return Ok(QError {
            ratio: None,
            underestimate: true,
        });
    }
    let under = *e < c;
    let ratio = if under { &c / e } else { e / &c };
    Ok(QError {
        ratio: Some(ratio),
        underestimate: under,
    })
}

/// `(qerror, signedLog)` in base 10; `e = 0` gives `(inf, -inf)`.
pub fn qerror(c: u64, e: f64) -> Result<(f64, f64)> {
    if c == 0 {
        return Err(Error::Validation("true count is 0; q-error undefined".into()));
    }
    if e.is_nan() || e < 0.0 {
        return Err(Error::Validation(format!("estimate {e} is negative or NaN")));
    }
    let c = c as f64;
    if e == 0.0 {
        return Ok((f64::INFINITY, f64::NEG_INFINITY));
    }
    let q = (c / e).max(e / c);
    let l = q.log10();
    Ok((q, if e < c { -l } else { l }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Optimistic { kind: CegKind, choice: HeuristicChoice },
    PStar { kind: CegKind },
    Molp,
}

impl Method {
    pub fn all() -> Vec<Method> {
        let mut out = Vec::new();
        for kind in [CegKind::O, CegKind::Ocr] {
            out.extend(HeuristicChoice::all().map(|choice| Method::Optimistic { kind, choice }));
        }
        out.push(Method::PStar { kind: CegKind::O });
        out.push(Method::PStar { kind: CegKind::Ocr });
        out.push(Method::Molp);
        out
    }

    /// Comma-separated names: `all`, `O`, `OCR`, `pstar`, `molp`,
    /// `O/max-hop-max`, `pstar/OCR`, ...
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out: Vec<Method> = Vec::new();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let add: Vec<Method> = match tok.to_ascii_lowercase().as_str() {
                "all" => Method::all(),
                "o" | "ocr" => {
                    let kind: CegKind = tok.parse().map_err(Error::Config)?;
                    HeuristicChoice::all()
                        .map(|choice| Method::Optimistic { kind, choice })
                        .to_vec()
                }
                "pstar" => vec![Method::PStar { kind: CegKind::O }, Method::PStar { kind: CegKind::Ocr }],
                _ => vec![tok.parse().map_err(Error::Config)?],
            };
            for m in add {
                if !out.contains(&m) {
                    out.push(m);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::Config("no methods given".into()));
        }
        Ok(out)
    }

    pub fn ceg_kind(&self) -> CegKind {
        match *self {
            Method::Optimistic { kind, .. } | Method::PStar { kind } => kind,
            Method::Molp => CegKind::M,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Optimistic { kind, choice } => write!(f, "{kind}/{choice}"),
            Method::PStar { kind } => write!(f, "pstar/{kind}"),
            Method::Molp => f.write_str("molp"),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("molp") {
            return Ok(Method::Molp);
        }
        let (a, b) = s.split_once('/').ok_or_else(|| format!("unknown method {s:?}"))?;
        if a.eq_ignore_ascii_case("pstar") {
            let kind: CegKind = b.parse()?;
            if !matches!(kind, CegKind::O | CegKind::Ocr) {
                return Err(format!("pstar needs CEG O or OCR, got {kind}"));
            }
            return Ok(Method::PStar { kind });
        }
        let kind: CegKind = a.parse()?;
        if !matches!(kind, CegKind::O | CegKind::Ocr) {
            return Err(format!("heuristics need CEG O or OCR, got {kind}"));
        }
        Ok(Method::Optimistic {
            kind,
            choice: b.parse()?,
        })
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct QErrorRecord {
    pub query_id: String,
    pub template: String,
    pub method: String,
    pub ceg_kind: String,
    pub hop: String,
    pub aggr: String,
    pub sketch_k: u64,
    pub true_count: u64,
    pub estimate: Option<f64>,
    pub qerror: Option<f64>,
    pub signed_log: Option<f64>,
    pub elapsed_ms: f64,
}

impl QErrorRecord {
    pub fn is_zero_estimate(&self) -> bool {
        self.estimate == Some(0.0) && self.true_count > 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct QErrorSummary {
    /// Records with a finite signed log.
    pub n: usize,
    pub p25: Option<f64>,
    pub p50: Option<f64>,
    pub p75: Option<f64>,
    pub trimmed_mean: Option<f64>,
    pub zero_estimates: usize,
    /// Records with a true count of 0.
    pub invalid: usize,
    /// Rows whose estimator failed.
    pub failed: usize,
}

/// Percentile by linear interpolation between closest ranks of sorted data.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = p * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summary of finite signed-log values.
pub fn summarize_values(values: &[f64]) -> QErrorSummary {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    let zero = values.len() - v.len();
    let n = v.len();
    let mut s = QErrorSummary {
        n,
        p25: None,
        p50: None,
        p75: None,
        trimmed_mean: None,
        zero_estimates: zero,
        invalid: 0,
        failed: 0,
    };
    if n == 0 {
        return s;
    }
    v.sort_by(f64::total_cmp);
    s.p25 = Some(percentile(&v, 0.25));
    s.p50 = Some(percentile(&v, 0.50));
    s.p75 = Some(percentile(&v, 0.75));
    // drop the largest magnitudes; among equal magnitudes the overestimate goes first
    let mut by_mag = v.clone();
    by_mag.sort_by(|a, b| b.abs().total_cmp(&a.abs()).then(b.total_cmp(a)));
    let keep = &by_mag[n / 10..];
    s.trimmed_mean = Some(keep.iter().sum::<f64>() / keep.len() as f64);
    s
}

pub fn summarize(records: &[QErrorRecord]) -> QErrorSummary {
    let logs: Vec<f64> = records.iter().filter_map(|r| r.signed_log).collect();
    let mut s = summarize_values(&logs);
    s.invalid = records.iter().filter(|r| r.true_count == 0).count();
    s.failed = records
        .iter()
        .filter(|r| r.true_count > 0 && r.estimate.is_none())
        .count();
    s
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub catalogue: CatalogueConfig,
    pub sketch_k: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            catalogue: CatalogueConfig::default(),
            sketch_k: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryMeta {
    pub query_id: String,
    pub template: String,
    pub true_count: u64,
    pub edges: usize,
    pub paths_o: Option<u128>,
    pub paths_ocr: Option<u128>,
    pub overlapping_cycles: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Failure {
    pub query_id: String,
    pub method: String,
    pub error: String,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunSummary {
    pub h: usize,
    pub seed: u64,
    pub walk_budget: usize,
    pub sketch_k: u64,
    pub graph_vertices: usize,
    pub graph_edges: usize,
    pub graph_fingerprint: String,
    pub catalogue_bytes: usize,
    pub queries: usize,
    pub methods: BTreeMap<String, QErrorSummary>,
    pub templates: BTreeMap<String, BTreeMap<String, QErrorSummary>>,
    pub query_meta: Vec<QueryMeta>,
    pub failures: Vec<Failure>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub records: Vec<QErrorRecord>,
    pub summary: RunSummary,
}

impl RunResult {
    pub fn records_for(&self, method: &str) -> impl Iterator<Item = &QErrorRecord> {
        let m = method.to_string();
        self.records.iter().filter(move |r| r.method == m)
    }
}

/// The catalogue a run needs: degree statistics only for MOLP, closing
/// rates only for CEG_OCR.
pub fn workload_catalogue(g: &LabeledGraph, queries: &[QueryGraph], methods: &[Method], config: &CatalogueConfig) -> Result<Catalogue> {
    let config = CatalogueConfig {
        deg_stats: config.deg_stats && methods.contains(&Method::Molp),
        closing_rates: config.closing_rates && methods.iter().any(|m| m.ceg_kind() == CegKind::Ocr),
        ..*config
    };
    build_catalogue(g, PatternSource::Workload(queries), config)
}

/// Runs every method on every query. Estimator failures become rows
/// without an estimate plus an entry in `failures`.
pub fn run_workload(g: &LabeledGraph, workload: &[NamedQuery], methods: &[Method], config: &RunConfig) -> Result<RunResult> {
    let queries: Vec<QueryGraph> = workload.iter().map(|n| n.query.clone()).collect();
    let cat = workload_catalogue(g, &queries, methods, &config.catalogue)?;
    run_workload_with(g, workload, methods, config, &cat)
}

struct QueryOutcome {
    records: Vec<QErrorRecord>,
    meta: QueryMeta,
    failures: Vec<Failure>,
}

fn record(nq: &NamedQuery, method: Method, sketch_k: u64, c: u64, est: Option<&Estimate>, ms: f64) -> QErrorRecord {
    let (hop, aggr) = match method {
        Method::Optimistic { choice, .. } => (choice.hop.to_string(), choice.aggr.to_string()),
        _ => (String::new(), String::new()),
    };
    let e = est.map(|e| e.value);
    let qe = e.and_then(|e| qerror(c, e).ok());
    QErrorRecord {
        query_id: nq.id.clone(),
        template: nq.template.clone(),
        method: method.to_string(),
        ceg_kind: method.ceg_kind().to_string(),
        hop,
        aggr,
        sketch_k,
        true_count: c,
        estimate: e,
        qerror: qe.map(|x| x.0),
        signed_log: qe.map(|x| x.1),
        elapsed_ms: ms,
    }
}

fn run_query(g: &LabeledGraph, nq: &NamedQuery, methods: &[Method], config: &RunConfig, cat: &Catalogue) -> QueryOutcome {
    let q = &nq.query;
    let c = count_hom(g, q);
    let mut out = QueryOutcome {
        records: Vec::new(),
        meta: QueryMeta {
            query_id: nq.id.clone(),
            template: nq.template.clone(),
            true_count: c,
            edges: q.num_edges(),
            paths_o: None,
            paths_ocr: None,
            overlapping_cycles: false,
        },
        failures: Vec::new(),
    };
    let sketched = config.sketch_k > 1;
    for kind in [CegKind::O, CegKind::Ocr] {
        let wanted: Vec<Method> = methods.iter().copied().filter(|m| m.ceg_kind() == kind).collect();
        if wanted.is_empty() {
            continue;
        }
        let t0 = Instant::now();
        let built = optimistic_ceg(q, cat, kind);
        let build_ms = t0.elapsed().as_secs_f64() * 1e3;
        let ceg = match built {
            Ok(ceg) => ceg,
            Err(e) => {
                for m in wanted {
                    out.records.push(record(nq, m, 1, c, None, build_ms));
                    out.failures.push(Failure {
                        query_id: nq.id.clone(),
                        method: m.to_string(),
                        error: e.to_string(),
                    });
                }
                continue;
            }
        };
        let paths = path_count(&ceg).ok();
        match kind {
            CegKind::O => out.meta.paths_o = paths,
            _ => out.meta.paths_ocr = paths,
        }
        out.meta.overlapping_cycles |= ceg.overlapping_cycles;

        let t1 = Instant::now();
        let heuristics = estimate_all_heuristics(&ceg);
        let heur_ms = build_ms + t1.elapsed().as_secs_f64() * 1e3;
        for m in wanted {
            let t2 = Instant::now();
            let (res, k, ms): (Result<Estimate>, u64, f64) = match m {
                Method::Optimistic { choice, .. } if sketched => {
                    let r = estimate_with_sketch_cat(q, g, cat, config.sketch_k, SketchBase::Optimistic { kind, choice }, &config.catalogue)
                        .map(|s| s.estimate);
                    (r, config.sketch_k, t2.elapsed().as_secs_f64() * 1e3)
                }
                Method::Optimistic { choice, .. } => {
                    let r = match &heuristics {
                        Ok(all) => Ok(all.iter().find(|(ch, _)| *ch == choice).expect("all nine").1.clone()),
                        Err(e) => Err(Error::Unreachable(e.to_string())),
                    };
                    (r, 1, heur_ms)
                }
                Method::PStar { .. } => {
                    let r = pstar_on(&ceg, c);
                    (r, 1, build_ms + t2.elapsed().as_secs_f64() * 1e3)
                }
                Method::Molp => unreachable!("filtered by kind"),
            };
            push(&mut out, nq, m, k, c, res, ms);
        }
    }
    if methods.contains(&Method::Molp) {
        let t = Instant::now();
        let res = if sketched {
            estimate_with_sketch_cat(q, g, cat, config.sketch_k, SketchBase::Molp, &config.catalogue).map(|s| s.estimate)
        } else {
            crate::ceg::build_ceg_m(q, cat, false).and_then(|ceg| molp_on(&ceg))
        };
        let ms = t.elapsed().as_secs_f64() * 1e3;
        push(&mut out, nq, Method::Molp, config.sketch_k, c, res, ms);
    }
    out
}

fn push(out: &mut QueryOutcome, nq: &NamedQuery, m: Method, k: u64, c: u64, res: Result<Estimate>, ms: f64) {
    match res {
        Ok(e) => out.records.push(record(nq, m, k, c, Some(&e), ms)),
        Err(e) => {
            out.records.push(record(nq, m, k, c, None, ms));
            out.failures.push(Failure {
                query_id: nq.id.clone(),
                method: m.to_string(),
                error: e.to_string(),
            });
        }
    }
}

/// As [`run_workload`] with a prebuilt catalogue.
pub fn run_workload_with(
    g: &LabeledGraph,
    workload: &[NamedQuery],
    methods: &[Method],
    config: &RunConfig,
    cat: &Catalogue,
) -> Result<RunResult> {
    if config.sketch_k == 0 {
        return Err(Error::Sketch("K must be positive".into()));
    }
    let outcomes = exec::map(workload, |nq| run_query(g, nq, methods, config, cat));
    let mut records = Vec::new();
    let mut query_meta = Vec::new();
    let mut failures = Vec::new();
    let mut warnings = Vec::new();
    for o in outcomes {
        if o.meta.true_count == 0 {
            warnings.push(format!("query {} has no matches; its records are excluded", o.meta.query_id));
        }
        records.extend(o.records);
        query_meta.push(o.meta);
        failures.extend(o.failures);
    }
    let mut methods_map = BTreeMap::new();
    let mut templates: BTreeMap<String, BTreeMap<String, QErrorSummary>> = BTreeMap::new();
    for m in methods {
        let name = m.to_string();
        let rs: Vec<QErrorRecord> = records.iter().filter(|r| r.method == name).cloned().collect();
        methods_map.insert(name.clone(), summarize(&rs));
        let mut by_t: BTreeMap<&str, Vec<QErrorRecord>> = BTreeMap::new();
        for r in &rs {
            by_t.entry(r.template.as_str()).or_default().push(r.clone());
        }
        for (t, rs) in by_t {
            templates.entry(t.to_string()).or_default().insert(name.clone(), summarize(&rs));
        }
    }
    let summary = RunSummary {
        h: cat.h(),
        seed: config.catalogue.seed,
        walk_budget: config.catalogue.walk_budget,
        sketch_k: config.sketch_k,
        graph_vertices: g.num_vertices(),
        graph_edges: g.num_edges(),
        graph_fingerprint: g.fingerprint(),
        catalogue_bytes: cat.approx_bytes(),
        queries: workload.len(),
        methods: methods_map,
        templates,
        query_meta,
        failures,
        warnings,
    };
    Ok(RunResult { records, summary })
}

/// Writes records as CSV with a header row.
pub fn write_csv<W: Write>(records: &[QErrorRecord], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(summary: &RunSummary, mut sink: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut sink, summary)?;
    sink.write_all(b"\n")?;
    Ok(())
}
