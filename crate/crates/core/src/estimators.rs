//! Estimators over CEGs: the nine optimistic heuristics, the P* oracle and
//! the MOLP bound.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::catalogue::Catalogue;
use crate::ceg::{
    build_ceg_m, build_ceg_o, build_ceg_ocr, min_weight_path, path_stats, pstar_path, to_f64, Ceg, CegKind,
    PathEstimate, PathStats,
};
use crate::error::{Error, Result};
use crate::query::QueryGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Hop {
    MaxHop,
    MinHop,
    AllHops,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Aggr {
    Max,
    Min,
    Avg,
}

impl fmt::Display for Hop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hop::MaxHop => "max-hop",
            Hop::MinHop => "min-hop",
            Hop::AllHops => "all-hops",
        })
    }
}

impl fmt::Display for Aggr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggr::Max => "max-aggr",
            Aggr::Min => "min-aggr",
            Aggr::Avg => "avg-aggr",
        })
    }
}

impl FromStr for Hop {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "max-hop" => Ok(Hop::MaxHop),
            "min-hop" => Ok(Hop::MinHop),
            "all-hops" | "all-hop" => Ok(Hop::AllHops),
            _ => Err(format!("unknown hop filter {s:?}")),
        }
    }
}

impl FromStr for Aggr {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.strip_suffix("-aggr").unwrap_or(s) {
            "max" => Ok(Aggr::Max),
            "min" => Ok(Aggr::Min),
            "avg" => Ok(Aggr::Avg),
            _ => Err(format!("unknown aggregator {s:?}")),
        }
    }
}

/// A path-length filter plus an aggregator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HeuristicChoice {
    pub hop: Hop,
    pub aggr: Aggr,
}

impl HeuristicChoice {
    pub const fn new(hop: Hop, aggr: Aggr) -> Self {
        HeuristicChoice { hop, aggr }
    }

    pub fn all() -> [HeuristicChoice; 9] {
        let mut out = [HeuristicChoice::new(Hop::MaxHop, Aggr::Max); 9];
        let mut i = 0;
        for hop in [Hop::MaxHop, Hop::MinHop, Hop::AllHops] {
            for aggr in [Aggr::Max, Aggr::Min, Aggr::Avg] {
                out[i] = HeuristicChoice::new(hop, aggr);
                i += 1;
            }
        }
        out
    }
}

impl fmt::Display for HeuristicChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.hop, self.aggr)
    }
}

impl FromStr for HeuristicChoice {
    type Err = String;

    /// `max-hop-max`, `all-hops-avg-aggr`, ...
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.strip_suffix("-aggr").unwrap_or(s);
        let (hop, aggr) = s.rsplit_once('-').ok_or_else(|| format!("bad heuristic {s:?}"))?;
        Ok(HeuristicChoice::new(hop.parse()?, aggr.parse()?))
    }
}

/// How avg-aggr averages path estimates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AvgMode {
    #[default]
    Arithmetic,
    Geometric,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    /// Exact value. For the geometric mean this is the rounded decimal.
    pub exact: BigRational,
    pub value: f64,
    pub method: String,
    pub considered_paths: u128,
    pub chosen_path: Option<PathEstimate>,
    pub ceg_kind: CegKind,
    pub overlapping_cycles: bool,
}

impl Estimate {
    fn new(exact: BigRational, method: String, considered: u128, path: Option<PathEstimate>, ceg: &Ceg) -> Self {
        Estimate {
            value: to_f64(&exact),
            exact,
            method,
            considered_paths: considered,
            chosen_path: path,
            ceg_kind: ceg.kind,
            overlapping_cycles: ceg.overlapping_cycles,
        }
    }
}

/// Builds CEG_O or CEG_OCR.
pub fn optimistic_ceg(q: &QueryGraph, cat: &Catalogue, kind: CegKind) -> Result<Ceg> {
    match kind {
        CegKind::O => build_ceg_o(q, cat),
        CegKind::Ocr => build_ceg_ocr(q, cat),
        other => Err(Error::Config(format!("CEG_{other} is not an optimistic CEG"))),
    }
}

pub fn method_name(kind: CegKind, choice: HeuristicChoice) -> String {
    format!("{kind}/{choice}")
}

/// Applies one heuristic to precomputed path aggregates.
pub fn aggregate(ceg: &Ceg, stats: &PathStats, choice: HeuristicChoice, avg: AvgMode) -> Result<Estimate> {
    let top = stats.at_top();
    let hops: Vec<usize> = match choice.hop {
        Hop::MaxHop => top.keys().next_back().copied().into_iter().collect(),
        Hop::MinHop => top.keys().next().copied().into_iter().collect(),
        Hop::AllHops => top.keys().copied().collect(),
    };
    if hops.is_empty() {
        return Err(Error::Unreachable("no bottom-to-top path".into()));
    }
    let considered = hops.iter().fold(0u128, |a, h| a.saturating_add(top[h].count));
    let method = method_name(ceg.kind, choice);
    let est = match choice.aggr {
        Aggr::Max | Aggr::Min => {
            let want_max = choice.aggr == Aggr::Max;
            // on ties, the fewer-hop path
            let mut best = hops[0];
            for &h in &hops[1..] {
                let better = if want_max {
                    top[&h].max > top[&best].max
                } else {
                    top[&h].min < top[&best].min
                };
                if better {
                    best = h;
                }
            }
            let path = if want_max {
                stats.max_path(ceg, best)
            } else {
                stats.min_path(ceg, best)
            };
            Estimate::new(path.estimate.clone(), method, considered, Some(path), ceg)
        }
        Aggr::Avg => match avg {
            AvgMode::Arithmetic => {
                let sum = hops
                    .iter()
                    .fold(BigRational::zero(), |a, h| a + &top[h].sum);
                let mean = sum / BigRational::from_integer(BigInt::from(considered));
                Estimate::new(mean, method, considered, None, ceg)
            }
            AvgMode::Geometric => {
                let logs: Option<f64> = hops.iter().map(|h| top[h].log_sum).sum();
                let value = match logs {
                    Some(l) => (l / considered as f64).exp2(),
                    None => 0.0,
                };
                let exact = BigRational::from_float(value).unwrap_or_else(BigRational::zero);
                let mut e = Estimate::new(exact, format!("{method}/geo"), considered, None, ceg);
                e.value = value;
                e
            }
        },
    };
    Ok(est)
}

/// One optimistic estimate: hop filter, then aggregator over the filtered
/// path estimates.
pub fn estimate_optimistic(q: &QueryGraph, cat: &Catalogue, kind: CegKind, choice: HeuristicChoice) -> Result<Estimate> {
    estimate_optimistic_with(q, cat, kind, choice, AvgMode::Arithmetic)
}

pub fn estimate_optimistic_with(
    q: &QueryGraph,
    cat: &Catalogue,
    kind: CegKind,
    choice: HeuristicChoice,
    avg: AvgMode,
) -> Result<Estimate> {
    let ceg = optimistic_ceg(q, cat, kind)?;
    let stats = path_stats(&ceg)?;
    aggregate(&ceg, &stats, choice, avg)
}

/// All nine heuristics from a single pass over the CEG.
pub fn estimate_all_heuristics(ceg: &Ceg) -> Result<Vec<(HeuristicChoice, Estimate)>> {
    let stats = path_stats(ceg)?;
    HeuristicChoice::all()
        .into_iter()
        .map(|c| aggregate(ceg, &stats, c, AvgMode::Arithmetic).map(|e| (c, e)))
        .collect()
}

/// The path an oracle would pick: least q-error against `true_count`.
pub fn estimate_pstar(q: &QueryGraph, cat: &Catalogue, kind: CegKind, true_count: u64) -> Result<Estimate> {
    let ceg = optimistic_ceg(q, cat, kind)?;
    pstar_on(&ceg, true_count)
}

pub fn pstar_on(ceg: &Ceg, true_count: u64) -> Result<Estimate> {
    let considered = crate::ceg::path_count(ceg)?;
    let path = pstar_path(ceg, true_count)?;
    Ok(Estimate::new(
        path.estimate.clone(),
        format!("pstar/{}", ceg.kind),
        considered,
        Some(path),
        ceg,
    ))
}

/// The MOLP bound: the minimum-weight path of CEG_M.
pub fn estimate_molp(q: &QueryGraph, cat: &Catalogue) -> Result<Estimate> {
    let ceg = build_ceg_m(q, cat, false)?;
    molp_on(&ceg)
}

pub fn molp_on(ceg: &Ceg) -> Result<Estimate> {
    let path = min_weight_path(ceg)?;
    Ok(Estimate::new(path.estimate.clone(), "molp".into(), 1, Some(path), ceg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalogue::{build_catalogue, CatalogueConfig, PatternSource};
    use crate::fixtures;
    use crate::oracle::count_hom;
    use crate::query::parse_query;

    fn cat(g: &crate::graph::LabeledGraph, q: &QueryGraph, h: usize) -> Catalogue {
        let config = CatalogueConfig {
            h,
            ..Default::default()
        };
        build_catalogue(g, PatternSource::Workload(std::slice::from_ref(q)), config).unwrap()
    }

    #[test]
    fn choice_names_round_trip() {
        for c in HeuristicChoice::all() {
            assert_eq!(c.to_string().parse::<HeuristicChoice>().unwrap(), c);
        }
        assert_eq!(
            "all-hops-avg".parse::<HeuristicChoice>().unwrap(),
            HeuristicChoice::new(Hop::AllHops, Aggr::Avg)
        );
    }

    #[test]
    fn f1_every_heuristic_gives_six() {
        let g = fixtures::f1_graph();
        let q = fixtures::q3p();
        let c = cat(&g, &q, 2);
        for kind in [CegKind::O, CegKind::Ocr] {
            for choice in HeuristicChoice::all() {
                let e = estimate_optimistic(&q, &c, kind, choice).unwrap();
                assert_eq!(e.exact, BigRational::from_integer(6.into()), "{kind} {choice}");
            }
        }
    }

    #[test]
    fn single_edge_is_exact() {
        let g = fixtures::random_graph(3, 50, 200, 3);
        let q = parse_query("x -B-> y").unwrap();
        let c = cat(&g, &q, 2);
        let n = g.relation("B").len() as u64;
        let e = estimate_optimistic(&q, &c, CegKind::O, HeuristicChoice::new(Hop::MinHop, Aggr::Avg)).unwrap();
        assert_eq!(e.exact, BigRational::from_integer(n.into()));
        assert_eq!(estimate_molp(&q, &c).unwrap().exact, BigRational::from_integer(n.into()));
        assert_eq!(estimate_pstar(&q, &c, CegKind::O, n).unwrap().exact, BigRational::from_integer(n.into()));
    }

    #[test]
    fn fork_aggregators_ordered() {
        let g = fixtures::random_graph(11, 40, 400, 5);
        let q = fixtures::q5f();
        let c = cat(&g, &q, 2);
        let ceg = optimistic_ceg(&q, &c, CegKind::O).unwrap();
        let all = estimate_all_heuristics(&ceg).unwrap();
        for hop in [Hop::MaxHop, Hop::MinHop, Hop::AllHops] {
            let get = |a| &all.iter().find(|(ch, _)| *ch == HeuristicChoice::new(hop, a)).unwrap().1.exact;
            assert!(get(Aggr::Min) <= get(Aggr::Avg));
            assert!(get(Aggr::Avg) <= get(Aggr::Max));
        }
        let truth = count_hom(&g, &q);
        let molp = estimate_molp(&q, &c).unwrap();
        assert!(molp.exact >= BigRational::from_integer(truth.into()));
    }

    #[test]
    fn geometric_mean_between_min_and_max() {
        let g = fixtures::random_graph(12, 30, 300, 4);
        let q = fixtures::q5f();
        let c = cat(&g, &q, 2);
        let ch = HeuristicChoice::new(Hop::AllHops, Aggr::Avg);
        let geo = estimate_optimistic_with(&q, &c, CegKind::O, ch, AvgMode::Geometric).unwrap();
        let lo = estimate_optimistic(&q, &c, CegKind::O, HeuristicChoice::new(Hop::AllHops, Aggr::Min)).unwrap();
        let hi = estimate_optimistic(&q, &c, CegKind::O, HeuristicChoice::new(Hop::AllHops, Aggr::Max)).unwrap();
        assert!(geo.value >= lo.value * (1.0 - 1e-9) && geo.value <= hi.value * (1.0 + 1e-9));
    }

    #[test]
    fn molp_rejects_optimistic_kind_confusion() {
        let g = fixtures::f1_graph();
        let q = fixtures::q3p();
        let c = cat(&g, &q, 2);
        assert!(optimistic_ceg(&q, &c, CegKind::M).is_err());
    }
}
