//! Cardinality estimation graphs.
//!
//! A CEG's vertices are subqueries (edge subsets for the optimistic kinds,
//! variable subsets for the pessimistic ones) and its edges carry extension
//! rates. Each bottom-to-top path is an estimate: the product of its rates.

mod molp;
mod optimistic;
mod paths;

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{ToPrimitive, Zero};

pub use molp::{build_ceg_d, build_ceg_m, CoverEntry};
pub use optimistic::{build_ceg_o, build_ceg_ocr};
pub use paths::{
    enumerate_paths, enumerate_paths_capped, first_path, for_each_path, min_weight_path, path_count, path_stats, pstar_path,
    HopStats, PathStats, DEFAULT_PATH_CAP,
};

use crate::bits::{EdgeSet, VarSet};
use crate::catalogue::{ClosingKey, PatternKey};
use crate::query::QueryGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CegKind {
    /// Average-degree rates from the Markov table.
    O,
    /// As `O`, with cycle-closing rates on hops that close long cycles.
    Ocr,
    /// Max-degree rates; the minimum path is the MOLP bound.
    M,
    /// Max-degree rates restricted to one cover's constraints.
    D,
}

impl fmt::Display for CegKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CegKind::O => "O",
            CegKind::Ocr => "OCR",
            CegKind::M => "M",
            CegKind::D => "D",
        })
    }
}

impl std::str::FromStr for CegKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "O" => Ok(CegKind::O),
            "OCR" => Ok(CegKind::Ocr),
            "M" => Ok(CegKind::M),
            "D" => Ok(CegKind::D),
            _ => Err(format!("unknown CEG kind {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CegVertex {
    Edges(EdgeSet),
    Vars(VarSet),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Start,
    Extension,
    Projection,
    CycleClosing,
    Unbound,
    Bound,
}

/// The statistic an edge's rate came from.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// `counts[extended] / counts[intersection]`; the start edge has no
    /// intersection.
    Markov {
        extended: EdgeSet,
        extended_key: PatternKey,
        intersection: EdgeSet,
        intersection_key: Option<PatternKey>,
    },
    /// `deg(X, Y, P)` for the pattern spanned by `pattern`.
    Degree {
        pattern: EdgeSet,
        key: PatternKey,
        x: VarSet,
        y: VarSet,
    },
    /// Closing rate for `closing` completing `cycle`.
    Closing {
        cycle: EdgeSet,
        closing: usize,
        key: ClosingKey,
    },
    Projection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CegEdge {
    pub from: usize,
    pub to: usize,
    pub rate: Ratio<u64>,
    /// `log2(rate)`; `-inf` for a zero rate.
    pub log_weight: f64,
    pub kind: EdgeKind,
    /// Index into [`Ceg::provenance`].
    pub prov: usize,
}

#[derive(Clone, Debug)]
pub struct Ceg {
    pub kind: CegKind,
    pub vertices: Vec<CegVertex>,
    pub edges: Vec<CegEdge>,
    /// Outgoing edge indices per vertex, in insertion order.
    pub out: Vec<Vec<usize>>,
    provenance: Vec<Provenance>,
    prov_index: HashMap<Provenance, usize>,
    pub bottom: usize,
    pub top: usize,
    /// Set when some hop closes more than one long cycle at once.
    pub overlapping_cycles: bool,
}

pub(crate) fn log2_rate(r: Ratio<u64>) -> f64 {
    if r.is_zero() {
        f64::NEG_INFINITY
    } else {
        (*r.numer() as f64).log2() - (*r.denom() as f64).log2()
    }
}

pub(crate) fn to_big(r: Ratio<u64>) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

/// Decimal value of an exact estimate.
pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::INFINITY)
}

impl Ceg {
    pub(crate) fn new(kind: CegKind, vertices: Vec<CegVertex>, bottom: usize, top: usize) -> Self {
        let n = vertices.len();
        Ceg {
            kind,
            vertices,
            edges: Vec::new(),
            out: vec![Vec::new(); n],
            provenance: Vec::new(),
            prov_index: HashMap::new(),
            bottom,
            top,
            overlapping_cycles: false,
        }
    }

    pub(crate) fn add_edge(&mut self, from: usize, to: usize, rate: Ratio<u64>, kind: EdgeKind, prov: Provenance) {
        let prov = match self.prov_index.get(&prov) {
            Some(&i) => i,
            None => {
                self.provenance.push(prov.clone());
                self.prov_index.insert(prov, self.provenance.len() - 1);
                self.provenance.len() - 1
            }
        };
        self.out[from].push(self.edges.len());
        self.edges.push(CegEdge {
            from,
            to,
            rate,
            log_weight: log2_rate(rate),
            kind,
            prov,
        });
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn provenance(&self, edge: usize) -> &Provenance {
        &self.provenance[self.edges[edge].prov]
    }

    pub fn vertex_index(&self, v: CegVertex) -> Option<usize> {
        self.vertices.iter().position(|&u| u == v)
    }

    pub fn vertex_label(&self, q: &QueryGraph, i: usize) -> String {
        match self.vertices[i] {
            CegVertex::Edges(s) if s.is_empty() => "∅".into(),
            CegVertex::Vars(s) if s.is_empty() => "∅".into(),
            CegVertex::Edges(s) => {
                let parts: Vec<String> = s.iter().map(|j| format!("{}:{}", j, q.edge(j).label)).collect();
                format!("{{{}}}", parts.join(","))
            }
            CegVertex::Vars(s) => {
                let parts: Vec<&str> = s.iter().map(|v| q.vars()[v].as_str()).collect();
                format!("{{{}}}", parts.join(","))
            }
        }
    }

    fn provenance_label(&self, q: &QueryGraph, p: &Provenance) -> String {
        let vars = |s: VarSet| -> String {
            let parts: Vec<&str> = s.iter().map(|v| q.vars()[v].as_str()).collect();
            format!("{{{}}}", parts.join(","))
        };
        match p {
            Provenance::Markov {
                extended_key,
                intersection_key: None,
                ..
            } => format!("|{extended_key}|"),
            Provenance::Markov {
                extended_key,
                intersection_key: Some(i),
                ..
            } => format!("|{extended_key}|/|{i}|"),
            Provenance::Degree { key, x, y, .. } => format!("deg({},{},{key})", vars(*x), vars(*y)),
            Provenance::Closing { key, .. } => format!("P({key})"),
            Provenance::Projection => "proj".into(),
        }
    }

    /// Graphviz rendering; edge labels give the rate and its statistic.
    pub fn to_dot(&self, q: &QueryGraph) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "digraph ceg_{} {{", self.kind);
        let _ = writeln!(s, "  rankdir=BT;");
        for i in 0..self.vertices.len() {
            let _ = writeln!(s, "  v{i} [label={:?}];", self.vertex_label(q, i));
        }
        for e in &self.edges {
            let label = format!("{} {}", e.rate, self.provenance_label(q, &self.provenance[e.prov]));
            let _ = writeln!(s, "  v{} -> v{} [label={:?}];", e.from, e.to, label);
        }
        s.push_str("}\n");
        s
    }
}

/// One bottom-to-top path and its estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEstimate {
    pub edges: Vec<usize>,
    pub vertices: Vec<usize>,
    /// Exact product of the rates.
    pub estimate: BigRational,
    pub log_weight: f64,
    pub hops: usize,
}

impl PathEstimate {
    pub fn from_edges(ceg: &Ceg, edges: Vec<usize>) -> Self {
        let mut vertices = vec![ceg.bottom];
        let mut estimate = BigRational::from_integer(1.into());
        let mut log_weight = 0.0;
        for &e in &edges {
            let ed = &ceg.edges[e];
            debug_assert_eq!(*vertices.last().expect("non-empty"), ed.from);
            vertices.push(ed.to);
            estimate *= to_big(ed.rate);
            log_weight += ed.log_weight;
        }
        PathEstimate {
            hops: edges.len(),
            edges,
            vertices,
            estimate,
            log_weight,
        }
    }

    pub fn value(&self) -> f64 {
        to_f64(&self.estimate)
    }
}

/// Exact product of a list of rates.
pub fn rate_product(rates: &[Ratio<u64>]) -> BigRational {
    rates
        .iter()
        .fold(BigRational::from_integer(1.into()), |acc, &r| acc * to_big(r))
}
