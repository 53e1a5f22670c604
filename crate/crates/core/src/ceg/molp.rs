//! CEG_M and CEG_D construction over variable subsets.

use num_rational::Ratio;

use super::{Ceg, CegKind, CegVertex, EdgeKind, Provenance};
use crate::bits::{EdgeSet, VarSet};
use crate::catalogue::{canonical_form, Catalogue, CanonicalForm};
use crate::error::{Error, Result};
use crate::query::{connected_edge_sets, QueryGraph};

/// Largest variable count for variable-subset CEGs.
pub const MAX_ATTR_VARS: usize = 12;

/// One cover entry: a catalogue pattern of the query and the variables of
/// it that the entry covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoverEntry {
    pub pattern: EdgeSet,
    pub vars: VarSet,
}

fn attr_ceg(q: &QueryGraph, kind: CegKind) -> Result<Ceg> {
    let n = q.num_vars();
    if n > MAX_ATTR_VARS {
        return Err(Error::Validation(format!(
            "query has {n} variables; variable-subset CEGs support at most {MAX_ATTR_VARS}"
        )));
    }
    let vertices = (0..1u32 << n).map(|b| CegVertex::Vars(VarSet(b))).collect();
    Ok(Ceg::new(kind, vertices, 0, (1usize << n) - 1))
}

fn degree(cat: &Catalogue, q: &QueryGraph, form: &CanonicalForm, pattern: EdgeSet, x: VarSet, y: VarSet) -> Result<u64> {
    cat.deg_key(&form.key, form.map_vars(x), form.map_vars(y)).ok_or_else(|| {
        let names = |s: VarSet| s.iter().map(|v| q.vars()[v].clone()).collect::<Vec<_>>().join(",");
        let sub = q.induced(pattern).map(|g| g.to_string()).unwrap_or_default();
        Error::MissingStatistic(format!("deg({{{}}}, {{{}}}) of pattern {} ({sub})", names(x), names(y), form.key))
    })
}

/// Adds `W -> W ∪ y` for every `W ⊇ x` with `W ∪ y ≠ W`.
fn add_constraint(ceg: &mut Ceg, all: VarSet, x: VarSet, y: VarSet, rate: Ratio<u64>, prov: Provenance) {
    let kind = if x.is_empty() { EdgeKind::Unbound } else { EdgeKind::Bound };
    for e in all.minus(x).subsets() {
        let w1 = x.union(e);
        let w2 = w1.union(y);
        if w2 != w1 {
            ceg.add_edge(w1.bits() as usize, w2.bits() as usize, rate, kind, prov.clone());
        }
    }
}

/// CEG_M over all subsets of the query's variables. For every connected
/// pattern `P` of at most `h` edges and every `X ⊊ Y ⊆ vars(P)`, adds
/// `W -> W ∪ Y` with rate `deg(X, Y, P)` for each `W ⊇ X`. With
/// `with_projection`, also adds rate-1 edges `Y -> X` for all `X ⊊ Y`.
pub fn build_ceg_m(q: &QueryGraph, cat: &Catalogue, with_projection: bool) -> Result<Ceg> {
    let mut ceg = attr_ceg(q, CegKind::M)?;
    let all = q.all_vars();
    for p in connected_edge_sets(q, cat.h()) {
        let form = canonical_form(q, p)?;
        let pv = q.vars_of(p);
        for y in pv.subsets().filter(|y| !y.is_empty()) {
            for x in y.subsets().filter(|&x| x != y) {
                let d = degree(cat, q, &form, p, x, y)?;
                let prov = Provenance::Degree {
                    pattern: p,
                    key: form.key.clone(),
                    x,
                    y,
                };
                add_constraint(&mut ceg, all, x, y, Ratio::from_integer(d), prov);
            }
        }
    }
    if with_projection {
        for y in all.subsets() {
            for x in y.subsets().filter(|&x| x != y) {
                ceg.add_edge(
                    y.bits() as usize,
                    x.bits() as usize,
                    Ratio::from_integer(1),
                    EdgeKind::Projection,
                    Provenance::Projection,
                );
            }
        }
    }
    Ok(ceg)
}

/// CEG_D for a cover. For each entry `(P, A)` and each `A' ⊊ A`, adds
/// `W -> W ∪ A` with rate `deg(A', A, P)` for each `W ⊇ A'`.
pub fn build_ceg_d(q: &QueryGraph, cat: &Catalogue, cover: &[CoverEntry]) -> Result<Ceg> {
    let all = q.all_vars();
    let covered = cover.iter().fold(VarSet::EMPTY, |acc, c| acc.union(c.vars));
    if covered != all {
        return Err(Error::Validation("cover does not cover every query variable".into()));
    }
    let mut ceg = attr_ceg(q, CegKind::D)?;
    for c in cover {
        if c.pattern.is_empty() || !q.is_connected(c.pattern) || c.pattern.len() > cat.h() {
            return Err(Error::Validation(format!("cover pattern {:?} is not a catalogue pattern", c.pattern)));
        }
        if !c.vars.is_subset(q.vars_of(c.pattern)) || c.vars.is_empty() {
            return Err(Error::Validation(format!("cover entry {:?} covers variables outside its pattern", c.pattern)));
        }
        let form = canonical_form(q, c.pattern)?;
        for a in c.vars.subsets().filter(|&a| a != c.vars) {
            let d = degree(cat, q, &form, c.pattern, a, c.vars)?;
            let prov = Provenance::Degree {
                pattern: c.pattern,
                key: form.key.clone(),
                x: a,
                y: c.vars,
            };
            add_constraint(&mut ceg, all, a, c.vars, Ratio::from_integer(d), prov);
        }
    }
    Ok(ceg)
}
