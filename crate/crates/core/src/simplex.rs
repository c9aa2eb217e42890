//! Exact feasibility checking for conjunctions of linear constraints over
//! the rationals.
//!
//! This is a general simplex in the style used by SMT solvers for linear
//! rational arithmetic: every constraint becomes a bound on a slack
//! variable, strict inequalities are tracked with a symbolic infinitesimal,
//! and Bland's rule guarantees termination. All arithmetic is exact; a Sat
//! answer always comes with a concrete rational witness that has been
//! re-checked against every constraint by substitution.

use crate::linear::{ConstraintSystem, Relation, SymVar};
use crate::rat::Rat;
use std::cmp::Ordering;
use std::collections::BTreeMap;

/// Resource ceilings for one satisfiability query. Hitting a ceiling is
/// reported as an error, never as Unsat.
#[derive(Clone, Debug)]
pub struct SolverLimits {
    pub max_vars: usize,
    pub max_constraints: usize,
    pub max_pivots: u64,
}

impl Default for SolverLimits {
    fn default() -> Self {
        SolverLimits {
            max_vars: 64,
            max_constraints: 4096,
            max_pivots: 500_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatResult {
    /// Satisfiable, with an exact witness for every variable that occurs.
    Sat(BTreeMap<SymVar, Rat>),
    Unsat,
}

#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
pub enum SolverError {
    #[error("solver resource ceiling exceeded: {0}")]
    ResourceLimit(String),
    #[error("solver internal error: {0}")]
    Internal(String),
}

/// `r + eps * delta` for a symbolic infinitesimal `delta > 0`.
/// Ordered lexicographically, which is the order induced by any
/// sufficiently small positive delta.
#[derive(Clone, Debug, PartialEq, Eq)]
struct QDelta {
    r: Rat,
    eps: Rat,
}

impl QDelta {
    fn zero() -> Self {
        QDelta {
            r: Rat::zero(),
            eps: Rat::zero(),
        }
    }

    fn real(r: Rat) -> Self {
        QDelta {
            r,
            eps: Rat::zero(),
        }
    }

    fn with_eps(r: Rat, eps_units: i64) -> Self {
        QDelta {
            r,
            eps: Rat::from_int(eps_units),
        }
    }

    fn add(&self, other: &QDelta) -> QDelta {
        QDelta {
            r: &self.r + &other.r,
            eps: &self.eps + &other.eps,
        }
    }

    fn sub(&self, other: &QDelta) -> QDelta {
        QDelta {
            r: &self.r - &other.r,
            eps: &self.eps - &other.eps,
        }
    }

    fn scale(&self, k: &Rat) -> QDelta {
        QDelta {
            r: &self.r * k,
            eps: &self.eps * k,
        }
    }

    /// Substitute a concrete positive value for the infinitesimal.
    fn instantiate(&self, delta: &Rat) -> Rat {
        &self.r + &(&self.eps * delta)
    }
}

impl PartialOrd for QDelta {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QDelta {
    fn cmp(&self, other: &Self) -> Ordering {
        self.r.cmp(&other.r).then_with(|| self.eps.cmp(&other.eps))
    }
}

struct Tableau {
    /// Row-major coefficients; `rows[r][c]` is the coefficient of variable
    /// `c` in the definition of the basic variable of row `r`.
    rows: Vec<Vec<Rat>>,
    basic_var: Vec<usize>,
    var_row: Vec<Option<usize>>,
    beta: Vec<QDelta>,
    lower: Vec<Option<QDelta>>,
    upper: Vec<Option<QDelta>>,
}

impl Tableau {
    fn n_vars(&self) -> usize {
        self.beta.len()
    }

    fn set_nonbasic(&mut self, j: usize, v: QDelta) {
        let delta = v.sub(&self.beta[j]);
        for r in 0..self.rows.len() {
            let coeff = self.rows[r][j].clone();
            if !coeff.is_zero() {
                let b = self.basic_var[r];
                self.beta[b] = self.beta[b].add(&delta.scale(&coeff));
            }
        }
        self.beta[j] = v;
    }

    fn pivot_and_update(&mut self, r: usize, j: usize, v: QDelta) {
        let i = self.basic_var[r];
        let a_j = self.rows[r][j].clone();
        debug_assert!(!a_j.is_zero());

        let theta = v.sub(&self.beta[i]).scale(&a_j.recip());
        self.beta[i] = v;
        self.beta[j] = self.beta[j].add(&theta);
        for r2 in 0..self.rows.len() {
            if r2 == r {
                continue;
            }
            let coeff = self.rows[r2][j].clone();
            if !coeff.is_zero() {
                let b = self.basic_var[r2];
                self.beta[b] = self.beta[b].add(&theta.scale(&coeff));
            }
        }

        // rewrite row r to define x_j, then eliminate x_j elsewhere
        let n = self.n_vars();
        let inv = a_j.recip();
        let mut new_row = vec![Rat::zero(); n];
        for (c, slot) in new_row.iter_mut().enumerate() {
            if c == j {
                continue;
            }
            let a_c = &self.rows[r][c];
            if !a_c.is_zero() {
                *slot = -&(a_c * &inv);
            }
        }
        new_row[i] = inv;
        self.rows[r] = new_row;
        self.basic_var[r] = j;
        self.var_row[j] = Some(r);
        self.var_row[i] = None;

        for r2 in 0..self.rows.len() {
            if r2 == r {
                continue;
            }
            let b = self.rows[r2][j].clone();
            if b.is_zero() {
                continue;
            }
            for c in 0..n {
                if self.rows[r][c].is_zero() {
                    continue;
                }
                let add = &self.rows[r][c] * &b;
                self.rows[r2][c] = &self.rows[r2][c] + &add;
            }
            self.rows[r2][j] = Rat::zero();
        }
    }
}

/// Decides satisfiability of `sys`, producing an exact witness on Sat.
pub fn is_satisfiable(
    sys: &ConstraintSystem,
    limits: &SolverLimits,
) -> Result<SatResult, SolverError> {
    if sys.constraints.len() > limits.max_constraints {
        return Err(SolverError::ResourceLimit(format!(
            "{} constraints exceeds ceiling {}",
            sys.constraints.len(),
            limits.max_constraints
        )));
    }

    let vars: Vec<SymVar> = sys.vars().into_iter().collect();
    if vars.len() > limits.max_vars {
        return Err(SolverError::ResourceLimit(format!(
            "{} variables exceeds ceiling {}",
            vars.len(),
            limits.max_vars
        )));
    }
    let var_index: BTreeMap<SymVar, usize> = vars
        .iter()
        .enumerate()
        .map(|(i, v)| (*v, i))
        .collect();
    let n_orig = vars.len();

    // Normalized multi-variable rows, shared between constraints with the
    // same left-hand side up to scaling.
    let mut row_index: BTreeMap<Vec<(usize, Rat)>, usize> = BTreeMap::new();
    let mut row_defs: Vec<Vec<(usize, Rat)>> = Vec::new();
    let mut lower: Vec<Option<QDelta>> = vec![None; n_orig];
    let mut upper: Vec<Option<QDelta>> = vec![None; n_orig];

    let tighten_lower = |lows: &mut Vec<Option<QDelta>>, v: usize, b: QDelta| {
        let slot = &mut lows[v];
        if slot.as_ref().is_none_or(|cur| b > *cur) {
            *slot = Some(b);
        }
    };
    let tighten_upper = |ups: &mut Vec<Option<QDelta>>, v: usize, b: QDelta| {
        let slot = &mut ups[v];
        if slot.as_ref().is_none_or(|cur| b < *cur) {
            *slot = Some(b);
        }
    };

    let mut pending: Vec<(usize, Relation, Rat)> = Vec::new(); // (var, rel, bound)
    for c in &sys.constraints {
        if c.terms.is_empty() {
            // constant relation: 0 ⋈ bound
            if !c.relation.holds(&Rat::zero(), &c.bound) {
                return Ok(SatResult::Unsat);
            }
            continue;
        }
        // normalize by the leading coefficient
        let (lead_var, lead_coeff) = c.terms.iter().next().unwrap();
        let _ = lead_var;
        let scale = lead_coeff.clone();
        let flip = scale.is_negative();
        let mut terms: Vec<(usize, Rat)> = c
            .terms
            .iter()
            .map(|(v, k)| (var_index[v], k / &scale))
            .collect();
        terms.sort_by_key(|(i, _)| *i);
        let bound = &c.bound / &scale;
        let relation = if flip {
            match c.relation {
                Relation::Le => Relation::Ge,
                Relation::Lt => Relation::Gt,
                Relation::Ge => Relation::Le,
                Relation::Gt => Relation::Lt,
                Relation::Eq => Relation::Eq,
            }
        } else {
            c.relation
        };

        let target = if terms.len() == 1 {
            terms[0].0
        } else {
            match row_index.get(&terms) {
                Some(&s) => s,
                None => {
                    let s = n_orig + row_defs.len();
                    row_index.insert(terms.clone(), s);
                    row_defs.push(terms.clone());
                    s
                }
            }
        };
        pending.push((target, relation, bound));
    }

    let n_total = n_orig + row_defs.len();
    lower.resize(n_total, None);
    upper.resize(n_total, None);
    for (v, rel, b) in pending {
        match rel {
            Relation::Le => tighten_upper(&mut upper, v, QDelta::real(b)),
            Relation::Lt => tighten_upper(&mut upper, v, QDelta::with_eps(b, -1)),
            Relation::Ge => tighten_lower(&mut lower, v, QDelta::real(b)),
            Relation::Gt => tighten_lower(&mut lower, v, QDelta::with_eps(b, 1)),
            Relation::Eq => {
                tighten_lower(&mut lower, v, QDelta::real(b.clone()));
                tighten_upper(&mut upper, v, QDelta::real(b));
            }
        }
    }
    for v in 0..n_total {
        if let (Some(l), Some(u)) = (&lower[v], &upper[v]) {
            if l > u {
                return Ok(SatResult::Unsat);
            }
        }
    }

    // initial assignment: originals clamped to their bounds, slacks derived
    let mut beta = vec![QDelta::zero(); n_total];
    for v in 0..n_orig {
        beta[v] = match (&lower[v], &upper[v]) {
            (Some(l), _) if *l > QDelta::zero() => l.clone(),
            (_, Some(u)) if *u < QDelta::zero() => u.clone(),
            _ => QDelta::zero(),
        };
    }
    let mut rows = Vec::with_capacity(row_defs.len());
    let mut basic_var = Vec::with_capacity(row_defs.len());
    let mut var_row = vec![None; n_total];
    for (k, def) in row_defs.iter().enumerate() {
        let mut row = vec![Rat::zero(); n_total];
        let mut val = QDelta::zero();
        for (v, coeff) in def {
            row[*v] = coeff.clone();
            val = val.add(&beta[*v].scale(coeff));
        }
        let s = n_orig + k;
        beta[s] = val;
        basic_var.push(s);
        var_row[s] = Some(rows.len());
        rows.push(row);
    }

    let mut t = Tableau {
        rows,
        basic_var,
        var_row,
        beta,
        lower,
        upper,
    };

    // clamp any out-of-bounds nonbasic originals that initial clamping
    // missed (none by construction, but keep the invariant explicit)
    for v in 0..n_orig {
        if t.var_row[v].is_none() {
            if let Some(l) = t.lower[v].clone() {
                if t.beta[v] < l {
                    t.set_nonbasic(v, l);
                    continue;
                }
            }
            if let Some(u) = t.upper[v].clone() {
                if t.beta[v] > u {
                    t.set_nonbasic(v, u);
                }
            }
        }
    }

    let mut pivots: u64 = 0;
    loop {
        // Bland: smallest violated basic variable
        let mut violated: Option<(usize, bool)> = None; // (var, below_lower)
        for v in 0..n_total {
            if t.var_row[v].is_none() {
                continue;
            }
            if let Some(l) = &t.lower[v] {
                if t.beta[v] < *l {
                    violated = Some((v, true));
                    break;
                }
            }
            if let Some(u) = &t.upper[v] {
                if t.beta[v] > *u {
                    violated = Some((v, false));
                    break;
                }
            }
        }
        let (i, below) = match violated {
            None => break,
            Some(x) => x,
        };
        pivots += 1;
        if pivots > limits.max_pivots {
            return Err(SolverError::ResourceLimit(format!(
                "pivot ceiling {} exceeded",
                limits.max_pivots
            )));
        }
        let r = t.var_row[i].unwrap();
        let target = if below {
            t.lower[i].clone().unwrap()
        } else {
            t.upper[i].clone().unwrap()
        };
        // smallest suitable nonbasic column
        let mut chosen = None;
        for j in 0..n_total {
            if t.var_row[j].is_some() || j == i {
                continue;
            }
            let a = &t.rows[r][j];
            if a.is_zero() {
                continue;
            }
            let want_increase_j = if below {
                a.is_positive()
            } else {
                a.is_negative()
            };
            let ok = if want_increase_j {
                t.upper[j].as_ref().is_none_or(|u| t.beta[j] < *u)
            } else {
                t.lower[j].as_ref().is_none_or(|l| t.beta[j] > *l)
            };
            if ok {
                chosen = Some(j);
                break;
            }
        }
        match chosen {
            None => return Ok(SatResult::Unsat),
            Some(j) => t.pivot_and_update(r, j, target),
        }
    }

    // concretize the infinitesimal and verify by substitution
    let mut delta = Rat::one();
    for _ in 0..4096 {
        let witness: BTreeMap<SymVar, Rat> = vars
            .iter()
            .enumerate()
            .map(|(idx, v)| (*v, t.beta[idx].instantiate(&delta)))
            .collect();
        if sys.satisfied_by(&witness) {
            return Ok(SatResult::Sat(witness));
        }
        delta = delta * Rat::new(1, 2);
    }
    Err(SolverError::Internal(
        "failed to concretize infinitesimal for a satisfiable system".into(),
    ))
}

/// Convenience wrapper with default limits.
pub fn check(sys: &ConstraintSystem) -> Result<SatResult, SolverError> {
    is_satisfiable(sys, &SolverLimits::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::LinExpr;

    fn x() -> LinExpr {
        LinExpr::var(SymVar::TimePoint(0))
    }

    fn y() -> LinExpr {
        LinExpr::var(SymVar::TimePoint(1))
    }

    fn c(r: i64) -> LinExpr {
        LinExpr::constant(Rat::from_int(r))
    }

    #[test]
    fn contradictory_bounds_unsat() {
        let mut sys = ConstraintSystem::new();
        sys.compare(x(), Relation::Ge, c(1));
        sys.compare(x(), Relation::Le, c(0));
        assert_eq!(check(&sys).unwrap(), SatResult::Unsat);
    }

    #[test]
    fn pinned_point_sat_with_witness() {
        let mut sys = ConstraintSystem::new();
        sys.compare(x(), Relation::Ge, c(1));
        sys.compare(x(), Relation::Le, c(1));
        match check(&sys).unwrap() {
            SatResult::Sat(w) => assert_eq!(w[&SymVar::TimePoint(0)], Rat::from_int(1)),
            SatResult::Unsat => panic!("expected Sat"),
        }
    }

    #[test]
    fn strict_corner_needs_interior_point() {
        // x > 0, y > 0, x + y < 1 is satisfiable but only strictly inside
        let mut sys = ConstraintSystem::new();
        sys.compare(x(), Relation::Gt, c(0));
        sys.compare(y(), Relation::Gt, c(0));
        sys.compare(x().plus(&y()), Relation::Lt, c(1));
        match check(&sys).unwrap() {
            SatResult::Sat(w) => {
                assert!(w[&SymVar::TimePoint(0)].is_positive());
                assert!(w[&SymVar::TimePoint(1)].is_positive());
            }
            SatResult::Unsat => panic!("expected Sat"),
        }
    }

    #[test]
    fn strict_vs_nonstrict_distinction() {
        // x >= 1 and x < 1 is Unsat, x <= 1 is Sat
        let mut sys = ConstraintSystem::new();
        sys.compare(x(), Relation::Ge, c(1));
        sys.compare(x(), Relation::Lt, c(1));
        assert_eq!(check(&sys).unwrap(), SatResult::Unsat);

        let mut sys = ConstraintSystem::new();
        sys.compare(x(), Relation::Ge, c(1));
        sys.compare(x(), Relation::Le, c(1));
        assert!(matches!(check(&sys).unwrap(), SatResult::Sat(_)));
    }

    #[test]
    fn equality_chain() {
        // x = y, x + y = 3  =>  x = y = 3/2
        let mut sys = ConstraintSystem::new();
        sys.compare(x(), Relation::Eq, y());
        sys.compare(x().plus(&y()), Relation::Eq, c(3));
        match check(&sys).unwrap() {
            SatResult::Sat(w) => {
                assert_eq!(w[&SymVar::TimePoint(0)], Rat::new(3, 2));
                assert_eq!(w[&SymVar::TimePoint(1)], Rat::new(3, 2));
            }
            SatResult::Unsat => panic!("expected Sat"),
        }
    }

    #[test]
    fn var_ceiling_reported_as_error() {
        let mut sys = ConstraintSystem::new();
        for i in 0..3 {
            sys.compare(
                LinExpr::var(SymVar::TimePoint(i)),
                Relation::Ge,
                LinExpr::zero(),
            );
        }
        let limits = SolverLimits {
            max_vars: 2,
            ..Default::default()
        };
        assert!(matches!(
            is_satisfiable(&sys, &limits),
            Err(SolverError::ResourceLimit(_))
        ));
    }

    #[test]
    fn empty_system_is_sat() {
        let sys = ConstraintSystem::new();
        assert!(matches!(check(&sys).unwrap(), SatResult::Sat(_)));
    }

    #[test]
    fn adding_constraints_never_turns_unsat_into_sat() {
        let mut sys = ConstraintSystem::new();
        sys.compare(x(), Relation::Ge, c(2));
        sys.compare(x(), Relation::Lt, c(2));
        assert_eq!(check(&sys).unwrap(), SatResult::Unsat);
        sys.compare(y(), Relation::Ge, c(0));
        assert_eq!(check(&sys).unwrap(), SatResult::Unsat);
    }
}
