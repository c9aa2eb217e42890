//! Symbolic linear expressions and constraint systems over exact rationals.
//!
//! Variables stand for the unknown timing quantities of a network: each
//! node's constant period, its first activation time, and one fresh jitter
//! per activation. Activation times unroll to linear expressions over these,
//! so questions about schedules become linear-rational feasibility queries.

use crate::rat::Rat;
use crate::timing::{StartConvention, TimingConstants};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;

/// A symbolic timing variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymVar {
    /// Constant activation period of a node.
    Period(usize),
    /// Jitter of a node at its k-th activation, k >= 1.
    Jitter(usize, u32),
    /// First activation time of a node.
    Start(usize),
    /// A free time point, identified by label.
    TimePoint(u32),
}

impl fmt::Display for SymVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymVar::Period(i) => write!(f, "per({i})"),
            SymVar::Jitter(i, k) => write!(f, "jitter({i},{k})"),
            SymVar::Start(i) => write!(f, "start({i})"),
            SymVar::TimePoint(l) => write!(f, "t{l}"),
        }
    }
}

/// A linear expression `sum(coeff * var) + constant`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LinExpr {
    pub terms: BTreeMap<SymVar, Rat>,
    pub constant: Rat,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn var(v: SymVar) -> Self {
        let mut e = Self::default();
        e.terms.insert(v, Rat::one());
        e
    }

    pub fn constant(c: Rat) -> Self {
        LinExpr {
            terms: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn add_term(&mut self, v: SymVar, coeff: Rat) {
        let entry = self.terms.entry(v).or_insert_with(Rat::zero);
        *entry += &coeff;
        if entry.is_zero() {
            self.terms.remove(&v);
        }
    }

    pub fn plus(mut self, other: &LinExpr) -> LinExpr {
        for (v, c) in &other.terms {
            self.add_term(*v, c.clone());
        }
        self.constant += &other.constant;
        self
    }

    pub fn minus(mut self, other: &LinExpr) -> LinExpr {
        for (v, c) in &other.terms {
            self.add_term(*v, -c);
        }
        self.constant -= &other.constant;
        self
    }

    /// Exact evaluation under a (total, for this expression) assignment.
    pub fn eval(&self, assignment: &BTreeMap<SymVar, Rat>) -> Option<Rat> {
        let mut acc = self.constant.clone();
        for (v, c) in &self.terms {
            acc += &(c * assignment.get(v)?);
        }
        Some(acc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Lt,
    Eq,
    Ge,
    Gt,
}

impl Relation {
    pub fn holds(&self, lhs: &Rat, rhs: &Rat) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Lt => lhs < rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Gt => lhs > rhs,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Eq => "=",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        };
        f.write_str(s)
    }
}

/// `terms ⋈ bound` with exact rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinConstraint {
    pub terms: BTreeMap<SymVar, Rat>,
    pub relation: Relation,
    pub bound: Rat,
}

impl LinConstraint {
    /// Builds `lhs ⋈ rhs`, folding constants onto the bound side.
    pub fn compare(lhs: LinExpr, relation: Relation, rhs: LinExpr) -> Self {
        let diff = lhs.minus(&rhs);
        LinConstraint {
            bound: -&diff.constant,
            terms: diff.terms,
            relation,
        }
    }

    pub fn satisfied_by(&self, assignment: &BTreeMap<SymVar, Rat>) -> Option<bool> {
        let mut lhs = Rat::zero();
        for (v, c) in &self.terms {
            lhs += &(c * assignment.get(v)?);
        }
        Some(self.relation.holds(&lhs, &self.bound))
    }
}

impl fmt::Display for LinConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.terms {
            if first {
                write!(f, "{c}*{v}")?;
                first = false;
            } else {
                write!(f, " + {c}*{v}")?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " {} {}", self.relation, self.bound)
    }
}

/// A finite conjunction of linear constraints.
#[derive(Clone, Debug, Default)]
pub struct ConstraintSystem {
    pub constraints: Vec<LinConstraint>,
}

impl ConstraintSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, c: LinConstraint) {
        self.constraints.push(c);
    }

    pub fn compare(&mut self, lhs: LinExpr, relation: Relation, rhs: LinExpr) {
        self.push(LinConstraint::compare(lhs, relation, rhs));
    }

    pub fn extend(&mut self, other: ConstraintSystem) {
        self.constraints.extend(other.constraints);
    }

    pub fn vars(&self) -> std::collections::BTreeSet<SymVar> {
        self.constraints
            .iter()
            .flat_map(|c| c.terms.keys().copied())
            .collect()
    }

    /// Exact substitution check of every constraint.
    pub fn satisfied_by(&self, assignment: &BTreeMap<SymVar, Rat>) -> bool {
        self.constraints
            .iter()
            .all(|c| c.satisfied_by(assignment) == Some(true))
    }
}

/// The activation time of `node` at activation count `k`:
/// `Start(node) + k * Period(node) + sum of Jitter(node, 1..=k)`.
///
/// `k = 0` is the first activation, at `Start(node)`.
pub fn activation_time_expr(node: usize, k: u32) -> LinExpr {
    let mut e = LinExpr::var(SymVar::Start(node));
    if k > 0 {
        e.add_term(SymVar::Period(node), Rat::from_int(k as i64));
        for m in 1..=k {
            e.add_term(SymVar::Jitter(node, m), Rat::one());
        }
    }
    e
}

/// Interval bounds for one node's timing variables: period within the
/// constants, each of the first `k_max` jitters within the jitter interval,
/// and the first activation per the chosen start convention.
pub fn standard_bounds(
    node: usize,
    k_max: u32,
    tc: &TimingConstants,
    convention: StartConvention,
) -> ConstraintSystem {
    let mut sys = ConstraintSystem::new();
    let per = LinExpr::var(SymVar::Period(node));
    let start = LinExpr::var(SymVar::Start(node));

    sys.compare(
        per.clone(),
        Relation::Ge,
        LinExpr::constant(tc.period_min.clone()),
    );
    sys.compare(
        per.clone(),
        Relation::Le,
        LinExpr::constant(tc.period_max.clone()),
    );
    sys.compare(start.clone(), Relation::Ge, LinExpr::zero());
    let start_cap = match convention {
        StartConvention::ModelM => per,
        StartConvention::ModelT => per.plus(&LinExpr::constant(tc.jitter_max.clone())),
    };
    sys.compare(start, Relation::Le, start_cap);

    for m in 1..=k_max {
        let j = LinExpr::var(SymVar::Jitter(node, m));
        sys.compare(
            j.clone(),
            Relation::Ge,
            LinExpr::constant(tc.jitter_min.clone()),
        );
        sys.compare(j, Relation::Le, LinExpr::constant(tc.jitter_max.clone()));
    }
    sys
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activation_time_base_case_is_start() {
        let e = activation_time_expr(1, 0);
        assert_eq!(e.terms.len(), 1);
        assert_eq!(e.terms[&SymVar::Start(1)], Rat::one());
    }

    #[test]
    fn activation_time_unrolls_recurrence() {
        // (i, 2) -> Start(i) + 2*Period(i) + Jitter(i,1) + Jitter(i,2)
        let e = activation_time_expr(4, 2);
        assert_eq!(e.terms[&SymVar::Start(4)], Rat::one());
        assert_eq!(e.terms[&SymVar::Period(4)], Rat::from_int(2));
        assert_eq!(e.terms[&SymVar::Jitter(4, 1)], Rat::one());
        assert_eq!(e.terms[&SymVar::Jitter(4, 2)], Rat::one());
        assert_eq!(e.terms.len(), 4);
    }

    #[test]
    fn activation_time_concrete_substitution() {
        // node 1: start 0, per 49, jitters 0.5, -0.5, 0.5 => t^3 = 147.5
        let e = activation_time_expr(1, 3);
        let mut a = BTreeMap::new();
        a.insert(SymVar::Start(1), Rat::zero());
        a.insert(SymVar::Period(1), Rat::from_int(49));
        a.insert(SymVar::Jitter(1, 1), Rat::new(1, 2));
        a.insert(SymVar::Jitter(1, 2), Rat::new(-1, 2));
        a.insert(SymVar::Jitter(1, 3), Rat::new(1, 2));
        assert_eq!(e.eval(&a).unwrap(), Rat::new(295, 2));
    }

    #[test]
    fn standard_bounds_table1_shapes() {
        let tc = TimingConstants::defaults();
        let sys = standard_bounds(0, 0, &tc, StartConvention::ModelM);
        // 49 <= per, per <= 51, start >= 0, start <= per
        assert_eq!(sys.constraints.len(), 4);
        let sys1 = standard_bounds(0, 1, &tc, StartConvention::ModelM);
        assert_eq!(sys1.constraints.len(), 6);
        // jitter bounds are -1/2 and 1/2
        assert_eq!(sys1.constraints[4].bound, Rat::new(-1, 2));
        assert_eq!(sys1.constraints[5].bound, Rat::new(1, 2));
    }
}
