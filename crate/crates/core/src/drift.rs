//! Parametric timing proofs: the activation-count drift property and the
//! two-activation message window.
//!
//! Both properties quantify over all schedules of two nodes with unknown
//! constant periods and per-activation jitters. Each candidate violation is
//! a finite linear-rational system over the symbolic timing variables, so a
//! property is proved by showing every candidate system infeasible, and
//! refuted by a satisfying witness — which is then replayable through the
//! simulator as an explicit schedule.

use crate::linear::{
    activation_time_expr, standard_bounds, ConstraintSystem, LinExpr, Relation, SymVar,
};
use crate::protocol::{ElectionState, Mode, NodeId};
use crate::rat::Rat;
use crate::sim::{
    simulate_with, Horizon, JitterSource, JitterTable, NodeConfig, SimConfig, SimError,
};
use crate::simplex::{is_satisfiable, SatResult, SolverError, SolverLimits};
use crate::timing::{StartConvention, TimingConstants};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Node indices used in all two-node encodings.
pub const NODE_I: usize = 0;
pub const NODE_J: usize = 1;
/// Label of the shared sampling instant.
pub const T_SAMPLE: u32 = 0;

/// Input to the drift proof.
#[derive(Clone, Debug)]
pub struct DriftSpec {
    pub constants: TimingConstants,
    pub max_activations: u32,
    /// Lowest allowed value of count(j) − count(i).
    pub lower: i64,
    /// Highest allowed value of count(j) − count(i).
    pub upper: i64,
    pub start_convention: StartConvention,
}

impl DriftSpec {
    pub fn defaults() -> Self {
        DriftSpec {
            constants: TimingConstants::defaults(),
            max_activations: 13,
            lower: -2,
            upper: 1,
            start_convention: StartConvention::ModelT,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        self.constants
            .validate()
            .map_err(|e| SolverError::Internal(e.to_string()))?;
        if self.lower > 0 || self.upper < 0 || self.max_activations < 1 {
            return Err(SolverError::Internal(
                "drift bounds must satisfy lower <= 0 <= upper, max_activations >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// A satisfying schedule for one violating count pair.
#[derive(Clone, Debug)]
pub struct DriftWitness {
    pub k_i: u32,
    pub k_j: u32,
    pub witness: BTreeMap<SymVar, Rat>,
    pub violation_time: Rat,
}

#[derive(Clone, Debug)]
pub enum DriftVerdict {
    Proved,
    Refuted(DriftWitness),
}

impl DriftVerdict {
    pub fn is_proved(&self) -> bool {
        matches!(self, DriftVerdict::Proved)
    }
}

/// Constrains node `node` to have completed exactly `k` activations at the
/// sampling instant `t`: its activation `k` has occurred (`expr(k) <= t`)
/// and activation `k+1` has not (`t < expr(k+1)`). Includes the standard
/// interval bounds for every variable mentioned.
pub fn encode_count_window(
    node: usize,
    k: u32,
    t: u32,
    tc: &TimingConstants,
    convention: StartConvention,
) -> ConstraintSystem {
    let mut sys = standard_bounds(node, k + 1, tc, convention);
    let t = LinExpr::var(SymVar::TimePoint(t));
    sys.compare(activation_time_expr(node, k), Relation::Le, t.clone());
    sys.compare(t, Relation::Lt, activation_time_expr(node, k + 1));
    sys
}

/// The count pairs that would violate the drift window.
fn violating_pairs(spec: &DriftSpec) -> Vec<(u32, u32)> {
    let max = spec.max_activations;
    let mut pairs = Vec::new();
    for k_i in 0..=max {
        for k_j in 0..=max {
            let d = k_j as i64 - k_i as i64;
            if d < spec.lower || d > spec.upper {
                pairs.push((k_i, k_j));
            }
        }
    }
    pairs
}

/// Builds the feasibility system for "at the instant node i completes its
/// activation `k_i`, node j has completed exactly `k_j`".
///
/// Counts are sampled at node i's firing instant — `t` equals node i's
/// activation time exactly, not merely falls inside its window. Sampling at
/// interior points of i's window would symmetrize the reachable drift and
/// contradict the asymmetric window the property states; the counter of the
/// timed model is compared against the environment precisely when node i
/// acts.
pub fn drift_violation_system(spec: &DriftSpec, k_i: u32, k_j: u32) -> ConstraintSystem {
    let t = LinExpr::var(SymVar::TimePoint(T_SAMPLE));
    let mut sys = standard_bounds(NODE_I, k_i, &spec.constants, spec.start_convention);
    sys.compare(activation_time_expr(NODE_I, k_i), Relation::Eq, t);
    sys.extend(encode_count_window(
        NODE_J,
        k_j,
        T_SAMPLE,
        &spec.constants,
        spec.start_convention,
    ));
    sys
}

/// Proves or refutes the drift property: for all schedules and all sampling
/// instants (node i firing times up to `max_activations`), the difference
/// count(j) − count(i) stays within `[lower, upper]`.
pub fn verify_p3(spec: &DriftSpec) -> Result<DriftVerdict, SolverError> {
    verify_p3_with_limits(spec, &SolverLimits::default())
}

pub fn verify_p3_with_limits(
    spec: &DriftSpec,
    limits: &SolverLimits,
) -> Result<DriftVerdict, SolverError> {
    spec.validate()?;
    let pairs = violating_pairs(spec);
    let results: Vec<Result<Option<DriftWitness>, SolverError>> = pairs
        .par_iter()
        .map(|&(k_i, k_j)| {
            let sys = drift_violation_system(spec, k_i, k_j);
            match is_satisfiable(&sys, limits)? {
                SatResult::Unsat => Ok(None),
                SatResult::Sat(witness) => {
                    let violation_time = witness
                        .get(&SymVar::TimePoint(T_SAMPLE))
                        .cloned()
                        .ok_or_else(|| {
                            SolverError::Internal("witness missing sampling instant".into())
                        })?;
                    Ok(Some(DriftWitness {
                        k_i,
                        k_j,
                        witness,
                        violation_time,
                    }))
                }
            }
        })
        .collect();
    for r in results {
        if let Some(w) = r? {
            return Ok(DriftVerdict::Refuted(w));
        }
    }
    Ok(DriftVerdict::Proved)
}

/// Decides whether some node j can fire zero times inside the open interval
/// between activations `k` and `k + reads_every` of node i, for any
/// `k <= probe_depth - reads_every`.
///
/// Proved means the window property holds: every other node fires at least
/// once in every such interval, so a node acting on its mailbox every
/// `reads_every` activations has heard from everyone.
pub fn verify_read_window(
    constants: &TimingConstants,
    reads_every: u32,
    probe_depth: u32,
) -> Result<DriftVerdict, SolverError> {
    verify_read_window_with_limits(constants, reads_every, probe_depth, &SolverLimits::default())
}

pub fn verify_read_window_with_limits(
    constants: &TimingConstants,
    reads_every: u32,
    probe_depth: u32,
    limits: &SolverLimits,
) -> Result<DriftVerdict, SolverError> {
    constants
        .validate()
        .map_err(|e| SolverError::Internal(e.to_string()))?;
    if reads_every < 1 || probe_depth < reads_every {
        return Err(SolverError::Internal(
            "need reads_every >= 1 and probe_depth >= reads_every".into(),
        ));
    }
    let convention = StartConvention::ModelT;
    let mut cases: Vec<(u32, Option<u32>)> = Vec::new();
    for k in 0..=(probe_depth - reads_every) {
        cases.push((k, None)); // node j has not fired at all yet
        for m in 0..=probe_depth {
            cases.push((k, Some(m)));
        }
    }
    let results: Vec<Result<Option<DriftWitness>, SolverError>> = cases
        .par_iter()
        .map(|&(k, m)| {
            let mut sys = standard_bounds(NODE_I, k + reads_every, constants, convention);
            let window_open = activation_time_expr(NODE_I, k);
            let window_close = activation_time_expr(NODE_I, k + reads_every);
            match m {
                None => {
                    // j's very first firing is at or after the window close
                    sys.extend(standard_bounds(NODE_J, 0, constants, convention));
                    sys.compare(
                        LinExpr::var(SymVar::Start(NODE_J)),
                        Relation::Ge,
                        window_close,
                    );
                }
                Some(m) => {
                    // j fires at m not after the window opens, and next at
                    // m+1 not before it closes
                    sys.extend(standard_bounds(NODE_J, m + 1, constants, convention));
                    sys.compare(activation_time_expr(NODE_J, m), Relation::Le, window_open);
                    sys.compare(
                        activation_time_expr(NODE_J, m + 1),
                        Relation::Ge,
                        window_close,
                    );
                }
            }
            match is_satisfiable(&sys, limits)? {
                SatResult::Unsat => Ok(None),
                SatResult::Sat(witness) => {
                    let violation_time = activation_time_expr(NODE_I, k + reads_every)
                        .eval(&witness)
                        .ok_or_else(|| SolverError::Internal("partial witness".into()))?;
                    Ok(Some(DriftWitness {
                        k_i: k,
                        k_j: m.unwrap_or(0),
                        witness,
                        violation_time,
                    }))
                }
            }
        })
        .collect();
    for r in results {
        if let Some(w) = r? {
            return Ok(DriftVerdict::Refuted(w));
        }
    }
    Ok(DriftVerdict::Proved)
}

/// Turns a two-node drift witness into a concrete simulator configuration
/// plus jitter table, running until the violation instant.
///
/// Only valid for witnesses whose starts respect the concrete-model start
/// convention (start within one period of time zero).
pub fn witness_to_sim(
    witness: &DriftWitness,
    constants: &TimingConstants,
) -> Result<(SimConfig, JitterTable), SimError> {
    let get = |v: SymVar| witness.witness.get(&v).cloned().unwrap_or_else(Rat::zero);
    let mut nodes = Vec::new();
    let mut table = JitterTable::default();
    for (slot, node) in [(NODE_I, 1u64), (NODE_J, 2u64)] {
        nodes.push(NodeConfig {
            id: NodeId(node),
            period: get(SymVar::Period(slot)),
            start: get(SymVar::Start(slot)),
            mode: Mode::On,
            initial_state: ElectionState::Follower,
            initial_even: true,
        });
        for (v, val) in &witness.witness {
            if let SymVar::Jitter(n, k) = v {
                if *n == slot {
                    table.set(slot, *k, val.clone());
                }
            }
        }
    }
    let cfg = SimConfig {
        constants: constants.clone(),
        nodes,
        seed: 0,
        horizon: Horizon::Time(witness.violation_time.clone()),
    };
    cfg.validate()?;
    Ok((cfg, table))
}

/// Replays a drift witness through the simulator and returns the activation
/// counts of nodes i and j at the violation instant.
pub fn replay_witness_counts(
    witness: &DriftWitness,
    constants: &TimingConstants,
) -> Result<(u32, u32), SimError> {
    let (cfg, table) = witness_to_sim(witness, constants)?;
    let trace = simulate_with(&cfg, JitterSource::Table(table))?;
    let count = |id: u64| {
        trace
            .events
            .iter()
            .filter(|e| e.node_id == NodeId(id) && e.time <= witness.violation_time)
            .count() as u32
    };
    Ok((count(1), count(2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::check;

    #[test]
    fn count_window_k0_shape() {
        let tc = TimingConstants::defaults();
        let sys = encode_count_window(0, 0, 7, &tc, StartConvention::ModelT);
        // bounds for per, start, 1 jitter (6 constraints) + the two window sides
        assert_eq!(sys.constraints.len(), 8);
        assert!(sys.vars().contains(&SymVar::TimePoint(7)));
        assert!(sys.vars().contains(&SymVar::Jitter(0, 1)));
    }

    #[test]
    fn zero_width_constants_pin_the_count() {
        // period exactly 50, zero jitter, start forced to 0: at t = 125 the
        // completed count is exactly 2
        let tc = TimingConstants {
            period_min: Rat::from_int(50),
            period_max: Rat::from_int(50),
            jitter_min: Rat::zero(),
            jitter_max: Rat::zero(),
        };
        for k in 0..4u32 {
            let mut sys = encode_count_window(0, k, 0, &tc, StartConvention::ModelT);
            sys.compare(
                LinExpr::var(SymVar::Start(0)),
                Relation::Eq,
                LinExpr::zero(),
            );
            sys.compare(
                LinExpr::var(SymVar::TimePoint(0)),
                Relation::Eq,
                LinExpr::constant(Rat::from_int(125)),
            );
            let sat = matches!(check(&sys).unwrap(), SatResult::Sat(_));
            assert_eq!(sat, k == 2, "k = {k}");
        }
    }

    #[test]
    fn window_left_edge_minimum_at_k13() {
        // minimal time of activation 13 is 13 * 48.5 = 630.5 with start 0:
        // the window at 630.5 is reachable, anything earlier is not
        let tc = TimingConstants::defaults();
        let at = |t: Rat| {
            let mut sys = encode_count_window(0, 13, 0, &tc, StartConvention::ModelT);
            sys.compare(
                LinExpr::var(SymVar::TimePoint(0)),
                Relation::Eq,
                LinExpr::constant(t),
            );
            matches!(check(&sys).unwrap(), SatResult::Sat(_))
        };
        assert!(at(Rat::new(1261, 2))); // 630.5
        assert!(!at(Rat::new(1260, 2))); // 630
    }

    #[test]
    fn violating_pairs_match_independent_enumeration() {
        let spec = DriftSpec::defaults();
        let got = violating_pairs(&spec);
        let mut expect = Vec::new();
        for a in 0i64..=13 {
            for b in 0i64..=13 {
                if !(-2..=1).contains(&(b - a)) {
                    expect.push((a as u32, b as u32));
                }
            }
        }
        assert_eq!(got, expect);
        assert_eq!(got.len(), (14 * 14) - expect_window_size());
        fn expect_window_size() -> usize {
            (0i64..=13)
                .flat_map(|a| (0i64..=13).map(move |b| (a, b)))
                .filter(|(a, b)| (-2..=1).contains(&(b - a)))
                .count()
        }
    }

    #[test]
    fn p3_proved_at_default_constants() {
        let verdict = verify_p3(&DriftSpec::defaults()).unwrap();
        assert!(verdict.is_proved());
    }

    #[test]
    fn p3_refuted_when_tightened_and_witness_replays() {
        let spec = DriftSpec {
            lower: -1,
            upper: 0,
            start_convention: StartConvention::ModelM,
            ..DriftSpec::defaults()
        };
        match verify_p3(&spec).unwrap() {
            DriftVerdict::Refuted(w) => {
                let d = w.k_j as i64 - w.k_i as i64;
                assert!(!(-1..=0).contains(&d), "pair ({}, {}) not violating", w.k_i, w.k_j);
                // the witness must satisfy its own system exactly
                let sys = drift_violation_system(&spec, w.k_i, w.k_j);
                assert!(sys.satisfied_by(&w.witness));
                // and replay in the simulator with the claimed counts
                let (c_i, c_j) = replay_witness_counts(&w, &spec.constants).unwrap();
                assert_eq!((c_i, c_j), (w.k_i + 1, w.k_j + 1));
            }
            DriftVerdict::Proved => panic!("tightened window must be refuted"),
        }
    }

    #[test]
    fn p3_refuted_under_wide_jitter() {
        let spec = DriftSpec {
            constants: TimingConstants::wide_jitter(),
            ..DriftSpec::defaults()
        };
        assert!(!verify_p3(&spec).unwrap().is_proved());
    }

    #[test]
    fn read_window_proved_at_default_constants() {
        let tc = TimingConstants::defaults();
        assert!(verify_read_window(&tc, 2, 13).unwrap().is_proved());
    }

    #[test]
    fn read_window_refuted_under_wide_jitter() {
        let tc = TimingConstants::wide_jitter();
        match verify_read_window(&tc, 2, 13).unwrap() {
            DriftVerdict::Refuted(w) => {
                assert!(!w.witness.is_empty());
            }
            DriftVerdict::Proved => panic!("wide jitter breaks the 2-activation window"),
        }
    }

    #[test]
    fn read_window_closed_form_agreement() {
        // with reads_every = 2 the window property holds iff
        // 2 * (period_min + jitter_min) >= period_max + jitter_max
        let cases = [
            (TimingConstants::defaults(), true), // 97 >= 51.5
            (TimingConstants::wide_jitter(), false), // 48 < 76
            (
                TimingConstants {
                    period_min: Rat::from_int(30),
                    period_max: Rat::from_int(59),
                    jitter_min: Rat::zero(),
                    jitter_max: Rat::zero(),
                },
                true, // 60 >= 59
            ),
            (
                TimingConstants {
                    period_min: Rat::from_int(30),
                    period_max: Rat::from_int(61),
                    jitter_min: Rat::zero(),
                    jitter_max: Rat::zero(),
                },
                false, // 60 < 61
            ),
        ];
        for (tc, expect) in cases {
            let closed_form = (&tc.period_min + &tc.jitter_min) * Rat::from_int(2)
                >= &tc.period_max + &tc.jitter_max;
            assert_eq!(closed_form, expect);
            assert_eq!(verify_read_window(&tc, 2, 8).unwrap().is_proved(), expect);
        }
    }

    #[test]
    fn shift_invariance_of_drift_queries() {
        // adding a common constant to both starts must not change any verdict:
        // re-run one violating pair with shifted start bounds
        let spec = DriftSpec::defaults();
        let shift = Rat::from_int(1000);
        for (k_i, k_j) in [(0u32, 5u32), (5, 0), (13, 9)] {
            let base = drift_violation_system(&spec, k_i, k_j);
            let mut shifted = ConstraintSystem::new();
            // start >= shift, start <= cap + shift; everything else identical
            for c in &base.constraints {
                let mut c = c.clone();
                let start_coeff: Rat = [SymVar::Start(NODE_I), SymVar::Start(NODE_J)]
                    .iter()
                    .filter_map(|v| c.terms.get(v).cloned())
                    .fold(Rat::zero(), |a, b| a + b);
                let t_coeff = c
                    .terms
                    .get(&SymVar::TimePoint(T_SAMPLE))
                    .cloned()
                    .unwrap_or_else(Rat::zero);
                // translating start and t by `shift` moves the bound by
                // (coeff of start + coeff of t) * shift
                c.bound = c.bound + (start_coeff + t_coeff) * shift.clone();
                shifted.push(c);
            }
            let a = matches!(check(&base).unwrap(), SatResult::Sat(_));
            let b = matches!(check(&shifted).unwrap(), SatResult::Sat(_));
            assert_eq!(a, b, "pair ({k_i}, {k_j})");
        }
    }

    #[test]
    fn wide_jitter_reads_every_3_is_still_refuted() {
        // the 3-activation window does not survive +-25 ms jitter under
        // accumulating jitter: 3 * (49 - 25) = 72 < 51 + 25 = 76, and the
        // solver finds the corresponding schedule
        let tc = TimingConstants::wide_jitter();
        match verify_read_window(&tc, 3, 13).unwrap() {
            DriftVerdict::Refuted(w) => {
                assert!(!w.witness.is_empty());
            }
            DriftVerdict::Proved => panic!("3 * 24 < 76 admits a silent window"),
        }
    }
}
