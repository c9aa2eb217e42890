//! Assume-guarantee verification of one node against an abstract message
//! environment.
//!
//! The node under study only ever inspects its mailbox through the predicate
//! "some sender ID exceeds mine", so the entire environment collapses to two
//! message classes: higher ID present or absent. Guarantees are proved by
//! exhaustive breadth-first exploration of the resulting finite state space,
//! from every initial protocol state. A concrete engine that materializes
//! all p environment messages per step validates the collapse and exhibits
//! linear scaling in the network size.

use crate::protocol::{update_node, ElectionState, Message, NodeCore, NodeId};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashSet;
use std::time::Instant;

/// Whether the node under study holds the greatest ID in the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    MaxId,
    NotMaxId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct AbstractNodeState {
    pub role: Role,
    pub state: ElectionState,
    pub even: bool,
    pub activation_count: u32,
}

/// Constraints on what the environment may deliver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    /// Every step delivers at least one message from every On node,
    /// including the one with the greatest ID.
    CleanRoundMailbox,
    /// Senders past their second activation that are not the max-id node
    /// are Followers.
    P1,
    /// The max-id sender past its second activation is Candidate or Leader.
    P2,
    /// Sender activation counts stay within the drift window of the node
    /// under study.
    P3,
}

pub const ALL_ASSUMPTIONS: [Assumption; 4] = [
    Assumption::CleanRoundMailbox,
    Assumption::P1,
    Assumption::P2,
    Assumption::P3,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Guarantee {
    P1,
    P2,
    P4,
}

impl Guarantee {
    /// The guarantee as a predicate on abstract states.
    pub fn holds_in(&self, s: &AbstractNodeState) -> bool {
        match self {
            Guarantee::P1 => {
                !(s.activation_count >= 2 && s.role == Role::NotMaxId)
                    || s.state == ElectionState::Follower
            }
            Guarantee::P2 => {
                !(s.activation_count >= 2 && s.role == Role::MaxId)
                    || matches!(s.state, ElectionState::Candidate | ElectionState::Leader)
            }
            Guarantee::P4 => {
                !(s.activation_count >= 4 && s.role == Role::MaxId)
                    || s.state == ElectionState::Leader
            }
        }
    }
}

/// One environment-message equivalence class: everything the node under
/// study can observe about a delivery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct EnvClass {
    pub higher_id_present: bool,
}

/// The deliveries consistent with the assumptions, as observation classes.
///
/// The set over-approximates every concrete mailbox the network could
/// produce under the assumed properties. A max-id node can never observe a
/// higher ID; a non-max node always observes one once every delivery
/// contains the max-id node's message.
pub fn feasible_env_classes(
    s: &AbstractNodeState,
    assumptions: &[Assumption],
    _p: u32,
) -> Vec<EnvClass> {
    match s.role {
        Role::MaxId => vec![EnvClass {
            higher_id_present: false,
        }],
        Role::NotMaxId => {
            if assumptions.contains(&Assumption::CleanRoundMailbox) {
                vec![EnvClass {
                    higher_id_present: true,
                }]
            } else {
                vec![
                    EnvClass {
                        higher_id_present: true,
                    },
                    EnvClass {
                        higher_id_present: false,
                    },
                ]
            }
        }
    }
}

/// One abstract activation, delegated to the protocol kernel through a
/// synthesized mailbox so the two transition functions cannot drift apart.
pub fn abstract_step(s: &AbstractNodeState, env: EnvClass) -> AbstractNodeState {
    let own = NodeId(10);
    let mut core = NodeCore::new(own, s.state, s.even);
    if env.higher_id_present {
        core.mailbox.push(Message {
            sender_id: NodeId(own.0 + 1),
            state: ElectionState::Follower,
        });
    }
    let (core, _) = update_node(core);
    AbstractNodeState {
        role: s.role,
        state: core.state,
        even: core.even_activation,
        activation_count: s.activation_count + 1,
    }
}

/// A violating run: the initial state and each (delivery class, successor).
#[derive(Clone, Debug, Serialize)]
pub struct AbstractTrace {
    pub initial: AbstractNodeState,
    pub steps: Vec<(EnvClass, AbstractNodeState)>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum AbstractVerdict {
    Proved { states_explored: usize },
    Refuted { trace: AbstractTrace },
}

impl AbstractVerdict {
    pub fn is_proved(&self) -> bool {
        matches!(self, AbstractVerdict::Proved { .. })
    }
}

fn initial_states() -> Vec<AbstractNodeState> {
    let mut v = Vec::new();
    for role in [Role::MaxId, Role::NotMaxId] {
        for state in ElectionState::ALL {
            for even in [true, false] {
                v.push(AbstractNodeState {
                    role,
                    state,
                    even,
                    activation_count: 0,
                });
            }
        }
    }
    v
}

/// Breadth-first proof of a guarantee from every initial protocol state.
///
/// Refutation returns a shortest violating run (breadth-first order).
pub fn prove_guarantee(
    g: Guarantee,
    assumptions: &[Assumption],
    p: u32,
    depth: u32,
) -> AbstractVerdict {
    let mut seen: HashSet<AbstractNodeState> = HashSet::new();
    let mut frontier: Vec<(AbstractNodeState, AbstractTrace)> = initial_states()
        .into_iter()
        .map(|s| {
            (
                s,
                AbstractTrace {
                    initial: s,
                    steps: Vec::new(),
                },
            )
        })
        .collect();
    for (s, t) in &frontier {
        seen.insert(*s);
        if !g.holds_in(s) {
            return AbstractVerdict::Refuted { trace: t.clone() };
        }
    }
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for (s, trace) in frontier {
            if s.activation_count >= depth {
                continue;
            }
            for env in feasible_env_classes(&s, assumptions, p) {
                let succ = abstract_step(&s, env);
                if !seen.insert(succ) {
                    continue;
                }
                let mut t = trace.clone();
                t.steps.push((env, succ));
                if !g.holds_in(&succ) {
                    return AbstractVerdict::Refuted { trace: t };
                }
                next.push((succ, t));
            }
        }
        frontier = next;
    }
    AbstractVerdict::Proved {
        states_explored: seen.len(),
    }
}

/// Sender states a concrete delivery may carry under the assumptions, for a
/// sender that is (`is_max`) or is not the max-id node.
fn allowed_sender_states(is_max: bool, assumptions: &[Assumption]) -> Vec<ElectionState> {
    // P1/P2 constrain senders past their second activation; with P3 assumed
    // the drift window discharges that antecedent once the node under study
    // is past count 4, and the observed predicate is insensitive to sender
    // state either way. The materialization simply picks the allowed set.
    if is_max && assumptions.contains(&Assumption::P2) {
        vec![ElectionState::Candidate, ElectionState::Leader]
    } else if !is_max && assumptions.contains(&Assumption::P1) {
        vec![ElectionState::Follower]
    } else {
        ElectionState::ALL.to_vec()
    }
}

/// Scaling report from the concrete-materialization engine.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub p: u32,
    pub verdict_proved: bool,
    pub states_explored: usize,
    pub messages_materialized: u64,
    pub wall_clock_ms: u128,
}

/// Same exploration as [`prove_guarantee`] but each delivery is built as a
/// full mailbox of p concrete messages (ids 1..=p) before being collapsed
/// to its observation class; verdicts must coincide with the class engine.
pub fn concrete_scaling_run(
    g: Guarantee,
    assumptions: &[Assumption],
    p: u32,
    depth: u32,
) -> (AbstractVerdict, ScalingReport) {
    assert!(p >= 2, "need at least two nodes");
    let started = Instant::now();
    let mut messages_materialized: u64 = 0;
    let clean = assumptions.contains(&Assumption::CleanRoundMailbox);

    let mut seen: HashSet<AbstractNodeState> = HashSet::new();
    let mut frontier: Vec<(AbstractNodeState, AbstractTrace)> = initial_states()
        .into_iter()
        .map(|s| {
            (
                s,
                AbstractTrace {
                    initial: s,
                    steps: Vec::new(),
                },
            )
        })
        .collect();
    let mut refuted: Option<AbstractTrace> = None;
    for (s, t) in &frontier {
        seen.insert(*s);
        if !g.holds_in(s) && refuted.is_none() {
            refuted = Some(t.clone());
        }
    }
    'outer: while !frontier.is_empty() {
        let mut next = Vec::new();
        for (s, trace) in frontier {
            if s.activation_count >= depth {
                continue;
            }
            let own_id = match s.role {
                Role::MaxId => p as u64,
                Role::NotMaxId => 1,
            };
            // candidate deliveries: the full clean-round mailbox, plus the
            // empty delivery when cleanness is not assumed
            let mut deliveries: Vec<Vec<Message>> = Vec::new();
            let mut full = Vec::with_capacity(p as usize);
            for sender in 1..=p as u64 {
                let states = allowed_sender_states(sender == p as u64, assumptions);
                full.push(Message {
                    sender_id: NodeId(sender),
                    state: states[0],
                });
                messages_materialized += 1;
            }
            deliveries.push(full);
            if !clean {
                deliveries.push(Vec::new());
            }
            for mailbox in deliveries {
                let env = EnvClass {
                    higher_id_present: mailbox.iter().any(|m| m.sender_id.0 > own_id),
                };
                let mut core = NodeCore::new(NodeId(own_id), s.state, s.even);
                core.mailbox = mailbox;
                let (core, _) = update_node(core);
                let succ = AbstractNodeState {
                    role: s.role,
                    state: core.state,
                    even: core.even_activation,
                    activation_count: s.activation_count + 1,
                };
                if !seen.insert(succ) {
                    continue;
                }
                let mut t = trace.clone();
                t.steps.push((env, succ));
                if !g.holds_in(&succ) {
                    refuted = Some(t);
                    break 'outer;
                }
                next.push((succ, t));
            }
        }
        frontier = next;
    }
    let verdict = match refuted {
        Some(trace) => AbstractVerdict::Refuted { trace },
        None => AbstractVerdict::Proved {
            states_explored: seen.len(),
        },
    };
    let report = ScalingReport {
        p,
        verdict_proved: verdict.is_proved(),
        states_explored: seen.len(),
        messages_materialized,
        wall_clock_ms: started.elapsed().as_millis(),
    };
    (verdict, report)
}

/// Composition of the two guarantees into the overall election property:
/// non-max On nodes are Followers within 2 activations (first guarantee),
/// the max-id On node is Leader within 4 (second); the property's own
/// antecedent of four activations per node covers both thresholds.
#[derive(Clone, Debug, Serialize)]
pub struct Composition {
    pub p_proved: bool,
    pub argument: Vec<String>,
}

pub fn compose_correctness(p1: &AbstractVerdict, p4: &AbstractVerdict) -> Composition {
    let p_proved = p1.is_proved() && p4.is_proved();
    let mut argument = vec![
        format!(
            "P1 ((count >= 2 and not max id) => Follower): {}",
            if p1.is_proved() { "proved" } else { "not established" }
        ),
        format!(
            "P4 ((count >= 4 and max id) => Leader): {}",
            if p4.is_proved() { "proved" } else { "not established" }
        ),
    ];
    if p_proved {
        argument.push(
            "once every On node has completed 4 activations, each is past both thresholds: \
             the max-id node is Leader by P4 and every other On node is Follower by P1, \
             which is the full election property"
                .to_string(),
        );
        argument.push(
            "sender-count antecedents of P1/P2 are discharged through the drift window: \
             count(i) >= 4 and count(j) >= count(i) - 2 give count(j) >= 2"
                .to_string(),
        );
    }
    Composition { p_proved, argument }
}

/// All subsets of the four assumptions.
pub fn assumption_subsets() -> Vec<Vec<Assumption>> {
    let mut out = Vec::new();
    for mask in 0u32..16 {
        out.push(
            ALL_ASSUMPTIONS
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, a)| *a)
                .collect(),
        );
    }
    out
}

/// Verdict agreement between the class engine and the concrete engine over
/// every assumption subset; used as a cross-validation harness.
pub fn engines_agree_on_all_subsets(g: Guarantee, p: u32, depth: u32) -> bool {
    assumption_subsets()
        .par_iter()
        .all(|assumptions| {
            let a = prove_guarantee(g, assumptions, p, depth);
            let (c, _) = concrete_scaling_run(g, assumptions, p, depth);
            a.is_proved() == c.is_proved()
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(role: Role, state: ElectionState, even: bool, count: u32) -> AbstractNodeState {
        AbstractNodeState {
            role,
            state,
            even,
            activation_count: count,
        }
    }

    #[test]
    fn env_classes_per_spec_examples() {
        let s = st(Role::MaxId, ElectionState::Follower, true, 0);
        assert_eq!(
            feasible_env_classes(&s, &ALL_ASSUMPTIONS, 5),
            vec![EnvClass {
                higher_id_present: false
            }]
        );
        let s = st(Role::NotMaxId, ElectionState::Follower, true, 0);
        assert_eq!(
            feasible_env_classes(&s, &[Assumption::CleanRoundMailbox], 5),
            vec![EnvClass {
                higher_id_present: true
            }]
        );
        assert_eq!(feasible_env_classes(&s, &[], 5).len(), 2);
    }

    #[test]
    fn abstract_step_examples() {
        let absent = EnvClass {
            higher_id_present: false,
        };
        let present = EnvClass {
            higher_id_present: true,
        };

        let s = abstract_step(&st(Role::MaxId, ElectionState::Follower, true, 0), absent);
        assert_eq!(
            (s.state, s.even, s.activation_count),
            (ElectionState::Candidate, false, 1)
        );

        let s = abstract_step(&st(Role::NotMaxId, ElectionState::Leader, true, 2), present);
        assert_eq!(
            (s.state, s.even, s.activation_count),
            (ElectionState::Follower, false, 3)
        );

        let s = abstract_step(&st(Role::MaxId, ElectionState::Candidate, false, 1), absent);
        assert_eq!(
            (s.state, s.even, s.activation_count),
            (ElectionState::Candidate, true, 2)
        );
    }

    #[test]
    fn pipeline_proves_p1_p2_p4() {
        let clean = [Assumption::CleanRoundMailbox];
        assert!(prove_guarantee(Guarantee::P1, &clean, 3, 8).is_proved());
        assert!(prove_guarantee(Guarantee::P2, &clean, 3, 8).is_proved());
        assert!(prove_guarantee(Guarantee::P4, &ALL_ASSUMPTIONS, 3, 8).is_proved());
    }

    #[test]
    fn p1_without_assumptions_refuted_with_shortest_trace() {
        match prove_guarantee(Guarantee::P1, &[], 3, 8) {
            AbstractVerdict::Refuted { trace } => {
                let last = trace.steps.last().map(|(_, s)| *s).unwrap_or(trace.initial);
                assert_eq!(last.role, Role::NotMaxId);
                assert!(last.activation_count >= 2);
                assert_ne!(last.state, ElectionState::Follower);
                // shortest possible violation: count 2 exactly
                assert_eq!(last.activation_count, 2);
                // every step must be a genuine abstract transition
                let mut cur = trace.initial;
                for (env, succ) in &trace.steps {
                    assert_eq!(abstract_step(&cur, *env), *succ);
                    cur = *succ;
                }
            }
            AbstractVerdict::Proved { .. } => {
                panic!("P1 must fail without the clean-round assumption")
            }
        }
    }

    #[test]
    fn composition_requires_both() {
        let proved = AbstractVerdict::Proved { states_explored: 1 };
        let refuted = AbstractVerdict::Refuted {
            trace: AbstractTrace {
                initial: st(Role::MaxId, ElectionState::Follower, true, 0),
                steps: vec![],
            },
        };
        assert!(compose_correctness(&proved, &proved).p_proved);
        assert!(!compose_correctness(&proved, &refuted).p_proved);
        assert!(!compose_correctness(&refuted, &proved).p_proved);
    }

    #[test]
    fn assumption_monotonicity() {
        // enlarging the assumption set never turns Proved into Refuted
        for g in [Guarantee::P1, Guarantee::P2, Guarantee::P4] {
            for sub in assumption_subsets() {
                if prove_guarantee(g, &sub, 3, 8).is_proved() {
                    let mut sup = sub.clone();
                    for a in ALL_ASSUMPTIONS {
                        if !sup.contains(&a) {
                            sup.push(a);
                        }
                    }
                    assert!(
                        prove_guarantee(g, &sup, 3, 8).is_proved(),
                        "{g:?} lost under superset of {sub:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn max_id_verdicts_insensitive_to_extra_assumptions() {
        // for max-id guarantees, any set containing cleanness gives the
        // same verdict (the higher-id predicate is always false)
        for g in [Guarantee::P2, Guarantee::P4] {
            let baseline = prove_guarantee(g, &[Assumption::CleanRoundMailbox], 3, 8).is_proved();
            for sub in assumption_subsets() {
                if sub.contains(&Assumption::CleanRoundMailbox) {
                    assert_eq!(prove_guarantee(g, &sub, 3, 8).is_proved(), baseline);
                }
            }
        }
    }

    #[test]
    fn promotion_bound_and_persistence() {
        // under cleanness the max-id node reaches Leader within 4
        // activations from any initial state and never leaves it
        let clean = [Assumption::CleanRoundMailbox];
        for state in ElectionState::ALL {
            for even in [true, false] {
                let mut s = st(Role::MaxId, state, even, 0);
                let mut leader_since: Option<u32> = None;
                for _ in 0..10 {
                    let env = feasible_env_classes(&s, &clean, 3)[0];
                    s = abstract_step(&s, env);
                    if s.state == ElectionState::Leader && leader_since.is_none() {
                        leader_since = Some(s.activation_count);
                    }
                    if leader_since.is_some() {
                        assert_eq!(s.state, ElectionState::Leader);
                    }
                }
                assert!(leader_since.expect("must reach Leader") <= 4);
            }
        }
    }

    #[test]
    fn engines_agree_for_every_assumption_subset() {
        for g in [Guarantee::P1, Guarantee::P2, Guarantee::P4] {
            assert!(engines_agree_on_all_subsets(g, 4, 8), "{g:?}");
        }
    }

    #[test]
    fn scaling_engine_small_instance() {
        let (v, report) = concrete_scaling_run(Guarantee::P4, &ALL_ASSUMPTIONS, 2, 8);
        assert!(v.is_proved());
        assert!(report.messages_materialized > 0);
        assert!(prove_guarantee(Guarantee::P4, &ALL_ASSUMPTIONS, 2, 8).is_proved());
    }
}
