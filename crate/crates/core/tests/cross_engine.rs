//! Consistency checks across the three verification engines and the
//! simulator.

use leadelect::abstraction::{
    abstract_step, engines_agree_on_all_subsets, feasible_env_classes, AbstractNodeState,
    Assumption, Guarantee, Role, ALL_ASSUMPTIONS,
};
use leadelect::direct::{
    coexistence_check, collect_reachable_projections, ExploreConfig, ModeSets,
};
use leadelect::drift::{replay_witness_counts, verify_p3, DriftSpec, DriftVerdict};
use leadelect::protocol::Mode;
use leadelect::timing::{StartConvention, TimingConstants};
use std::collections::HashSet;

#[test]
fn drift_witnesses_replay_in_the_simulator() {
    // several tightened windows, all refutable; each witness must replay
    // with exactly the violating counts
    for (lower, upper) in [(-1i64, 0i64), (0, 0), (-2, 0), (-1, 1)] {
        let spec = DriftSpec {
            lower,
            upper,
            start_convention: StartConvention::ModelM,
            ..DriftSpec::defaults()
        };
        match verify_p3(&spec).unwrap() {
            DriftVerdict::Refuted(w) => {
                let (c_i, c_j) = replay_witness_counts(&w, &spec.constants).unwrap();
                assert_eq!(
                    (c_i, c_j),
                    (w.k_i + 1, w.k_j + 1),
                    "window [{lower}, {upper}]"
                );
            }
            DriftVerdict::Proved => panic!("window [{lower}, {upper}] must be refutable"),
        }
    }
}

#[test]
fn count_vectors_outside_the_drift_geometry_are_unreachable() {
    // induction over total firings: a count vector whose spread exceeds 2
    // can only be entered from a vector that already violates the spread,
    // or through a firing the coexistence check rejects
    let tc = TimingConstants::defaults();
    for p in [2usize, 3] {
        let mut vectors: Vec<Vec<u32>> = vec![vec![0; p]];
        for _ in 0..6 {
            vectors = vectors
                .iter()
                .flat_map(|v| {
                    (0..p).map(move |i| {
                        let mut n = v.clone();
                        n[i] += 1;
                        n
                    })
                })
                .collect();
            vectors.sort();
            vectors.dedup();
        }
        for v in &vectors {
            let spread = v.iter().max().unwrap() - v.iter().min().unwrap();
            if spread <= 2 {
                continue;
            }
            for i in 0..p {
                if v[i] == 0 {
                    continue;
                }
                let mut pred = v.clone();
                pred[i] -= 1;
                let pred_spread = pred.iter().max().unwrap() - pred.iter().min().unwrap();
                if pred_spread > 2 {
                    continue; // predecessor itself unreachable by induction
                }
                let others: Vec<u32> = (0..p).filter(|&j| j != i).map(|j| pred[j]).collect();
                assert!(
                    !coexistence_check(pred[i], &others, &tc).unwrap(),
                    "vector {v:?} reachable by firing node {i} from {pred:?}"
                );
            }
        }
    }
}

#[test]
fn abstract_traces_cover_concrete_projections() {
    // every (state, parity, count) combination any node exhibits in the
    // exhaustive concrete exploration must be reachable in the abstract
    // engine under the full assumption set, with the matching role
    let cfg = ExploreConfig {
        max_activations_per_node: 6,
        mode_sets: ModeSets::Fixed(vec![Mode::On, Mode::On, Mode::On]),
        ..ExploreConfig::new(3)
    };
    let concrete = collect_reachable_projections(&cfg);
    assert!(!concrete.is_empty());

    let mut abstract_reach: HashSet<(Role, leadelect::protocol::ElectionState, bool, u32)> =
        HashSet::new();
    let mut frontier: Vec<AbstractNodeState> = Vec::new();
    for role in [Role::MaxId, Role::NotMaxId] {
        for state in leadelect::protocol::ElectionState::ALL {
            for even in [true, false] {
                let s = AbstractNodeState {
                    role,
                    state,
                    even,
                    activation_count: 0,
                };
                abstract_reach.insert((role, state, even, 0));
                frontier.push(s);
            }
        }
    }
    while let Some(s) = frontier.pop() {
        if s.activation_count >= 6 {
            continue;
        }
        for env in feasible_env_classes(&s, &ALL_ASSUMPTIONS, 3) {
            let n = abstract_step(&s, env);
            if abstract_reach.insert((n.role, n.state, n.even, n.activation_count)) {
                frontier.push(n);
            }
        }
    }

    for (is_max, state, even, count) in &concrete {
        let role = if *is_max { Role::MaxId } else { Role::NotMaxId };
        assert!(
            abstract_reach.contains(&(role, *state, *even, *count)),
            "concrete projection ({is_max}, {state:?}, {even}, {count}) missing abstractly"
        );
    }
}

#[test]
fn class_and_scaling_engines_agree_everywhere() {
    for g in [Guarantee::P1, Guarantee::P2, Guarantee::P4] {
        assert!(engines_agree_on_all_subsets(g, 4, 8), "{g:?}");
    }
}

#[test]
fn clean_assumption_is_load_bearing() {
    use leadelect::abstraction::prove_guarantee;
    // removing only the cleanness assumption flips P1; P4 is insensitive
    // because the max-id node never observes a higher ID either way
    let without: Vec<Assumption> = ALL_ASSUMPTIONS
        .iter()
        .copied()
        .filter(|a| *a != Assumption::CleanRoundMailbox)
        .collect();
    assert!(!prove_guarantee(Guarantee::P1, &without, 3, 8).is_proved());
    assert!(prove_guarantee(Guarantee::P4, &without, 3, 8).is_proved());
    assert!(prove_guarantee(Guarantee::P1, &ALL_ASSUMPTIONS, 3, 8).is_proved());
    assert!(prove_guarantee(Guarantee::P4, &ALL_ASSUMPTIONS, 3, 8).is_proved());
}
