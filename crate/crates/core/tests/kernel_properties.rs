//! Randomized invariants of the per-node election kernel.

use leadelect::protocol::{
    enqueue_message, update_node, ElectionState, Message, NodeCore, NodeId,
};
use proptest::prelude::*;

fn arb_state() -> impl Strategy<Value = ElectionState> {
    prop_oneof![
        Just(ElectionState::Follower),
        Just(ElectionState::Candidate),
        Just(ElectionState::Leader),
    ]
}

fn arb_message() -> impl Strategy<Value = Message> {
    (1u64..=64, arb_state()).prop_map(|(id, state)| Message {
        sender_id: NodeId(id),
        state,
    })
}

fn arb_node() -> impl Strategy<Value = NodeCore> {
    (
        1u64..=64,
        arb_state(),
        any::<bool>(),
        prop::collection::vec(arb_message(), 0..12),
    )
        .prop_map(|(id, state, even, mailbox)| {
            let mut n = NodeCore::new(NodeId(id), state, even);
            for m in mailbox {
                n = enqueue_message(n, m);
            }
            n
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    /// A single higher-ID sender forces Follower no matter what else the
    /// mailbox holds, and lower-ID senders can never cause a demotion.
    #[test]
    fn monotone_dominance(node in arb_node()) {
        let acting = node.even_activation;
        let any_higher = node.mailbox.iter().any(|m| m.sender_id > node.id);
        let before = node.state;
        let (after, _) = update_node(node);
        if acting {
            if any_higher {
                prop_assert_eq!(after.state, ElectionState::Follower);
            } else {
                prop_assert_eq!(after.state, before.promoted());
            }
        } else {
            prop_assert_eq!(after.state, before);
        }
    }

    /// The parity flag flips on every activation, acting or not.
    #[test]
    fn parity_alternation(node in arb_node()) {
        let even = node.even_activation;
        let (after, _) = update_node(node);
        prop_assert_eq!(after.even_activation, !even);
    }

    /// Every activation emits exactly one message, carrying the node's own
    /// ID and its post-update state.
    #[test]
    fn send_always(node in arb_node()) {
        let id = node.id;
        let (after, msg) = update_node(node);
        prop_assert_eq!(msg.sender_id, id);
        prop_assert_eq!(msg.state, after.state);
    }

    /// Without interference a node climbs exactly one rung per acting
    /// activation and Leader is absorbing.
    #[test]
    fn promotion_chain(start in arb_state(), steps in 1usize..6) {
        let mut node = NodeCore::new(NodeId(9), start, true);
        let mut expected = start;
        for _ in 0..steps {
            let (next, _) = update_node(node);
            expected = expected.promoted();
            prop_assert_eq!(next.state, expected);
            node = NodeCore { even_activation: true, ..next };
        }
        // absorbing within at most two acting steps
        if steps >= 2 {
            prop_assert_eq!(node.state, ElectionState::Leader);
        }
    }

    /// The acting activation drains the mailbox completely; a skipped one
    /// leaves it untouched.
    #[test]
    fn mailbox_drain(node in arb_node()) {
        let acting = node.even_activation;
        let before = node.mailbox.clone();
        let (after, _) = update_node(node);
        if acting {
            prop_assert!(after.mailbox.is_empty());
        } else {
            prop_assert_eq!(after.mailbox, before);
        }
    }
}
