//! The per-node election algorithm and its message and state types.
//!
//! A node only acts on its mailbox every other activation, controlled by a
//! parity flag, but it broadcasts its state on every activation. On an
//! acting activation the node drains the mailbox; seeing any sender with a
//! higher ID demotes it to follower, otherwise it climbs one rung of
//! follower -> candidate -> leader.

use serde::{Deserialize, Serialize};

/// Node identifier. Distinct per node within a network; only the order
/// between IDs is ever observed by the protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl NodeId {
    pub fn new(v: u64) -> Option<Self> {
        if v >= 1 {
            Some(NodeId(v))
        } else {
            None
        }
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElectionState {
    Follower,
    Candidate,
    Leader,
}

impl ElectionState {
    /// Follower -> Candidate -> Leader -> Leader.
    pub fn promoted(self) -> Self {
        match self {
            ElectionState::Follower => ElectionState::Candidate,
            ElectionState::Candidate => ElectionState::Leader,
            ElectionState::Leader => ElectionState::Leader,
        }
    }

    pub const ALL: [ElectionState; 3] = [
        ElectionState::Follower,
        ElectionState::Candidate,
        ElectionState::Leader,
    ];
}

/// Whether a node participates. Constant over a run: faults may only occur
/// before the window under verification (clean rounds).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    On,
    Off,
}

/// The only wire datum: sender ID plus the sender's state at send time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub sender_id: NodeId,
    pub state: ElectionState,
}

/// Per-node protocol state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NodeCore {
    pub id: NodeId,
    pub state: ElectionState,
    pub even_activation: bool,
    pub mailbox: Vec<Message>,
}

impl NodeCore {
    pub fn new(id: NodeId, state: ElectionState, even_activation: bool) -> Self {
        NodeCore {
            id,
            state,
            even_activation,
            mailbox: Vec::new(),
        }
    }
}

/// Appends `m` at the mailbox tail. The mailbox is an unbounded FIFO.
pub fn enqueue_message(mut node: NodeCore, m: Message) -> NodeCore {
    node.mailbox.push(m);
    node
}

/// One activation of a node.
///
/// If the parity flag is set, the node drains its mailbox and commits its
/// next state: follower on any higher sender ID, one promotion step
/// otherwise. The flag is then negated unconditionally and the node emits
/// exactly one message carrying its post-update state.
pub fn update_node(mut node: NodeCore) -> (NodeCore, Message) {
    if node.even_activation {
        let mut higher_id_received = false;
        for m in node.mailbox.drain(..) {
            if m.sender_id > node.id {
                higher_id_received = true;
            }
        }
        node.state = if higher_id_received {
            ElectionState::Follower
        } else {
            node.state.promoted()
        };
    }
    node.even_activation = !node.even_activation;
    let message = Message {
        sender_id: node.id,
        state: node.state,
    };
    (node, message)
}
