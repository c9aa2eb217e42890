//! Exact-time discrete-event simulation of a concrete network.
//!
//! Every node owns a constant period, a first activation time, and a fresh
//! jitter per activation; the event loop always fires the node whose next
//! activation is earliest, delivers its broadcast instantaneously, and
//! schedules its next firing at `now + period + jitter`. All times are exact
//! rationals; with a fixed seed (or an explicit jitter table) a run is fully
//! deterministic.

use crate::protocol::{
    enqueue_message, update_node, ElectionState, Message, Mode, NodeCore, NodeId,
};
use crate::rat::Rat;
use crate::timing::{TimingConstants, TimingError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;

/// Static description of one node.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeConfig {
    pub id: NodeId,
    pub period: Rat,
    pub start: Rat,
    pub mode: Mode,
    pub initial_state: ElectionState,
    pub initial_even: bool,
}

/// Run-length criterion.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Horizon {
    /// Stop before the first event strictly later than this time.
    Time(Rat),
    /// Stop once every On node has fired at least this many times.
    MinActivations(u32),
}

/// Full simulation input. Deserializes from the JSON config format.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    pub constants: TimingConstants,
    pub nodes: Vec<NodeConfig>,
    pub seed: u64,
    pub horizon: Horizon,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.constants.validate()?;
        let mut seen = std::collections::HashSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id) {
                return Err(SimError::DuplicateId(n.id));
            }
            if n.period < self.constants.period_min || n.period > self.constants.period_max {
                return Err(SimError::PeriodOutOfRange(n.id));
            }
            if n.start.is_negative() || n.start > n.period {
                return Err(SimError::StartOutOfRange(n.id));
            }
        }
        if !self.nodes.iter().any(|n| n.mode == Mode::On) {
            return Err(SimError::NoOnNode);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("invalid timing constants: {0}")]
    Constants(#[from] TimingError),
    #[error("duplicate node id {0}")]
    DuplicateId(NodeId),
    #[error("node {0}: period outside [period_min, period_max]")]
    PeriodOutOfRange(NodeId),
    #[error("node {0}: start outside [0, period]")]
    StartOutOfRange(NodeId),
    #[error("no node is On")]
    NoOnNode,
}

/// Dynamic simulation state.
#[derive(Clone, Debug)]
pub struct SimState {
    pub cores: Vec<NodeCore>,
    pub next_activation_time: Vec<Rat>,
    pub activation_count: Vec<u32>,
    pub now: Rat,
}

/// One firing, as recorded in the trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: Rat,
    pub node_id: NodeId,
    /// 0-based firing index of this node.
    pub activation_index: u32,
    /// Whether this activation ran the mailbox-processing block.
    pub executed_code: bool,
    pub post_state: ElectionState,
    pub sent: Message,
    /// Jitter drawn here to schedule this node's next firing.
    pub jitter_drawn: Rat,
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
    pub final_state: SimState,
}

impl Trace {
    /// Tab-separated trace with a header line.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "time\tnode_id\tactivation_index\texecuted_code\tpost_state\tsent_id\tsent_state\tjitter"
        )?;
        for e in &self.events {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                e.time,
                e.node_id,
                e.activation_index,
                e.executed_code,
                state_name(e.post_state),
                e.sent.sender_id,
                state_name(e.sent.state),
                e.jitter_drawn
            )?;
        }
        Ok(())
    }
}

fn state_name(s: ElectionState) -> &'static str {
    match s {
        ElectionState::Follower => "follower",
        ElectionState::Candidate => "candidate",
        ElectionState::Leader => "leader",
    }
}

/// Where per-activation jitters come from.
///
/// The table variant exists to replay published schedules bit-exactly; its
/// entries are taken verbatim and are deliberately not checked against the
/// jitter bounds.
pub enum JitterSource {
    Seeded(Box<ChaCha8Rng>),
    Table(JitterTable),
}

/// Explicit jitter per (node index, activation k >= 1). Missing entries are
/// zero.
#[derive(Clone, Debug, Default)]
pub struct JitterTable {
    pub entries: HashMap<(usize, u32), Rat>,
}

impl JitterTable {
    pub fn set(&mut self, node: usize, k: u32, jitter: Rat) {
        self.entries.insert((node, k), jitter);
    }
}

const JITTER_GRID: i64 = 1 << 20;

impl JitterSource {
    pub fn seeded(seed: u64) -> Self {
        JitterSource::Seeded(Box::new(ChaCha8Rng::seed_from_u64(seed)))
    }

    /// Jitter for node `node`'s activation `k`. Seeded draws are uniform over
    /// the dyadic grid of denominator 2^20 spanning the jitter interval.
    fn draw(&mut self, tc: &TimingConstants, node: usize, k: u32) -> Rat {
        match self {
            JitterSource::Seeded(rng) => {
                let ticks = rng.gen_range(0..=JITTER_GRID);
                let span = &tc.jitter_max - &tc.jitter_min;
                &tc.jitter_min + &(span * Rat::new(ticks, JITTER_GRID))
            }
            JitterSource::Table(t) => t
                .entries
                .get(&(node, k))
                .cloned()
                .unwrap_or_else(Rat::zero),
        }
    }
}

/// Builds the initial state: every node holds a self message `(id, Follower)`
/// followed by one message from each On node (itself included), its first
/// activation is scheduled at `start`, and the clock is at zero.
pub fn init_network(cfg: &SimConfig) -> Result<SimState, SimError> {
    cfg.validate()?;
    let mut cores: Vec<NodeCore> = cfg
        .nodes
        .iter()
        .map(|n| {
            let mut core = NodeCore::new(n.id, n.initial_state, n.initial_even);
            core.mailbox.push(Message {
                sender_id: n.id,
                state: ElectionState::Follower,
            });
            core
        })
        .collect();
    for sender in &cfg.nodes {
        if sender.mode == Mode::On {
            let m = Message {
                sender_id: sender.id,
                state: sender.initial_state,
            };
            for core in &mut cores {
                core.mailbox.push(m);
            }
        }
    }
    Ok(SimState {
        cores,
        next_activation_time: cfg.nodes.iter().map(|n| n.start.clone()).collect(),
        activation_count: vec![0; cfg.nodes.len()],
        now: Rat::zero(),
    })
}

/// Fires the On node with the earliest next activation (ties broken by lowest
/// node index) and delivers its broadcast to every mailbox, the sender's
/// included. Returns `None` when no node is On.
pub fn step(
    state: &mut SimState,
    cfg: &SimConfig,
    jitter: &mut JitterSource,
) -> Option<TraceEvent> {
    let i = (0..cfg.nodes.len())
        .filter(|&i| cfg.nodes[i].mode == Mode::On)
        .min_by(|&a, &b| state.next_activation_time[a].cmp(&state.next_activation_time[b]))?;

    state.now = state.next_activation_time[i].clone();
    let executed_code = state.cores[i].even_activation;
    let (core, out) = update_node(std::mem::replace(
        &mut state.cores[i],
        NodeCore::new(cfg.nodes[i].id, ElectionState::Follower, false),
    ));
    state.cores[i] = core;
    for core in &mut state.cores {
        let placeholder = NodeCore::new(core.id, core.state, core.even_activation);
        let taken = std::mem::replace(core, placeholder);
        *core = enqueue_message(taken, out);
    }

    let activation_index = state.activation_count[i];
    state.activation_count[i] += 1;
    let j = jitter.draw(&cfg.constants, i, state.activation_count[i]);
    state.next_activation_time[i] = &state.now + &(&cfg.nodes[i].period + &j);

    Some(TraceEvent {
        time: state.now.clone(),
        node_id: cfg.nodes[i].id,
        activation_index,
        executed_code,
        post_state: state.cores[i].state,
        sent: out,
        jitter_drawn: j,
    })
}

fn horizon_reached(state: &SimState, cfg: &SimConfig) -> bool {
    match &cfg.horizon {
        Horizon::Time(max) => {
            // done when the earliest pending On firing is past the horizon
            (0..cfg.nodes.len())
                .filter(|&i| cfg.nodes[i].mode == Mode::On)
                .all(|i| state.next_activation_time[i] > *max)
        }
        Horizon::MinActivations(n) => (0..cfg.nodes.len())
            .filter(|&i| cfg.nodes[i].mode == Mode::On)
            .all(|i| state.activation_count[i] >= *n),
    }
}

/// Runs the event loop to the horizon with seeded jitter.
pub fn simulate(cfg: &SimConfig) -> Result<Trace, SimError> {
    simulate_with(cfg, JitterSource::seeded(cfg.seed))
}

/// As [`simulate`] but with the caller's jitter source (e.g. an explicit
/// table for replaying a known schedule).
pub fn simulate_with(cfg: &SimConfig, mut jitter: JitterSource) -> Result<Trace, SimError> {
    let mut state = init_network(cfg)?;
    let mut events = Vec::new();
    while !horizon_reached(&state, cfg) {
        match step(&mut state, cfg, &mut jitter) {
            Some(e) => events.push(e),
            None => break,
        }
    }
    Ok(Trace {
        events,
        final_state: state,
    })
}

/// Outcome of the end-state property check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PropertyCheck {
    /// Some On node has fired fewer than four times; nothing is claimed.
    NotApplicable,
    Holds,
    Violated { offenders: Vec<NodeId> },
}

/// Checks the election property on a final state: once every On node has
/// fired at least four times, the On node with the greatest ID must be
/// Leader and every other On node a Follower.
pub fn check_property_p(state: &SimState, cfg: &SimConfig) -> PropertyCheck {
    let on: Vec<usize> = (0..cfg.nodes.len())
        .filter(|&i| cfg.nodes[i].mode == Mode::On)
        .collect();
    if on.iter().any(|&i| state.activation_count[i] < 4) {
        return PropertyCheck::NotApplicable;
    }
    let max_id = on.iter().map(|&i| cfg.nodes[i].id).max().expect("on node");
    let mut offenders = Vec::new();
    for &i in &on {
        let expected = if cfg.nodes[i].id == max_id {
            ElectionState::Leader
        } else {
            ElectionState::Follower
        };
        if state.cores[i].state != expected {
            offenders.push(cfg.nodes[i].id);
        }
    }
    if offenders.is_empty() {
        PropertyCheck::Holds
    } else {
        PropertyCheck::Violated { offenders }
    }
}
