//! Brute-force verification of small networks: every discrete initial
//! condition, every timing-feasible firing interleaving.
//!
//! A naive tree over firing prefixes is hopeless (its branching factor
//! barely decays with depth), so exploration runs over merged states: each
//! node keeps only what the protocol can observe — election state, parity,
//! and whether a higher ID is pending in its mailbox — plus per-node firing
//! counts. Scheduling is over-approximated by two sound prunings:
//!
//! * a coexistence check — a node may fire only if some timing assignment
//!   puts its firing instant inside every other node's current count window
//!   (closed windows, so simultaneous firings survive in both orders);
//! * the message-window rule — when the two-activation window property is
//!   proved for the constants in use, no node may fire three times in a row
//!   without every other On node firing in between.
//!
//! Every state reachable under real scheduling is reachable here, so a
//! clean sweep is a proof. A violation found in the merged space is only
//! reported after its firing prefix passes an exact feasibility check with
//! full argmin semantics; a violation that fails that check makes the
//! result Inconclusive — never a silent Proved.

use crate::drift::verify_read_window;
use crate::linear::{activation_time_expr, standard_bounds, ConstraintSystem, LinExpr, Relation,
    SymVar};
use crate::protocol::{ElectionState, Mode};
use crate::rat::Rat;
use crate::simplex::{is_satisfiable, SatResult, SolverError, SolverLimits};
use crate::timing::{StartConvention, TimingConstants};
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Mutex;

/// Which mode assignments to enumerate.
#[derive(Clone, Debug)]
pub enum ModeSets {
    /// Every assignment with at least one On node.
    All,
    Fixed(Vec<Mode>),
}

#[derive(Clone, Debug)]
pub struct ExploreConfig {
    pub p: usize,
    pub constants: TimingConstants,
    pub max_activations_per_node: u32,
    pub mode_sets: ModeSets,
    /// Explosion guard: merged states per initial assignment.
    pub max_states: usize,
    /// Test-only fault injection: broadcasts never reach this node index.
    pub sabotage_skip_receiver: Option<usize>,
}

impl ExploreConfig {
    pub fn new(p: usize) -> Self {
        ExploreConfig {
            p,
            constants: TimingConstants::defaults(),
            max_activations_per_node: 10,
            mode_sets: ModeSets::All,
            max_states: 2_000_000,
            sabotage_skip_receiver: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.p < 1 {
            return Err("need p >= 1".into());
        }
        if self.max_activations_per_node < 4 {
            return Err("need at least 4 activations per node".into());
        }
        self.constants.validate().map_err(|e| e.to_string())
    }
}

/// A firing order under construction, with its per-node counts.
#[derive(Clone, Debug, Default)]
pub struct InterleavingPrefix {
    pub firings: Vec<usize>,
    pub counts: Vec<u32>,
}

impl InterleavingPrefix {
    pub fn empty(p: usize) -> Self {
        InterleavingPrefix {
            firings: Vec::new(),
            counts: vec![0; p],
        }
    }

    pub fn push(&mut self, node: usize) {
        self.firings.push(node);
        self.counts[node] += 1;
    }

    pub fn pop(&mut self) {
        if let Some(node) = self.firings.pop() {
            self.counts[node] -= 1;
        }
    }
}

/// One discrete initial assignment.
#[derive(Clone, Debug)]
pub struct InitialAssignment {
    pub modes: Vec<Mode>,
    pub states: Vec<ElectionState>,
    pub evens: Vec<bool>,
}

/// A concrete violating run.
#[derive(Clone, Debug)]
pub struct DirectWitness {
    pub initial: InitialAssignment,
    pub firings: Vec<usize>,
    /// Final election state per node.
    pub final_states: Vec<ElectionState>,
    /// Exact schedule realizing the interleaving.
    pub timing: BTreeMap<SymVar, Rat>,
}

#[derive(Clone, Debug)]
pub enum DirectVerdict {
    Proved {
        initial_assignments: usize,
        merged_states: usize,
    },
    Refuted(Box<DirectWitness>),
    Inconclusive {
        reason: String,
    },
}

impl DirectVerdict {
    pub fn is_proved(&self) -> bool {
        matches!(self, DirectVerdict::Proved { .. })
    }
}

/// Exact feasibility of a full interleaving under argmin scheduling: event
/// m fires node σ(m) at its next activation time, and that time is a lower
/// bound for every On node's pending activation. Returns a witness schedule
/// when satisfiable.
pub fn prefix_feasibility(
    prefix: &InterleavingPrefix,
    modes: &[Mode],
    cfg: &ExploreConfig,
    limits: &SolverLimits,
) -> Result<Option<BTreeMap<SymVar, Rat>>, SolverError> {
    let mut sys = ConstraintSystem::new();
    let on: Vec<usize> = (0..cfg.p).filter(|&i| modes[i] == Mode::On).collect();
    let mut max_k = vec![0u32; cfg.p];
    for &n in &prefix.firings {
        max_k[n] += 1;
    }
    for &i in &on {
        sys.extend(standard_bounds(
            i,
            max_k[i],
            &cfg.constants,
            StartConvention::ModelM,
        ));
    }
    let mut counts = vec![0u32; cfg.p];
    for &n in &prefix.firings {
        let t = activation_time_expr(n, counts[n]);
        for &j in &on {
            if j != n {
                sys.compare(t.clone(), Relation::Le, activation_time_expr(j, counts[j]));
            }
        }
        counts[n] += 1;
    }
    match is_satisfiable(&sys, limits)? {
        SatResult::Sat(w) => Ok(Some(w)),
        SatResult::Unsat => Ok(None),
    }
}

/// True iff the prefix extended by one firing of `next` stays realizable.
pub fn feasible_extension(
    prefix: &InterleavingPrefix,
    next: usize,
    modes: &[Mode],
    cfg: &ExploreConfig,
) -> Result<bool, SolverError> {
    let mut ext = prefix.clone();
    ext.push(next);
    Ok(prefix_feasibility(&ext, modes, cfg, &SolverLimits::default())?.is_some())
}

/// Cache for the single-instant coexistence queries, keyed by the firing
/// node's completed count and the sorted counts of the other On nodes
/// (identical parameter intervals make nodes interchangeable).
type CoexCache = Mutex<HashMap<(u32, Vec<u32>), bool>>;

/// Can node `i` fire its next activation while each other On node `j` sits
/// at exactly `counts[j]` completed activations? Single shared instant,
/// closed windows.
fn coexistence_feasible(
    fire_count: u32,
    other_counts: &mut [u32],
    tc: &TimingConstants,
    cache: &CoexCache,
    limits: &SolverLimits,
) -> Result<bool, SolverError> {
    other_counts.sort_unstable();
    let key = (fire_count, other_counts.to_vec());
    if let Some(&v) = cache.lock().unwrap().get(&key) {
        return Ok(v);
    }
    let mut sys = ConstraintSystem::new();
    let t = LinExpr::var(SymVar::TimePoint(0));
    sys.extend(standard_bounds(0, fire_count, tc, StartConvention::ModelM));
    sys.compare(activation_time_expr(0, fire_count), Relation::Eq, t.clone());
    for (slot, &c) in other_counts.iter().enumerate() {
        let node = slot + 1;
        sys.extend(standard_bounds(node, c, tc, StartConvention::ModelM));
        if c >= 1 {
            sys.compare(activation_time_expr(node, c - 1), Relation::Le, t.clone());
        }
        sys.compare(t.clone(), Relation::Le, activation_time_expr(node, c));
    }
    let feasible = matches!(is_satisfiable(&sys, limits)?, SatResult::Sat(_));
    cache.lock().unwrap().insert(key, feasible);
    Ok(feasible)
}

/// Observable per-node state in the merged exploration.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
struct MergedNode {
    state: ElectionState,
    even: bool,
    higher_seen: bool,
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct MergedKey {
    nodes: Vec<MergedNode>,
    counts: Vec<u32>,
    gaps: Vec<u8>,
}

enum RootOutcome {
    Clean { merged_states: usize },
    Violation(Box<DirectWitness>),
    Inconclusive(String),
}

struct RootCtx<'a> {
    cfg: &'a ExploreConfig,
    modes: &'a [Mode],
    on: Vec<usize>,
    window_pruning: bool,
    cache: &'a CoexCache,
    limits: SolverLimits,
    visited: HashSet<MergedKey>,
    prefix: InterleavingPrefix,
    spurious: bool,
    projections: Option<&'a Mutex<HashSet<Projection>>>,
}

/// Observable footprint of one node in one reachable merged state: whether
/// it holds the greatest On ID, its election state, parity, and count.
pub type Projection = (bool, ElectionState, bool, u32);

impl<'a> RootCtx<'a> {
    /// Property check on a merged state; exact because mailbox dynamics are
    /// fully captured by the higher-seen bit.
    fn property_violated(&self, nodes: &[MergedNode], counts: &[u32]) -> bool {
        if self.on.iter().any(|&i| counts[i] < 4) {
            return false;
        }
        let max_on = *self.on.iter().max().expect("on node");
        self.on.iter().any(|&i| {
            let expected = if i == max_on {
                ElectionState::Leader
            } else {
                ElectionState::Follower
            };
            nodes[i].state != expected
        })
    }

    fn fire(&self, nodes: &mut [MergedNode], gaps: &mut [u8], i: usize) {
        let p = self.cfg.p;
        if nodes[i].even {
            nodes[i].state = if nodes[i].higher_seen {
                ElectionState::Follower
            } else {
                nodes[i].state.promoted()
            };
            nodes[i].higher_seen = false;
        }
        nodes[i].even = !nodes[i].even;
        for (r, node) in nodes.iter_mut().enumerate() {
            if self.cfg.sabotage_skip_receiver == Some(r) {
                continue;
            }
            // canonical ids are node index + 1
            if i > r {
                node.higher_seen = true;
            }
        }
        for &j in &self.on {
            if j != i {
                gaps[i * p + j] = (gaps[i * p + j] + 1).min(3);
            }
            gaps[j * p + i] = 0;
        }
    }

    fn record_projections(&self, nodes: &[MergedNode], counts: &[u32]) {
        if let Some(sink) = self.projections {
            let max_on = self.on.iter().max().copied();
            let mut sink = sink.lock().unwrap();
            for &i in &self.on {
                sink.insert((Some(i) == max_on, nodes[i].state, nodes[i].even, counts[i]));
            }
        }
    }

    fn dfs(
        &mut self,
        nodes: &[MergedNode],
        counts: &[u32],
        gaps: &[u8],
    ) -> Result<Option<Box<DirectWitness>>, SolverError> {
        self.record_projections(nodes, counts);
        if self.property_violated(nodes, counts) {
            // only an exactly-realizable prefix is a counterexample
            match prefix_feasibility(&self.prefix, self.modes, self.cfg, &self.limits)? {
                Some(timing) => {
                    return Ok(Some(Box::new(DirectWitness {
                        initial: InitialAssignment {
                            modes: self.modes.to_vec(),
                            states: vec![],
                            evens: vec![],
                        },
                        firings: self.prefix.firings.clone(),
                        final_states: nodes.iter().map(|n| n.state).collect(),
                        timing,
                    })));
                }
                None => {
                    self.spurious = true;
                    return Ok(None);
                }
            }
        }
        if self.visited.len() > self.cfg.max_states {
            self.spurious = true;
            return Ok(None);
        }
        let p = self.cfg.p;
        for idx in 0..self.on.len() {
            let i = self.on[idx];
            if counts[i] >= self.cfg.max_activations_per_node {
                continue;
            }
            if self.window_pruning
                && self
                    .on
                    .iter()
                    .any(|&j| j != i && gaps[i * p + j] >= 2)
            {
                continue;
            }
            let mut others: Vec<u32> = self
                .on
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| counts[j])
                .collect();
            if !coexistence_feasible(
                counts[i],
                &mut others,
                &self.cfg.constants,
                self.cache,
                &self.limits,
            )? {
                continue;
            }
            let mut nn = nodes.to_vec();
            let mut ng = gaps.to_vec();
            self.fire(&mut nn, &mut ng, i);
            let mut nc = counts.to_vec();
            nc[i] += 1;
            let key = MergedKey {
                nodes: nn.clone(),
                counts: nc.clone(),
                gaps: ng.clone(),
            };
            if !self.visited.insert(key) {
                continue;
            }
            self.prefix.push(i);
            let hit = self.dfs(&nn, &nc, &ng)?;
            self.prefix.pop();
            if hit.is_some() {
                return Ok(hit);
            }
        }
        Ok(None)
    }
}

fn mode_assignments(cfg: &ExploreConfig) -> Vec<Vec<Mode>> {
    match &cfg.mode_sets {
        ModeSets::Fixed(m) => vec![m.clone()],
        ModeSets::All => {
            let mut out = Vec::new();
            for mask in 1u32..(1 << cfg.p) {
                out.push(
                    (0..cfg.p)
                        .map(|i| {
                            if mask & (1 << i) != 0 {
                                Mode::On
                            } else {
                                Mode::Off
                            }
                        })
                        .collect(),
                );
            }
            out
        }
    }
}

fn initial_assignments(cfg: &ExploreConfig) -> Vec<InitialAssignment> {
    let mut out = Vec::new();
    for modes in mode_assignments(cfg) {
        let mut stack: Vec<(Vec<ElectionState>, Vec<bool>)> = vec![(vec![], vec![])];
        for _ in 0..cfg.p {
            let mut next = Vec::new();
            for (states, evens) in stack {
                for s in ElectionState::ALL {
                    for e in [true, false] {
                        let mut st = states.clone();
                        st.push(s);
                        let mut ev = evens.clone();
                        ev.push(e);
                        next.push((st, ev));
                    }
                }
            }
            stack = next;
        }
        for (states, evens) in stack {
            out.push(InitialAssignment {
                modes: modes.clone(),
                states,
                evens,
            });
        }
    }
    out
}

fn explore_root(
    cfg: &ExploreConfig,
    init: &InitialAssignment,
    window_pruning: bool,
    cache: &CoexCache,
    projections: Option<&Mutex<HashSet<Projection>>>,
) -> RootOutcome {
    let p = cfg.p;
    let on: Vec<usize> = (0..p).filter(|&i| init.modes[i] == Mode::On).collect();
    let nodes: Vec<MergedNode> = (0..p)
        .map(|i| MergedNode {
            state: init.states[i],
            even: init.evens[i],
            // initial mailboxes hold one message from every On node
            higher_seen: on.iter().any(|&j| j > i),
        })
        .collect();
    let counts = vec![0u32; p];
    let gaps = vec![0u8; p * p];
    let mut ctx = RootCtx {
        cfg,
        modes: &init.modes,
        on,
        window_pruning,
        cache,
        limits: SolverLimits::default(),
        visited: HashSet::new(),
        prefix: InterleavingPrefix::empty(p),
        spurious: false,
        projections,
    };
    match ctx.dfs(&nodes, &counts, &gaps) {
        Err(e) => RootOutcome::Inconclusive(e.to_string()),
        Ok(Some(mut w)) => {
            w.initial.states = init.states.clone();
            w.initial.evens = init.evens.clone();
            RootOutcome::Violation(w)
        }
        Ok(None) => {
            if ctx.spurious {
                RootOutcome::Inconclusive(
                    "merged exploration hit an unvalidated violation or the state ceiling".into(),
                )
            } else {
                RootOutcome::Clean {
                    merged_states: ctx.visited.len(),
                }
            }
        }
    }
}

/// Checks the election property over every initial condition and every
/// realizable interleaving up to the per-node depth.
pub fn verify_direct(cfg: &ExploreConfig) -> DirectVerdict {
    if let Err(e) = cfg.validate() {
        return DirectVerdict::Inconclusive { reason: e };
    }
    // the message-window rule may only prune when it is a theorem for
    // these constants
    let window_pruning = matches!(
        verify_read_window(&cfg.constants, 2, cfg.max_activations_per_node.max(2)),
        Ok(v) if v.is_proved()
    );
    let roots = initial_assignments(cfg);
    let cache: CoexCache = Mutex::new(HashMap::new());
    let outcomes: Vec<RootOutcome> = roots
        .par_iter()
        .map(|init| explore_root(cfg, init, window_pruning, &cache, None))
        .collect();
    let mut merged_states = 0usize;
    let mut inconclusive: Option<String> = None;
    for o in outcomes {
        match o {
            RootOutcome::Violation(w) => return DirectVerdict::Refuted(w),
            RootOutcome::Inconclusive(r) => inconclusive = Some(r),
            RootOutcome::Clean { merged_states: m } => merged_states += m,
        }
    }
    match inconclusive {
        Some(reason) => DirectVerdict::Inconclusive { reason },
        None => DirectVerdict::Proved {
            initial_assignments: roots.len(),
            merged_states,
        },
    }
}

/// Every (is-max-on-node, state, parity, count) tuple occurring anywhere in
/// the merged exploration; used to cross-check that the abstract engine's
/// trace set covers every concrete behaviour.
pub fn collect_reachable_projections(cfg: &ExploreConfig) -> HashSet<Projection> {
    let window_pruning = matches!(
        verify_read_window(&cfg.constants, 2, cfg.max_activations_per_node.max(2)),
        Ok(v) if v.is_proved()
    );
    let cache: CoexCache = Mutex::new(HashMap::new());
    let sink: Mutex<HashSet<Projection>> = Mutex::new(HashSet::new());
    initial_assignments(cfg).par_iter().for_each(|init| {
        explore_root(cfg, init, window_pruning, &cache, Some(&sink));
    });
    sink.into_inner().unwrap()
}

/// Public face of the coexistence query: can one node complete its
/// `fire_count + 1`-th activation at an instant where the other On nodes
/// sit at exactly `other_counts` completed activations?
pub fn coexistence_check(
    fire_count: u32,
    other_counts: &[u32],
    tc: &TimingConstants,
) -> Result<bool, SolverError> {
    let cache: CoexCache = Mutex::new(HashMap::new());
    let mut others = other_counts.to_vec();
    coexistence_feasible(fire_count, &mut others, tc, &cache, &SolverLimits::default())
}
