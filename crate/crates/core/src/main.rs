//! Command-line front end: simulation plus the three verification engines.

use clap::{Args, Parser, Subcommand, ValueEnum};
use leadelect::abstraction::{
    compose_correctness, concrete_scaling_run, prove_guarantee, AbstractVerdict, Assumption,
    Guarantee,
};
use leadelect::direct::{verify_direct, DirectVerdict, ExploreConfig, ModeSets};
use leadelect::drift::{verify_read_window, verify_p3, DriftSpec, DriftVerdict, DriftWitness};
use leadelect::rat::Rat;
use leadelect::report::{exit_code, RunReport};
use leadelect::sim::{
    check_property_p, simulate_with, JitterSource, JitterTable, SimConfig,
};
use leadelect::simplex::SolverError;
use leadelect::timing::{StartConvention, TimingConstants};
use serde::Deserialize;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "leadelect", version, about = "Leader election simulation and verification")]
struct Cli {
    /// Output format for the run report.
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Worker threads for parallel engines (default: machine parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the discrete-event simulator on a network config.
    Simulate(SimulateArgs),
    /// Run one of the verification engines.
    Verify {
        #[command(subcommand)]
        engine: Engine,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Network configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Explicit per-(node, activation) jitter table (JSON); disables seeded
    /// sampling.
    #[arg(long)]
    jitter_table: Option<PathBuf>,
    /// Write the trace as tab-separated values to this path.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Override the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct ConstantsArg {
    /// Timing constants file (JSON); defaults to periods [49, 51] ms and
    /// jitter [-0.5, 0.5] ms.
    #[arg(long)]
    constants: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Engine {
    /// Exhaustive small-network exploration.
    Direct {
        #[command(flatten)]
        constants: ConstantsArg,
        /// Network size.
        #[arg(long, default_value_t = 3)]
        nodes: usize,
        /// Per-node activation depth.
        #[arg(long, default_value_t = 10)]
        depth: u32,
    },
    /// Parametric activation-count drift proof.
    Drift {
        #[command(flatten)]
        constants: ConstantsArg,
        /// Highest activation index considered.
        #[arg(long, default_value_t = 13)]
        max_activations: u32,
        /// Allowed drift window, as "lo,hi".
        #[arg(long, default_value = "-2,1")]
        drift_bounds: String,
    },
    /// Message-window proof: every node fires inside every other node's
    /// read window.
    ReadWindow {
        #[command(flatten)]
        constants: ConstantsArg,
        /// Activations between mailbox reads.
        #[arg(long, default_value_t = 2)]
        reads_every: u32,
        /// Probe depth for window offsets.
        #[arg(long, default_value_t = 13)]
        depth: u32,
    },
    /// Assume-guarantee proof over the abstract environment.
    Abstract {
        /// Comma list from: clean, p1, p2, p3.
        #[arg(long, default_value = "clean,p1,p2,p3")]
        assume: String,
        /// Guarantee to prove: p1, p2, p4, or P (composition of p1 and p4).
        #[arg(long, default_value = "P")]
        prove: String,
        #[arg(long, default_value_t = 8)]
        depth: u32,
        /// Network size for the assumption context.
        #[arg(long, default_value_t = 3)]
        nodes: u32,
        /// Materialize all p environment messages per step (the concrete
        /// scaling engine) instead of the two observation classes.
        #[arg(long)]
        scaling_p: Option<u32>,
    },
}

#[derive(Deserialize)]
struct JitterTableFile {
    entries: Vec<JitterEntry>,
}

#[derive(Deserialize)]
struct JitterEntry {
    node: usize,
    activation: u32,
    jitter: Rat,
}

fn fail_config(msg: &str) -> ExitCode {
    eprintln!("config error: {msg}");
    ExitCode::from(exit_code::CONFIG_ERROR as u8)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &PathBuf) -> Result<T, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("cannot parse {}: {e}", path.display()))
}

fn load_constants(arg: &ConstantsArg) -> Result<TimingConstants, String> {
    let tc = match &arg.constants {
        Some(path) => read_json::<TimingConstants>(path)?,
        None => TimingConstants::defaults(),
    };
    tc.validate().map_err(|e| e.to_string())?;
    Ok(tc)
}

fn emit(report: &RunReport, format: Format, code: i32) -> ExitCode {
    match format {
        Format::Human => print!("{}", report.render_human()),
        Format::Json => println!("{}", report.render_json()),
    }
    ExitCode::from(code as u8)
}

fn witness_details(w: &DriftWitness) -> Value {
    let vars: serde_json::Map<String, Value> = w
        .witness
        .iter()
        .map(|(v, r)| (v.to_string(), Value::String(r.to_string())))
        .collect();
    json!({
        "k_i": w.k_i,
        "k_j": w.k_j,
        "violation_time": w.violation_time.to_string(),
        "witness": vars,
    })
}

fn cmd_simulate(args: &SimulateArgs, format: Format) -> ExitCode {
    let started = Instant::now();
    let mut cfg: SimConfig = match read_json(&args.config) {
        Ok(c) => c,
        Err(e) => return fail_config(&e),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Err(e) = cfg.validate() {
        return fail_config(&e.to_string());
    }
    let jitter = match &args.jitter_table {
        None => JitterSource::seeded(cfg.seed),
        Some(path) => {
            let file: JitterTableFile = match read_json(path) {
                Ok(f) => f,
                Err(e) => return fail_config(&e),
            };
            let mut table = JitterTable::default();
            for e in file.entries {
                table.set(e.node, e.activation, e.jitter);
            }
            JitterSource::Table(table)
        }
    };
    let trace = match simulate_with(&cfg, jitter) {
        Ok(t) => t,
        Err(e) => return fail_config(&e.to_string()),
    };
    if let Some(path) = &args.trace_out {
        let file = match std::fs::File::create(path) {
            Ok(f) => f,
            Err(e) => return fail_config(&format!("cannot create {}: {e}", path.display())),
        };
        if let Err(e) = trace.write_tsv(std::io::BufWriter::new(file)) {
            return fail_config(&format!("cannot write {}: {e}", path.display()));
        }
    }
    let property = check_property_p(&trace.final_state, &cfg);
    let report = RunReport {
        command: "simulate".into(),
        config: serde_json::to_value(&cfg).unwrap_or(Value::Null),
        verdict: match &property {
            leadelect::sim::PropertyCheck::Holds => "holds".into(),
            leadelect::sim::PropertyCheck::Violated { .. } => "violated".into(),
            leadelect::sim::PropertyCheck::NotApplicable => "not-applicable".into(),
        },
        details: json!({
            "events": trace.events.len(),
            "final_counts": trace.final_state.activation_count,
            "final_states": trace.final_state.cores.iter()
                .map(|c| format!("{:?}", c.state).to_lowercase()).collect::<Vec<_>>(),
            "property": serde_json::to_value(&property).unwrap_or(Value::Null),
        }),
        wall_clock_ms: started.elapsed().as_millis(),
    };
    emit(&report, format, exit_code::PROVED)
}

fn drift_exit(verdict: &Result<DriftVerdict, SolverError>) -> i32 {
    match verdict {
        Ok(DriftVerdict::Proved) => exit_code::PROVED,
        Ok(DriftVerdict::Refuted(_)) => exit_code::REFUTED,
        Err(SolverError::ResourceLimit(_)) => exit_code::INCONCLUSIVE,
        Err(SolverError::Internal(_)) => exit_code::CONFIG_ERROR,
    }
}

fn drift_details(verdict: &Result<DriftVerdict, SolverError>) -> (String, Value) {
    match verdict {
        Ok(DriftVerdict::Proved) => ("proved".into(), Value::Null),
        Ok(DriftVerdict::Refuted(w)) => ("refuted".into(), witness_details(w)),
        Err(e) => ("inconclusive".into(), json!({ "error": e.to_string() })),
    }
}

fn parse_assumptions(s: &str) -> Result<Vec<Assumption>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        out.push(match item {
            "clean" => Assumption::CleanRoundMailbox,
            "p1" => Assumption::P1,
            "p2" => Assumption::P2,
            "p3" => Assumption::P3,
            other => return Err(format!("unknown assumption {other:?}")),
        });
    }
    Ok(out)
}

fn cmd_verify(engine: &Engine, format: Format) -> ExitCode {
    let started = Instant::now();
    match engine {
        Engine::Direct {
            constants,
            nodes,
            depth,
        } => {
            let tc = match load_constants(constants) {
                Ok(tc) => tc,
                Err(e) => return fail_config(&e),
            };
            let cfg = ExploreConfig {
                constants: tc,
                max_activations_per_node: *depth,
                mode_sets: ModeSets::All,
                ..ExploreConfig::new(*nodes)
            };
            if let Err(e) = cfg.validate() {
                return fail_config(&e);
            }
            let verdict = verify_direct(&cfg);
            let (verdict_str, details, code) = match &verdict {
                DirectVerdict::Proved {
                    initial_assignments,
                    merged_states,
                } => (
                    "proved".to_string(),
                    json!({
                        "initial_assignments": initial_assignments,
                        "merged_states": merged_states,
                    }),
                    exit_code::PROVED,
                ),
                DirectVerdict::Refuted(w) => (
                    "refuted".to_string(),
                    json!({
                        "modes": format!("{:?}", w.initial.modes),
                        "states": format!("{:?}", w.initial.states),
                        "evens": w.initial.evens,
                        "firings": w.firings,
                        "final_states": format!("{:?}", w.final_states),
                        "timing": w.timing.iter()
                            .map(|(v, r)| (v.to_string(), Value::String(r.to_string())))
                            .collect::<serde_json::Map<_, _>>(),
                    }),
                    exit_code::REFUTED,
                ),
                DirectVerdict::Inconclusive { reason } => (
                    "inconclusive".to_string(),
                    json!({ "reason": reason }),
                    exit_code::INCONCLUSIVE,
                ),
            };
            let report = RunReport {
                command: "verify direct".into(),
                config: json!({
                    "nodes": nodes,
                    "depth": depth,
                    "constants": serde_json::to_value(&cfg.constants).unwrap_or(Value::Null),
                }),
                verdict: verdict_str,
                details,
                wall_clock_ms: started.elapsed().as_millis(),
            };
            emit(&report, format, code)
        }
        Engine::Drift {
            constants,
            max_activations,
            drift_bounds,
        } => {
            let tc = match load_constants(constants) {
                Ok(tc) => tc,
                Err(e) => return fail_config(&e),
            };
            let (lower, upper) = match drift_bounds.split_once(',').and_then(|(a, b)| {
                Some((i64::from_str(a.trim()).ok()?, i64::from_str(b.trim()).ok()?))
            }) {
                Some(b) => b,
                None => return fail_config("--drift-bounds expects \"lo,hi\""),
            };
            let spec = DriftSpec {
                constants: tc,
                max_activations: *max_activations,
                lower,
                upper,
                start_convention: StartConvention::ModelT,
            };
            let verdict = verify_p3(&spec);
            let (verdict_str, details) = drift_details(&verdict);
            let report = RunReport {
                command: "verify drift".into(),
                config: json!({
                    "max_activations": max_activations,
                    "bounds": [lower, upper],
                    "constants": serde_json::to_value(&spec.constants).unwrap_or(Value::Null),
                }),
                verdict: verdict_str,
                details,
                wall_clock_ms: started.elapsed().as_millis(),
            };
            emit(&report, format, drift_exit(&verdict))
        }
        Engine::ReadWindow {
            constants,
            reads_every,
            depth,
        } => {
            let tc = match load_constants(constants) {
                Ok(tc) => tc,
                Err(e) => return fail_config(&e),
            };
            let verdict = verify_read_window(&tc, *reads_every, *depth);
            let (verdict_str, details) = drift_details(&verdict);
            let report = RunReport {
                command: "verify read-window".into(),
                config: json!({
                    "reads_every": reads_every,
                    "depth": depth,
                    "constants": serde_json::to_value(&tc).unwrap_or(Value::Null),
                }),
                verdict: verdict_str,
                details,
                wall_clock_ms: started.elapsed().as_millis(),
            };
            emit(&report, format, drift_exit(&verdict))
        }
        Engine::Abstract {
            assume,
            prove,
            depth,
            nodes,
            scaling_p,
        } => {
            let assumptions = match parse_assumptions(assume) {
                Ok(a) => a,
                Err(e) => return fail_config(&e),
            };
            let p = scaling_p.unwrap_or(*nodes);
            let run_one = |g: Guarantee| -> AbstractVerdict {
                match scaling_p {
                    Some(p) => concrete_scaling_run(g, &assumptions, *p, *depth).0,
                    None => prove_guarantee(g, &assumptions, p, *depth),
                }
            };
            let (verdict_str, details, code) = match prove.as_str() {
                "p1" | "p2" | "p4" => {
                    let g = match prove.as_str() {
                        "p1" => Guarantee::P1,
                        "p2" => Guarantee::P2,
                        _ => Guarantee::P4,
                    };
                    let v = run_one(g);
                    let code = if v.is_proved() {
                        exit_code::PROVED
                    } else {
                        exit_code::REFUTED
                    };
                    (
                        if v.is_proved() { "proved" } else { "refuted" }.to_string(),
                        serde_json::to_value(&v).unwrap_or(Value::Null),
                        code,
                    )
                }
                "P" | "p" => {
                    let p1 = run_one(Guarantee::P1);
                    let p4 = run_one(Guarantee::P4);
                    let comp = compose_correctness(&p1, &p4);
                    let code = if comp.p_proved {
                        exit_code::PROVED
                    } else {
                        exit_code::REFUTED
                    };
                    (
                        if comp.p_proved { "proved" } else { "refuted" }.to_string(),
                        json!({
                            "p1": serde_json::to_value(&p1).unwrap_or(Value::Null),
                            "p4": serde_json::to_value(&p4).unwrap_or(Value::Null),
                            "composition": serde_json::to_value(&comp).unwrap_or(Value::Null),
                        }),
                        code,
                    )
                }
                other => return fail_config(&format!("unknown guarantee {other:?}")),
            };
            let report = RunReport {
                command: "verify abstract".into(),
                config: json!({
                    "assume": assume,
                    "prove": prove,
                    "depth": depth,
                    "p": p,
                    "scaling": scaling_p.is_some(),
                }),
                verdict: verdict_str,
                details,
                wall_clock_ms: started.elapsed().as_millis(),
            };
            emit(&report, format, code)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match &cli.cmd {
        Cmd::Simulate(args) => cmd_simulate(args, cli.format),
        Cmd::Verify { engine } => cmd_verify(engine, cli.format),
    }
}
