use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use collgraph::expand::{expand, Binding, Bindings};
use collgraph::msccl::{convert_to_trace, parse_msccl_xml};
use collgraph::sim::{simulate, sweep, sweep_csv, NetConfig, Topology, TopologyKind, TraceFamily};
use collgraph::trace::to_canonical_json;
use collgraph::units::{parse_size, parse_sizes};
use collgraph::validate::{check_semantics, verdict_json, Status};
use collgraph::{generate, load_trace, AlgoSpec, Algorithm, CollectiveKind, Error};

const EXIT_ERROR: u8 = 2;
const EXIT_FAIL: u8 = 3;
const EXIT_STUCK: u8 = 4;

/// Collective algorithms as per-rank send/recv/compute graphs.
///
/// Exit codes: 0 success, 2 error or bad usage, 3 validation failure,
/// 4 deadlock.
#[derive(Parser)]
#[command(name = "collgraph", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a collective trace from a built-in algorithm.
    Gen(GenArgs),
    /// Convert an MSCCL-IR XML program into a trace.
    Convert(ConvertArgs),
    /// Check that a trace implements its claimed collective.
    Validate(ValidateArgs),
    /// Replay an expanded trace on an analytical network.
    Simulate(SimulateArgs),
    /// Simulate one algorithm over several sizes and topologies.
    Sweep(SweepArgs),
    /// Replace COMM_COLL nodes of a workload with collective algorithms.
    Expand(ExpandArgs),
}

#[derive(Args)]
struct GenArgs {
    /// ring-allreduce, ring-allgather or rd-allgather.
    #[arg(long)]
    algo: Algorithm,
    /// Number of ranks.
    #[arg(long)]
    ranks: usize,
    /// Collective size in bytes (KiB/MiB/GiB suffixes accepted).
    #[arg(long, value_parser = size_arg)]
    size: u64,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ConvertArgs {
    /// MSCCL-IR XML program.
    #[arg(long)]
    msccl_xml: PathBuf,
    /// Collective size in bytes; must be a multiple of the program's nchunks.
    #[arg(long, value_parser = size_arg)]
    size: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Trace file.
    trace: PathBuf,
    /// Write the verdict JSON here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Expanded trace file.
    trace: PathBuf,
    /// Network configuration JSON.
    #[arg(long)]
    net: PathBuf,
    /// Topology token overriding the one in the configuration
    /// (ring, fc, switch, mesh2d:RxC, torus2d:RxC).
    #[arg(long)]
    topology: Option<String>,
    /// Report output; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Built-in algorithm to sweep.
    #[arg(long, conflicts_with = "msccl_xml", required_unless_present = "msccl_xml")]
    algo: Option<Algorithm>,
    /// MSCCL-IR program to sweep instead of a built-in algorithm.
    #[arg(long)]
    msccl_xml: Option<PathBuf>,
    /// Number of ranks (with --algo).
    #[arg(long, required_unless_present = "msccl_xml")]
    ranks: Option<usize>,
    /// Comma-separated sizes and ranges, e.g. 1KiB:64MiB:x4.
    #[arg(long)]
    sizes: String,
    /// Comma-separated topology tokens.
    #[arg(long, default_value = "ring")]
    topologies: String,
    /// Topology the slowdown column is relative to.
    #[arg(long, default_value = "ring")]
    baseline: String,
    /// Network configuration JSON; its topology, if any, is ignored.
    #[arg(long)]
    net: PathBuf,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    /// CSV output; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExpandArgs {
    /// Workload trace file.
    workload: PathBuf,
    /// KIND=ALGO or KIND=TRACE_FILE, e.g. ALL_REDUCE=ring-allreduce.
    /// Repeatable.
    #[arg(long = "bind", value_name = "KIND=SPEC")]
    bind: Vec<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn size_arg(s: &str) -> Result<u64, String> {
    parse_size(s).map_err(|e| e.to_string())
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                })
        }
    }
}

fn topology_for(token: &str, ranks: usize) -> Result<Topology, Error> {
    Topology::new(TopologyKind::parse(token, ranks)?)
}

fn cmd_gen(a: GenArgs) -> Result<u8, Error> {
    let trace = generate(&AlgoSpec::new(a.algo, a.ranks, a.size))?;
    log::info!("generated {} nodes over {} ranks", trace.num_nodes(), trace.num_ranks());
    write_output(a.output.as_deref(), &to_canonical_json(&trace))?;
    Ok(0)
}

fn cmd_convert(a: ConvertArgs) -> Result<u8, Error> {
    let program = parse_msccl_xml(&a.msccl_xml)?;
    let trace = convert_to_trace(&program, a.size)?;
    write_output(a.output.as_deref(), &to_canonical_json(&trace))?;
    Ok(0)
}

fn cmd_validate(a: ValidateArgs) -> Result<u8, Error> {
    let trace = match load_trace(&a.trace) {
        Ok(t) => t,
        // A structurally broken graph cannot implement anything: report it
        // as a failed verdict rather than a usage error.
        Err(e) if e.is_invariant_violation() => {
            let doc = json!({
                "verdict": "FAIL",
                "violations": [{"rank": null, "node": null, "slot": null, "expected": null, "actual": null, "message": e.to_string()}],
                "stuck_nodes": [],
                "warnings": [],
            });
            eprintln!("FAIL: {e}");
            write_output(a.output.as_deref(), &format!("{doc:#}\n"))?;
            return Ok(EXIT_FAIL);
        }
        Err(e) => return Err(e),
    };
    let outcome = check_semantics(&trace);
    let code = match &outcome {
        Ok(v) => match v.status {
            Status::Pass | Status::Skipped => 0,
            Status::Fail => EXIT_FAIL,
        },
        Err(Error::Stuck { .. }) => EXIT_STUCK,
        Err(_) => EXIT_ERROR,
    };
    match &outcome {
        Ok(v) => {
            for w in &v.warnings {
                log::warn!("{w}");
            }
            eprintln!("{}", v.status.as_str());
        }
        Err(e) => eprintln!("{e}"),
    }
    write_output(a.output.as_deref(), &format!("{:#}\n", verdict_json(&outcome)))?;
    Ok(code)
}

fn cmd_simulate(a: SimulateArgs) -> Result<u8, Error> {
    let trace = load_trace(&a.trace)?;
    let config = NetConfig::load(&a.net)?;
    let topology = match (&a.topology, config.topology) {
        (Some(token), _) => topology_for(token, trace.num_ranks())?,
        (None, Some(t)) => t,
        (None, None) => {
            return Err(Error::Config(
                "no topology: add one to the configuration or pass --topology".into(),
            ))
        }
    };
    let report = simulate(&trace, &topology, &config.cost)?;
    eprintln!("total_duration_s = {:e}", report.total_duration_s);
    write_output(a.output.as_deref(), &report.to_json())?;
    Ok(0)
}

fn cmd_sweep(a: SweepArgs) -> Result<u8, Error> {
    let family = match (&a.msccl_xml, a.algo) {
        (Some(path), _) => TraceFamily::Msccl(parse_msccl_xml(path)?),
        (None, Some(algorithm)) => TraceFamily::Generated {
            algorithm,
            num_ranks: a.ranks.expect("required by clap"),
        },
        (None, None) => unreachable!("required by clap"),
    };
    let n = family.num_ranks();
    let sizes = parse_sizes(&a.sizes)?;
    let topologies = a
        .topologies
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| topology_for(t, n))
        .collect::<Result<Vec<_>, _>>()?;
    let baseline = topology_for(&a.baseline, n)?;
    let cost = NetConfig::load(&a.net)?.cost;
    let jobs = a
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()));
    let rows = sweep(&family, &topologies, &baseline, &sizes, &cost, jobs)?;
    write_output(a.output.as_deref(), &sweep_csv(&rows))?;
    Ok(0)
}

fn parse_binding(text: &str) -> Result<(CollectiveKind, Binding), Error> {
    let (kind, spec) = text
        .split_once('=')
        .ok_or_else(|| Error::Binding(format!("expected KIND=SPEC, got {text:?}")))?;
    let kind: CollectiveKind = kind.trim().parse()?;
    let spec = spec.trim();
    let binding = match spec.parse::<Algorithm>() {
        Ok(algo) => Binding::Generated(algo),
        Err(_) => Binding::Fixed(load_trace(spec)?),
    };
    Ok((kind, binding))
}

fn cmd_expand(a: ExpandArgs) -> Result<u8, Error> {
    let workload = load_trace(&a.workload)?;
    let mut bindings = Bindings::new();
    for b in &a.bind {
        let (kind, binding) = parse_binding(b)?;
        if bindings.insert(kind, binding).is_some() {
            return Err(Error::Binding(format!("{kind} bound twice")));
        }
    }
    let out = expand(&workload, &bindings)?;
    write_output(a.output.as_deref(), &to_canonical_json(&out))?;
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COLLGRAPH_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Convert(a) => cmd_convert(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Expand(a) => cmd_expand(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            let code = match e {
                Error::Deadlock { .. } | Error::Stuck { .. } => EXIT_STUCK,
                _ => EXIT_ERROR,
            };
            ExitCode::from(code)
        }
    }
}
