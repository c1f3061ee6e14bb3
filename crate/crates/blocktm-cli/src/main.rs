//! Benchmark harness: generate workloads, run any engine matrix over them,
//! verify oracle equivalence, and derive conflict specs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use blocktm::adaptive::{run_adaptive, AdaptivePolicy, ParallelEngine};
use blocktm::analyzer;
use blocktm::dag::run_dag;
use blocktm::optimistic::run_opt;
use blocktm::registry::ContractRegistry;
use blocktm::sequential::run_sequential;
use blocktm::workload::{generate, WorkloadKind, WorkloadParams};
use blocktm::{wire, BaseState, Block, ConflictSpec, ExecOptions, ExecutionReport, Value};

#[derive(Parser)]
#[command(name = "blocktm", version, about = "Parallel block execution benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic workload (block, registry and base-state JSON).
    Generate(GenerateArgs),
    /// Execute a block with one engine and emit per-repeat CSV rows.
    Run(RunArgs),
    /// Run an engine/thread/seed matrix and compare every state against the
    /// sequential oracle.
    Verify(VerifyArgs),
    /// Derive a conflict spec and report generation time and tuple fraction.
    Spec(SpecArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Number of transactions.
    #[arg(long)]
    size: usize,
    /// Pareto tail factor; larger means more conflicts.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    accounts: Option<usize>,
    /// Spin iterations per transaction.
    #[arg(long, default_value_t = 2000)]
    work: u64,
    #[arg(long, default_value_t = 1)]
    fee: Value,
    #[arg(long, default_value_t = 1_000_000_000)]
    initial_balance: Value,
    /// Fraction of transactions rewritten to revert.
    #[arg(long, default_value_t = 0.0)]
    revert_rate: f64,
    /// Output prefix; writes <out>.block.json, <out>.registry.json and
    /// <out>.state.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Erc20,
    Mix,
    P2p,
    Batch,
    Generic,
}

impl From<KindArg> for WorkloadKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Erc20 => WorkloadKind::Erc20,
            KindArg::Mix => WorkloadKind::Mix,
            KindArg::P2p => WorkloadKind::P2p,
            KindArg::Batch => WorkloadKind::Batch,
            KindArg::Generic => WorkloadKind::Generic,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    Seq,
    Dag,
    Opt,
    Adaptive,
}

impl std::fmt::Display for EngineArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EngineArg::Seq => "seq",
            EngineArg::Dag => "dag",
            EngineArg::Opt => "opt",
            EngineArg::Adaptive => "adaptive",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SpecSourceArg {
    None,
    Weak,
    Strong,
    GroundTruth,
    File,
}

impl std::fmt::Display for SpecSourceArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SpecSourceArg::None => "none",
            SpecSourceArg::Weak => "weak",
            SpecSourceArg::Strong => "strong",
            SpecSourceArg::GroundTruth => "ground_truth",
            SpecSourceArg::File => "file",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EdgesArg {
    /// Conservative: every conflicting pair becomes a dependency.
    Complement,
    /// Only read-from conflicts become dependencies; write-write ordering is
    /// resolved by multi-versioning.
    Readfrom,
}

#[derive(Args)]
struct IoArgs {
    #[arg(long)]
    block: PathBuf,
    /// Defaults to the block path with .block.json replaced by .registry.json.
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Defaults to the block path with .block.json replaced by .state.json.
    #[arg(long)]
    state: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    io: IoArgs,
    #[arg(long, value_enum)]
    engine: EngineArg,
    #[arg(long, value_enum, default_value_t = SpecSourceArg::Weak)]
    spec: SpecSourceArg,
    #[arg(long, required_if_eq("spec", "file"))]
    spec_file: Option<PathBuf>,
    /// Worker threads; defaults to $BTM_THREADS, then the machine.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = 50)]
    repeats: usize,
    #[arg(long, default_value_t = 2)]
    warmup: usize,
    /// CSV output path (stdout summary only when omitted).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, value_parser = parse_on_off, default_value = "on")]
    lazy_coinbase: bool,
    #[arg(long, value_enum, default_value_t = EdgesArg::Complement)]
    edges: EdgesArg,
    #[arg(long, default_value_t = 0.5)]
    adaptive_threshold: f64,
    #[arg(long, default_value_t = 64)]
    min_parallel: usize,
    /// Parallel engine the adaptive dispatcher uses.
    #[arg(long, value_enum, default_value_t = EngineArg::Opt)]
    adaptive_engine: EngineArg,
    /// Re-validate spec-independent transactions and count violations.
    #[arg(long)]
    opt_debug: bool,
    #[arg(long)]
    chaos_seed: Option<u64>,
    /// Fold spec generation time into every reported wall time.
    #[arg(long)]
    time_spec_inline: bool,
    /// Workload label columns for the CSV.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    size: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Comma-separated engines to check.
    #[arg(long, default_value = "dag,opt,adaptive", value_delimiter = ',')]
    engines: Vec<EngineArg>,
    /// Comma-separated thread counts.
    #[arg(long = "threads-list", default_value = "1,2,4,8", value_delimiter = ',')]
    threads_list: Vec<usize>,
    /// Scheduling seeds; seed 0 runs unperturbed, others inject yields.
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, value_enum, default_value_t = SpecSourceArg::Weak)]
    spec: SpecSourceArg,
    #[arg(long, required_if_eq("spec", "file"))]
    spec_file: Option<PathBuf>,
    #[arg(long, value_parser = parse_on_off, default_value = "on")]
    lazy_coinbase: bool,
    #[arg(long, value_enum, default_value_t = EdgesArg::Complement)]
    edges: EdgesArg,
    #[arg(long)]
    opt_debug: bool,
}

#[derive(Args)]
struct SpecArgs {
    #[command(flatten)]
    io: IoArgs,
    #[arg(long, value_enum)]
    mode: SpecSourceArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = EdgesArg::Readfrom)]
    edges: EdgesArg,
}

fn parse_on_off(s: &str) -> Result<bool, String> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("expected on|off, got {other:?}")),
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(args) => cmd_generate(args),
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Spec(args) => cmd_spec(args),
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    if args.size == 0 {
        bail!("--size must be at least 1");
    }
    let mut params = WorkloadParams::new(args.kind.into(), args.size, args.alpha, args.seed);
    if let Some(clusters) = args.clusters {
        params.clusters = clusters;
    }
    if let Some(accounts) = args.accounts {
        params.accounts = accounts;
    }
    params.synthetic_work = args.work;
    params.gas_fee = args.fee;
    params.initial_balance = args.initial_balance;
    params.revert_rate = args.revert_rate;
    let w = generate(&params).context("workload generation failed")?;

    let block_path = sibling(&args.out, "block.json");
    let registry_path = sibling(&args.out, "registry.json");
    let state_path = sibling(&args.out, "state.json");
    wire::save_block(&block_path, &w.block)?;
    wire::save_registry(&registry_path, &w.registry)?;
    wire::save_state(&state_path, &w.base)?;
    println!("wrote {}", block_path.display());
    println!("wrote {}", registry_path.display());
    println!("wrote {}", state_path.display());
    Ok(())
}

fn sibling(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

struct LoadedWorkload {
    block: Block,
    base: BaseState,
    registry: ContractRegistry,
}

fn load_io(io: &IoArgs) -> Result<LoadedWorkload> {
    let block = wire::load_block(&io.block)?;
    let registry_path = io
        .registry
        .clone()
        .unwrap_or_else(|| derive_sibling(&io.block, "registry.json"));
    let state_path = io
        .state
        .clone()
        .unwrap_or_else(|| derive_sibling(&io.block, "state.json"));
    let registry = wire::load_registry(&registry_path)?;
    let base = wire::load_state(&state_path)?;
    Ok(LoadedWorkload { block, base, registry })
}

fn derive_sibling(block_path: &Path, suffix: &str) -> PathBuf {
    let s = block_path.to_string_lossy();
    match s.strip_suffix("block.json") {
        Some(prefix) => PathBuf::from(format!("{prefix}{suffix}")),
        None => block_path.with_extension(suffix),
    }
}

/// Builds the requested spec; returns it with its generation time in
/// microseconds (zero for none/file sources).
fn build_spec(
    source: SpecSourceArg,
    spec_file: Option<&Path>,
    edges: EdgesArg,
    w: &LoadedWorkload,
    opts: &ExecOptions,
) -> Result<(ConflictSpec, f64)> {
    let n = w.block.len();
    let start = Instant::now();
    let spec = match source {
        SpecSourceArg::None => ConflictSpec::conservative(n),
        SpecSourceArg::Weak => analyzer::get_cset_weak(&w.block, &w.registry),
        SpecSourceArg::Strong => analyzer::get_cset_strong(&w.block, &w.registry),
        SpecSourceArg::GroundTruth => match edges {
            EdgesArg::Readfrom => analyzer::ground_truth_cset(&w.block, &w.base, &w.registry, opts),
            EdgesArg::Complement => {
                analyzer::ground_truth_conflict_cset(&w.block, &w.base, &w.registry, opts)
            }
        },
        SpecSourceArg::File => {
            let path = spec_file.context("--spec file requires --spec-file")?;
            wire::load_spec(path)?
        }
    };
    let gen_us = match source {
        SpecSourceArg::None | SpecSourceArg::File => 0.0,
        _ => start.elapsed().as_secs_f64() * 1e6,
    };
    Ok((spec, gen_us))
}

fn resolve_threads(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var("BTM_THREADS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1)
        })
        .max(1)
}

fn run_engine(
    engine: EngineArg,
    w: &LoadedWorkload,
    spec: &ConflictSpec,
    opts: &ExecOptions,
    policy: &AdaptivePolicy,
) -> Result<(ExecutionReport, String)> {
    Ok(match engine {
        EngineArg::Seq => {
            let run = run_sequential(&w.block, &w.base, &w.registry, opts);
            (run.report, "seq".to_string())
        }
        EngineArg::Dag => (run_dag(&w.block, &w.base, &w.registry, spec, opts)?, "dag".to_string()),
        EngineArg::Opt => (run_opt(&w.block, &w.base, &w.registry, spec, opts)?, "opt".to_string()),
        EngineArg::Adaptive => {
            let run = run_adaptive(&w.block, &w.base, &w.registry, spec, opts, policy)?;
            (run.report, format!("adaptive({})", run.dispatched))
        }
    })
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let w = load_io(&args.io)?;
    let threads = resolve_threads(args.threads);
    let opts = ExecOptions {
        threads,
        lazy_coinbase: args.lazy_coinbase,
        chaos_seed: args.chaos_seed,
        debug_validate_independent: args.opt_debug,
        ..Default::default()
    };
    let policy = AdaptivePolicy {
        threshold_high: args.adaptive_threshold,
        min_parallel_size: args.min_parallel,
        parallel_engine: match args.adaptive_engine {
            EngineArg::Dag => ParallelEngine::Dag,
            _ => ParallelEngine::Opt,
        },
    };
    let (spec, spec_gen_us) =
        build_spec(args.spec, args.spec_file.as_deref(), args.edges, &w, &opts)?;

    // The sequential final state is the correctness oracle for every engine.
    let oracle = run_sequential(&w.block, &w.base, &w.registry, &opts);
    let oracle_hash = oracle.report.state_hash();

    let n = w.block.len();
    let mut rows = Vec::new();
    let mut walls = Vec::new();
    for repeat in 0..args.warmup + args.repeats {
        let (report, dispatched) = run_engine(args.engine, &w, &spec, &opts, &policy)?;
        let hash = report.state_hash();
        if hash != oracle_hash {
            bail!(
                "oracle mismatch on repeat {repeat}: engine {} produced {hash}, sequential {oracle_hash}",
                args.engine
            );
        }
        if repeat < args.warmup {
            continue;
        }
        let wall_ms = report.wall_ms + if args.time_spec_inline { spec_gen_us / 1e3 } else { 0.0 };
        let tps = n as f64 / (wall_ms / 1e3);
        walls.push(wall_ms);
        rows.push(format!(
            "{},{},{},{},{},{},{:.4},{:.1},{},{},{},{},{},{},{},{:.1},{}",
            args.engine,
            args.spec,
            threads,
            repeat - args.warmup,
            args.alpha.map(|a| a.to_string()).unwrap_or_default(),
            args.size.unwrap_or(n),
            wall_ms,
            tps,
            report.aborts,
            report.validations,
            report.dependency_waits,
            report.re_executions,
            report.spec_violations,
            dispatched,
            if args.lazy_coinbase { "on" } else { "off" },
            spec_gen_us,
            hash,
        ));
    }

    if let Some(csv) = &args.csv {
        let mut out = String::from(
            "engine,spec,threads,repeat,alpha,block_size,wall_ms,tps,aborts,validations,waits,re_executions,spec_violations,dispatched,lazy_coinbase,spec_gen_us,state_hash\n",
        );
        for row in &rows {
            out.push_str(row);
            out.push('\n');
        }
        std::fs::write(csv, out).with_context(|| format!("writing {}", csv.display()))?;
        println!("wrote {} rows to {}", rows.len(), csv.display());
    }

    walls.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if !walls.is_empty() {
        let median = walls[walls.len() / 2];
        println!(
            "{} spec={} threads={} repeats={}: median {:.3} ms ({:.0} tps), spec_gen {:.1} us",
            args.engine,
            args.spec,
            threads,
            walls.len(),
            median,
            n as f64 / (median / 1e3),
            spec_gen_us,
        );
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let w = load_io(&args.io)?;
    let base_opts = ExecOptions {
        lazy_coinbase: args.lazy_coinbase,
        debug_validate_independent: args.opt_debug,
        ..Default::default()
    };
    let (spec, _) = build_spec(args.spec, args.spec_file.as_deref(), args.edges, &w, &base_opts)?;
    let oracle = run_sequential(&w.block, &w.base, &w.registry, &base_opts);
    let oracle_hash = oracle.report.state_hash();
    let policy = AdaptivePolicy::default();

    let mut checked = 0;
    for &engine in &args.engines {
        for &threads in &args.threads_list {
            for seed in 0..args.seeds.max(1) {
                let opts = ExecOptions {
                    threads,
                    chaos_seed: (seed > 0).then_some(seed),
                    ..base_opts.clone()
                };
                let (report, dispatched) = run_engine(engine, &w, &spec, &opts, &policy)?;
                let hash = report.state_hash();
                if hash != oracle_hash {
                    report_divergence(&oracle.report, &report, engine, threads, seed);
                    bail!("state divergence detected");
                }
                if args.opt_debug && report.spec_violations > 0 {
                    println!(
                        "note: engine={engine} threads={threads} seed={seed}: {} spec violations caught",
                        report.spec_violations
                    );
                }
                checked += 1;
                println!(
                    "ok engine={engine} dispatched={dispatched} threads={threads} seed={seed} hash={}",
                    &hash[..16]
                );
            }
        }
    }
    println!("verified {checked} runs against the sequential oracle: all states identical");
    Ok(())
}

fn report_divergence(
    oracle: &ExecutionReport,
    report: &ExecutionReport,
    engine: EngineArg,
    threads: usize,
    seed: u64,
) {
    eprintln!("DIVERGENCE engine={engine} threads={threads} seed={seed}");
    let mut shown = 0;
    for (key, expect) in &oracle.final_state {
        let got = report.final_state.get(key).copied().unwrap_or(0);
        if got != *expect {
            eprintln!("  {key:?}: sequential={expect} engine={got}");
            shown += 1;
            if shown >= 10 {
                eprintln!("  ... (diff truncated)");
                return;
            }
        }
    }
    for (key, got) in &report.final_state {
        if !oracle.final_state.contains_key(key) && *got != 0 {
            eprintln!("  {key:?}: sequential=absent engine={got}");
            shown += 1;
            if shown >= 10 {
                return;
            }
        }
    }
}

fn cmd_spec(args: SpecArgs) -> Result<()> {
    let w = load_io(&args.io)?;
    let opts = ExecOptions::default();
    let source = match args.mode {
        SpecSourceArg::Weak | SpecSourceArg::Strong | SpecSourceArg::GroundTruth => args.mode,
        _ => bail!("--mode must be weak, strong or ground-truth"),
    };
    let (spec, gen_us) = build_spec(source, None, args.edges, &w, &opts)?;
    wire::save_spec(&args.out, &spec)?;
    println!(
        "mode={} gen_time_us={:.1} tuple_fraction={:.6} deps={} wrote {}",
        source,
        gen_us,
        spec.tuple_fraction(),
        spec.total_deps(),
        args.out.display()
    );
    Ok(())
}
