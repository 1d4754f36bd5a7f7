mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use leadsel::dynamics::{CapMode, SimulationConfig, Simulator, SpeedCap, Status, TrajectoryCsv};
use leadsel::experiments::report::emit_report;
use leadsel::experiments::{run_sweep_with_progress, RepeatSchedule, SweepConfig, EPUCK2_MAX_SPEED};
use leadsel::format::{graph_to_text, read_graph, write_graph};
use leadsel::graph::{generate_connected, generate_geometric, ground, GeometricParams, LeaderSet};
use leadsel::selection::{Algorithm, SelectionParams, SelectionRecord, DEFAULT_HUGE_RANDOM_SAMPLES};
use leadsel::spectral::convergence_rate;

use crate::config::{parse_usize_list, ConfigFile};

/// Default sweep output directory when `--out` is not given.
const OUT_DIR_ENV: &str = "LEADSEL_OUT_DIR";

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

/// Leader selection experiments for linear consensus multi-agent systems.
///
/// Geometry is in meters; convergence error and speeds are in centimeters
/// (per second). Simulations convert coordinates to centimeters internally.
#[derive(Debug, Parser)]
#[command(name = "leadsel", version)]
struct Cli {
    /// Config file of `key = value` lines with `[generate]`, `[select]`,
    /// `[rate]`, `[simulate]` and `[sweep]` sections. Flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a random geometric graph and write it as text.
    Generate(GenerateArgs),
    /// Select leaders on a graph and print `algorithm,k,leaders,lambda_min`.
    Select(SelectArgs),
    /// Print lambda_min of the grounded Laplacian for given leaders.
    Rate(RateArgs),
    /// Simulate consensus with fixed leaders and report convergence time.
    Simulate(SimulateArgs),
    /// Run a repeated-trial comparison of the selection algorithms.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Square side, meters.
    #[arg(long)]
    side: Option<f64>,
    /// Connection radius, meters.
    #[arg(long)]
    radius: Option<f64>,
    /// Edge weights are drawn from (0, wmax].
    #[arg(long)]
    wmax: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Redraw from seed-derived streams until the graph is connected.
    #[arg(long)]
    connected: bool,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long)]
    graph: PathBuf,
    /// greedy, random, max-degree, average-degree, kmeans or huge-random.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    /// Seed for the stochastic selectors.
    #[arg(long)]
    seed: Option<u64>,
    /// Subsets sampled by huge-random.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Debug, Args)]
struct RateArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Comma-separated leader ids.
    #[arg(long)]
    leaders: String,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Step length, seconds.
    #[arg(long)]
    ts: Option<f64>,
    /// Convergence error, cm.
    #[arg(long)]
    error: Option<f64>,
    /// Step budget N.
    #[arg(long)]
    max_steps: Option<u64>,
    /// Speed cap, cm/s. Free dynamics when omitted (simulate only).
    #[arg(long)]
    vmax: Option<f64>,
    /// euclidean (rescale the 2D velocity) or per-axis (clamp each axis).
    #[arg(long)]
    cap_mode: Option<CapMode>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Comma-separated leader ids.
    #[arg(long)]
    leaders: String,
    #[command(flatten)]
    sim: SimArgs,
    /// Dump the trajectory as `step,t,agent,axis,value` CSV (large).
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Write every n-th step to the trajectory.
    #[arg(long, default_value_t = 1)]
    trajectory_stride: u64,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// desk (n=30, k=1..9, 20 repeats) or full (n=100, k=1..90, 100/30 repeats).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    side: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    wmax: Option<f64>,
    /// Leader counts: `1..9` (inclusive) or `1,2,5`.
    #[arg(long)]
    k: Option<String>,
    /// Repeats per k (overrides the preset schedule).
    #[arg(long)]
    repeats: Option<usize>,
    /// Comma-separated algorithm names.
    #[arg(long)]
    algorithms: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    sim: SimArgs,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory; defaults to $LEADSEL_OUT_DIR or ./leadsel-out.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_leaders(s: &str, n: usize) -> Result<LeaderSet> {
    Ok(LeaderSet::new(parse_usize_list(s)?, n)?)
}

fn cmd_generate(args: GenerateArgs, cfg: &ConfigFile) -> Result<()> {
    const S: &str = "generate";
    let params = GeometricParams {
        n: cfg.resolve(S, "n", args.n, 100)?,
        side: cfg.resolve(S, "side", args.side, 10.0)?,
        radius: cfg.resolve(S, "radius", args.radius, 3.0)?,
        weight_max: cfg.resolve(S, "wmax", args.wmax, 50.0)?,
    };
    let seed = cfg.resolve(S, "seed", args.seed, 0)?;
    let connected_only = args.connected || cfg.get(S, "connected")?.unwrap_or(false);
    let g = if connected_only {
        generate_connected(&params, seed)?.0
    } else {
        generate_geometric(&params, seed)?
    };
    let connected = g.is_connected();
    match cfg.resolve_opt::<PathBuf>(S, "output", args.output)? {
        Some(path) => {
            write_graph(&g, &path)?;
            println!(
                "wrote {}: {} agents, {} edges, connected={connected}",
                path.display(),
                g.n(),
                g.edge_count()
            );
        }
        None => {
            print!("{}", graph_to_text(&g));
            eprintln!("{} agents, {} edges, connected={connected}", g.n(), g.edge_count());
        }
    }
    Ok(())
}

fn cmd_select(args: SelectArgs, cfg: &ConfigFile) -> Result<()> {
    const S: &str = "select";
    let algo: Algorithm = cfg
        .resolve_opt(S, "algo", args.algo)?
        .ok_or_else(|| anyhow!("--algo is required"))?
        .parse()?;
    let k: usize = cfg
        .resolve_opt(S, "k", args.k)?
        .ok_or_else(|| anyhow!("--k is required"))?;
    let params = SelectionParams {
        seed: cfg.resolve(S, "seed", args.seed, 0)?,
        huge_random_samples: cfg.resolve(S, "samples", args.samples, DEFAULT_HUGE_RANDOM_SAMPLES)?,
    };
    let g = read_graph(&args.graph)?;
    let record = SelectionRecord::run(algo, &g, k, &params)?;
    println!("{}", record.to_csv_row());
    Ok(())
}

fn cmd_rate(args: RateArgs) -> Result<()> {
    let g = read_graph(&args.graph)?;
    let leaders = parse_leaders(&args.leaders, g.n())?;
    let rate = convergence_rate(&ground(&g.laplacian(), &leaders)?)?;
    println!("{rate:?}");
    Ok(())
}

fn sim_config(args: &SimArgs, cfg: &ConfigFile, section: &str, default_cap: Option<f64>) -> Result<SimulationConfig> {
    let base = SimulationConfig::reference();
    let vmax = cfg.resolve_opt(section, "vmax", args.vmax)?.or(default_cap);
    let mode = cfg.resolve(section, "cap_mode", args.cap_mode, CapMode::Euclidean)?;
    let sim = SimulationConfig {
        t_s: cfg.resolve(section, "ts", args.ts, base.t_s)?,
        error: cfg.resolve(section, "error", args.error, base.error)?,
        max_steps: cfg.resolve(section, "max_steps", args.max_steps, base.max_steps)?,
        speed_cap: vmax.map(|v_max| SpeedCap { v_max, mode }),
    };
    sim.validate()?;
    Ok(sim)
}

fn cmd_simulate(args: SimulateArgs, cfg: &ConfigFile) -> Result<()> {
    let sim_cfg = sim_config(&args.sim, cfg, "simulate", None)?;
    let g = read_graph(&args.graph)?;
    let leaders = parse_leaders(&args.leaders, g.n())?;
    let sim = Simulator::from_graph(&g, &leaders)?;
    let rate = convergence_rate(&ground(&g.laplacian(), &leaders)?)?;

    let outcome = match &args.trajectory {
        Some(path) => {
            let file = File::create(path).map_err(|e| leadsel::Error::Io {
                path: path.clone(),
                source: e,
            })?;
            let mut csv =
                TrajectoryCsv::new(BufWriter::new(file), args.trajectory_stride).map_err(|e| leadsel::Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
            let outcome = sim.run_observed(&sim_cfg, |step, s| csv.observe(step, s))?;
            csv.finish().map_err(|e| leadsel::Error::Io {
                path: path.clone(),
                source: e,
            })?;
            outcome
        }
        None => sim.run(&sim_cfg)?,
    };

    let status = match outcome.status {
        Status::Converged => "converged",
        Status::MaxIterations => "max-iterations",
    };
    println!("mode: {}", if sim_cfg.speed_cap.is_some() { "capped" } else { "free" });
    println!("status: {status}");
    match outcome.t_e {
        Some(t) => println!("t_e: {t:?}"),
        None => println!("t_e: none"),
    }
    println!("steps: {}", outcome.steps);
    println!("lambda_min: {rate:?}");
    println!("final_deviation_x_cm: {:?}", outcome.final_deviation.0);
    println!("final_deviation_y_cm: {:?}", outcome.final_deviation.1);
    if sim_cfg.speed_cap.is_some() {
        println!("max_applied_speed: {:?}", outcome.max_applied_speed);
    }
    Ok(())
}

fn sweep_config(args: &SweepArgs, cfg: &ConfigFile) -> Result<SweepConfig> {
    const S: &str = "sweep";
    let preset: String = cfg.resolve(S, "preset", args.preset.clone(), "desk".to_string())?;
    let base = match preset.as_str() {
        "desk" => SweepConfig::desk(),
        "full" | "paper" => SweepConfig::full(),
        other => return Err(anyhow!("unknown preset '{other}'; valid: desk, full")),
    };
    let scenario = GeometricParams {
        n: cfg.resolve(S, "n", args.n, base.scenario.n)?,
        side: cfg.resolve(S, "side", args.side, base.scenario.side)?,
        radius: cfg.resolve(S, "radius", args.radius, base.scenario.radius)?,
        weight_max: cfg.resolve(S, "wmax", args.wmax, base.scenario.weight_max)?,
    };
    let k_values = match cfg.resolve_opt::<String>(S, "k", args.k.clone())? {
        Some(s) => parse_usize_list(&s)?,
        None => base.k_values.clone(),
    };
    let repeats = match cfg.resolve_opt(S, "repeats", args.repeats)? {
        Some(r) => RepeatSchedule::Fixed(r),
        None => base.repeats.clone(),
    };
    let algorithms = match cfg.resolve_opt::<String>(S, "algorithms", args.algorithms.clone())? {
        Some(s) => s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| t.trim().parse::<Algorithm>())
            .collect::<Result<Vec<_>, _>>()?,
        None => base.algorithms.clone(),
    };
    let capped = sim_config(&args.sim, cfg, S, Some(EPUCK2_MAX_SPEED))?;
    let sweep = SweepConfig {
        scenario,
        k_values,
        repeats,
        algorithms,
        sim: capped.with_cap(None),
        speed_cap: capped.speed_cap.expect("cap defaulted"),
        huge_random_samples: cfg.resolve(S, "samples", args.samples, base.huge_random_samples)?,
        master_seed: cfg.resolve(S, "seed", args.seed, base.master_seed)?,
    };
    sweep.validate()?;
    Ok(sweep)
}

fn cmd_sweep(args: SweepArgs, cfg: &ConfigFile) -> Result<()> {
    let sweep = sweep_config(&args, cfg)?;
    let out: PathBuf = match cfg.resolve_opt("sweep", "out", args.out.clone())? {
        Some(p) => p,
        None => std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| "leadsel-out".into()),
    };
    let jobs = cfg.resolve_opt::<usize>("sweep", "jobs", args.jobs)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().context("building worker pool")?;
    eprintln!(
        "sweep: n={} k={:?} {} algorithms, {} trials, {} threads",
        sweep.scenario.n,
        sweep.k_values,
        sweep.algorithms.len(),
        sweep.trial_count(),
        pool.current_num_threads()
    );
    let report = pool.install(|| {
        run_sweep_with_progress(&sweep, |done, total| {
            if total >= 20 && done % (total / 20) == 0 {
                eprintln!("  {done}/{total} trials");
            }
        })
    })?;
    let written = emit_report(&report, &out)?;
    eprintln!("wrote {} files under {}", written.len(), out.display());

    println!("ranking by mean lambda_min (all k):");
    for (i, (algo, rate)) in report.ranking_by_rate().iter().enumerate() {
        println!("  {}. {:<15} {rate:.6}", i + 1, algo.name());
    }
    if !report.failures.is_empty() {
        println!("failed trials: {} (see failures.csv)", report.failures.len());
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let io = err.chain().any(|cause| {
        cause.is::<io::Error>() || matches!(cause.downcast_ref::<leadsel::Error>(), Some(leadsel::Error::Io { .. }))
    });
    if io {
        EXIT_IO
    } else {
        EXIT_USAGE
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Generate(a) => cmd_generate(a, &cfg),
        Command::Select(a) => cmd_select(a, &cfg),
        Command::Rate(a) => cmd_rate(a),
        Command::Simulate(a) => cmd_simulate(a, &cfg),
        Command::Sweep(a) => cmd_sweep(a, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {
            let _ = io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
