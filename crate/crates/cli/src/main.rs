//! `vbspool`: blocking probabilities, sweeps, knee points and simulations
//! for VBS pools described by a JSON config.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use vbspool::approx::{blocking_approx_for, gain_report, GainReport, KneeMethod};
use vbspool::exact::{blocking_exact, DEFAULT_ENUMERATION_CAP};
use vbspool::recursive::blocking_recursive;
use vbspool::simulator::{default_warmup, simulate, ServiceDistribution, SimConfig, SimStats, GENERATOR};
use vbspool::{BlockingReport, Error, PoolConfig};

use output::{csv_rows, format_number, json_document, Header, CSV_COLUMNS};

const DEFAULT_DELTA: f64 = 1e-4;
const DEFAULT_SIM_SESSIONS: f64 = 1e6;

#[derive(Parser)]
#[command(name = "vbspool", version, about = "Blocking and multiplexing gain of virtual base station pools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Blocking probabilities at the configured number of compute servers.
    Blocking {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "recursive")]
        engine: Engine,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Blocking over a range of compute servers or pool scales (CSV rows).
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Engines to run; repeat the flag or separate with commas.
        #[arg(long, value_enum, value_delimiter = ',', default_value = "recursive")]
        engine: Vec<Engine>,
        /// Compute servers LO:HI[:STEP].
        #[arg(long, conflicts_with = "sweep_pool", required_unless_present = "sweep_pool")]
        sweep_n: Option<String>,
        /// Multiplier applied to every class count and to N, LO:HI[:STEP].
        #[arg(long)]
        sweep_pool: Option<String>,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Knee point and pooling gain.
    Knee {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[arg(long, value_enum, default_value = "exact-search")]
        method: KneeChoice,
        /// Report the knee for each pool scale LO:HI[:STEP].
        #[arg(long)]
        sweep_pool: Option<String>,
    },
    /// Event-by-event simulation.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Clone)]
struct SimArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Measured time per replication; sized for 10^6 offered sessions when absent.
    #[arg(long)]
    horizon: Option<f64>,
    /// Discarded time per replication; ten slowest mean service times when absent.
    #[arg(long)]
    warmup: Option<f64>,
    #[arg(long, default_value_t = 1)]
    replications: usize,
    #[arg(long, value_enum, default_value = "exponential")]
    service: Service,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Engine {
    Exact,
    Recursive,
    Approx,
    Simulate,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum KneeChoice {
    ExactSearch,
    Approx,
}

#[derive(Clone, Copy, ValueEnum)]
enum Service {
    Exponential,
    Erlang2,
    HyperExponential,
}

enum Failure {
    Config(String),
    Precondition(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Precondition(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Precondition(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidClass { .. } | Error::InvalidPool(_) => Failure::Config(e.to_string()),
            _ => Failure::Precondition(e.to_string()),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn engine_name(e: Engine) -> String {
    match e {
        Engine::Exact => "exact",
        Engine::Recursive => "recursive",
        Engine::Approx => "approx",
        Engine::Simulate => "simulate",
    }
    .to_string()
}

fn load_config(path: &PathBuf) -> Outcome<PoolConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    config::parse_config(&text).map_err(Failure::Config)
}

fn write_output(out: &Option<PathBuf>, text: &str) -> Outcome<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| Failure::Io(format!("stdout: {e}")))
        }
    }
}

/// `LO:HI[:STEP]`, inclusive, all positive.
fn parse_range(text: &str) -> Outcome<Vec<usize>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Failure::Config(format!("invalid range '{text}', expected LO:HI[:STEP]"));
    if parts.len() < 2 || parts.len() > 3 {
        return Err(bad());
    }
    let nums: Vec<usize> = parts.iter().map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
    let step = nums.get(2).copied().unwrap_or(1);
    if nums[0] == 0 || nums[0] > nums[1] || step == 0 {
        return Err(bad());
    }
    Ok((nums[0]..=nums[1]).step_by(step).collect())
}

fn scaled(config: &PoolConfig, factor: usize) -> Outcome<PoolConfig> {
    let counts: Vec<usize> = config.classes().iter().map(|c| c.count * factor).collect();
    Ok(config.with_counts(&counts, config.compute_servers() * factor)?)
}

fn sim_config(pool: &PoolConfig, sim: &SimArgs) -> Outcome<SimConfig> {
    if sim.replications == 0 {
        return Err(Failure::Config("--replications must be ≥ 1".into()));
    }
    let mut cfg = match sim.horizon {
        Some(h) => {
            let mut c = SimConfig::new(pool.clone(), h, sim.seed);
            c.replications = sim.replications;
            c
        }
        None => SimConfig::for_offered_sessions(pool.clone(), DEFAULT_SIM_SESSIONS, sim.replications, sim.seed),
    };
    cfg.warmup_time = sim.warmup.unwrap_or_else(|| default_warmup(pool));
    if !(cfg.horizon_time >= 0.0 && cfg.warmup_time >= 0.0) {
        return Err(Failure::Config("--horizon and --warmup must be non-negative".into()));
    }
    cfg.service = match sim.service {
        Service::Exponential => ServiceDistribution::Exponential,
        Service::Erlang2 => ServiceDistribution::Erlang2,
        Service::HyperExponential => ServiceDistribution::HyperExponential,
    };
    Ok(cfg)
}

fn check_delta(delta: f64) -> Outcome<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Failure::Config(format!("--delta must be positive, got {delta}")))
    }
}

fn run_engine(pool: &PoolConfig, engine: Engine, sim: &SimArgs) -> Outcome<BlockingReport> {
    Ok(match engine {
        Engine::Exact => blocking_exact(pool)?,
        Engine::Recursive => blocking_recursive(pool),
        Engine::Approx => blocking_approx_for(pool)?,
        Engine::Simulate => simulate(&sim_config(pool, sim)?)?.blocking_report(),
    })
}

fn with_sim_header(header: &mut Header, engines: &[Engine], sim: &SimArgs) {
    if engines.contains(&Engine::Simulate) {
        header.seed = Some(sim.seed);
        header.generator = Some(GENERATOR);
    }
}

fn cmd_blocking(common: &Common, engine: Engine, sim: &SimArgs) -> Outcome<()> {
    let pool = load_config(&common.config)?;
    let report = run_engine(&pool, engine, sim)?;
    let mut header = Header::new("blocking", &pool);
    header.engines = vec![engine_name(engine)];
    with_sim_header(&mut header, &[engine], sim);
    let text = match common.format.unwrap_or(Format::Json) {
        Format::Json => json_document(&header, &report),
        Format::Csv => csv_document(&header, csv_rows(pool.compute_servers(), pool.radio_capacity(), &report)),
    };
    write_output(&common.out, &text)
}

fn csv_document(header: &Header, mut rows: Vec<(usize, usize, String)>) -> String {
    rows.sort_by_key(|r| (r.0, r.1));
    let mut text = header.csv_lines();
    text.push_str(CSV_COLUMNS);
    text.push('\n');
    for (_, _, line) in rows {
        text.push_str(&line);
        text.push('\n');
    }
    text
}

#[derive(serde::Serialize)]
struct SweepPoint {
    compute_servers: usize,
    pool_size: usize,
    report: BlockingReport,
}

fn cmd_sweep(
    common: &Common,
    engines: &[Engine],
    sweep_n: &Option<String>,
    sweep_pool: &Option<String>,
    delta: f64,
    sim: &SimArgs,
) -> Outcome<()> {
    check_delta(delta)?;
    let base = load_config(&common.config)?;
    let (points, label) = match (sweep_n, sweep_pool) {
        (Some(r), None) => {
            let pools = parse_range(r)?
                .into_iter()
                .map(|n| base.with_compute_servers(n).map_err(Failure::from))
                .collect::<Outcome<Vec<_>>>()?;
            (pools, format!("compute_servers {r}"))
        }
        (None, Some(r)) => {
            let pools = parse_range(r)?
                .into_iter()
                .map(|s| scaled(&base, s))
                .collect::<Outcome<Vec<_>>>()?;
            (pools, format!("pool_scale {r}"))
        }
        _ => return Err(Failure::Config("give exactly one of --sweep-n and --sweep-pool".into())),
    };
    if engines.contains(&Engine::Exact) {
        if let Some(p) = points.iter().find(|p| p.state_space_size() > DEFAULT_ENUMERATION_CAP) {
            return Err(Failure::Precondition(format!(
                "exact engine: state space of {} states at N={} exceeds cap {DEFAULT_ENUMERATION_CAP}",
                p.state_space_size(),
                p.compute_servers()
            )));
        }
    }
    let jobs: Vec<(&PoolConfig, Engine)> = points.iter().flat_map(|p| engines.iter().map(move |&e| (p, e))).collect();
    let results: Vec<Outcome<Option<SweepPoint>>> = jobs
        .par_iter()
        .map(|&(pool, engine)| match run_engine(pool, engine, sim) {
            Ok(report) => Ok(Some(SweepPoint {
                compute_servers: pool.compute_servers(),
                pool_size: pool.pool_size(),
                report,
            })),
            // below the pool mean the closed form does not apply; leave the point out
            Err(Failure::Precondition(_)) if engine == Engine::Approx => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut rows = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(p) => rows.push(p),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        eprintln!("approx: {skipped} point(s) with N ≤ |M|mu left out");
    }
    rows.sort_by_key(|p| p.compute_servers);
    let mut header = Header::new("sweep", &base);
    header.engines = engines.iter().map(|&e| engine_name(e)).collect();
    header.delta = Some(delta);
    header.sweep = Some(label);
    with_sim_header(&mut header, engines, sim);
    let text = match common.format.unwrap_or(Format::Csv) {
        Format::Json => json_document(&header, &rows),
        Format::Csv => {
            let capacity_of = |p: &SweepPoint| base.radio_capacity() * p.pool_size / base.pool_size();
            csv_document(
                &header,
                rows.iter()
                    .flat_map(|p| csv_rows(p.compute_servers, capacity_of(p), &p.report))
                    .collect(),
            )
        }
    };
    write_output(&common.out, &text)
}

#[derive(serde::Serialize)]
struct KneeRow {
    scale: usize,
    pool_size: usize,
    #[serde(flatten)]
    gain: GainReport,
}

fn cmd_knee(common: &Common, delta: f64, method: KneeChoice, sweep_pool: &Option<String>) -> Outcome<()> {
    check_delta(delta)?;
    let base = load_config(&common.config)?;
    let method = match method {
        KneeChoice::ExactSearch => KneeMethod::ExactSearch,
        KneeChoice::Approx => KneeMethod::Approx,
    };
    let scales = match sweep_pool {
        Some(r) => parse_range(r)?,
        None => vec![1],
    };
    let rows: Vec<KneeRow> = scales
        .par_iter()
        .map(|&s| {
            let pool = scaled(&base, s)?;
            Ok(KneeRow {
                scale: s,
                pool_size: pool.pool_size(),
                gain: gain_report(&pool, delta, method)?,
            })
        })
        .collect::<Outcome<_>>()?;
    let mut header = Header::new("knee", &base);
    header.engines = vec![match method {
        KneeMethod::ExactSearch => "exact-search".into(),
        KneeMethod::Approx => "approx".into(),
    }];
    header.delta = Some(delta);
    header.sweep = sweep_pool.as_ref().map(|r| format!("pool_scale {r}"));
    let text = match common.format.unwrap_or(Format::Json) {
        Format::Json if sweep_pool.is_none() => json_document(&header, &rows[0]),
        Format::Json => json_document(&header, &rows),
        Format::Csv => {
            let mut text = header.csv_lines();
            text.push_str("scale,pool_size,N_star,N_star_norm,alpha_star,eta_inf,gain_fraction,knee_gain,regime\n");
            for r in &rows {
                let g = &r.gain;
                text.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    r.scale,
                    r.pool_size,
                    g.knee_servers,
                    format_number(g.knee_normalized),
                    format_number(g.knee_alpha),
                    format_number(g.utilization_limit),
                    format_number(g.achieved_gain_fraction),
                    format_number(g.knee_gain),
                    serde_json::to_value(g.regime).unwrap().as_str().unwrap_or_default()
                ));
            }
            text
        }
    };
    write_output(&common.out, &text)
}

fn cmd_simulate(common: &Common, sim: &SimArgs) -> Outcome<()> {
    if common.format == Some(Format::Csv) {
        return Err(Failure::Config("simulate writes JSON only".into()));
    }
    let pool = load_config(&common.config)?;
    let cfg = sim_config(&pool, sim)?;
    let stats: SimStats = simulate(&cfg)?;
    let mut header = Header::new("simulate", &pool);
    header.engines = vec!["simulate".into()];
    header.seed = Some(sim.seed);
    header.generator = Some(GENERATOR);
    #[derive(serde::Serialize)]
    struct Doc<'a> {
        settings: &'a SimConfig,
        stats: SimStats,
    }
    write_output(&common.out, &json_document(&header, &Doc { settings: &cfg, stats }))
}

fn configure_threads() -> Outcome<()> {
    if let Ok(value) = std::env::var("VBSPOOL_THREADS") {
        let n: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Failure::Config(format!("VBSPOOL_THREADS must be a positive integer, got '{value}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome<()> {
    configure_threads()?;
    match &cli.command {
        Command::Blocking { common, engine, sim } => cmd_blocking(common, *engine, sim),
        Command::Sweep {
            common,
            engine,
            sweep_n,
            sweep_pool,
            delta,
            sim,
        } => cmd_sweep(common, engine, sweep_n, sweep_pool, *delta, sim),
        Command::Knee {
            common,
            delta,
            method,
            sweep_pool,
        } => cmd_knee(common, *delta, *method, sweep_pool),
        Command::Simulate { common, sim } => cmd_simulate(common, sim),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
