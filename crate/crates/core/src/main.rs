//! `hperc` — command-line surface of the Hamming-graph percolation
//! laboratory.
//!
//! Exit codes: 0 success, 2 configuration error, 3 resource guard,
//! 4 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hperc::error::Error;
use hperc::harness::{
    run_experiment, summarize, write_records, ExperimentConfig, ExperimentKind, GridSpec, Instance,
    MuRule, OutputFormat, ResultRecord, SummaryRow, DEFAULT_ALPHA_EPS, DEFAULT_MAX_VERTICES,
};
use hperc::theory::{
    alpha_parameter, brute_force_connectivity, expected_isolated, hyperplane_window,
    predicted_connectivity,
};

/// Master seed when neither `--seed` nor `HPERC_SEED` is given.
const DEFAULT_SEED: u64 = 0x0048_414D_4D49_4E47;

const SEED_ENV_VAR: &str = "HPERC_SEED";

#[derive(Parser)]
#[command(
    name = "hperc",
    version,
    about = "Bond percolation laboratory for d-dimensional Hamming graphs H(d, n)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Connectivity probability across a retention grid.
    Sweep(RunArgs),
    /// Isolated-vertex count distribution against its Poisson limit.
    Poisson(PoissonArgs),
    /// Per-direction hyperplane connectivity and the quorum event.
    Hyperplanes(RunArgs),
    /// Exploration statistics conditioned on the quorum event.
    Explore(RunArgs),
    /// Monte Carlo against the exact subset-enumeration oracle (tiny
    /// instances only).
    Oracle(RunArgs),
    /// Print the closed forms for a given (d, n, t).
    Predict(PredictArgs),
}

#[derive(Args)]
struct GridArgs {
    /// Dimension(s) d; a comma-separated list pairs up with --n.
    #[arg(long, value_delimiter = ',', required = true)]
    d: Vec<u32>,

    /// Side length(s) n; a comma-separated list pairs up with --d.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<u64>,

    /// Window coordinate t = lambda - d ln n (the default grid, t = 0).
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,

    /// Window grid lo:hi:step (inclusive).
    #[arg(long = "t-grid", allow_hyphen_values = true)]
    t_grid: Option<String>,

    /// Expected occupied degree(s) lambda.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Option<Vec<f64>>,

    /// Per-edge retention probability(ies).
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    grid: GridArgs,

    /// Replications per grid point.
    #[arg(long, default_value_t = 100)]
    reps: u64,

    /// Master seed (overrides HPERC_SEED; echoed into every record).
    #[arg(long)]
    seed: Option<u64>,

    /// Quorum fraction alpha; default exp(-exp(-(d-1)t/d)) - 0.1.
    #[arg(long)]
    alpha: Option<f64>,

    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,

    /// Output format for --out.
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,

    /// Write the result records to this path.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Refuse grid points with more than this many vertices.
    #[arg(long = "max-vertices", default_value_t = DEFAULT_MAX_VERTICES)]
    max_vertices: u64,
}

#[derive(Args)]
struct PoissonArgs {
    #[command(flatten)]
    run: RunArgs,

    /// Poisson rate rule: the window limit exp(-t) or the exact
    /// finite-size mean.
    #[arg(long = "mu-rule", value_enum, default_value_t = MuRuleArg::Window)]
    mu_rule: MuRuleArg,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    d: u32,
    #[arg(long)]
    n: u64,
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> OutputFormat {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Jsonl => OutputFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MuRuleArg {
    /// exp(-t)
    Window,
    /// n^d (1-p)^m
    Exact,
}

impl From<MuRuleArg> for MuRule {
    fn from(m: MuRuleArg) -> MuRule {
        match m {
            MuRuleArg::Window => MuRule::WindowLimit,
            MuRuleArg::Exact => MuRule::ExactMean,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("hperc: {e}");
            ExitCode::from(match e {
                Error::Config(_)
                | Error::InvalidParams(_)
                | Error::Domain(_)
                | Error::Capacity(_) => 2u8,
                Error::Resource(_) => 3u8,
                Error::Io { .. } | Error::Parse { .. } => 4u8,
            })
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Sweep(args) => {
            run_kind(ExperimentKind::ConnectivitySweep, args, MuRule::WindowLimit)
        }
        Command::Poisson(args) => {
            let rule = args.mu_rule.into();
            run_kind(ExperimentKind::PoissonCheck, args.run, rule)
        }
        Command::Hyperplanes(args) => {
            run_kind(ExperimentKind::HyperplaneCheck, args, MuRule::WindowLimit)
        }
        Command::Explore(args) => {
            run_kind(ExperimentKind::ExplorationCheck, args, MuRule::WindowLimit)
        }
        Command::Oracle(args) => run_kind(ExperimentKind::OracleCheck, args, MuRule::WindowLimit),
        Command::Predict(args) => predict(args),
    }
}

fn resolve_seed(seed_flag: Option<u64>) -> Result<(u64, &'static str), Error> {
    if let Some(s) = seed_flag {
        return Ok((s, "--seed"));
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(raw) => {
            let parsed = if let Some(hex) = raw.strip_prefix("0x") {
                u64::from_str_radix(hex, 16)
            } else {
                raw.parse()
            };
            parsed
                .map(|s| (s, SEED_ENV_VAR))
                .map_err(|_| Error::config(format!("{SEED_ENV_VAR}={raw} is not a valid seed")))
        }
        Err(_) => Ok((DEFAULT_SEED, "default")),
    }
}

fn parse_instances(grid: &GridArgs) -> Result<Vec<Instance>, Error> {
    let (ds, ns) = (&grid.d, &grid.n);
    let len = ds.len().max(ns.len());
    if ds.len() != len && ds.len() != 1 || ns.len() != len && ns.len() != 1 {
        return Err(Error::config(
            "--d and --n lists must have equal length (or one of them a single value)",
        ));
    }
    Ok((0..len)
        .map(|i| Instance {
            d: ds[i.min(ds.len() - 1)],
            n: ns[i.min(ns.len() - 1)],
        })
        .collect())
}

fn parse_grid_spec(grid: &GridArgs) -> Result<GridSpec, Error> {
    let given = [
        grid.t.is_some(),
        grid.t_grid.is_some(),
        grid.lambda.is_some(),
        grid.p.is_some(),
    ]
    .iter()
    .filter(|&&g| g)
    .count();
    if given > 1 {
        return Err(Error::config(
            "--t, --t-grid, --lambda and --p are mutually exclusive",
        ));
    }
    if let Some(t) = grid.t {
        return Ok(GridSpec::Window(vec![t]));
    }
    if let Some(spec) = &grid.t_grid {
        return Ok(GridSpec::Window(parse_range(spec)?));
    }
    if let Some(lambda) = &grid.lambda {
        return Ok(GridSpec::Lambda(lambda.clone()));
    }
    if let Some(p) = &grid.p {
        return Ok(GridSpec::Retention(p.clone()));
    }
    Ok(GridSpec::Window(vec![0.0]))
}

fn parse_range(spec: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::config(format!(
            "grid {spec:?} must have the form lo:hi:step"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|s| {
            s.parse()
                .map_err(|_| Error::config(format!("bad grid number {s:?}")))
        })
        .collect::<Result<_, Error>>()?;
    let (lo, hi, step) = (nums[0], nums[1], nums[2]);
    if step <= 0.0 || hi < lo {
        return Err(Error::config("grid needs step > 0 and hi >= lo"));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + i as f64 * step).collect())
}

fn run_kind(kind: ExperimentKind, args: RunArgs, mu_rule: MuRule) -> Result<ExitCode, Error> {
    let (master_seed, seed_source) = resolve_seed(args.seed)?;
    let config = ExperimentConfig {
        kind,
        instances: parse_instances(&args.grid)?,
        grid: parse_grid_spec(&args.grid)?,
        replications: args.reps,
        master_seed,
        workers: args.workers,
        alpha: args.alpha,
        alpha_eps: DEFAULT_ALPHA_EPS,
        mu_rule,
        max_vertices: args.max_vertices,
    };
    eprintln!("hperc: master seed {master_seed} (from {seed_source})");
    let records = run_experiment(&config)?;
    if let Some(path) = &args.out {
        write_records(path, args.format.into(), &records)?;
        eprintln!(
            "hperc: wrote {} records to {}",
            records.len(),
            path.display()
        );
    }
    // Summaries cover the grid points that produced results; points that
    // only hit the resource guard are reported, and a run with nothing
    // valid at all is a resource failure.
    let live_points: std::collections::BTreeSet<u64> = records
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| r.grid_index)
        .collect();
    if live_points.is_empty() {
        for r in records.iter().take(1) {
            eprintln!("hperc: {}", r.error.as_deref().unwrap_or("error"));
        }
        return Err(Error::Resource(
            "every grid point hit the resource guard".to_string(),
        ));
    }
    let alive: Vec<_> = records
        .iter()
        .filter(|r| live_points.contains(&r.grid_index))
        .cloned()
        .collect();
    let rows = summarize(&alive, mu_rule)?;
    print_summary(kind, &rows, &records)?;
    Ok(ExitCode::SUCCESS)
}

fn print_summary(
    kind: ExperimentKind,
    rows: &[SummaryRow],
    records: &[ResultRecord],
) -> Result<(), Error> {
    println!(
        "{:>2} {:>6} {:>8} {:>9} {:>10} {:>6} {:>9} {:>19} {:>9} {:>8} {:>7}{}",
        "d",
        "n",
        "t",
        "lambda",
        "p",
        "reps",
        "P(conn)",
        "wilson99",
        "predict",
        "mean_Y",
        "TV",
        match kind {
            ExperimentKind::HyperplaneCheck => "  quorum",
            ExperimentKind::ExplorationCheck => "  quorum starved",
            ExperimentKind::OracleCheck => "    exact",
            _ => "",
        }
    );
    for row in rows {
        let mut extra = String::new();
        match kind {
            ExperimentKind::HyperplaneCheck => {
                extra = format!("  {:6.4}", row.quorum_frequency.unwrap_or(f64::NAN));
            }
            ExperimentKind::ExplorationCheck => {
                extra = format!(
                    "  {:6.4} {:7.1e}",
                    row.quorum_frequency.unwrap_or(f64::NAN),
                    row.starved_fraction.unwrap_or(f64::NAN)
                );
            }
            ExperimentKind::OracleCheck => {
                let params = hperc::graph::GraphParams::new(row.d, row.n)?;
                let exact = brute_force_connectivity(params, row.p)?;
                extra = format!("  {exact:.5}");
            }
            _ => {}
        }
        println!(
            "{:>2} {:>6} {:>8.4} {:>9.4} {:>10.3e} {:>6} {:>9.5} [{:>8.5}, {:>8.5}] {:>8.5} {:>8.4} {:>7.4}{}",
            row.d,
            row.n,
            row.t,
            row.lambda,
            row.p,
            row.num_records - row.num_errors,
            row.p_connected,
            row.wilson_low,
            row.wilson_high,
            row.predicted_connectivity,
            row.mean_isolated,
            row.tv_distance,
            extra
        );
    }
    let errors = records.iter().filter(|r| r.error.is_some()).count();
    if errors > 0 {
        eprintln!("hperc: {errors} replication(s) hit the resource guard");
    }
    Ok(())
}

fn predict(args: PredictArgs) -> Result<ExitCode, Error> {
    let params = hperc::graph::GraphParams::new(args.d, args.n)?;
    let given = [args.t.is_some(), args.lambda.is_some(), args.p.is_some()]
        .iter()
        .filter(|&&g| g)
        .count();
    if given > 1 {
        return Err(Error::config(
            "--t, --lambda and --p are mutually exclusive",
        ));
    }
    let pp = if let Some(lambda) = args.lambda {
        hperc::percolation::PercolationParam::from_lambda(params, lambda)
    } else if let Some(p) = args.p {
        hperc::percolation::PercolationParam::from_retention(params, p)
    } else {
        hperc::percolation::PercolationParam::from_window(params, args.t.unwrap_or(0.0))
    }
    .map_err(|e| Error::config(e.to_string()))?;

    let t = pp.window();
    println!("d                        = {}", args.d);
    println!("n                        = {}", args.n);
    println!("vertices n^d             = {}", params.num_vertices());
    println!("edges M                  = {}", params.num_edges());
    println!("degree m                 = {}", params.degree());
    println!("t                        = {}", t);
    println!("lambda                   = {}", pp.lambda());
    println!("p                        = {}", pp.retention());
    println!("P(connected) limit       = {}", predicted_connectivity(t));
    println!("Poisson rate exp(-t)     = {}", libm::exp(-t));
    println!(
        "exact E[isolated]        = {}",
        expected_isolated(params, pp.lambda())?
    );
    if args.d >= 2 {
        let tw = hyperplane_window(t, args.d)?;
        println!("hyperplane window        = {}", tw);
        println!("hyperplane conn limit    = {}", predicted_connectivity(tw));
        match alpha_parameter(t, args.d, DEFAULT_ALPHA_EPS) {
            Ok(a) => println!("default quorum alpha     = {a}"),
            Err(_) => println!("default quorum alpha     = n/a (limit too small for eps 0.1)"),
        }
    }
    Ok(ExitCode::SUCCESS)
}
