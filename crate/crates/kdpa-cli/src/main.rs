//! Experiment runner for k-level descending price auctions and batched
//! prophet inequalities. Emits deterministic JSON reports (CSV for
//! trajectories); all randomness flows from `--seed`.

mod report;
mod verify;

use clap::{Parser, Subcommand, ValueEnum};
use kdpa::{
    balanced_thresholds_multi, balanced_thresholds_single, dp_solve, exact_alg_single,
    expected_outcome_mc, expected_reward_mc, guarantee_multi, guarantee_single, max_welfare,
    myerson_opt_revenue, opt_offline, parse_dist_spec, prices_to_thresholds, revenue_prices,
    welfare_prices, AuctionInstance, DistError, EquilibriumProfile, ProphetInstance,
    ValueDistribution, VirtualValueTransform,
};
use report::{ConfigEcho, DpReport, Estimate, RatioReport, RunReport};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "kdpa", version, about = "Descending price auction and prophet inequality experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Value distribution: uniform:a,b | exp:rate | table:path.csv
    #[arg(long, global = true, default_value = "uniform:0,1")]
    dist: String,
    /// Number of buyers (or rewards)
    #[arg(long, global = true, default_value_t = 10)]
    n: usize,
    /// Number of items (capacity)
    #[arg(long, global = true, default_value_t = 1)]
    m: usize,
    /// Number of price levels (thresholds)
    #[arg(long, global = true, default_value_t = 5)]
    k: usize,
    /// What the threshold ladder optimizes
    #[arg(long, global = true, value_enum, default_value_t = Objective::Welfare)]
    objective: Objective,
    /// Monte Carlo trials
    #[arg(long, global = true, default_value_t = 100_000)]
    trials: u64,
    /// Root RNG seed
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Guarantee deflation in the pass rule: ratio >= guarantee/(1+epsilon) - 3 sigma
    #[arg(long, global = true, default_value_t = 0.05)]
    epsilon: f64,
    /// Grid size for the dynamic program
    #[arg(long, global = true, default_value_t = 2000)]
    grid: usize,
    /// Cap on worker threads (output does not depend on this)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write output to a file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the threshold ladder (and prices for auction objectives)
    Thresholds,
    /// Emit the equilibrium price schedule with an inverse-map self-check
    Prices,
    /// Run a Monte Carlo campaign against the objective's benchmark
    Simulate,
    /// Solve for grid-optimal thresholds by dynamic programming
    Dp,
    /// Emit the price/threshold trajectory as CSV
    Trajectory,
    /// Run the built-in verification suite
    Verify {
        #[arg(value_enum, default_value_t = Suite::Fast)]
        suite: Suite,
    },
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum Objective {
    Revenue,
    Welfare,
    Prophet,
}

impl Objective {
    fn name(self) -> &'static str {
        match self {
            Objective::Revenue => "revenue",
            Objective::Welfare => "welfare",
            Objective::Prophet => "prophet",
        }
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum Suite {
    Fast,
    Full,
}

enum CliError {
    /// Invalid configuration (exit 2).
    Config(String),
    /// Computation failed (exit 3).
    Numeric(String),
    /// Verification suite reported failures (exit 1).
    Verification(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(msg) => format!("config error: {msg}"),
            CliError::Numeric(msg) => format!("numeric failure: {msg}"),
            CliError::Verification(count) => format!("verification failed: {count} properties"),
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn numeric_err(err: impl std::fmt::Display) -> CliError {
    CliError::Numeric(err.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KDPA_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("config error: --threads must be positive");
            return ExitCode::from(2);
        }
        // Chunked reductions combine in a fixed order, so the pool size never
        // changes results.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    validate(cli)?;
    let output = match &cli.command {
        Command::Thresholds => cmd_thresholds(cli)?,
        Command::Prices => cmd_prices(cli)?,
        Command::Simulate => cmd_simulate(cli)?,
        Command::Dp => cmd_dp(cli)?,
        Command::Trajectory => cmd_trajectory(cli)?,
        Command::Verify { suite } => return cmd_verify(cli, *suite),
    };
    emit(cli, &output)
}

fn validate(cli: &Cli) -> Result<(), CliError> {
    if cli.n == 0 || cli.k == 0 || cli.m == 0 {
        return Err(config_err("--n, --m, and --k must be positive"));
    }
    if cli.m > cli.n {
        return Err(config_err(format!("--m {} exceeds --n {}", cli.m, cli.n)));
    }
    if !(cli.epsilon.is_finite() && cli.epsilon >= 0.0) {
        return Err(config_err("--epsilon must be a finite nonnegative number"));
    }
    if cli.grid < 2 {
        return Err(config_err("--grid must be at least 2"));
    }
    if cli.m > 1 && cli.objective != Objective::Prophet {
        return Err(config_err("auction objectives support a single item; use --objective prophet for m > 1"));
    }
    Ok(())
}

fn dist(cli: &Cli) -> Result<ValueDistribution, CliError> {
    parse_dist_spec(&cli.dist).map_err(|err| match err {
        DistError::InvalidSpec(msg) => config_err(format!("--dist {msg}")),
        other => numeric_err(other),
    })
}

fn echo(cli: &Cli) -> ConfigEcho {
    ConfigEcho {
        dist: cli.dist.clone(),
        n: cli.n,
        m: cli.m,
        k: cli.k,
        objective: cli.objective.name().to_string(),
        trials: cli.trials,
        seed: cli.seed,
        epsilon: cli.epsilon,
        grid: cli.grid,
    }
}

fn emit(cli: &Cli, output: &str) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => std::fs::write(path, output)
            .map_err(|err| config_err(format!("--out {}: {err}", path.display()))),
        None => {
            print!("{output}");
            Ok(())
        }
    }
}

/// Equilibrium ladder for an auction objective.
fn auction_profile(cli: &Cli, g: &ValueDistribution) -> Result<EquilibriumProfile, CliError> {
    match cli.objective {
        Objective::Revenue => revenue_prices(g, cli.n, cli.k).map_err(numeric_err),
        Objective::Welfare => welfare_prices(g, cli.n, cli.k).map_err(numeric_err),
        Objective::Prophet => Err(config_err("this command needs --objective revenue or welfare")),
    }
}

fn reserve_of(cli: &Cli, g: &ValueDistribution) -> Result<Option<f64>, CliError> {
    match cli.objective {
        Objective::Revenue => Ok(Some(VirtualValueTransform::new(g.clone()).map_err(numeric_err)?.reserve())),
        _ => Ok(None),
    }
}

fn cmd_thresholds(cli: &Cli) -> Result<String, CliError> {
    let g = dist(cli)?;
    let mut report = RunReport::new("thresholds", echo(cli));
    if cli.objective == Objective::Prophet {
        let f = g.as_reward();
        let policy = if cli.m == 1 {
            balanced_thresholds_single(&f, cli.n, cli.k)
        } else {
            balanced_thresholds_multi(&f, cli.n, cli.m, cli.k)
        }
        .map_err(numeric_err)?;
        report.thresholds = Some(policy.thresholds().to_vec());
    } else {
        let profile = auction_profile(cli, &g)?;
        report.reserve = reserve_of(cli, &g)?;
        report.thresholds = Some(profile.thresholds().to_vec());
        report.prices = Some(profile.prices().prices().to_vec());
    }
    Ok(report.to_json())
}

fn cmd_prices(cli: &Cli) -> Result<String, CliError> {
    let g = dist(cli)?;
    let profile = auction_profile(cli, &g)?;
    let recovered = prices_to_thresholds(&g, cli.n, profile.prices()).map_err(numeric_err)?;
    let round_trip = profile
        .thresholds()
        .iter()
        .zip(recovered.thresholds())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let mut report = RunReport::new("prices", echo(cli));
    report.reserve = reserve_of(cli, &g)?;
    report.thresholds = Some(profile.thresholds().to_vec());
    report.prices = Some(profile.prices().prices().to_vec());
    report.recovered_thresholds = Some(recovered.thresholds().to_vec());
    report.round_trip_error = Some(round_trip);
    Ok(report.to_json())
}

fn cmd_simulate(cli: &Cli) -> Result<String, CliError> {
    let g = dist(cli)?;
    let mut report = RunReport::new("simulate", echo(cli));
    let mut estimates = BTreeMap::new();
    let (estimate, benchmark, guarantee) = match cli.objective {
        Objective::Prophet => {
            let f = g.as_reward();
            let policy = if cli.m == 1 {
                balanced_thresholds_single(&f, cli.n, cli.k)
            } else {
                balanced_thresholds_multi(&f, cli.n, cli.m, cli.k)
            }
            .map_err(numeric_err)?;
            report.thresholds = Some(policy.thresholds().to_vec());
            let inst = ProphetInstance::new(f.clone(), cli.n, cli.m).map_err(numeric_err)?;
            let est = expected_reward_mc(&inst, &policy, cli.trials, cli.seed);
            estimates.insert("reward".to_string(), Estimate { mean: est.mean, std_error: est.std_error });
            let benchmark = opt_offline(&f, cli.n, cli.m).map_err(numeric_err)?;
            let guarantee = if cli.m == 1 { guarantee_single(cli.k) } else { guarantee_multi(cli.k, cli.m) };
            (est, benchmark, guarantee)
        }
        _ => {
            let profile = auction_profile(cli, &g)?;
            report.reserve = reserve_of(cli, &g)?;
            report.thresholds = Some(profile.thresholds().to_vec());
            report.prices = Some(profile.prices().prices().to_vec());
            let inst = AuctionInstance::new(g.clone(), cli.n, cli.m, cli.k).map_err(numeric_err)?;
            let outcome = expected_outcome_mc(&inst, &profile, cli.trials, cli.seed);
            for (name, est) in [
                ("revenue", outcome.revenue),
                ("welfare", outcome.welfare),
                ("virtual_surplus", outcome.virtual_surplus),
            ] {
                estimates.insert(name.to_string(), Estimate { mean: est.mean, std_error: est.std_error });
            }
            match cli.objective {
                Objective::Revenue => {
                    let benchmark = myerson_opt_revenue(&g, cli.n, cli.m).map_err(numeric_err)?;
                    (outcome.revenue, benchmark, guarantee_single(cli.k))
                }
                _ => {
                    let benchmark = max_welfare(&g, cli.n, cli.m).map_err(numeric_err)?;
                    (outcome.welfare, benchmark, guarantee_single(cli.k))
                }
            }
        }
    };
    let ratio = estimate.mean / benchmark;
    let pass = ratio >= guarantee / (1.0 + cli.epsilon) - estimate.three_sigma() / benchmark;
    report.estimates = Some(estimates);
    report.ratio = Some(RatioReport { value: ratio, benchmark, guarantee, pass });
    log::info!("simulate: ratio {ratio:.6} against benchmark {benchmark:.6} (pass: {pass})");
    Ok(report.to_json())
}

fn cmd_dp(cli: &Cli) -> Result<String, CliError> {
    let g = dist(cli)?;
    if cli.m > 1 {
        return Err(config_err("dp solves the single-item game; --m must be 1"));
    }
    let f = g.as_reward();
    let sol = dp_solve(&f, cli.n, cli.k, cli.grid).map_err(numeric_err)?;
    let balanced = balanced_thresholds_single(&f, cli.n, cli.k).map_err(numeric_err)?;
    let balanced_value = exact_alg_single(&f, cli.n, &balanced).map_err(numeric_err)?;
    let mut report = RunReport::new("dp", echo(cli));
    report.thresholds = Some(sol.thresholds.thresholds().to_vec());
    report.dp = Some(DpReport { value: sol.value, grid_error: sol.grid_error, balanced_value });
    Ok(report.to_json())
}

fn cmd_trajectory(cli: &Cli) -> Result<String, CliError> {
    let g = dist(cli)?;
    let profile = auction_profile(cli, &g)?;
    let mut csv = String::from("round,price,threshold\n");
    for (j, (price, tau)) in profile.prices().prices().iter().zip(profile.thresholds()).enumerate() {
        csv.push_str(&format!("{},{},{}\n", j + 1, price, tau));
    }
    Ok(csv)
}

fn cmd_verify(cli: &Cli, suite: Suite) -> Result<(), CliError> {
    let full = matches!(suite, Suite::Full);
    let results = verify::run_suite(full);
    let mut text = String::new();
    let mut failures = 0;
    for result in &results {
        let verdict = if result.ok { "ok  " } else { "FAIL" };
        text.push_str(&format!("{verdict} {}: {}\n", result.name, result.detail));
        failures += usize::from(!result.ok);
    }
    let suite_name = if full { "full" } else { "fast" };
    text.push_str(&format!(
        "verify {suite_name}: {} passed, {failures} failed\n",
        results.len() - failures
    ));
    emit(cli, &text)?;
    if failures > 0 {
        return Err(CliError::Verification(failures));
    }
    Ok(())
}
