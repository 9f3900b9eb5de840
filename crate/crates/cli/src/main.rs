//! `alm`: capital requirement tables, pooling sweeps and calibration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use alm_core::calibration::{
    fit_factor_series, fit_var, load_market_csv, load_mortality_csv, state_series, ParameterFile, VarFitSpec,
};
use alm_core::experiment::{
    run_solve, run_sweep, write_results_csv, ExperimentConfig, Report, RiskKind, StrategyEntry, FULL_SCENARIOS,
};
use alm_core::linalg::CovarianceAdjustment;
use alm_core::mortality::BasisSet;
use alm_core::plan::MortalityMode;
use alm_core::scenario::STATE_NAMES;

#[derive(Parser)]
#[command(name = "alm", version, about = "Minimal capital of a pension plan under mortality pooling")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Capital per member for each strategy, risk criterion and mortality mode.
    Solve(RunArgs),
    /// Capital per member across the pool-size grid.
    Sweep(RunArgs),
    /// Fit the model to mortality and market data and write a parameter file.
    Calibrate(CalibrateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Binomial,
    Deterministic,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Safe,
    Risky,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum RiskArg {
    Entropic,
    Neutral,
    BestEstimate,
    All,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of scenarios.
    #[arg(long)]
    scenarios: Option<usize>,
    /// Full-size run (500000 scenarios).
    #[arg(long, conflicts_with = "scenarios")]
    full: bool,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long, value_enum)]
    risk: Option<RiskArg>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Comma-separated plan sizes for `sweep`.
    #[arg(long, value_delimiter = ',')]
    pool_grid: Option<Vec<u64>>,
    /// Plan size for `solve`.
    #[arg(long)]
    pool_size: Option<u64>,
    /// 20% of members on a double benefit.
    #[arg(long)]
    nonhomogeneous: bool,
    /// Calibrated parameter file instead of the published model.
    #[arg(long)]
    parameters: Option<PathBuf>,
    /// Long-run annual log inflation, replacing the tabulated CPI drift.
    #[arg(long)]
    inflation_level: Option<f64>,
    /// Results CSV (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the generated scenarios to this CSV.
    #[arg(long)]
    dump_scenarios: Option<PathBuf>,
    /// Check the risk-neutral solve against its closed form.
    #[arg(long)]
    self_test: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Mortality CSV with columns year,age,exposure,deaths.
    #[arg(long)]
    mortality: PathBuf,
    /// Market CSV with columns year,bond_yield,equity_index,cpi,gdp_per_capita.
    #[arg(long)]
    market: PathBuf,
    /// Parameter file to write.
    #[arg(long)]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n) = self.scenarios {
            cfg.scenarios = n;
        }
        if self.full {
            cfg.scenarios = FULL_SCENARIOS;
        }
        if let Some(mode) = self.mode {
            cfg.modes = match mode {
                ModeArg::Binomial => vec![MortalityMode::Binomial],
                ModeArg::Deterministic => vec![MortalityMode::Deterministic],
                ModeArg::Both => vec![MortalityMode::Deterministic, MortalityMode::Binomial],
            };
        }
        if let Some(strategy) = self.strategy {
            let names: &[&str] = match strategy {
                StrategyArg::Safe => &["safe"],
                StrategyArg::Risky => &["risky"],
                StrategyArg::Both => &["safe", "risky"],
            };
            cfg.strategies = names.iter().map(|n| StrategyEntry::Named((*n).into())).collect();
        }
        if let Some(risk) = self.risk {
            cfg.risks = match risk {
                RiskArg::Entropic => vec![RiskKind::Entropic],
                RiskArg::Neutral => vec![RiskKind::Neutral],
                RiskArg::BestEstimate => vec![RiskKind::BestEstimate],
                RiskArg::All => RiskKind::ALL.to_vec(),
            };
        }
        if let Some(gamma) = self.gamma {
            cfg.gamma = gamma;
        }
        if let Some(grid) = &self.pool_grid {
            cfg.pool_grid = grid.clone();
        }
        if let Some(n) = self.pool_size {
            cfg.pool_size = n;
        }
        if self.nonhomogeneous {
            cfg.plan.nonhomogeneous = true;
        }
        if let Some(p) = &self.parameters {
            cfg.economy.parameters = Some(p.clone());
        }
        if let Some(level) = self.inflation_level {
            cfg.economy.inflation_level = Some(level);
        }
        if let Some(p) = &self.out {
            cfg.output.results = Some(p.clone());
        }
        if let Some(p) = &self.dump_scenarios {
            cfg.output.scenarios = Some(p.clone());
        }
        if self.self_test {
            cfg.self_test = true;
        }
        if let Some(path) = &cfg.economy.parameters {
            if !path.is_file() {
                return Err(alm_core::Error::Io {
                    path: path.clone(),
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "parameter file not found"),
                }
                .into());
            }
        }
        Ok(cfg)
    }
}

fn describe_adjustment(adj: &CovarianceAdjustment) -> String {
    if adj.is_noop() {
        return "covariance used as given".into();
    }
    format!(
        "covariance symmetrised (max asymmetry {:.3e}), {} negative eigenvalue(s) clipped {:?}, Frobenius change {:.3e}",
        adj.max_asymmetry,
        adj.clipped.len(),
        adj.clipped,
        adj.frobenius_change
    )
}

fn emit(report: &Report, out: Option<&Path>) -> Result<()> {
    log::info!("{}", describe_adjustment(&report.adjustment));
    for case in &report.self_test {
        eprintln!(
            "self-test {}/{} pool {}: solver {:.10} closed form {:.10} relative error {:.2e}",
            case.strategy,
            case.mode.as_str(),
            case.pool_size,
            case.solved,
            case.closed_form,
            case.relative_error
        );
    }
    match out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            let mut w = BufWriter::new(file);
            write_results_csv(&mut w, &report.rows)?;
            w.flush().with_context(|| format!("cannot write {}", path.display()))?;
        }
        None => {
            let stdout = std::io::stdout();
            write_results_csv(stdout.lock(), &report.rows)?;
        }
    }
    Ok(())
}

fn print_matrix(name: &str, rows: &[[f64; 7]; 7]) {
    println!("{name}:");
    println!("      {}", STATE_NAMES.map(|n| format!("{n:>12}")).join(""));
    for (i, row) in rows.iter().enumerate() {
        println!("{:>5} {}", STATE_NAMES[i], row.map(|x| format!("{x:>12.5e}")).join(""));
    }
}

fn calibrate(args: &CalibrateArgs) -> Result<()> {
    let mortality = load_mortality_csv(&args.mortality)?;
    let market = load_market_csv(&args.market)?;
    if mortality.is_empty() {
        bail!(alm_core::Error::Parameter(format!(
            "{} contains no observations",
            args.mortality.display()
        )));
    }
    let basis = BasisSet::default();
    let factors = fit_factor_series(&mortality, &basis)?;
    let series = state_series(&factors, &market)?;
    let (Some(&(first, _)), Some(&(last, x0))) = (series.first(), series.last()) else {
        bail!(alm_core::Error::Parameter("mortality and market data share no usable year".into()));
    };
    let states: Vec<_> = series.iter().map(|(_, x)| *x).collect();
    let fit = fit_var(&states, &VarFitSpec::default())?;
    let file = ParameterFile::new(&fit.params, x0, basis);
    file.save(&args.out)?;

    println!("fitted {first}-{last} ({} transitions); x0 is the {last} state", states.len() - 1);
    print_matrix("A", &file.a);
    println!("b: {}", file.b.map(|x| format!("{x:.5e}")).join(" "));
    print_matrix("Sigma", &file.sigma);
    println!("{}", describe_adjustment(&fit.adjustment));
    println!("x0: {}", x0.to_array().map(|x| format!("{x:.6}")).join(" "));
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the worker pool")?;
    }
    match &cli.command {
        Command::Solve(args) => {
            let cfg = args.config()?;
            emit(&run_solve(&cfg)?, cfg.output.results.as_deref())
        }
        Command::Sweep(args) => {
            let cfg = args.config()?;
            emit(&run_sweep(&cfg)?, cfg.output.results.as_deref())
        }
        Command::Calibrate(args) => calibrate(args),
    }
}

/// 2 for bad input (files, configuration, data), 1 for numerical failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<alm_core::Error>() {
            return if e.is_input_error() { 2 } else { 1 };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
