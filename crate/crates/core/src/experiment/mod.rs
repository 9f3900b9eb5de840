//! Experiment drivers: capital requirements for a set of strategies, risk
//! criteria and mortality modes (`solve`), and the same across plan sizes
//! (`sweep`).

mod config;
mod engine;

pub use config::{
    Economy, EconomyConfig, ExperimentConfig, OutputConfig, PlanConfig, RiskKind, StrategyEntry, DEFAULT_POOL_GRID,
    DEFAULT_POOL_SIZE, DEFAULT_SCENARIOS, DEFAULT_SEED, FULL_SCENARIOS,
};
pub use engine::{evaluate_plans, CaseData};

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::CovarianceAdjustment;
use crate::plan::{MortalityMode, Strategy};
use crate::scenario::{write_scenarios_csv, ScenarioGenerator};
use crate::valuation::{best_estimate_from_means, risk_neutral_value, solve_min_capital, RiskSpec, SolverOptions};

/// Relative agreement demanded of the risk-neutral solve and its closed form.
pub const SELF_TEST_TOLERANCE: f64 = 1e-6;

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub pool_size: u64,
    pub strategy: String,
    pub risk_kind: RiskKind,
    /// Risk aversion; entropic rows only.
    pub gamma: Option<f64>,
    pub mode: MortalityMode,
    pub w0_per_capita: f64,
    /// Monte Carlo standard error of `w0_per_capita`; solved rows only.
    pub stderr: Option<f64>,
    pub iterations: usize,
}

/// Outcome of the risk-neutral identity check for one case.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfTestCase {
    pub pool_size: u64,
    pub strategy: String,
    pub mode: MortalityMode,
    pub solved: f64,
    pub closed_form: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub rows: Vec<ResultRow>,
    pub adjustment: CovarianceAdjustment,
    pub self_test: Vec<SelfTestCase>,
}

pub const RESULTS_HEADER: [&str; 8] = [
    "poolSize",
    "strategy",
    "riskKind",
    "gamma",
    "mode",
    "w0PerCapita",
    "stderr",
    "iterations",
];

/// Write rows as CSV. Floats use the shortest representation that reads
/// back to the same value.
pub fn write_results_csv<W: Write>(writer: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULTS_HEADER)?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.pool_size.to_string(),
            r.strategy.clone(),
            r.risk_kind.as_str().to_owned(),
            opt(r.gamma),
            r.mode.as_str().to_owned(),
            r.w0_per_capita.to_string(),
            opt(r.stderr),
            r.iterations.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

struct Setup {
    generator: ScenarioGenerator,
    strategies: Vec<Strategy>,
    adjustment: CovarianceAdjustment,
}

fn setup(cfg: &ExperimentConfig, ages: &[u32]) -> Result<Setup> {
    cfg.validate()?;
    let economy = cfg.economy()?;
    let generator = ScenarioGenerator::new(
        &economy.params,
        economy.x0,
        cfg.scenarios,
        cfg.horizon,
        cfg.seed,
        cfg.economy.sampling,
        &economy.basis,
        ages,
    )?;
    if let Some(path) = &cfg.output.scenarios {
        let scenarios: Vec<_> = (0..generator.len()).into_par_iter().map(|i| generator.scenario(i)).collect();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        write_scenarios_csv(std::io::BufWriter::new(file), &scenarios)?;
    }
    Ok(Setup {
        generator,
        strategies: cfg.resolve_strategies()?,
        adjustment: economy.adjustment,
    })
}

fn value_case(
    case: &CaseData,
    kind: RiskKind,
    gamma: f64,
    opts: SolverOptions,
) -> Result<(f64, Option<f64>, usize)> {
    let spec = match kind {
        RiskKind::BestEstimate => {
            return Ok((best_estimate_from_means(&case.mean_returns, &case.mean_claims)?, None, 0));
        }
        RiskKind::Entropic => RiskSpec::entropic(gamma)?,
        RiskKind::Neutral => RiskSpec::RiskNeutral,
    };
    let result = solve_min_capital(&case.profiles, &spec, opts)?;
    Ok((result.w0_per_capita, Some(result.stderr), result.iterations))
}

fn self_test_case(case: &CaseData, pool_size: u64, strategy: &str, mode: MortalityMode, opts: SolverOptions) -> Result<SelfTestCase> {
    let solved = solve_min_capital(&case.profiles, &RiskSpec::RiskNeutral, opts)?.w0_per_capita;
    let closed_form = risk_neutral_value(&case.profiles)?;
    let relative_error = (solved - closed_form).abs() / closed_form.abs().max(f64::MIN_POSITIVE);
    let out = SelfTestCase {
        pool_size,
        strategy: strategy.to_owned(),
        mode,
        solved,
        closed_form,
        relative_error,
    };
    if !(relative_error <= SELF_TEST_TOLERANCE) {
        return Err(Error::Estimation(format!(
            "self-test failed for {strategy}/{} at pool size {pool_size}: solver gives {solved}, closed form {closed_form} (relative error {relative_error:e})",
            mode.as_str()
        )));
    }
    Ok(out)
}

fn rows_for(
    cfg: &ExperimentConfig,
    cases: &[CaseData],
    strategies: &[Strategy],
    mode: MortalityMode,
    pool_sizes: &[u64],
    self_test: &mut Vec<SelfTestCase>,
) -> Result<Vec<ResultRow>> {
    let opts = cfg.solver_options();
    let mut rows = Vec::new();
    for (case, strategy) in cases.iter().zip(strategies) {
        if cfg.self_test {
            self_test.push(self_test_case(case, *pool_sizes.last().expect("nonempty"), &strategy.name, mode, opts)?);
        }
        for &kind in &cfg.risks {
            let (w0, stderr, iterations) = value_case(case, kind, cfg.gamma, opts)?;
            for &pool_size in pool_sizes {
                rows.push(ResultRow {
                    pool_size,
                    strategy: strategy.name.clone(),
                    risk_kind: kind,
                    gamma: (kind == RiskKind::Entropic).then_some(cfg.gamma),
                    mode,
                    w0_per_capita: w0,
                    stderr,
                    iterations,
                });
            }
        }
    }
    Ok(rows)
}

/// Capital per member of a plan of `pool_size` for every configured
/// strategy, risk criterion and mortality mode, on one scenario set.
pub fn run_solve(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let plans = cfg
        .modes
        .iter()
        .map(|&m| cfg.plan(cfg.pool_size, m))
        .collect::<Result<Vec<_>>>()?;
    let ages = plans[0].ages();
    let setup = setup(cfg, &ages)?;
    let cases = evaluate_plans(&setup.generator, cfg.seed, &plans, &setup.strategies)?;
    let mut rows = Vec::new();
    let mut self_test = Vec::new();
    for (plan_cases, plan) in cases.iter().zip(&plans) {
        rows.extend(rows_for(cfg, plan_cases, &setup.strategies, plan.mode(), &[cfg.pool_size], &mut self_test)?);
    }
    Ok(Report {
        rows,
        adjustment: setup.adjustment,
        self_test,
    })
}

/// Capital per member across the pool-size grid.
///
/// Binomial rows are solved at every grid size. Deterministic survivor
/// counts make per-capita claims independent of the plan size (up to the
/// rounding of the benefit classes), so the deterministic reference is
/// solved once, at the largest size, and repeated on every grid row.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let binomial = cfg.modes.contains(&MortalityMode::Binomial);
    let deterministic = cfg.modes.contains(&MortalityMode::Deterministic);
    let largest = *cfg.pool_grid.last().expect("validated grid is nonempty");
    let mut plans = Vec::new();
    if binomial {
        for &n in &cfg.pool_grid {
            plans.push(cfg.plan(n, MortalityMode::Binomial)?);
        }
    }
    if deterministic {
        plans.push(cfg.plan(largest, MortalityMode::Deterministic)?);
    }
    let setup = setup(cfg, &plans[0].ages())?;
    let cases = evaluate_plans(&setup.generator, cfg.seed, &plans, &setup.strategies)?;

    let mut rows = Vec::new();
    let mut self_test = Vec::new();
    if binomial {
        for (plan_cases, &n) in cases.iter().zip(&cfg.pool_grid) {
            rows.extend(rows_for(cfg, plan_cases, &setup.strategies, MortalityMode::Binomial, &[n], &mut self_test)?);
        }
    }
    if deterministic {
        rows.extend(rows_for(
            cfg,
            cases.last().expect("deterministic plan evaluated"),
            &setup.strategies,
            MortalityMode::Deterministic,
            &cfg.pool_grid,
            &mut self_test,
        )?);
    }
    // Group by strategy and risk so each curve is contiguous.
    rows.sort_by_key(|r| {
        (
            setup.strategies.iter().position(|s| s.name == r.strategy),
            cfg.risks.iter().position(|&k| k == r.risk_kind),
            r.mode == MortalityMode::Deterministic,
            r.pool_size,
        )
    });
    Ok(Report {
        rows,
        adjustment: setup.adjustment,
        self_test,
    })
}
