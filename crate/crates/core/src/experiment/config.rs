use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::ParameterFile;
use crate::error::{Error, Result};
use crate::linalg::CovarianceAdjustment;
use crate::mortality::{BasisSet, MAX_AGE, MIN_AGE};
use crate::plan::{nonhomogeneous_cohorts, Cohort, MortalityMode, PensionPlan, Strategy, DEFAULT_AGE, DEFAULT_HORIZON};
use crate::scenario::{EconomyParams, SamplingMode, StateVector};
use crate::valuation::{SolverOptions, DEFAULT_GAMMA, DEFAULT_TOLERANCE, MAX_DOUBLINGS};

/// Scenario count for desk-scale runs.
pub const DEFAULT_SCENARIOS: usize = 20_000;
/// Scenario count of the full-size experiments.
pub const FULL_SCENARIOS: usize = 500_000;
pub const DEFAULT_SEED: u64 = 20_080_101;
pub const DEFAULT_POOL_SIZE: u64 = 10_000;
pub const DEFAULT_POOL_GRID: [u64; 13] = [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10_000];

/// Which valuation a result row reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskKind {
    Entropic,
    Neutral,
    BestEstimate,
}

impl RiskKind {
    pub const ALL: [RiskKind; 3] = [RiskKind::Entropic, RiskKind::Neutral, RiskKind::BestEstimate];

    pub fn as_str(self) -> &'static str {
        match self {
            RiskKind::Entropic => "entropic",
            RiskKind::Neutral => "neutral",
            RiskKind::BestEstimate => "best-estimate",
        }
    }
}

/// A catalogue strategy by name, or explicit weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StrategyEntry {
    Named(String),
    Custom(Strategy),
}

impl StrategyEntry {
    pub fn resolve(&self) -> Result<Strategy> {
        match self {
            StrategyEntry::Named(name) => Strategy::by_name(name),
            StrategyEntry::Custom(s) => Strategy::new(s.name.clone(), s.weights.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconomyConfig {
    /// Calibrated parameter file; the published model when absent.
    pub parameters: Option<PathBuf>,
    /// Initial state; overrides the one in the parameter file.
    pub x0: Option<StateVector>,
    /// Long-run level of one-period log inflation, replacing the CPI drift.
    pub inflation_level: Option<f64>,
    pub sampling: SamplingMode,
}

impl Default for EconomyConfig {
    fn default() -> Self {
        EconomyConfig {
            parameters: None,
            x0: None,
            inflation_level: None,
            sampling: SamplingMode::Lhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub age: u32,
    pub benefit: f64,
    /// 20% of members on a double benefit.
    pub nonhomogeneous: bool,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            age: DEFAULT_AGE,
            benefit: 1.0,
            nonhomogeneous: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Results CSV; standard output when absent.
    pub results: Option<PathBuf>,
    /// Optional dump of the generated scenario set.
    pub scenarios: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scenarios: usize,
    pub horizon: usize,
    pub gamma: f64,
    /// Bisection tolerance on per-capita capital.
    pub tolerance: f64,
    /// Plan size for `solve`.
    pub pool_size: u64,
    /// Plan sizes for `sweep`.
    pub pool_grid: Vec<u64>,
    pub modes: Vec<MortalityMode>,
    pub strategies: Vec<StrategyEntry>,
    pub risks: Vec<RiskKind>,
    /// Compare the risk-neutral solve with its closed form and fail on disagreement.
    pub self_test: bool,
    pub economy: EconomyConfig,
    pub plan: PlanConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: DEFAULT_SEED,
            scenarios: DEFAULT_SCENARIOS,
            horizon: DEFAULT_HORIZON,
            gamma: DEFAULT_GAMMA,
            tolerance: DEFAULT_TOLERANCE,
            pool_size: DEFAULT_POOL_SIZE,
            pool_grid: DEFAULT_POOL_GRID.to_vec(),
            modes: vec![MortalityMode::Deterministic, MortalityMode::Binomial],
            strategies: vec![StrategyEntry::Named("safe".into()), StrategyEntry::Named("risky".into())],
            risks: RiskKind::ALL.to_vec(),
            self_test: false,
            economy: EconomyConfig::default(),
            plan: PlanConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// The model a configuration resolves to.
#[derive(Debug, Clone)]
pub struct Economy {
    pub params: EconomyParams,
    /// Repairs made to the covariance on loading.
    pub adjustment: CovarianceAdjustment,
    pub x0: StateVector,
    pub basis: BasisSet,
}

fn check_unique<T: PartialEq + std::fmt::Debug>(field: &str, items: &[T]) -> Result<()> {
    if items.is_empty() {
        return Err(Error::config(field, "must not be empty"));
    }
    for (i, x) in items.iter().enumerate() {
        if items[..i].contains(x) {
            return Err(Error::config(format!("{field}[{i}]"), format!("duplicate entry {x:?}")));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parse a TOML configuration. Relative paths inside it are taken
    /// relative to `base`.
    pub fn from_toml(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("line {}", text[..s.start].matches('\n').count() + 1))
                .unwrap_or_else(|| "config".into());
            Error::config(field, e.message().trim().to_owned())
        })?;
        if let Some(base) = base {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent()).map_err(|e| match e {
            Error::Config { field, message } => Error::Config {
                field: format!("{}: {field}", path.display()),
                message,
            },
            other => other,
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.economy.parameters,
            &mut self.output.results,
            &mut self.output.scenarios,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios < 2 {
            return Err(Error::config("scenarios", format!("need at least 2, got {}", self.scenarios)));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::config("gamma", format!("must be positive, got {}", self.gamma)));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::config("tolerance", format!("must be positive, got {}", self.tolerance)));
        }
        if self.pool_size == 0 {
            return Err(Error::config("pool_size", "must be at least 1"));
        }
        if self.pool_grid.is_empty() {
            return Err(Error::config("pool_grid", "must not be empty"));
        }
        if let Some(i) = self.pool_grid.iter().position(|&n| n == 0) {
            return Err(Error::config(format!("pool_grid[{i}]"), "pool sizes must be positive"));
        }
        if let Some(i) = (1..self.pool_grid.len()).find(|&i| self.pool_grid[i] <= self.pool_grid[i - 1]) {
            return Err(Error::config(
                format!("pool_grid[{i}]"),
                format!(
                    "grid must be strictly increasing, {} follows {}",
                    self.pool_grid[i],
                    self.pool_grid[i - 1]
                ),
            ));
        }
        check_unique("modes", &self.modes)?;
        check_unique("risks", &self.risks)?;
        check_unique("strategies", &self.strategies)?;
        let strategies = self.resolve_strategies()?;
        let names: Vec<&str> = strategies.iter().map(|s| s.name.as_str()).collect();
        check_unique("strategies", &names)?;

        let plan = &self.plan;
        if plan.age < MIN_AGE || plan.age as usize + self.horizon > MAX_AGE as usize {
            return Err(Error::config(
                "plan.age",
                format!(
                    "entry age {} with horizon {} leaves the age range [{MIN_AGE}, {MAX_AGE}]",
                    plan.age, self.horizon
                ),
            ));
        }
        if !(plan.benefit.is_finite() && plan.benefit > 0.0) {
            return Err(Error::config("plan.benefit", format!("must be positive, got {}", plan.benefit)));
        }
        if let Some(path) = &self.economy.parameters {
            if !path.is_file() {
                return Err(Error::config(
                    "economy.parameters",
                    format!("file not found: {}", path.display()),
                ));
            }
        }
        if let Some(x0) = &self.economy.x0 {
            if !x0.is_finite() {
                return Err(Error::config("economy.x0", "entries must be finite"));
            }
        }
        if let Some(level) = self.economy.inflation_level {
            if !level.is_finite() {
                return Err(Error::config("economy.inflation_level", "must be finite"));
            }
        }
        for (field, path) in [("output.results", &self.output.results), ("output.scenarios", &self.output.scenarios)] {
            if let Some(dir) = path.as_ref().and_then(|p| p.parent()) {
                if !dir.as_os_str().is_empty() && !dir.is_dir() {
                    return Err(Error::config(field, format!("directory not found: {}", dir.display())));
                }
            }
        }
        Ok(())
    }

    pub fn resolve_strategies(&self) -> Result<Vec<Strategy>> {
        self.strategies
            .iter()
            .enumerate()
            .map(|(i, s)| s.resolve().map_err(|e| Error::config(format!("strategies[{i}]"), e.to_string())))
            .collect()
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tolerance,
            max_doublings: MAX_DOUBLINGS,
        }
    }

    /// The plan with `size` members.
    pub fn plan(&self, size: u64, mode: MortalityMode) -> Result<PensionPlan> {
        let cohorts = if self.plan.nonhomogeneous {
            nonhomogeneous_cohorts(size, self.plan.age, self.plan.benefit)?
        } else {
            vec![Cohort::new(self.plan.age, size, self.plan.benefit)]
        };
        PensionPlan::new(cohorts, self.horizon, mode)
    }

    pub fn economy(&self) -> Result<Economy> {
        let (params, adjustment, x0, basis) = match &self.economy.parameters {
            Some(path) => {
                let file = ParameterFile::load(path)?;
                let (params, adjustment) = file.economy()?;
                (params, adjustment, file.x0, file.basis)
            }
            None => {
                let (params, adjustment) = EconomyParams::published();
                (params, adjustment, StateVector::us_2007_estimate(), BasisSet::default())
            }
        };
        let params = match self.economy.inflation_level {
            Some(level) => params
                .with_inflation_level(level)
                .map_err(|e| Error::config("economy.inflation_level", e.to_string()))?,
            None => params,
        };
        Ok(Economy {
            params,
            adjustment,
            x0: self.economy.x0.unwrap_or(x0),
            basis,
        })
    }
}
