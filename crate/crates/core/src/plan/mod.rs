//! Pension scheme definition and the claims it generates along a scenario.

mod strategy;

pub use strategy::{portfolio_path, Strategy};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mortality::{evolve_binomial, evolve_deterministic, CohortCount, MAX_AGE, MIN_AGE};
use crate::scenario::Scenario;

/// Horizon of the shipped experiments, in years.
pub const DEFAULT_HORIZON: usize = 35;
/// Entry age of the shipped experiments.
pub const DEFAULT_AGE: u32 = 65;

/// How survivor counts evolve given the survival probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MortalityMode {
    /// Survivors drawn from a binomial law: systematic and idiosyncratic risk.
    Binomial,
    /// Survivors at their conditional expectation: systematic risk only.
    Deterministic,
}

impl MortalityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MortalityMode::Binomial => "binomial",
            MortalityMode::Deterministic => "deterministic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub start_age: u32,
    pub headcount: u64,
    /// Annual benefit per member, in units of the index at time 0.
    pub benefit: f64,
}

impl Cohort {
    pub fn new(start_age: u32, headcount: u64, benefit: f64) -> Self {
        Cohort {
            start_age,
            headcount,
            benefit,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PensionPlan {
    cohorts: Vec<Cohort>,
    horizon: usize,
    mode: MortalityMode,
}

impl PensionPlan {
    pub fn new(cohorts: Vec<Cohort>, horizon: usize, mode: MortalityMode) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Parameter("plan horizon must be at least one year".into()));
        }
        if cohorts.is_empty() {
            return Err(Error::Parameter("plan has no cohorts".into()));
        }
        for (i, c) in cohorts.iter().enumerate() {
            if c.start_age < MIN_AGE || c.start_age as usize + horizon > MAX_AGE as usize {
                return Err(Error::Parameter(format!(
                    "cohort {i}: entry age {} with horizon {horizon} leaves the age range [{MIN_AGE}, {MAX_AGE}]",
                    c.start_age
                )));
            }
            if !(c.benefit.is_finite() && c.benefit > 0.0) {
                return Err(Error::Parameter(format!("cohort {i}: benefit must be positive, got {}", c.benefit)));
            }
        }
        Ok(PensionPlan { cohorts, horizon, mode })
    }

    /// `size` members of age 65 with unit benefit.
    pub fn homogeneous(size: u64, horizon: usize, mode: MortalityMode) -> Result<Self> {
        Self::new(vec![Cohort::new(DEFAULT_AGE, size, 1.0)], horizon, mode)
    }

    pub fn cohorts(&self) -> &[Cohort] {
        &self.cohorts
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn mode(&self) -> MortalityMode {
        self.mode
    }

    pub fn with_mode(mut self, mode: MortalityMode) -> Self {
        self.mode = mode;
        self
    }

    /// Initial number of members over all cohorts.
    pub fn headcount(&self) -> u64 {
        self.cohorts.iter().map(|c| c.headcount).sum()
    }

    /// Every age at which some cohort needs a survival probability.
    pub fn ages(&self) -> Vec<u32> {
        let mut ages: Vec<u32> = self
            .cohorts
            .iter()
            .flat_map(|c| c.start_age..c.start_age + self.horizon as u32)
            .collect();
        ages.sort_unstable();
        ages.dedup();
        ages
    }
}

/// The two-benefit scheme: 20% of members receive two units, the rest one,
/// all aged 65 over the default horizon.
pub fn make_nonhomogeneous_plan(total: u64) -> Result<PensionPlan> {
    PensionPlan::new(
        nonhomogeneous_cohorts(total, DEFAULT_AGE, 1.0)?,
        DEFAULT_HORIZON,
        MortalityMode::Binomial,
    )
}

/// `round(0.2·total)` members with benefit `2·benefit`, the rest with `benefit`.
pub fn nonhomogeneous_cohorts(total: u64, age: u32, benefit: f64) -> Result<Vec<Cohort>> {
    if total == 0 {
        return Err(Error::Parameter("plan needs at least one member".into()));
    }
    let double = (0.2 * total as f64).round() as u64;
    Ok(vec![
        Cohort::new(age, double, 2.0 * benefit),
        Cohort::new(age, total - double, benefit),
    ])
}

/// Claims `c_1..c_T` paid at the end of each year.
///
/// In binomial mode one uniform is drawn per cohort and year, ordered by year
/// then cohort, so the same stream couples plans of different sizes.
pub fn simulate_cashflows<R: Rng + ?Sized>(plan: &PensionPlan, scenario: &Scenario, rng: &mut R) -> Result<Vec<f64>> {
    let horizon = plan.horizon;
    if scenario.horizon() < horizon {
        return Err(Error::Shape(format!(
            "scenario covers {} years, plan needs {horizon}",
            scenario.horizon()
        )));
    }
    let mut counts: Vec<CohortCount> = plan
        .cohorts
        .iter()
        .map(|c| match plan.mode {
            MortalityMode::Binomial => Ok(CohortCount::whole(c.start_age, c.headcount)),
            MortalityMode::Deterministic => CohortCount::expected(c.start_age, c.headcount as f64),
        })
        .collect::<Result<_>>()?;
    let mut claims = Vec::with_capacity(horizon);
    for t in 0..horizon {
        for cc in counts.iter_mut() {
            let p = scenario
                .survival
                .get(cc.age, t)
                .ok_or_else(|| Error::Shape(format!("scenario has no survival probability for age {} at t={t}", cc.age)))?;
            *cc = match plan.mode {
                MortalityMode::Binomial => evolve_binomial(*cc, p, rng)?,
                MortalityMode::Deterministic => evolve_deterministic(*cc, p)?,
            };
        }
        let payroll: f64 = counts
            .iter()
            .zip(&plan.cohorts)
            .map(|(cc, c)| c.benefit * cc.count.value())
            .sum();
        claims.push(scenario.index_ratio[t + 1] * payroll);
    }
    Ok(claims)
}

#[cfg(test)]
mod tests;
