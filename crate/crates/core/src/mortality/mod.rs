//! Logistic survival model on a piecewise-linear age basis, cohort evolution
//! (sampled or in the large-pool limit) and maximum-likelihood fitting of the
//! yearly mortality factors.

mod basis;
mod cohort;
mod likelihood;

pub use basis::{BasisSet, MAX_AGE, MIN_AGE};
pub use cohort::{
    binomial_quantile, evolve_binomial, evolve_deterministic, linear_predictor, sigmoid, softplus, survival_prob,
    CohortCount, Headcount,
};
pub use likelihood::{check_identifiable, fit_year_mle, fit_year_mle_with, log_likelihood, LogLikelihood, MleFit, MleOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of the basis functions for one year. Under the default basis
/// these are the logits of one-year survival at ages 18, 50 and 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MortalityFactors(Vec<f64>);

impl MortalityFactors {
    pub fn new(v: Vec<f64>) -> Self {
        MortalityFactors(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgeObservation {
    pub age: u32,
    pub exposure: u64,
    /// Members alive at the start of the year who survive it.
    pub survivors: u64,
}

/// One calendar year of exposures and survivor counts by age.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MortalityObservation {
    rows: Vec<AgeObservation>,
}

impl MortalityObservation {
    pub fn new(rows: Vec<AgeObservation>) -> Result<Self> {
        for r in &rows {
            BasisSet::check_age(r.age)?;
            if r.survivors > r.exposure {
                return Err(Error::Parameter(format!(
                    "age {}: {} survivors exceed exposure {}",
                    r.age, r.survivors, r.exposure
                )));
            }
        }
        Ok(MortalityObservation { rows })
    }

    pub fn rows(&self) -> &[AgeObservation] {
        &self.rows
    }
}
