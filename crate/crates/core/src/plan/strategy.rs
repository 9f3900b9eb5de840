use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{check_weights, portfolio_return, Scenario, ASSETS};

/// Fixed proportions over (bond, equity), rebalanced at each period start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub name: String,
    pub weights: Vec<f64>,
}

impl Strategy {
    pub fn new(name: impl Into<String>, weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights)?;
        if weights.len() != ASSETS {
            return Err(Error::Strategy(format!("{} weights for {ASSETS} assets", weights.len())));
        }
        Ok(Strategy {
            name: name.into(),
            weights,
        })
    }

    /// 75% bonds, 25% equities.
    pub fn safe() -> Self {
        Strategy {
            name: "safe".into(),
            weights: vec![0.75, 0.25],
        }
    }

    /// 50% bonds, 50% equities.
    pub fn risky() -> Self {
        Strategy {
            name: "risky".into(),
            weights: vec![0.5, 0.5],
        }
    }

    pub fn catalog() -> Vec<Strategy> {
        vec![Self::safe(), Self::risky()]
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Self::catalog()
            .into_iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Strategy(format!("unknown strategy `{name}` (known: safe, risky)")))
    }
}

/// Portfolio gross returns `R_1..R_T` of `strategy` along `scenario`.
pub fn portfolio_path(scenario: &Scenario, strategy: &Strategy, horizon: usize) -> Result<Vec<f64>> {
    if scenario.horizon() < horizon {
        return Err(Error::Shape(format!(
            "scenario covers {} years, {horizon} requested",
            scenario.horizon()
        )));
    }
    (1..=horizon)
        .map(|t| portfolio_return(&scenario.asset_returns(t), &strategy.weights))
        .collect()
}
