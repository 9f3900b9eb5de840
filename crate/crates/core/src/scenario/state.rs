use serde::{Deserialize, Serialize};

use super::params::Vector7;

pub const V1: usize = 0;
pub const V2: usize = 1;
pub const V3: usize = 2;
pub const G: usize = 3;
pub const Y: usize = 4;
pub const S: usize = 5;
pub const P: usize = 6;

pub const STATE_NAMES: [&str; 7] = ["v1", "v2", "v3", "g", "y", "s", "p"];

/// The seven systematic risk factors at one date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct StateVector {
    /// Mortality logits (survival at ages 18, 50, 100 under the default basis).
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    /// Log per-capita GDP.
    pub g: f64,
    /// Log of the one-year bond yield.
    pub y: f64,
    /// Log of the equity total-return index.
    pub s: f64,
    /// One-period change of log CPI.
    pub p: f64,
}

impl StateVector {
    pub fn from_array(x: [f64; 7]) -> Self {
        StateVector {
            v1: x[V1],
            v2: x[V2],
            v3: x[V3],
            g: x[G],
            y: x[Y],
            s: x[S],
            p: x[P],
        }
    }

    pub fn to_array(&self) -> [f64; 7] {
        [self.v1, self.v2, self.v3, self.g, self.y, self.s, self.p]
    }

    pub fn from_vector(v: &Vector7) -> Self {
        Self::from_array([v[0], v[1], v[2], v[3], v[4], v[5], v[6]])
    }

    pub fn to_vector(&self) -> Vector7 {
        Vector7::from_column_slice(&self.to_array())
    }

    pub fn mortality(&self) -> [f64; 3] {
        [self.v1, self.v2, self.v3]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    /// Estimate of the end-2007 state for US females and US markets.
    ///
    /// Mortality logits: one-year female death rates of about 0.04% at 18,
    /// 0.32% at 50 and 28% at 100. `g` is placed so the old-age logit sits on
    /// its GDP-driven trend. `y` is the log of the 2007 average one-year
    /// Treasury yield (4.53%), `p` the 2007 log change in average CPI. The
    /// equity index level is immaterial (only its increments enter returns)
    /// and is normalised to `s = 0`.
    pub fn us_2007_estimate() -> Self {
        StateVector {
            v1: 7.85,
            v2: 5.75,
            v3: 0.95,
            g: 10.28,
            y: 4.53f64.ln(),
            s: 0.0,
            p: 0.0281,
        }
    }
}
