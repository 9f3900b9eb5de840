use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::CovarianceAdjustment;
use crate::scenario::{EconomyParams, Matrix7, StateVector, Vector7, YieldUnit, PUBLISHED_A_PATTERN, STATE_NAMES};
use crate::scenario::{P, S, Y};

/// Which coefficients of `Δx_t = A x_{t−1} + b + ε_t` are estimated and which
/// are held at given values.
#[derive(Debug, Clone, PartialEq)]
pub struct VarFitSpec {
    /// `mask[i][j]`: `A[i][j]` is free. Masked-out entries are zero.
    pub mask: [[bool; 7]; 7],
    /// `b[i]` held at the given value.
    pub drift_pins: Vec<(usize, f64)>,
    /// Mean-reversion level of coordinate `i` held at the given value, i.e.
    /// `b[i] = −A[i][i]·level`. Only for equations whose sole free entry of
    /// `A` is the diagonal one.
    pub level_pins: Vec<(usize, f64)>,
    /// Half-open range of observations to use; `None` for all.
    pub window: Option<(usize, usize)>,
    pub duration: f64,
    pub yield_unit: YieldUnit,
}

impl Default for VarFitSpec {
    /// Sparsity of the published model, with the short-rate level, equity
    /// drift and CPI drift pinned to their published values.
    fn default() -> Self {
        let mut mask = [[false; 7]; 7];
        for (i, j) in PUBLISHED_A_PATTERN {
            mask[i][j] = true;
        }
        VarFitSpec {
            mask,
            drift_pins: vec![(Y, 0.192), (S, 0.0583), (P, 0.038)],
            level_pins: Vec::new(),
            window: None,
            duration: 1.0,
            yield_unit: YieldUnit::Percent,
        }
    }
}

impl VarFitSpec {
    /// Every `A` entry masked out and nothing pinned: seven random walks with drift.
    pub fn drift_only() -> Self {
        VarFitSpec {
            mask: [[false; 7]; 7],
            drift_pins: Vec::new(),
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        for &(i, v) in self.drift_pins.iter().chain(&self.level_pins) {
            if i >= 7 || !v.is_finite() {
                return Err(Error::Parameter(format!("invalid pin ({i}, {v})")));
            }
        }
        for (k, &(i, _)) in self.drift_pins.iter().enumerate() {
            if self.drift_pins[..k].iter().any(|p| p.0 == i) || self.level_pins.iter().any(|p| p.0 == i) {
                return Err(Error::Parameter(format!("b[{}] is pinned more than once", STATE_NAMES[i])));
            }
        }
        for (k, &(i, _)) in self.level_pins.iter().enumerate() {
            if self.level_pins[..k].iter().any(|p| p.0 == i) {
                return Err(Error::Parameter(format!("level of {} is pinned more than once", STATE_NAMES[i])));
            }
            let free: Vec<usize> = (0..7).filter(|&j| self.mask[i][j]).collect();
            if free != [i] {
                return Err(Error::Parameter(format!(
                    "a level pin on {} needs the diagonal coefficient as the only free entry of its row",
                    STATE_NAMES[i]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct VarFit {
    pub params: EconomyParams,
    /// Changes made to the residual covariance to make it a valid `Σ`.
    pub adjustment: CovarianceAdjustment,
    /// Residuals `ε_t`, one per transition.
    pub residuals: Vec<Vector7>,
}

/// Relative singular-value floor for the rank check.
const RANK_TOL: f64 = 1e-10;

/// Per-equation least squares of `Δxⁱ_t` on the free entries of row `i` (and
/// a constant unless pinned).
pub fn fit_var(series: &[StateVector], spec: &VarFitSpec) -> Result<VarFit> {
    spec.validate()?;
    let series = match spec.window {
        Some((from, to)) if from < to && to <= series.len() => &series[from..to],
        Some((from, to)) => {
            return Err(Error::Parameter(format!(
                "window [{from}, {to}) does not fit a series of {} states",
                series.len()
            )))
        }
        None => series,
    };
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::Parameter("state series has non-finite entries".into()));
    }
    let m = series.len().saturating_sub(1);
    let mut a = Matrix7::zeros();
    let mut b = Vector7::zeros();
    let mut residuals = vec![Vector7::zeros(); m];

    for i in 0..7 {
        let name = STATE_NAMES[i];
        let drift_pin = spec.drift_pins.iter().find(|p| p.0 == i).map(|p| p.1);
        let level_pin = spec.level_pins.iter().find(|p| p.0 == i).map(|p| p.1);
        let cols: Vec<usize> = (0..7).filter(|&j| spec.mask[i][j]).collect();
        let intercept = drift_pin.is_none() && level_pin.is_none();
        let k = cols.len() + usize::from(intercept);
        if m < k + 3 {
            return Err(Error::Estimation(format!(
                "equation {name}: {m} transitions for {k} free coefficients (need at least {})",
                k + 3
            )));
        }
        let shift = level_pin.unwrap_or(0.0);
        let mut x = DMatrix::<f64>::zeros(m, k);
        let mut y = DVector::<f64>::zeros(m);
        for t in 0..m {
            let prev = series[t].to_array();
            let curr = series[t + 1].to_array();
            y[t] = curr[i] - prev[i] - drift_pin.unwrap_or(0.0);
            for (c, &j) in cols.iter().enumerate() {
                x[(t, c)] = prev[j] - if j == i { shift } else { 0.0 };
            }
            if intercept {
                x[(t, k - 1)] = 1.0;
            }
        }
        let coef = if k == 0 {
            DVector::zeros(0)
        } else {
            let svd = x.clone().svd(true, true);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if !(smin > RANK_TOL * smax) {
                return Err(Error::Estimation(format!(
                    "equation {name}: regressors are rank deficient (singular values {smin:e} / {smax:e})"
                )));
            }
            svd.solve(&y, 0.0).map_err(|e| Error::Estimation(format!("equation {name}: {e}")))?
        };
        for (c, &j) in cols.iter().enumerate() {
            a[(i, j)] = coef[c];
        }
        b[i] = match (drift_pin, level_pin) {
            (Some(v), _) => v,
            (None, Some(level)) => -a[(i, i)] * level,
            (None, None) => coef[k - 1],
        };
        let fitted = &x * &coef;
        for t in 0..m {
            residuals[t][i] = y[t] - fitted[t];
        }
    }

    let mean = residuals.iter().fold(Vector7::zeros(), |acc, r| acc + r) / m as f64;
    let mut cov = Matrix7::zeros();
    for r in &residuals {
        let d = r - mean;
        cov += d * d.transpose();
    }
    cov /= (m - 1) as f64;
    let (params, adjustment) = EconomyParams::regularized(a, b, cov, spec.duration, 1.0, spec.yield_unit)?;
    Ok(VarFit {
        params,
        adjustment,
        residuals,
    })
}
