use nalgebra::{SMatrix, SVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::state::{StateVector, P, Y};
use crate::error::{Error, Result};
use crate::linalg::{psd_cholesky, regularize_covariance, CovarianceAdjustment};

pub type Matrix7 = SMatrix<f64, 7, 7>;
pub type Vector7 = SVector<f64, 7>;

/// How the exponentiated log-yield is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum YieldUnit {
    /// `exp(y)` is a yield in percent (2.5 means 2.5%).
    #[default]
    Percent,
    /// `exp(y)` is a yield as a decimal fraction.
    Decimal,
}

impl YieldUnit {
    pub fn to_decimal(self, yield_level: f64) -> f64 {
        match self {
            YieldUnit::Percent => yield_level / 100.0,
            YieldUnit::Decimal => yield_level,
        }
    }
}

/// Coefficients of `Δx_t = A x_{t−1} + b + ε_t`, `ε_t ~ N(0, Σ)`, plus the
/// bond-return conventions.
#[derive(Debug, Clone, PartialEq)]
pub struct EconomyParams {
    a: Matrix7,
    b: Vector7,
    sigma: Matrix7,
    chol: Matrix7,
    duration: f64,
    dt: f64,
    yield_unit: YieldUnit,
}

/// Entries of `A` that are free in the published model: (row, column).
pub const PUBLISHED_A_PATTERN: [(usize, usize); 5] = [(0, 0), (2, 2), (2, 3), (4, 4), (6, 6)];

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

impl EconomyParams {
    /// Strict constructor: `sigma` must already be symmetric (1e-12) and
    /// positive semidefinite (smallest eigenvalue ≥ −1e-10).
    pub fn new(a: Matrix7, b: Vector7, sigma: Matrix7, duration: f64, dt: f64, yield_unit: YieldUnit) -> Result<Self> {
        check_finite("A", a.as_slice())?;
        check_finite("b", b.as_slice())?;
        check_finite("Sigma", sigma.as_slice())?;
        let asym = (sigma - sigma.transpose()).abs().max();
        if asym > SYMMETRY_TOL {
            return Err(Error::Parameter(format!("Sigma is not symmetric (max asymmetry {asym:e})")));
        }
        let min_eig = SymmetricEigen::new(sigma).eigenvalues.min();
        if min_eig < -PSD_TOL {
            return Err(Error::Parameter(format!(
                "Sigma is not positive semidefinite (smallest eigenvalue {min_eig:e})"
            )));
        }
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(Error::Parameter(format!("bond duration must be nonnegative, got {duration}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
        }
        let chol = psd_cholesky(&sigma, 1e-12)
            .ok_or_else(|| Error::Parameter("Sigma has no semidefinite Cholesky factor".into()))?;
        Ok(EconomyParams {
            a,
            b,
            sigma,
            chol,
            duration,
            dt,
            yield_unit,
        })
    }

    /// Symmetrise and PSD-project a raw covariance (such as one transcribed
    /// from a rounded table), then construct.
    pub fn regularized(
        a: Matrix7,
        b: Vector7,
        raw_sigma: Matrix7,
        duration: f64,
        dt: f64,
        yield_unit: YieldUnit,
    ) -> Result<(Self, CovarianceAdjustment)> {
        check_finite("Sigma", raw_sigma.as_slice())?;
        let (sigma, adj) = regularize_covariance(&raw_sigma).map_err(|lambda| {
            Error::Parameter(format!(
                "Sigma is not a covariance matrix up to rounding (eigenvalue {lambda:e} after symmetrisation)"
            ))
        })?;
        Ok((Self::new(a, b, sigma, duration, dt, yield_unit)?, adj))
    }

    /// The published US female mortality / US market calibration, with
    /// `D = 1` year, annual steps and percent yields.
    pub fn published() -> (Self, CovarianceAdjustment) {
        Self::regularized(published_a(), published_b(), published_sigma_raw(), 1.0, 1.0, YieldUnit::Percent)
            .expect("published parameters are valid")
    }

    pub fn a(&self) -> &Matrix7 {
        &self.a
    }

    pub fn b(&self) -> &Vector7 {
        &self.b
    }

    pub fn sigma(&self) -> &Matrix7 {
        &self.sigma
    }

    /// Lower factor `L` with `L Lᵀ = Σ`.
    pub fn cholesky(&self) -> &Matrix7 {
        &self.chol
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn yield_unit(&self) -> YieldUnit {
        self.yield_unit
    }

    pub fn with_b(mut self, i: usize, value: f64) -> Result<Self> {
        if i >= 7 || !value.is_finite() {
            return Err(Error::Parameter(format!("cannot set b[{i}] = {value}")));
        }
        self.b[i] = value;
        Ok(self)
    }

    pub fn with_duration(mut self, duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(Error::Parameter(format!("bond duration must be nonnegative, got {duration}")));
        }
        self.duration = duration;
        Ok(self)
    }

    pub fn with_yield_unit(mut self, unit: YieldUnit) -> Self {
        self.yield_unit = unit;
        self
    }

    pub fn with_sigma(self, sigma: Matrix7) -> Result<Self> {
        Self::new(self.a, self.b, sigma, self.duration, self.dt, self.yield_unit)
    }

    /// Set the CPI drift so that the one-period log inflation reverts to
    /// `level` (`b⁷ = −a⁷⁷ · level`).
    pub fn with_inflation_level(self, level: f64) -> Result<Self> {
        let a77 = self.a[(P, P)];
        if a77 == 0.0 {
            return Err(Error::Parameter("CPI equation has no mean reversion; cannot pin its level".into()));
        }
        self.with_b(P, -a77 * level)
    }

    /// Mean-reversion level `−bᵢ/aᵢᵢ` of a coordinate whose equation has no
    /// cross terms, or `None` for a random walk.
    pub fn reversion_level(&self, i: usize) -> Option<f64> {
        let aii = self.a[(i, i)];
        (aii != 0.0).then(|| -self.b[i] / aii)
    }

    /// Stationary log-yield implied by the short-rate equation.
    pub fn stationary_log_yield(&self) -> Option<f64> {
        self.reversion_level(Y)
    }

    pub fn step(&self, x: &StateVector, eps: &Vector7) -> StateVector {
        step_state(x, self, eps)
    }
}

/// `x' = x + A x + b + ε`.
pub fn step_state(x: &StateVector, params: &EconomyParams, eps: &Vector7) -> StateVector {
    let v = x.to_vector();
    StateVector::from_vector(&(v + params.a * v + params.b + eps))
}

fn check_finite(name: &str, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} has non-finite entries")))
    }
}

pub fn published_a() -> Matrix7 {
    let mut a = Matrix7::zeros();
    a[(0, 0)] = -0.0302;
    a[(2, 2)] = -0.181;
    a[(2, 3)] = 0.0831;
    a[(4, 4)] = -0.209;
    a[(6, 6)] = -0.192;
    a
}

pub fn published_b() -> Vector7 {
    Vector7::from_column_slice(&[0.243, 0.0139, -0.673, 0.0201, 0.192, 0.0583, 0.038])
}

/// Innovation covariance exactly as tabulated; slightly asymmetric.
#[rustfmt::skip]
pub fn published_sigma_raw() -> Matrix7 {
    Matrix7::from_row_slice(&[
        0.0027,  0.0007,  0.0014, -0.0004,  0.0002,  0.0024,  0.0003,
        0.0007,  0.0006,  0.0004, -0.0000,  0.0014,  0.0010,  0.0001,
        0.0014,  0.0004,  0.0032, -0.0004, -0.0014,  0.0000,  0.0003,
       -0.0004, -0.0000, -0.0004,  0.0005,  0.0031, -0.0004,  0.0001,
        0.0002,  0.0014, -0.0014,  0.0031,  0.0947,  0.0011,  0.0035,
        0.0024,  0.0010,  0.0000, -0.0004,  0.0011,  0.0246, -0.0010,
        0.0000,  0.0001,  0.0001,  0.0001,  0.0002,  0.0005,  0.0002,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_sigma_is_symmetrised_not_clipped() {
        let (p, adj) = EconomyParams::published();
        assert_eq!(p.sigma(), &p.sigma().transpose());
        assert!((adj.max_asymmetry - 0.0033).abs() < 1e-12);
        assert!(adj.clipped.is_empty());
        assert!(adj.eigenvalues[0] > 0.0);
        let l = p.cholesky();
        assert!((l * l.transpose() - p.sigma()).norm() < 1e-15);
    }

    #[test]
    fn published_zero_pattern() {
        let (p, _) = EconomyParams::published();
        for i in 0..7 {
            for j in 0..7 {
                let free = PUBLISHED_A_PATTERN.contains(&(i, j));
                assert_eq!(p.a()[(i, j)] != 0.0, free, "({i},{j})");
            }
        }
    }

    #[test]
    fn stationary_yield_is_two_and_a_half_percent() {
        let (p, _) = EconomyParams::published();
        let y = p.stationary_log_yield().unwrap();
        assert!((y - 0.192 / 0.209).abs() < 1e-15);
        assert!((y - 0.9187).abs() < 1e-4);
        assert!((y.exp() - 2.5).abs() < 0.01);
    }

    #[test]
    fn printed_cpi_level_is_near_twenty_percent() {
        let (p, _) = EconomyParams::published();
        assert!((p.reversion_level(P).unwrap() - 0.198).abs() < 1e-3);
        let p2 = p.with_inflation_level(0.02).unwrap();
        assert!((p2.reversion_level(P).unwrap() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn strict_constructor_rejects_bad_sigma() {
        let a = published_a();
        let b = published_b();
        let raw = published_sigma_raw();
        assert!(EconomyParams::new(a, b, raw, 1.0, 1.0, YieldUnit::Percent).is_err());
        let mut neg = Matrix7::identity();
        neg[(3, 3)] = -1.0;
        assert!(EconomyParams::new(a, b, neg, 1.0, 1.0, YieldUnit::Percent).is_err());
        assert!(EconomyParams::regularized(a, b, neg, 1.0, 1.0, YieldUnit::Percent).is_err());
        assert!(EconomyParams::new(a, b, Matrix7::zeros(), 1.0, 1.0, YieldUnit::Percent).is_ok());
    }
}
