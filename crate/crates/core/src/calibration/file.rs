use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CovarianceAdjustment;
use crate::mortality::BasisSet;
use crate::scenario::{EconomyParams, Matrix7, StateVector, Vector7, YieldUnit};

/// Everything needed to generate scenarios, as written by calibration and
/// read by the experiment drivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterFile {
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub yield_unit: YieldUnit,
    /// Rows of `A`.
    pub a: [[f64; 7]; 7],
    pub b: [f64; 7],
    /// Rows of `Σ`.
    pub sigma: [[f64; 7]; 7],
    pub x0: StateVector,
    #[serde(default)]
    pub basis: BasisSet,
}

fn default_duration() -> f64 {
    1.0
}

fn default_dt() -> f64 {
    1.0
}

fn rows(m: &Matrix7) -> [[f64; 7]; 7] {
    let mut out = [[0.0; 7]; 7];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = m[(i, j)];
        }
    }
    out
}

fn matrix(rows: &[[f64; 7]; 7]) -> Matrix7 {
    Matrix7::from_fn(|i, j| rows[i][j])
}

impl ParameterFile {
    pub fn new(params: &EconomyParams, x0: StateVector, basis: BasisSet) -> Self {
        let b = params.b();
        ParameterFile {
            duration: params.duration(),
            dt: params.dt(),
            yield_unit: params.yield_unit(),
            a: rows(params.a()),
            b: [b[0], b[1], b[2], b[3], b[4], b[5], b[6]],
            sigma: rows(params.sigma()),
            x0,
            basis,
        }
    }

    /// Build the model; a covariance that is asymmetric or slightly
    /// indefinite from rounding is repaired and the repair reported.
    pub fn economy(&self) -> Result<(EconomyParams, CovarianceAdjustment)> {
        EconomyParams::regularized(
            matrix(&self.a),
            Vector7::from_column_slice(&self.b),
            matrix(&self.sigma),
            self.duration,
            self.dt,
            self.yield_unit,
        )
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("parameter file", e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ParameterFile = toml::from_str(text).map_err(|e| Error::config("parameter file", e.to_string()))?;
        BasisSet::with_names(
            file.basis.knots().to_vec(),
            file.basis.knot_values().to_vec(),
            (0..file.basis.len()).map(|i| file.basis.name(i).to_owned()).collect(),
        )?;
        if !file.x0.is_finite() {
            return Err(Error::config("x0", "entries must be finite"));
        }
        Ok(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config { field, message } => Error::Config {
                field: format!("{}: {field}", path.display()),
                message,
            },
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }
}
