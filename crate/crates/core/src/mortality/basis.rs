use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_AGE: u32 = 18;
pub const MAX_AGE: u32 = 100;

/// A family of continuous piecewise-linear functions of age on `[18, 100]`.
///
/// All functions share one knot grid; function `i` is the linear interpolant
/// of `values[i]` at those knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    knots: Vec<f64>,
    values: Vec<Vec<f64>>,
    names: Vec<String>,
}

impl Default for BasisSet {
    /// Three hat functions with knots at ages 18, 50 and 100, so that the
    /// coefficients are the logits of survival at exactly those ages.
    fn default() -> Self {
        BasisSet {
            knots: vec![18.0, 50.0, 100.0],
            values: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            names: vec!["phi1".into(), "phi2".into(), "phi3".into()],
        }
    }
}

impl BasisSet {
    pub fn new(knots: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let names = (1..=values.len()).map(|i| format!("phi{i}")).collect();
        Self::with_names(knots, values, names)
    }

    pub fn with_names(knots: Vec<f64>, values: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Parameter("basis needs at least two knots".into()));
        }
        if knots[0] != MIN_AGE as f64 || knots[knots.len() - 1] != MAX_AGE as f64 {
            return Err(Error::Parameter(format!(
                "basis knots must span [{MIN_AGE}, {MAX_AGE}], got [{}, {}]",
                knots[0],
                knots[knots.len() - 1]
            )));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Parameter("basis knots must be strictly increasing".into()));
        }
        if values.is_empty() || names.len() != values.len() {
            return Err(Error::Parameter("basis needs one name per function and at least one function".into()));
        }
        if let Some(i) = values.iter().position(|v| v.len() != knots.len() || v.iter().any(|x| !x.is_finite())) {
            return Err(Error::Parameter(format!(
                "basis function {} needs {} finite knot values",
                names[i],
                knots.len()
            )));
        }
        Ok(BasisSet { knots, values, names })
    }

    /// Keep only the functions at `indices` (0-based), preserving their names.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len());
        let mut names = Vec::with_capacity(indices.len());
        for &i in indices {
            let v = self
                .values
                .get(i)
                .ok_or_else(|| Error::Parameter(format!("basis has no function with index {i}")))?;
            values.push(v.clone());
            names.push(self.names[i].clone());
        }
        Self::with_names(self.knots.clone(), values, names)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn knot_values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn check_age(age: u32) -> Result<()> {
        if (MIN_AGE..=MAX_AGE).contains(&age) {
            Ok(())
        } else {
            Err(Error::AgeOutOfRange {
                age,
                min: MIN_AGE,
                max: MAX_AGE,
            })
        }
    }

    /// `(φ¹(age), …, φⁿ(age))`.
    pub fn eval(&self, age: u32) -> Result<Vec<f64>> {
        Self::check_age(age)?;
        let x = age as f64;
        // segment k covers [knots[k], knots[k+1]]
        let k = self.knots.windows(2).position(|w| x <= w[1]).unwrap_or(self.knots.len() - 2);
        let (x0, x1) = (self.knots[k], self.knots[k + 1]);
        let w = (x - x0) / (x1 - x0);
        Ok(self
            .values
            .iter()
            .map(|v| if w == 0.0 { v[k] } else if w == 1.0 { v[k + 1] } else { v[k] + w * (v[k + 1] - v[k]) })
            .collect())
    }

    /// Integer ages on which function `i` is strictly positive.
    pub fn support(&self, i: usize) -> Vec<u32> {
        (MIN_AGE..=MAX_AGE)
            .filter(|&a| self.eval(a).map(|phi| phi[i] > 0.0).unwrap_or(false))
            .collect()
    }
}
