//! Estimation of the model from annual data: mortality factors by maximum
//! likelihood year by year, then the linear dynamics by constrained least
//! squares.

mod data;
mod file;
mod var;

pub use data::{
    load_market_csv, load_mortality_csv, read_market_csv, read_mortality_csv, MarketDataset, MarketRow,
    MortalityDataset, MortalityRow,
};
pub use file::ParameterFile;
pub use var::{fit_var, VarFit, VarFitSpec};

use crate::error::{Error, Result};
use crate::mortality::{fit_year_mle, BasisSet, MortalityFactors};
use crate::scenario::StateVector;

/// Gradient-norm tolerance per unit of total exposure; likelihood terms scale
/// with exposure, so an absolute tolerance would be unreachable for large
/// populations.
const TOL_PER_EXPOSURE: f64 = 1e-10;
const MIN_TOL: f64 = 1e-8;

/// Fitted mortality factors of one year.
#[derive(Debug, Clone, PartialEq)]
pub struct YearFactors {
    pub year: i32,
    pub factors: MortalityFactors,
}

/// Maximum-likelihood factors for every year, each started from zero.
pub fn fit_factor_series(data: &MortalityDataset, basis: &BasisSet) -> Result<Vec<YearFactors>> {
    let init = MortalityFactors::new(vec![0.0; basis.len()]);
    data.years()
        .into_iter()
        .map(|year| {
            let at_year = |e: Error| Error::Estimation(format!("year {year}: {e}"));
            let obs = data.observation(year).map_err(at_year)?;
            let exposure: f64 = obs.rows().iter().map(|r| r.exposure as f64).sum();
            let tol = (TOL_PER_EXPOSURE * exposure).max(MIN_TOL);
            let fit = fit_year_mle(&obs, basis, &init, tol).map_err(at_year)?;
            Ok(YearFactors {
                year,
                factors: fit.factors,
            })
        })
        .collect()
}

/// Annual state vectors for the years covered by both data sets, from the
/// second such year on (inflation needs the previous CPI).
///
/// The equity index level is normalised so that `s = 0` in the first
/// returned year; only its increments matter.
pub fn state_series(factors: &[YearFactors], market: &MarketDataset) -> Result<Vec<(i32, StateVector)>> {
    if let Some(f) = factors.iter().find(|f| f.factors.len() != 3) {
        return Err(Error::Shape(format!(
            "year {}: the state vector needs 3 mortality factors, got {}",
            f.year,
            f.factors.len()
        )));
    }
    let mut out = Vec::new();
    let mut s0 = None;
    for f in factors {
        let (Some(m), Some(prev)) = (market.get(f.year), market.get(f.year - 1)) else {
            continue;
        };
        let s_ref = *s0.get_or_insert(m.equity_index.ln());
        let v = f.factors.as_slice();
        out.push((
            f.year,
            StateVector {
                v1: v[0],
                v2: v[1],
                v3: v[2],
                g: m.gdp_per_capita.ln(),
                y: m.bond_yield.ln(),
                s: m.equity_index.ln() - s_ref,
                p: m.cpi.ln() - prev.cpi.ln(),
            },
        ));
    }
    if let Some(w) = out.windows(2).find(|w| w[1].0 != w[0].0 + 1) {
        return Err(Error::Parameter(format!(
            "mortality and market data do not overlap contiguously: {} is followed by {}",
            w[0].0, w[1].0
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
