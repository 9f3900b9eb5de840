use super::params::EconomyParams;
use super::state::StateVector;
use crate::error::{Error, Result};

/// One-period gross return of the bond from log-yields at the start and end
/// of the period: `exp(Y_{t−1}·dt − D·(Y_t − Y_{t−1}))` with `Y = exp(y)`
/// converted to a decimal rate.
pub fn bond_return(y_prev: f64, y_curr: f64, params: &EconomyParams) -> f64 {
    let unit = params.yield_unit();
    let prev = unit.to_decimal(y_prev.exp());
    let curr = unit.to_decimal(y_curr.exp());
    (prev * params.dt() - params.duration() * (curr - prev)).exp()
}

/// Gross return of the total-return index between two log levels.
pub fn equity_return(s_prev: f64, s_curr: f64) -> f64 {
    (s_curr - s_prev).exp()
}

/// `I_t / I_0 = exp(Σ_{u=1..t} p_u)` for `t = 0..=T`.
pub fn index_ratio_path(states: &[StateVector]) -> Vec<f64> {
    let mut out = Vec::with_capacity(states.len());
    let mut cum = 0.0;
    for (t, x) in states.iter().enumerate() {
        if t > 0 {
            cum += x.p;
        }
        out.push(cum.exp());
    }
    out
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Validate long-only weights summing to one.
pub fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::Strategy("no asset weights".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::Strategy(format!("weight {w} is negative or not finite")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Strategy(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

/// Gross return of a portfolio rebalanced to `weights` at the period start.
pub fn portfolio_return(asset_returns: &[f64], weights: &[f64]) -> Result<f64> {
    check_weights(weights)?;
    if asset_returns.len() != weights.len() {
        return Err(Error::Strategy(format!(
            "{} weights for {} assets",
            weights.len(),
            asset_returns.len()
        )));
    }
    Ok(asset_returns.iter().zip(weights).map(|(r, w)| r * w).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::params::YieldUnit;

    #[test]
    fn bond_examples() {
        let (p, _) = EconomyParams::published();
        let flat = bond_return(2.5f64.ln(), 2.5f64.ln(), &p);
        assert!((flat - 0.025f64.exp()).abs() < 1e-15);
        assert!((flat - 1.02532).abs() < 1e-5);
        let rise = bond_return(2.5f64.ln(), 3.0f64.ln(), &p);
        assert!((rise - 0.020f64.exp()).abs() < 1e-14);
        assert!((rise - 1.0202).abs() < 1e-4);

        // zero yield, no change
        let dec = p.clone().with_yield_unit(YieldUnit::Decimal).with_duration(7.0).unwrap();
        assert_eq!(bond_return(f64::NEG_INFINITY, f64::NEG_INFINITY, &dec), 1.0);
        assert!((bond_return(0.03f64.ln(), 0.03f64.ln(), &dec) - 0.03f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn equity_examples() {
        assert_eq!(equity_return(1.0, 1.0), 1.0);
        assert!((equity_return(0.0, 0.0583) - 1.0600).abs() < 1e-4);
        assert!((equity_return(0.0, -0.1) - 0.9048).abs() < 1e-4);
    }

    #[test]
    fn index_examples() {
        let mut s = StateVector::default();
        assert_eq!(index_ratio_path(&[s, s, s]), vec![1.0, 1.0, 1.0]);
        s.p = 0.02;
        let path = index_ratio_path(&[StateVector::default(), s, s]);
        assert_eq!(path[0], 1.0);
        assert!((path[1] - 0.02f64.exp()).abs() < 1e-15);
        assert!((path[2] - 0.04f64.exp()).abs() < 1e-15);
        s.p = -0.01;
        let path = index_ratio_path(&[StateVector { p: 0.5, ..s }, s]);
        assert_eq!(path[0], 1.0);
        assert!((path[1] - 0.99005).abs() < 1e-5);
    }

    #[test]
    fn portfolio_examples() {
        assert_eq!(portfolio_return(&[1.02, 1.10], &[1.0, 0.0]).unwrap(), 1.02);
        assert!((portfolio_return(&[1.02, 1.10], &[0.75, 0.25]).unwrap() - 1.04).abs() < 1e-15);
        assert_eq!(portfolio_return(&[1.07, 1.07], &[0.5, 0.5]).unwrap(), 1.07);
        assert!(portfolio_return(&[1.0, 1.0], &[0.6, 0.6]).is_err());
        assert!(portfolio_return(&[1.0, 1.0], &[1.5, -0.5]).is_err());
        assert!(portfolio_return(&[1.0], &[0.5, 0.5]).is_err());
    }
}
