//! Wealth recursion, acceptability and the minimal-capital search.
//!
//! Along one scenario terminal wealth is affine in the initial capital,
//! `w_T = w0·G − K` with `G = Π R_s` and `K = Σ_t c_t Π_{s>t} R_s`, so a
//! scenario set reduces to its `(G, K)` pairs and every trial `w0` reuses
//! them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{pairwise_mean, pairwise_sum};

/// Default risk aversion of the entropic measure.
pub const DEFAULT_GAMMA: f64 = 0.05;
/// Default bisection tolerance on `w0` (per capita).
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
/// Bracket doublings allowed before the problem is declared unbounded.
pub const MAX_DOUBLINGS: usize = 60;

const MAX_POLISH: usize = 50;

/// Acceptability criterion for terminal wealth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RiskSpec {
    /// `ρ(X) = (1/γ) log E[exp(−γX)]`.
    Entropic { gamma: f64 },
    /// `ρ(X) = −E[X]`, so acceptability means `E[X] ≥ 0`.
    RiskNeutral,
}

impl RiskSpec {
    pub fn entropic(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(RiskSpec::Entropic { gamma })
    }

    pub fn name(&self) -> &'static str {
        match self {
            RiskSpec::Entropic { .. } => "entropic",
            RiskSpec::RiskNeutral => "neutral",
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            RiskSpec::Entropic { gamma } => Some(*gamma),
            RiskSpec::RiskNeutral => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RiskSpec::Entropic { gamma } => check_gamma(*gamma),
            RiskSpec::RiskNeutral => Ok(()),
        }
    }

    /// Risk of the sample distribution; acceptable iff `≤ 0`.
    pub fn risk(&self, samples: &[f64]) -> Result<f64> {
        match *self {
            RiskSpec::Entropic { gamma } => entropic_rho(samples, gamma),
            RiskSpec::RiskNeutral => {
                check_samples(samples)?;
                Ok(-pairwise_mean(samples))
            }
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("risk aversion must be positive, got {gamma}")))
    }
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Parameter("no samples".into()));
    }
    if let Some(x) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::Parameter(format!("non-finite sample {x}")));
    }
    Ok(())
}

/// `w_T` from `w_t = R_t·w_{t−1} − c_t`.
pub fn terminal_wealth(w0: f64, returns: &[f64], claims: &[f64]) -> Result<f64> {
    if returns.len() != claims.len() {
        return Err(Error::Shape(format!("{} returns for {} claims", returns.len(), claims.len())));
    }
    Ok(returns.iter().zip(claims).fold(w0, |w, (r, c)| r * w - c))
}

/// Entropic risk of equally weighted samples, computed with a max shift so
/// `exp` never overflows.
pub fn entropic_rho(samples: &[f64], gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    check_samples(samples)?;
    let shift = samples.iter().map(|x| -gamma * x).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = samples.iter().map(|x| (-gamma * x - shift).exp()).collect();
    let mean = pairwise_sum(&weights) / samples.len() as f64;
    Ok((shift + mean.ln()) / gamma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acceptance {
    pub acceptable: bool,
    pub risk: f64,
}

pub fn acceptable(samples: &[f64], spec: &RiskSpec) -> Result<Acceptance> {
    let risk = spec.risk(samples)?;
    Ok(Acceptance {
        acceptable: risk <= 0.0,
        risk,
    })
}

/// Sufficient statistics of one scenario: `w_T = w0·growth − claims_value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WealthProfile {
    /// `Π_{s=1..T} R_s`.
    pub growth: f64,
    /// `Σ_t c_t Π_{s=t+1..T} R_s`.
    pub claims_value: f64,
}

impl WealthProfile {
    pub fn new(returns: &[f64], claims: &[f64]) -> Result<Self> {
        if returns.len() != claims.len() {
            return Err(Error::Shape(format!("{} returns for {} claims", returns.len(), claims.len())));
        }
        if let Some(r) = returns.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::Parameter(format!("gross return {r} is not positive")));
        }
        let mut growth = 1.0;
        let mut value = 0.0;
        for (r, c) in returns.iter().zip(claims) {
            growth *= r;
            value = value * r + c;
        }
        Ok(WealthProfile {
            growth,
            claims_value: value,
        })
    }

    pub fn terminal_wealth(&self, w0: f64) -> f64 {
        w0 * self.growth - self.claims_value
    }
}

/// One scenario's return and claim paths.
#[derive(Debug, Clone, PartialEq)]
pub struct CashflowPath {
    pub returns: Vec<f64>,
    pub claims: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_doublings: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOLERANCE,
            max_doublings: MAX_DOUBLINGS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValuationResult {
    /// Initial capital for the whole plan.
    pub w0: f64,
    pub w0_per_capita: f64,
    /// Risk of per-capita terminal wealth at the solution.
    pub risk_at_solution: f64,
    /// Risk evaluations spent by the search.
    pub iterations: usize,
    /// Monte Carlo standard error of the risk at the solution.
    pub risk_stderr: f64,
    /// Standard error of `w0_per_capita`: `risk_stderr` over `|∂ρ/∂w0|`.
    pub stderr: f64,
    /// Final bisection bracket, per capita.
    pub bracket: (f64, f64),
}

impl ValuationResult {
    /// Scale a per-capita result to a plan of `headcount` members.
    pub fn with_headcount(mut self, headcount: f64) -> Self {
        self.w0 = self.w0_per_capita * headcount;
        self
    }
}

/// Risk of `w0·G − K`, its derivative in `w0`, and its standard error.
struct Evaluation {
    risk: f64,
    slope: f64,
    stderr: f64,
}

fn evaluate(profiles: &[WealthProfile], spec: &RiskSpec, w0: f64) -> Evaluation {
    let n = profiles.len() as f64;
    match *spec {
        RiskSpec::RiskNeutral => {
            let wealth: Vec<f64> = profiles.par_iter().map(|p| p.terminal_wealth(w0)).collect();
            let growth: Vec<f64> = profiles.par_iter().map(|p| p.growth).collect();
            let mean = pairwise_mean(&wealth);
            let dev: Vec<f64> = wealth.par_iter().map(|w| (w - mean) * (w - mean)).collect();
            let var = if profiles.len() > 1 { pairwise_sum(&dev) / (n - 1.0) } else { 0.0 };
            Evaluation {
                risk: -mean,
                slope: -pairwise_mean(&growth),
                stderr: (var / n).sqrt(),
            }
        }
        RiskSpec::Entropic { gamma } => {
            let exponent: Vec<f64> = profiles.par_iter().map(|p| -gamma * p.terminal_wealth(w0)).collect();
            let shift = exponent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: Vec<f64> = exponent.par_iter().map(|e| (e - shift).exp()).collect();
            let zg: Vec<f64> = z.par_iter().zip(profiles.par_iter()).map(|(z, p)| z * p.growth).collect();
            let zsum = pairwise_sum(&z);
            let mean = zsum / n;
            let dev: Vec<f64> = z.par_iter().map(|x| (x - mean) * (x - mean)).collect();
            let var = if profiles.len() > 1 { pairwise_sum(&dev) / (n - 1.0) } else { 0.0 };
            Evaluation {
                risk: (shift + mean.ln()) / gamma,
                slope: -pairwise_sum(&zg) / zsum,
                stderr: var.sqrt() / (gamma * mean * n.sqrt()),
            }
        }
    }
}

fn check_profiles(profiles: &[WealthProfile]) -> Result<()> {
    if profiles.is_empty() {
        return Err(Error::Parameter("no scenarios".into()));
    }
    if let Some(p) = profiles
        .iter()
        .find(|p| !(p.growth.is_finite() && p.growth > 0.0 && p.claims_value.is_finite()))
    {
        return Err(Error::Parameter(format!("invalid wealth profile {p:?}")));
    }
    Ok(())
}

/// Smallest `w0` whose terminal wealth is acceptable under `spec`, on a fixed
/// scenario set.
///
/// The bracket `[0, 4·best estimate]` is doubled until acceptable, bisected to
/// width `tol`, and the root is then refined by Newton steps from the lower
/// end. Risk is convex and decreasing in `w0`, so these steps approach the
/// root monotonically from below and stay inside the bracket.
pub fn solve_min_capital(profiles: &[WealthProfile], spec: &RiskSpec, opts: SolverOptions) -> Result<ValuationResult> {
    spec.validate()?;
    check_profiles(profiles)?;
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(Error::Parameter(format!("solver tolerance must be positive, got {}", opts.tol)));
    }
    let mut iterations = 1;
    let at_zero = evaluate(profiles, spec, 0.0);
    if at_zero.risk <= 0.0 {
        return Ok(finish(0.0, at_zero, (0.0, 0.0), iterations));
    }

    let mean_growth = pairwise_mean(&profiles.iter().map(|p| p.growth).collect::<Vec<_>>());
    let mean_value = pairwise_mean(&profiles.iter().map(|p| p.claims_value).collect::<Vec<_>>());
    let mut hi = 4.0 * mean_value / mean_growth;
    if !(hi.is_finite() && hi > 0.0) {
        hi = 1.0;
    }
    let mut lo = 0.0;
    let mut lo_eval = at_zero;
    let mut doublings = 0;
    loop {
        iterations += 1;
        let e = evaluate(profiles, spec, hi);
        if e.risk <= 0.0 {
            break;
        }
        lo = hi;
        lo_eval = e;
        if doublings == opts.max_doublings {
            return Err(Error::Unbounded { w0: hi, doublings });
        }
        hi *= 2.0;
        doublings += 1;
    }

    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let e = evaluate(profiles, spec, mid);
        if e.risk <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            lo_eval = e;
        }
    }

    let mut w = lo;
    let mut e = lo_eval;
    for _ in 0..MAX_POLISH {
        if e.risk == 0.0 || !(e.slope < 0.0) {
            break;
        }
        let next = (w - e.risk / e.slope).clamp(lo, hi);
        if next == w {
            break;
        }
        iterations += 1;
        let ne = evaluate(profiles, spec, next);
        if ne.risk.abs() >= e.risk.abs() {
            break;
        }
        w = next;
        e = ne;
    }
    Ok(finish(w, e, (lo, hi), iterations))
}

fn finish(w0: f64, e: Evaluation, bracket: (f64, f64), iterations: usize) -> ValuationResult {
    let stderr = if e.slope < 0.0 { e.stderr / -e.slope } else { f64::NAN };
    ValuationResult {
        w0,
        w0_per_capita: w0,
        risk_at_solution: e.risk,
        iterations,
        risk_stderr: e.stderr,
        stderr,
        bracket,
    }
}

/// `Σ_t E[c_t Π_{s>t} R_s] / E[Π_s R_s]`, the capital making expected
/// terminal wealth zero.
pub fn risk_neutral_value(profiles: &[WealthProfile]) -> Result<f64> {
    check_profiles(profiles)?;
    let g: Vec<f64> = profiles.iter().map(|p| p.growth).collect();
    let k: Vec<f64> = profiles.iter().map(|p| p.claims_value).collect();
    Ok(pairwise_mean(&k) / pairwise_mean(&g))
}

/// Delta-method standard error of [`risk_neutral_value`].
pub fn risk_neutral_stderr(profiles: &[WealthProfile]) -> Result<f64> {
    let r = risk_neutral_value(profiles)?;
    let n = profiles.len() as f64;
    if profiles.len() < 2 {
        return Ok(0.0);
    }
    let g: Vec<f64> = profiles.iter().map(|p| p.growth).collect();
    let resid: Vec<f64> = profiles.iter().map(|p| p.claims_value - r * p.growth).collect();
    let mean = pairwise_mean(&resid);
    let dev: Vec<f64> = resid.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    Ok(var.sqrt() / (pairwise_mean(&g) * n.sqrt()))
}

/// Expected claims discounted by expected returns:
/// `Σ_t E[c_t] / Π_{s≤t} E[R_s]`.
pub fn best_estimate_value(paths: &[CashflowPath]) -> Result<f64> {
    let first = paths.first().ok_or_else(|| Error::Parameter("no scenarios".into()))?;
    let horizon = first.returns.len();
    if let Some(p) = paths.iter().find(|p| p.returns.len() != horizon || p.claims.len() != horizon) {
        return Err(Error::Shape(format!(
            "paths of unequal length: {} returns and {} claims, expected {horizon}",
            p.returns.len(),
            p.claims.len()
        )));
    }
    let mean_returns: Vec<f64> = (0..horizon)
        .map(|t| pairwise_mean(&paths.iter().map(|p| p.returns[t]).collect::<Vec<_>>()))
        .collect();
    let mean_claims: Vec<f64> = (0..horizon)
        .map(|t| pairwise_mean(&paths.iter().map(|p| p.claims[t]).collect::<Vec<_>>()))
        .collect();
    best_estimate_from_means(&mean_returns, &mean_claims)
}

/// [`best_estimate_value`] from per-period means already computed.
pub fn best_estimate_from_means(mean_returns: &[f64], mean_claims: &[f64]) -> Result<f64> {
    if mean_returns.len() != mean_claims.len() {
        return Err(Error::Shape(format!(
            "{} mean returns for {} mean claims",
            mean_returns.len(),
            mean_claims.len()
        )));
    }
    let mut discount = 1.0;
    let mut value = 0.0;
    for (r, c) in mean_returns.iter().zip(mean_claims) {
        discount *= r;
        value += c / discount;
    }
    Ok(value)
}
