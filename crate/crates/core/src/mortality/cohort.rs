use rand::distr::Open01;
use rand::Rng;
use statrs::function::{beta::beta_reg, gamma::ln_gamma};

use super::{BasisSet, MortalityFactors};
use crate::error::{Error, Result};

/// Largest f64 strictly below one.
const ONE_MINUS: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic function, clamped to the open interval (0, 1).
///
/// Uses the branch that never exponentiates a positive argument, so it is
/// finite for any finite `u`. Saturated results are pulled back inside the
/// interval because a survival probability of exactly 0 or 1 breaks the
/// logit parameterisation.
pub fn sigmoid(u: f64) -> f64 {
    let p = if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, ONE_MINUS)
}

/// `ln(1 + eᵘ)` without overflow.
pub fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

/// Linear predictor `Σᵢ vⁱ φⁱ` for precomputed basis values.
pub fn linear_predictor(v: &[f64], phi: &[f64]) -> f64 {
    v.iter().zip(phi).map(|(a, b)| a * b).sum()
}

/// One-year survival probability of an `age`-year-old under factors `v`.
pub fn survival_prob(v: &MortalityFactors, age: u32, basis: &BasisSet) -> Result<f64> {
    if v.len() != basis.len() {
        return Err(Error::Shape(format!(
            "{} mortality factors for a basis of {} functions",
            v.len(),
            basis.len()
        )));
    }
    let phi = basis.eval(age)?;
    Ok(sigmoid(linear_predictor(v.as_slice(), &phi)))
}

/// Number of members in a cohort: whole people when survivors are sampled,
/// expected people when the deterministic limit is used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Headcount {
    Whole(u64),
    Expected(f64),
}

impl Headcount {
    pub fn value(self) -> f64 {
        match self {
            Headcount::Whole(n) => n as f64,
            Headcount::Expected(x) => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortCount {
    pub age: u32,
    pub count: Headcount,
}

impl CohortCount {
    pub fn whole(age: u32, count: u64) -> Self {
        CohortCount {
            age,
            count: Headcount::Whole(count),
        }
    }

    pub fn expected(age: u32, count: f64) -> Result<Self> {
        if !(count >= 0.0 && count.is_finite()) {
            return Err(Error::Parameter(format!("cohort count must be finite and nonnegative, got {count}")));
        }
        Ok(CohortCount {
            age,
            count: Headcount::Expected(count),
        })
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("survival probability {p} outside [0, 1]")))
    }
}

/// Advance one year with survivors drawn from `Bin(count, p)`.
///
/// Consumes exactly one uniform from `rng` and inverts the binomial CDF at it,
/// so the draw is a monotone function of that uniform. Cohorts of different
/// sizes fed the same stream therefore get coupled (common random number)
/// survivor fluctuations.
pub fn evolve_binomial<R: Rng + ?Sized>(cohort: CohortCount, p: f64, rng: &mut R) -> Result<CohortCount> {
    check_probability(p)?;
    let n = match cohort.count {
        Headcount::Whole(n) => n,
        Headcount::Expected(x) if x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 => x as u64,
        Headcount::Expected(x) => return Err(Error::NonIntegerCount(x)),
    };
    let u: f64 = rng.sample(Open01);
    Ok(CohortCount::whole(cohort.age + 1, binomial_quantile(n, p, u)))
}

/// Advance one year in the large-pool limit: `count · p`.
pub fn evolve_deterministic(cohort: CohortCount, p: f64) -> Result<CohortCount> {
    check_probability(p)?;
    Ok(CohortCount {
        age: cohort.age + 1,
        count: Headcount::Expected(cohort.count.value() * p),
    })
}

/// Sequential search from zero is used while the mean stays below this; the
/// starting mass `(1-p)^n = e^{-np}` is then far from underflow.
const SEQUENTIAL_MEAN_LIMIT: f64 = 500.0;

/// Smallest `k` with `P(Bin(n, p) ≤ k) ≥ u`, for `u ∈ (0, 1)`.
///
/// Exact inversion: a sequential CDF walk for small means, and for large means
/// a walk outward from `⌊np⌋` started from the regularised incomplete beta
/// function, which costs `O(√(np(1-p)))` pmf updates.
pub fn binomial_quantile(n: u64, p: f64, u: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    if p > 0.5 {
        // X = n − Bin(n, 1−p); the reflection keeps the map increasing in u.
        return n - binomial_quantile(n, 1.0 - p, 1.0 - u);
    }
    let nf = n as f64;
    let q = 1.0 - p;
    let ratio = p / q;
    let mean = nf * p;

    if mean < SEQUENTIAL_MEAN_LIMIT {
        let mut pmf = (nf * (-p).ln_1p()).exp();
        let mut cdf = pmf;
        let mut k = 0u64;
        while cdf < u && k < n {
            pmf *= (nf - k as f64) / (k as f64 + 1.0) * ratio;
            k += 1;
            cdf += pmf;
        }
        return k;
    }

    let mut k = mean.floor() as u64;
    let kf = k as f64;
    let mut pmf = (ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0) + kf * p.ln() + (nf - kf) * q.ln()).exp();
    // P(X ≤ k) = I_{1-p}(n - k, k + 1)
    let mut cdf = beta_reg(nf - kf, kf + 1.0, q);
    if cdf >= u {
        while k > 0 && cdf - pmf >= u {
            cdf -= pmf;
            pmf *= k as f64 / ((nf - k as f64 + 1.0) * ratio);
            k -= 1;
        }
    } else {
        while cdf < u && k < n {
            pmf *= (nf - k as f64) / (k as f64 + 1.0) * ratio;
            k += 1;
            cdf += pmf;
        }
    }
    k
}
