//! Joint paths of the systematic risk factors and the quantities derived from
//! them: asset returns, the benefit index and survival probabilities.

mod innovations;
mod io;
mod params;
mod returns;
mod state;

pub use innovations::{sample_innovations, InnovationBlock, InnovationSampler, SamplingMode, StratumPermutation};
pub use io::{read_scenarios_csv, write_scenarios_csv};
pub use params::{
    published_a, published_b, published_sigma_raw, step_state, EconomyParams, Matrix7, Vector7, YieldUnit,
    PUBLISHED_A_PATTERN,
};
pub use returns::{bond_return, check_weights, equity_return, index_ratio_path, portfolio_return};
pub use state::{StateVector, G, P, S, STATE_NAMES, V1, V2, V3, Y};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mortality::{linear_predictor, sigmoid, BasisSet};

/// Number of asset classes: bond and equity.
pub const ASSETS: usize = 2;

/// One-year survival probabilities `p_{x,t}` for a set of ages and
/// `t = 0..T−1` (the probability of surviving from `t` to `t+1`).
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalTable {
    ages: Vec<u32>,
    horizon: usize,
    probs: Vec<f64>,
}

impl SurvivalTable {
    /// Table from row-major values: `probs[row * horizon + t]` for the
    /// `row`-th age in increasing order.
    pub fn new(ages: Vec<u32>, horizon: usize, probs: Vec<f64>) -> Result<Self> {
        if !ages.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Shape("survival table ages must be strictly increasing".into()));
        }
        if probs.len() != ages.len() * horizon {
            return Err(Error::Shape(format!(
                "{} probabilities for {} ages over {horizon} years",
                probs.len(),
                ages.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Parameter(format!("survival probability {p} outside [0, 1]")));
        }
        Ok(SurvivalTable { ages, horizon, probs })
    }

    /// The same probability `p` for every age and year.
    pub fn constant(ages: Vec<u32>, horizon: usize, p: f64) -> Result<Self> {
        let n = ages.len() * horizon;
        Self::new(ages, horizon, vec![p; n])
    }

    pub fn get(&self, age: u32, t: usize) -> Option<f64> {
        let row = self.ages.binary_search(&age).ok()?;
        (t < self.horizon).then(|| self.probs[row * self.horizon + t])
    }

    pub fn ages(&self) -> &[u32] {
        &self.ages
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn values(&self) -> &[f64] {
        &self.probs
    }

    fn build(states: &[StateVector], ages: &[u32], phi: &[Vec<f64>]) -> Self {
        let horizon = states.len() - 1;
        let mut probs = Vec::with_capacity(ages.len() * horizon);
        for row in phi {
            for x in &states[..horizon] {
                probs.push(sigmoid(linear_predictor(&x.mortality(), row)));
            }
        }
        SurvivalTable {
            ages: ages.to_vec(),
            horizon,
            probs,
        }
    }
}

/// One sampled path over `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// `x_0..x_T`.
    pub states: Vec<StateVector>,
    /// Bond gross returns for periods `1..=T` (index `t−1`).
    pub bond_returns: Vec<f64>,
    /// Equity gross returns for periods `1..=T` (index `t−1`).
    pub equity_returns: Vec<f64>,
    /// `I_t / I_0` for `t = 0..=T`.
    pub index_ratio: Vec<f64>,
    pub survival: SurvivalTable,
}

impl Scenario {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    /// `(bond, equity)` gross returns over period `t` (1-based).
    pub fn asset_returns(&self, t: usize) -> [f64; ASSETS] {
        [self.bond_returns[t - 1], self.equity_returns[t - 1]]
    }

    /// Assemble a scenario from a state path, deriving everything else.
    pub fn from_states(states: Vec<StateVector>, params: &EconomyParams, basis: &BasisSet, ages: &[u32]) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::Shape("a scenario needs at least two states".into()));
        }
        let ages = normalize_ages(ages)?;
        let phi = ages.iter().map(|&a| basis.eval(a)).collect::<Result<Vec<_>>>()?;
        check_mortality_basis(basis)?;
        Ok(derive(states, params, &ages, &phi))
    }
}

fn normalize_ages(ages: &[u32]) -> Result<Vec<u32>> {
    let mut ages = ages.to_vec();
    ages.sort_unstable();
    ages.dedup();
    for &a in &ages {
        BasisSet::check_age(a)?;
    }
    Ok(ages)
}

fn check_mortality_basis(basis: &BasisSet) -> Result<()> {
    if basis.len() != 3 {
        return Err(Error::Shape(format!(
            "the state vector carries 3 mortality factors but the basis has {} functions",
            basis.len()
        )));
    }
    Ok(())
}

fn derive(states: Vec<StateVector>, params: &EconomyParams, ages: &[u32], phi: &[Vec<f64>]) -> Scenario {
    let bond_returns = states.windows(2).map(|w| bond_return(w[0].y, w[1].y, params)).collect();
    let equity_returns = states.windows(2).map(|w| equity_return(w[0].s, w[1].s)).collect();
    let index_ratio = index_ratio_path(&states);
    let survival = SurvivalTable::build(&states, ages, phi);
    Scenario {
        states,
        bond_returns,
        equity_returns,
        index_ratio,
        survival,
    }
}

/// Builds scenario `i` of a set on demand. Scenario `i` depends only on the
/// master seed and `i`, never on which thread builds it.
#[derive(Debug, Clone)]
pub struct ScenarioGenerator {
    params: EconomyParams,
    x0: StateVector,
    sampler: InnovationSampler,
    ages: Vec<u32>,
    phi: Vec<Vec<f64>>,
}

impl ScenarioGenerator {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: &EconomyParams,
        x0: StateVector,
        n: usize,
        horizon: usize,
        seed: u64,
        mode: SamplingMode,
        basis: &BasisSet,
        ages: &[u32],
    ) -> Result<Self> {
        if !x0.is_finite() {
            return Err(Error::Parameter("initial state has non-finite entries".into()));
        }
        check_mortality_basis(basis)?;
        let ages = normalize_ages(ages)?;
        let phi = ages.iter().map(|&a| basis.eval(a)).collect::<Result<Vec<_>>>()?;
        let sampler = InnovationSampler::new(n, horizon, params, seed, mode)?;
        Ok(ScenarioGenerator {
            params: params.clone(),
            x0,
            sampler,
            ages,
            phi,
        })
    }

    pub fn len(&self) -> usize {
        self.sampler.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sampler.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.sampler.horizon()
    }

    pub fn params(&self) -> &EconomyParams {
        &self.params
    }

    pub fn scenario(&self, i: usize) -> Scenario {
        let eps = self.sampler.innovations(i);
        let mut states = Vec::with_capacity(eps.len() + 1);
        let mut x = self.x0;
        states.push(x);
        for e in &eps {
            x = step_state(&x, &self.params, e);
            states.push(x);
        }
        derive(states, &self.params, &self.ages, &self.phi)
    }
}

/// Materialise `N` scenarios; see [`ScenarioGenerator`] for streaming use.
#[allow(clippy::too_many_arguments)]
pub fn generate_scenarios(
    params: &EconomyParams,
    x0: StateVector,
    n: usize,
    horizon: usize,
    seed: u64,
    mode: SamplingMode,
    basis: &BasisSet,
    ages: &[u32],
) -> Result<Vec<Scenario>> {
    let generator = ScenarioGenerator::new(params, x0, n, horizon, seed, mode, basis, ages)?;
    Ok((0..n).into_par_iter().map(|i| generator.scenario(i)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ages() -> Vec<u32> {
        (65..100).collect()
    }

    #[test]
    fn step_examples() {
        let (p, _) = EconomyParams::published();
        let zero = EconomyParams::new(Matrix7::zeros(), Vector7::zeros(), Matrix7::zeros(), 1.0, 1.0, YieldUnit::Percent).unwrap();
        let x = StateVector::us_2007_estimate();
        assert_eq!(step_state(&x, &zero, &Vector7::zeros()), x);

        let x0 = StateVector::default();
        assert_eq!(step_state(&x0, &p, &Vector7::zeros()).to_vector(), *p.b());

        let mut at_rest = StateVector::us_2007_estimate();
        at_rest.y = p.stationary_log_yield().unwrap();
        let next = step_state(&at_rest, &p, &Vector7::zeros());
        assert!((next.y - at_rest.y).abs() < 1e-15);
    }

    #[test]
    fn yield_contracts_to_its_level() {
        let (p, _) = EconomyParams::published();
        let target = p.stationary_log_yield().unwrap();
        for start in [-3.0, 0.0, 0.9, 2.0, 5.0] {
            let mut x = StateVector { y: start, ..Default::default() };
            let mut gap = (x.y - target).abs();
            for _ in 0..200 {
                x = step_state(&x, &p, &Vector7::zeros());
                let g = (x.y - target).abs();
                assert!(g <= gap);
                gap = g;
            }
            assert!(gap < 1e-6);
        }
    }

    #[test]
    fn deterministic_path_without_noise() {
        let (p, _) = EconomyParams::published();
        let p = p.with_sigma(Matrix7::zeros()).unwrap();
        let b = BasisSet::default();
        let x0 = StateVector::us_2007_estimate();
        let a = generate_scenarios(&p, x0, 1, 35, 1, SamplingMode::Lhs, &b, &ages()).unwrap();
        let c = generate_scenarios(&p, x0, 1, 35, 2, SamplingMode::Plain, &b, &ages()).unwrap();
        assert_eq!(a, c);
        let mut x = x0;
        for t in 1..=35 {
            x = step_state(&x, &p, &Vector7::zeros());
            assert_eq!(a[0].states[t], x);
        }
    }

    #[test]
    fn scenario_invariants() {
        let (p, _) = EconomyParams::published();
        let b = BasisSet::default();
        let set = generate_scenarios(&p, StateVector::us_2007_estimate(), 300, 35, 4, SamplingMode::Lhs, &b, &ages()).unwrap();
        for s in &set {
            assert_eq!(s.index_ratio[0], 1.0);
            assert!(s.bond_returns.iter().chain(&s.equity_returns).all(|&r| r > 0.0));
            assert!(s.survival.values().iter().all(|&q| q > 0.0 && q < 1.0));
            assert_eq!(s.survival.horizon(), 35);
            assert!(s.survival.get(64, 0).is_none());
            assert!(s.survival.get(65, 35).is_none());
        }
    }

    #[test]
    fn survival_table_matches_direct_evaluation() {
        let (p, _) = EconomyParams::published();
        let b = BasisSet::default();
        let s = generate_scenarios(&p, StateVector::us_2007_estimate(), 3, 10, 4, SamplingMode::Plain, &b, &[70, 65]).unwrap();
        for t in 0..10 {
            let v = crate::mortality::MortalityFactors::new(s[2].states[t].mortality().to_vec());
            assert_eq!(s[2].survival.get(70, t).unwrap(), crate::mortality::survival_prob(&v, 70, &b).unwrap());
        }
        assert_eq!(s[2].survival.ages(), &[65, 70]);
    }

    #[test]
    fn mean_equity_log_return() {
        // sample-mean bound 3σ/√(N·T) with σ² = Σ₆₆ = 0.0246
        let (p, _) = EconomyParams::published();
        let b = BasisSet::default();
        let n = 1000;
        let t = 35;
        let set = generate_scenarios(&p, StateVector::us_2007_estimate(), n, t, 8, SamplingMode::Lhs, &b, &[65]).unwrap();
        let total: f64 = set.iter().flat_map(|s| s.equity_returns.iter().map(|r| r.ln())).sum();
        let mean = total / (n * t) as f64;
        let bound = 3.0 * 0.0246f64.sqrt() / ((n * t) as f64).sqrt();
        assert!((mean - 0.0583).abs() < bound, "mean {mean} bound {bound}");
    }

    #[test]
    fn rejects_bad_ages() {
        let (p, _) = EconomyParams::published();
        let b = BasisSet::default();
        assert!(generate_scenarios(&p, StateVector::default(), 1, 1, 0, SamplingMode::Lhs, &b, &[101]).is_err());
    }
}
