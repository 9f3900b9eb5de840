//! Gaussian innovations, optionally Latin-hypercube stratified.
//!
//! In LHS mode every scalar coordinate (one per period and factor) gets its own
//! pseudo-random permutation of the `N` equal-probability strata. The
//! permutation is a keyed Feistel network with cycle walking, so the stratum of
//! scenario `i` is computed directly from `i` and no permutation table of size
//! `N` is ever stored. Within its stratum a point is placed uniformly at random
//! using the scenario's own stream.

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::params::{EconomyParams, Matrix7, Vector7};
use crate::error::{Error, Result};
use crate::rng::{key, mix64, stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    #[default]
    Lhs,
    Plain,
}

const ONE_MINUS: f64 = 1.0 - f64::EPSILON / 2.0;
const FEISTEL_ROUNDS: usize = 4;

/// A pseudo-random bijection of `[0, n)`.
#[derive(Debug, Clone)]
pub struct StratumPermutation {
    n: u64,
    half_bits: u32,
    mask: u64,
    round_keys: [u64; FEISTEL_ROUNDS],
}

impl StratumPermutation {
    pub fn new(n: u64, key: u64) -> Self {
        assert!(n >= 1);
        let bits = 64 - (n - 1).leading_zeros();
        let half_bits = bits.div_ceil(2).max(1);
        let mut round_keys = [0u64; FEISTEL_ROUNDS];
        let mut k = key;
        for rk in &mut round_keys {
            k = mix64(k);
            *rk = k;
        }
        StratumPermutation {
            n,
            half_bits,
            mask: (1u64 << half_bits) - 1,
            round_keys,
        }
    }

    fn encrypt(&self, x: u64) -> u64 {
        let mut left = x >> self.half_bits;
        let mut right = x & self.mask;
        for &rk in &self.round_keys {
            let next = left ^ (mix64(right ^ rk) & self.mask);
            left = right;
            right = next;
        }
        (left << self.half_bits) | right
    }

    pub fn apply(&self, i: u64) -> u64 {
        debug_assert!(i < self.n);
        let mut x = self.encrypt(i);
        while x >= self.n {
            x = self.encrypt(x);
        }
        x
    }
}

/// Produces the innovations of any one scenario on demand.
#[derive(Debug, Clone)]
pub struct InnovationSampler {
    n: usize,
    horizon: usize,
    seed: u64,
    mode: SamplingMode,
    chol: Matrix7,
    permutations: Vec<StratumPermutation>,
    normal: Normal,
}

impl InnovationSampler {
    pub fn new(n: usize, horizon: usize, params: &EconomyParams, seed: u64, mode: SamplingMode) -> Result<Self> {
        if n == 0 || horizon == 0 {
            return Err(Error::Parameter(format!(
                "need at least one scenario and one period, got N={n}, T={horizon}"
            )));
        }
        let permutations = match mode {
            SamplingMode::Lhs => {
                let base = key(seed, Purpose::Permutation);
                (0..horizon * 7)
                    .map(|c| StratumPermutation::new(n as u64, base ^ mix64(c as u64)))
                    .collect()
            }
            SamplingMode::Plain => Vec::new(),
        };
        Ok(InnovationSampler {
            n,
            horizon,
            seed,
            mode,
            chol: *params.cholesky(),
            permutations,
            normal: Normal::standard(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    /// Stratified uniforms of scenario `i`, coordinate `t * 7 + k` for period
    /// `t + 1` and factor `k`. LHS mode only.
    pub fn uniforms(&self, i: usize) -> Vec<f64> {
        assert_eq!(self.mode, SamplingMode::Lhs);
        let mut rng = stream(self.seed, Purpose::Innovations, i as u64);
        let nf = self.n as f64;
        self.permutations
            .iter()
            .map(|perm| {
                let jitter: f64 = rng.sample(Open01);
                ((perm.apply(i as u64) as f64 + jitter) / nf).min(ONE_MINUS)
            })
            .collect()
    }

    /// Uncorrelated standard normal draws of scenario `i`, one 7-vector per period.
    pub fn standard_normals(&self, i: usize) -> Vec<Vector7> {
        let flat: Vec<f64> = match self.mode {
            SamplingMode::Lhs => self.uniforms(i).into_iter().map(|u| self.normal.inverse_cdf(u)).collect(),
            SamplingMode::Plain => {
                let mut rng = stream(self.seed, Purpose::Innovations, i as u64);
                (0..self.horizon * 7).map(|_| rng.sample(StandardNormal)).collect()
            }
        };
        flat.chunks_exact(7).map(Vector7::from_column_slice).collect()
    }

    /// Correlated innovations `ε_1..ε_T` of scenario `i`.
    pub fn innovations(&self, i: usize) -> Vec<Vector7> {
        self.standard_normals(i).into_iter().map(|z| self.chol * z).collect()
    }
}

/// All innovations of an `N × T` scenario set.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationBlock {
    pub n: usize,
    pub horizon: usize,
    pub seed: u64,
    pub mode: SamplingMode,
    data: Vec<Vector7>,
}

impl InnovationBlock {
    /// Innovation of scenario `i` in period `t` (1-based).
    pub fn get(&self, i: usize, t: usize) -> &Vector7 {
        &self.data[i * self.horizon + (t - 1)]
    }

    pub fn scenario(&self, i: usize) -> &[Vector7] {
        &self.data[i * self.horizon..(i + 1) * self.horizon]
    }
}

pub fn sample_innovations(
    n: usize,
    horizon: usize,
    params: &EconomyParams,
    seed: u64,
    mode: SamplingMode,
) -> Result<InnovationBlock> {
    let sampler = InnovationSampler::new(n, horizon, params, seed, mode)?;
    let data = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| sampler.innovations(i))
        .collect();
    Ok(InnovationBlock {
        n,
        horizon,
        seed,
        mode,
        data,
    })
}
