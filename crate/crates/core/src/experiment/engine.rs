use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::plan::{portfolio_path, simulate_cashflows, PensionPlan, Strategy};
use crate::rng::{stream, Purpose};
use crate::scenario::ScenarioGenerator;
use crate::sum::pairwise_sum;
use crate::valuation::WealthProfile;

/// Scenarios per work unit. Partial sums are formed per chunk in index order
/// and chunks are combined pairwise, so the reduction tree depends only on
/// the scenario count.
const CHUNK: usize = 256;

/// Per-capita statistics of one plan under one strategy.
#[derive(Debug, Clone)]
pub struct CaseData {
    pub profiles: Vec<WealthProfile>,
    /// `E[R_t]` for `t = 1..T`.
    pub mean_returns: Vec<f64>,
    /// `E[c_t]` per initial member for `t = 1..T`.
    pub mean_claims: Vec<f64>,
}

struct Chunk {
    /// `[plan][strategy][scenario]`
    profiles: Vec<Vec<Vec<WealthProfile>>>,
    /// `[strategy][t]`
    return_sums: Vec<Vec<f64>>,
    /// `[plan][t]`
    claim_sums: Vec<Vec<f64>>,
}

/// Evaluate every plan under every strategy on the same scenarios.
///
/// Scenario `i` is built once and shared by all plans; the survivor draws of
/// every plan use mortality stream `i`, so plans of different sizes see
/// common random numbers. Claims are divided by each plan's initial
/// headcount. The result is indexed `[plan][strategy]`.
pub fn evaluate_plans(
    generator: &ScenarioGenerator,
    seed: u64,
    plans: &[PensionPlan],
    strategies: &[Strategy],
) -> Result<Vec<Vec<CaseData>>> {
    let n = generator.len();
    if n == 0 {
        return Err(Error::Parameter("no scenarios".into()));
    }
    let horizon = plans.first().map(|p| p.horizon()).unwrap_or(0);
    if let Some(p) = plans.iter().find(|p| p.horizon() != horizon || p.horizon() > generator.horizon()) {
        return Err(Error::Shape(format!(
            "plan horizon {} does not match the scenario horizon {}",
            p.horizon(),
            generator.horizon()
        )));
    }
    if let Some(p) = plans.iter().find(|p| p.headcount() == 0) {
        return Err(Error::Parameter(format!("plan with {} members has no one to value", p.headcount())));
    }

    let chunks: Vec<Chunk> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let range = c * CHUNK..((c + 1) * CHUNK).min(n);
            let mut chunk = Chunk {
                profiles: vec![vec![Vec::with_capacity(range.len()); strategies.len()]; plans.len()],
                return_sums: vec![vec![0.0; horizon]; strategies.len()],
                claim_sums: vec![vec![0.0; horizon]; plans.len()],
            };
            for i in range {
                let scenario = generator.scenario(i);
                let returns = strategies
                    .iter()
                    .map(|s| portfolio_path(&scenario, s, horizon))
                    .collect::<Result<Vec<_>>>()?;
                for (sum, r) in chunk.return_sums.iter_mut().zip(&returns) {
                    sum.iter_mut().zip(r).for_each(|(a, x)| *a += x);
                }
                for (p, plan) in plans.iter().enumerate() {
                    let mut rng = stream(seed, Purpose::Mortality, i as u64);
                    let per_member = 1.0 / plan.headcount() as f64;
                    let claims: Vec<f64> = simulate_cashflows(plan, &scenario, &mut rng)?
                        .into_iter()
                        .map(|c| c * per_member)
                        .collect();
                    chunk.claim_sums[p].iter_mut().zip(&claims).for_each(|(a, x)| *a += x);
                    for (s, r) in returns.iter().enumerate() {
                        chunk.profiles[p][s].push(WealthProfile::new(r, &claims)?);
                    }
                }
            }
            Ok(chunk)
        })
        .collect::<Result<_>>()?;

    let mean = |f: &dyn Fn(&Chunk) -> f64| pairwise_sum(&chunks.iter().map(f).collect::<Vec<_>>()) / n as f64;
    let mean_returns: Vec<Vec<f64>> = (0..strategies.len())
        .map(|s| (0..horizon).map(|t| mean(&|c| c.return_sums[s][t])).collect())
        .collect();

    let mut out = Vec::with_capacity(plans.len());
    for p in 0..plans.len() {
        let mean_claims: Vec<f64> = (0..horizon).map(|t| mean(&|c| c.claim_sums[p][t])).collect();
        let row = (0..strategies.len())
            .map(|s| CaseData {
                profiles: chunks.iter().flat_map(|c| c.profiles[p][s].iter().copied()).collect(),
                mean_returns: mean_returns[s].clone(),
                mean_claims: mean_claims.clone(),
            })
            .collect();
        out.push(row);
    }
    Ok(out)
}
