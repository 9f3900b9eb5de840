use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

use super::*;
use crate::rng::{stream, Purpose};
use crate::scenario::{StateVector, SurvivalTable};

fn flat_scenario(horizon: usize, p: f64, index: f64) -> Scenario {
    let ages: Vec<u32> = (DEFAULT_AGE..DEFAULT_AGE + horizon as u32).collect();
    let mut index_ratio = vec![index; horizon + 1];
    index_ratio[0] = 1.0;
    Scenario {
        states: vec![StateVector::default(); horizon + 1],
        bond_returns: vec![1.0; horizon],
        equity_returns: vec![1.0; horizon],
        index_ratio,
        survival: SurvivalTable::constant(ages, horizon, p).unwrap(),
    }
}

fn rng() -> crate::rng::StreamRng {
    stream(7, Purpose::Test, 0)
}

#[test]
fn certain_survival_pays_everyone() {
    let sc = flat_scenario(35, 1.0, 1.0);
    for mode in [MortalityMode::Binomial, MortalityMode::Deterministic] {
        let plan = PensionPlan::homogeneous(100, 35, mode).unwrap();
        let c = simulate_cashflows(&plan, &sc, &mut rng()).unwrap();
        assert_eq!(c, vec![100.0; 35]);
    }
}

#[test]
fn empty_cohort_pays_nothing() {
    let sc = flat_scenario(35, 0.97, 1.3);
    for mode in [MortalityMode::Binomial, MortalityMode::Deterministic] {
        let plan = PensionPlan::homogeneous(0, 35, mode).unwrap();
        assert!(simulate_cashflows(&plan, &sc, &mut rng()).unwrap().iter().all(|&c| c == 0.0));
    }
}

#[test]
fn deterministic_geometric_decay() {
    let sc = flat_scenario(35, 0.97, 1.0);
    let plan = PensionPlan::homogeneous(100, 35, MortalityMode::Deterministic).unwrap();
    let c = simulate_cashflows(&plan, &sc, &mut rng()).unwrap();
    for (t, ct) in c.iter().enumerate() {
        let expect = 100.0 * 0.97f64.powi(t as i32 + 1);
        assert!((ct - expect).abs() < 1e-12 * expect, "t={} {ct} vs {expect}", t + 1);
    }
}

#[test]
fn nonhomogeneous_split() {
    let cases = [(100, 20, 80), (10, 2, 8), (1, 0, 1), (5, 1, 4), (3, 1, 2)];
    for (total, double, single) in cases {
        let plan = make_nonhomogeneous_plan(total).unwrap();
        let c = plan.cohorts();
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].start_age, c[0].headcount, c[0].benefit), (65, double, 2.0));
        assert_eq!((c[1].start_age, c[1].headcount, c[1].benefit), (65, single, 1.0));
        assert_eq!(plan.headcount(), total);
    }
    assert!(make_nonhomogeneous_plan(0).is_err());
}

#[test]
fn plan_validation() {
    assert!(PensionPlan::homogeneous(1, 0, MortalityMode::Binomial).is_err());
    assert!(PensionPlan::homogeneous(1, 36, MortalityMode::Binomial).is_err());
    assert!(PensionPlan::new(vec![], 35, MortalityMode::Binomial).is_err());
    assert!(PensionPlan::new(vec![Cohort::new(65, 1, 0.0)], 35, MortalityMode::Binomial).is_err());
    assert!(PensionPlan::new(vec![Cohort::new(17, 1, 1.0)], 1, MortalityMode::Binomial).is_err());
    let plan = PensionPlan::new(vec![Cohort::new(70, 1, 1.0), Cohort::new(65, 1, 1.0)], 3, MortalityMode::Binomial).unwrap();
    assert_eq!(plan.ages(), vec![65, 66, 67, 70, 71, 72]);
}

#[test]
fn shape_mismatch() {
    let sc = flat_scenario(10, 0.9, 1.0);
    let plan = PensionPlan::homogeneous(10, 35, MortalityMode::Deterministic).unwrap();
    assert!(simulate_cashflows(&plan, &sc, &mut rng()).is_err());
    let plan = PensionPlan::new(vec![Cohort::new(50, 1, 1.0)], 5, MortalityMode::Deterministic).unwrap();
    assert!(simulate_cashflows(&plan, &sc, &mut rng()).is_err());
}

#[test]
fn deterministic_scale_invariance() {
    let sc = flat_scenario(35, 0.95, 1.2);
    let small = PensionPlan::homogeneous(1, 35, MortalityMode::Deterministic).unwrap();
    let large = PensionPlan::homogeneous(1_000_000, 35, MortalityMode::Deterministic).unwrap();
    let a = simulate_cashflows(&small, &sc, &mut rng()).unwrap();
    let b = simulate_cashflows(&large, &sc, &mut rng()).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y / 1e6).abs() <= 1e-14 * x.abs());
    }
}

#[test]
fn binomial_mean_matches_deterministic() {
    // per-period bound 4·sqrt(q(1−q)/n) on the per-capita claim, q the
    // cumulative survival probability
    let horizon = 35;
    let p = 0.97;
    let sc = flat_scenario(horizon, p, 1.0);
    let n = 50u64;
    let draws = 10_000;
    let plan = PensionPlan::homogeneous(n, horizon, MortalityMode::Binomial).unwrap();
    let det = simulate_cashflows(&plan.clone().with_mode(MortalityMode::Deterministic), &sc, &mut rng()).unwrap();
    let mut sum = vec![0.0; horizon];
    for k in 0..draws {
        let mut r = stream(11, Purpose::Test, k);
        for (s, c) in sum.iter_mut().zip(simulate_cashflows(&plan, &sc, &mut r).unwrap()) {
            *s += c / n as f64;
        }
    }
    for t in 0..horizon {
        let mean = sum[t] / draws as f64;
        let q = p.powi(t as i32 + 1);
        let bound = 4.0 * (q * (1.0 - q) / n as f64).sqrt();
        assert!((mean - det[t] / n as f64).abs() < bound, "t={} mean {mean} det {}", t + 1, det[t] / n as f64);
    }
}

#[test]
fn draws_are_reproducible() {
    let (p, _) = crate::scenario::EconomyParams::published();
    let plan = PensionPlan::homogeneous(100, 35, MortalityMode::Binomial).unwrap();
    let sc = crate::scenario::generate_scenarios(
        &p,
        StateVector::us_2007_estimate(),
        1,
        35,
        3,
        crate::scenario::SamplingMode::Lhs,
        &crate::mortality::BasisSet::default(),
        &plan.ages(),
    )
    .unwrap();
    let a = simulate_cashflows(&plan, &sc[0], &mut rng()).unwrap();
    let b = simulate_cashflows(&plan, &sc[0], &mut rng()).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|&c| c >= 0.0));
}

#[test]
fn strategy_catalog() {
    assert_eq!(Strategy::safe().weights, vec![0.75, 0.25]);
    assert_eq!(Strategy::risky().weights, vec![0.5, 0.5]);
    assert_eq!(Strategy::by_name("risky").unwrap(), Strategy::risky());
    assert!(Strategy::by_name("bold").is_err());
    assert!(Strategy::new("x", vec![0.6, 0.5]).is_err());
    assert!(Strategy::new("x", vec![1.0]).is_err());
    let sc = flat_scenario(3, 1.0, 1.0);
    assert_eq!(portfolio_path(&sc, &Strategy::safe(), 3).unwrap(), vec![1.0; 3]);
    assert!(portfolio_path(&sc, &Strategy::safe(), 4).is_err());
}

proptest! {
    #[test]
    fn claims_nondecreasing_in_index(lo in 0.1f64..3.0, bump in 0.0f64..2.0, t in 1usize..10) {
        let base = flat_scenario(10, 0.9, lo);
        let mut high = base.clone();
        high.index_ratio[t] = lo + bump;
        let plan = PensionPlan::homogeneous(40, 10, MortalityMode::Binomial).unwrap();
        let a = simulate_cashflows(&plan, &base, &mut rng()).unwrap();
        let b = simulate_cashflows(&plan, &high, &mut rng()).unwrap();
        prop_assert!(b[t - 1] >= a[t - 1]);
        for s in (0..10).filter(|&s| s != t - 1) {
            prop_assert_eq!(a[s], b[s]);
        }
    }
}
