use nalgebra::{DMatrix, DVector};

use super::cohort::{linear_predictor, sigmoid, softplus};
use super::{BasisSet, MortalityFactors, MortalityObservation};
use crate::error::{Error, Result};

/// Binomial log-likelihood of one year's survival data with its exact
/// derivatives. The additive constant (the log binomial coefficients) is
/// omitted; it does not depend on the factors.
#[derive(Debug, Clone)]
pub struct LogLikelihood {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// `Σₓ [Dₓ uₓ − Eₓ ln(1 + e^{uₓ})]` with `uₓ = Σᵢ vⁱ φⁱ(x)`.
///
/// The function is concave in `v`; its Hessian is `−Σₓ Eₓ p(1−p) φφᵀ`.
pub fn log_likelihood(v: &MortalityFactors, obs: &MortalityObservation, basis: &BasisSet) -> Result<LogLikelihood> {
    let n = basis.len();
    if v.len() != n {
        return Err(Error::Shape(format!("{} factors for a basis of {n} functions", v.len())));
    }
    let mut value = 0.0;
    let mut gradient = DVector::zeros(n);
    let mut hessian = DMatrix::zeros(n, n);
    for row in obs.rows() {
        let phi = basis.eval(row.age)?;
        let u = linear_predictor(v.as_slice(), &phi);
        let e = row.exposure as f64;
        let d = row.survivors as f64;
        let p = sigmoid(u);
        value += d * u - e * softplus(u);
        let score = d - e * p;
        let weight = e * p * (1.0 - p);
        for i in 0..n {
            gradient[i] += score * phi[i];
            for j in 0..=i {
                hessian[(i, j)] -= weight * phi[i] * phi[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            hessian[(j, i)] = hessian[(i, j)];
        }
    }
    Ok(LogLikelihood { value, gradient, hessian })
}

const VALUE_NOISE: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct MleOptions {
    /// Stop once the Euclidean norm of the gradient is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Maximum number of step halvings per Newton iteration.
    pub max_halvings: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            tol: 1e-8,
            max_iter: 200,
            max_halvings: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MleFit {
    pub factors: MortalityFactors,
    /// Log-likelihood at the optimum, without the data-only constant.
    pub log_likelihood: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// Maximum-likelihood factors for one year, with the default iteration cap.
pub fn fit_year_mle(obs: &MortalityObservation, basis: &BasisSet, init: &MortalityFactors, tol: f64) -> Result<MleFit> {
    fit_year_mle_with(
        obs,
        basis,
        init,
        MleOptions {
            tol,
            ..MleOptions::default()
        },
    )
}

/// Damped Newton ascent with step halving.
pub fn fit_year_mle_with(obs: &MortalityObservation, basis: &BasisSet, init: &MortalityFactors, opts: MleOptions) -> Result<MleFit> {
    check_identifiable(obs, basis)?;
    let n = basis.len();
    if init.len() != n {
        return Err(Error::Shape(format!("initial point has {} factors, basis has {n}", init.len())));
    }
    let mut v = DVector::from_column_slice(init.as_slice());
    let mut ll = log_likelihood(init, obs, basis)?;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if ll.gradient.norm() < opts.tol {
            break;
        }
        let direction = newton_direction(&ll);
        let mut accepted = None;
        // Once the predicted gain is below the rounding noise of the value the
        // line search can no longer tell steps apart; take the pure Newton
        // step as long as it shrinks the gradient.
        let predicted_gain = 0.5 * ll.gradient.dot(&direction);
        if predicted_gain <= VALUE_NOISE * (1.0 + ll.value.abs()) {
            let trial = &v + &direction;
            let trial_ll = log_likelihood(&MortalityFactors::new(trial.iter().copied().collect()), obs, basis)?;
            if trial_ll.gradient.norm() < ll.gradient.norm() {
                accepted = Some((trial, trial_ll));
            }
        }
        let mut step = 1.0;
        for _ in 0..=opts.max_halvings {
            if accepted.is_some() {
                break;
            }
            let trial = &v + &direction * step;
            let trial_factors = MortalityFactors::new(trial.iter().copied().collect());
            let trial_ll = log_likelihood(&trial_factors, obs, basis)?;
            if trial_ll.value.is_finite() && trial_ll.value >= ll.value {
                accepted = Some((trial, trial_ll));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((next, next_ll)) => {
                if next == v {
                    // no representable progress is left
                    break;
                }
                v = next;
                ll = next_ll;
                iterations += 1;
            }
            None => break,
        }
    }
    let gnorm = ll.gradient.norm();
    if gnorm < opts.tol {
        return Ok(MleFit {
            factors: MortalityFactors::new(v.iter().copied().collect()),
            log_likelihood: ll.value,
            gradient_norm: gnorm,
            iterations,
        });
    }
    Err(Error::NonConvergence {
        iterations,
        gradient_norm: gnorm,
        last: v.iter().copied().collect(),
    })
}

/// Solve `(−H) d = g`; when `−H` is singular, add a small ridge.
fn newton_direction(ll: &LogLikelihood) -> DVector<f64> {
    let neg_h = -&ll.hessian;
    if let Some(chol) = neg_h.clone().cholesky() {
        return chol.solve(&ll.gradient);
    }
    let n = neg_h.nrows();
    let scale = (0..n).map(|i| neg_h[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let mut ridge = 1e-10 * scale;
    loop {
        let m = &neg_h + DMatrix::identity(n, n) * ridge;
        if let Some(chol) = m.cholesky() {
            return chol.solve(&ll.gradient);
        }
        ridge *= 10.0;
    }
}

/// Every basis function must see some exposure on its support.
pub fn check_identifiable(obs: &MortalityObservation, basis: &BasisSet) -> Result<()> {
    for i in 0..basis.len() {
        let mut seen = false;
        for row in obs.rows() {
            if row.exposure > 0 && basis.eval(row.age)?[i] > 0.0 {
                seen = true;
                break;
            }
        }
        if !seen {
            return Err(Error::Estimation(format!(
                "basis function {} (index {}) has no exposure on its support",
                basis.name(i),
                i + 1
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mortality::{survival_prob, AgeObservation};
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    fn obs(rows: &[(u32, u64, u64)]) -> MortalityObservation {
        MortalityObservation::new(
            rows.iter()
                .map(|&(age, exposure, survivors)| AgeObservation { age, exposure, survivors })
                .collect(),
        )
        .unwrap()
    }

    fn synthetic(v: &[f64], exposure: u64) -> MortalityObservation {
        let b = BasisSet::default();
        let f = MortalityFactors::new(v.to_vec());
        obs(&(18..=100)
            .map(|age| {
                let p = survival_prob(&f, age, &b).unwrap();
                (age, exposure, (exposure as f64 * p).round() as u64)
            })
            .collect::<Vec<_>>())
    }

    #[test]
    fn symmetric_point() {
        let b = BasisSet::default();
        let o = obs(&[(50, 10, 5)]);
        let ll = log_likelihood(&MortalityFactors::new(vec![0.0; 3]), &o, &b).unwrap();
        assert!((ll.value + 10.0 * 2f64.ln()).abs() < 1e-12);
        assert!(ll.gradient.norm() == 0.0);
    }

    #[test]
    fn value_falls_without_bound_as_u_decreases() {
        let b = BasisSet::default();
        let o = obs(&[(50, 10, 5), (70, 20, 18)]);
        let mut last = f64::INFINITY;
        for k in 1..12 {
            let v = MortalityFactors::new(vec![0.0, -(2f64.powi(k)), -(2f64.powi(k))]);
            let ll = log_likelihood(&v, &o, &b).unwrap().value;
            assert!(ll < last);
            last = ll;
        }
        assert!(last < -1e4);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let b = BasisSet::default();
        let o = synthetic(&[7.0, 5.0, 1.5], 1000);
        let mut rng = stream(5, Purpose::Test, 0);
        for _ in 0..20 {
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..8.0)).collect();
            let ll = log_likelihood(&MortalityFactors::new(v.clone()), &o, &b).unwrap();
            let h = 1e-6;
            for i in 0..3 {
                let mut up = v.clone();
                let mut dn = v.clone();
                up[i] += h;
                dn[i] -= h;
                let lu = log_likelihood(&MortalityFactors::new(up), &o, &b).unwrap();
                let ld = log_likelihood(&MortalityFactors::new(dn), &o, &b).unwrap();
                let fd = (lu.value - ld.value) / (2.0 * h);
                let scale = ll.gradient.norm().max(1.0);
                assert!((fd - ll.gradient[i]).abs() / scale < 1e-5, "grad {i}: {fd} vs {}", ll.gradient[i]);
                for j in 0..3 {
                    let fdh = (lu.gradient[j] - ld.gradient[j]) / (2.0 * h);
                    let hs = ll.hessian.norm().max(1.0);
                    assert!((fdh - ll.hessian[(j, i)]).abs() / hs < 1e-5);
                }
            }
        }
    }

    #[test]
    fn hessian_is_negative_semidefinite() {
        let b = BasisSet::default();
        let o = synthetic(&[7.0, 5.0, 1.5], 5000);
        let mut rng = stream(6, Purpose::Test, 0);
        for _ in 0..50 {
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-10.0..10.0)).collect();
            let h = log_likelihood(&MortalityFactors::new(v), &o, &b).unwrap().hessian;
            let eig = h.clone().symmetric_eigen();
            assert!(eig.eigenvalues.max() <= 1e-9 * h.norm());
        }
    }

    #[test]
    fn recovers_generating_factors() {
        let b = BasisSet::default();
        let truth = [7.0, 5.0, 1.5];
        let o = synthetic(&truth, 1_000_000);
        let fit = fit_year_mle(&o, &b, &MortalityFactors::new(vec![0.0; 3]), 1e-6).unwrap();
        for i in 0..3 {
            assert!((fit.factors.as_slice()[i] - truth[i]).abs() < 1e-2, "{:?}", fit.factors);
        }
        assert!(fit.gradient_norm < 1e-6);
    }

    #[test]
    fn single_function_half_survival() {
        let b = BasisSet::default().select(&[1]).unwrap();
        let o = obs(&[(50, 100, 50)]);
        let fit = fit_year_mle(&o, &b, &MortalityFactors::new(vec![0.3]), 1e-12).unwrap();
        assert!(fit.factors.as_slice()[0].abs() < 1e-12);
    }

    #[test]
    fn deterministic_bitwise() {
        let b = BasisSet::default();
        let o = synthetic(&[6.0, 4.5, 1.0], 10_000);
        let init = MortalityFactors::new(vec![0.0; 3]);
        let a = fit_year_mle(&o, &b, &init, 1e-8).unwrap();
        let c = fit_year_mle(&o, &b, &init, 1e-8).unwrap();
        assert_eq!(
            a.factors.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            c.factors.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn optimum_beats_perturbations() {
        let b = BasisSet::default();
        let o = synthetic(&[7.0, 5.0, 1.5], 10_000);
        let fit = fit_year_mle(&o, &b, &MortalityFactors::new(vec![0.0; 3]), 1e-8).unwrap();
        let best = log_likelihood(&fit.factors, &o, &b).unwrap().value;
        let mut rng = stream(9, Purpose::Test, 0);
        for _ in 0..100 {
            let mut d: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            d.iter_mut().for_each(|x| *x *= 0.1 / norm);
            let v: Vec<f64> = fit.factors.as_slice().iter().zip(&d).map(|(a, b)| a + b).collect();
            assert!(best >= log_likelihood(&MortalityFactors::new(v), &o, &b).unwrap().value);
        }
    }

    #[test]
    fn unidentifiable_names_the_function() {
        let b = BasisSet::default();
        let o = obs(&(18..=50).map(|a| (a, 1000, 990)).collect::<Vec<_>>());
        let err = fit_year_mle(&o, &b, &MortalityFactors::new(vec![0.0; 3]), 1e-8).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("phi3"), "{msg}");
    }

    #[test]
    fn reports_non_convergence_with_last_iterate() {
        let b = BasisSet::default();
        let o = synthetic(&[7.0, 5.0, 1.5], 10_000);
        let opts = MleOptions {
            tol: 1e-8,
            max_iter: 1,
            max_halvings: 60,
        };
        match fit_year_mle_with(&o, &b, &MortalityFactors::new(vec![0.0; 3]), opts) {
            Err(Error::NonConvergence { last, .. }) => assert_eq!(last.len(), 3),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
