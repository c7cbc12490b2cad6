//! Thermal states ρ(θ) = e^{−H(θ)}/Z(θ), cross entropy and the log-partition function.

use serde::Serialize;

use crate::densities::{sample_uniform, TrialRng};
use crate::error::{Error, Result};
use crate::estimators::{check_state, l1, sign};
use crate::hamiltonians::{l1_and_term_distribution, masked, ParamHamiltonian};
use crate::montecarlo::{estimate, Budget, Estimate};
use crate::qlinalg::{eigh, sample_index, trace_product, DensityMatrix, HermitianEigensystem};

#[derive(Clone, Debug)]
pub struct ThermalState {
    pub params: Vec<f64>,
    pub eigensystem: HermitianEigensystem,
    pub rho: DensityMatrix,
    pub log_z: f64,
}

/// ln Σ_k e^{x_k}, shifted by the maximum.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn thermal_state(ph: &ParamHamiltonian, params: &[f64]) -> Result<ThermalState> {
    let es = eigh(&ph.assemble(params)?)?;
    let neg: Vec<f64> = es.values.iter().map(|l| -l).collect();
    let log_z = logsumexp(&neg);
    if !log_z.is_finite() {
        return Err(Error::Numeric(format!("log-partition function is {log_z}")));
    }
    let rho = es.matrix_function(|l| (-l - log_z).exp())?;
    Ok(ThermalState {
        params: params.to_vec(),
        eigensystem: es,
        rho: DensityMatrix::new(rho)?,
        log_z,
    })
}

/// −Tr[ρ ln ρ], with 0 ln 0 = 0.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let es = eigh(rho.matrix())?;
    Ok(-es.values.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>())
}

/// Ξ(η‖ρ(θ)) evaluated two ways.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrossEntropyForms {
    /// −Tr[η ln ρ(θ)] with the logarithm taken of the assembled thermal matrix.
    pub log_form: f64,
    /// ⟨H(θ)⟩_η + ln Z(θ).
    pub energy_form: f64,
}

pub fn cross_entropy_forms(eta: &DensityMatrix, ph: &ParamHamiltonian, ts: &ThermalState) -> Result<CrossEntropyForms> {
    check_state(ph, eta)?;
    let log_rho = eigh(ts.rho.matrix())?.matrix_function(|p| {
        if p > 0.0 {
            p.ln()
        } else {
            f64::NEG_INFINITY
        }
    })?;
    let log_form = -trace_product(eta.matrix(), &log_rho).re;
    let energy = trace_product(&ph.assemble(&ts.params)?, eta.matrix()).re;
    Ok(CrossEntropyForms {
        log_form,
        energy_form: energy + ts.log_z,
    })
}

/// Ξ(η‖ρ(θ)) = ⟨H(θ)⟩_η + ln Z(θ).
pub fn cross_entropy_exact(eta: &DensityMatrix, ph: &ParamHamiltonian, ts: &ThermalState) -> Result<f64> {
    Ok(cross_entropy_forms(eta, ph, ts)?.energy_form)
}

/// Outcome of H_j measured on ρ(θ^{(j)}(λ)) for j ∼ q, λ ∼ υ. Returns (j, x).
fn thermal_shot(rng: &mut TrialRng, ph: &ParamHamiltonian, q: &[f64]) -> Result<(usize, f64)> {
    let j = sample_index(rng, q);
    let lambda = sample_uniform(rng);
    let ts = thermal_state(ph, &masked(&ph.theta, j, lambda)?)?;
    let x = ph.term_measurement(j).sample(rng, ts.rho.matrix())?;
    Ok((j, x))
}

/// ln d + ‖θ‖₁·E[sign(θ_j)(X^η − X^ρ)], where X^η measures H_j on η and X^ρ on the masked thermal state.
pub fn cross_entropy_estimate(seed: u64, eta: &DensityMatrix, ph: &ParamHamiltonian, budget: Budget) -> Result<Estimate> {
    check_state(ph, eta)?;
    let ln_d = (ph.dim() as f64).ln();
    if l1(&ph.theta) == 0.0 {
        return Ok(Estimate::exact(ln_d));
    }
    let (norm, q) = l1_and_term_distribution(&ph.theta)?;
    estimate(seed, budget, 2.0 * norm, ln_d, |rng| {
        let (j, x_rho) = thermal_shot(rng, ph, &q)?;
        let x_eta = ph.term_measurement(j).sample(rng, eta.matrix())?;
        Ok(norm * sign(ph.theta[j]) * (x_eta - x_rho))
    })
}

/// ln Z(θ) = ln d − ‖θ‖₁·E[sign(θ_j) X^ρ].
pub fn log_partition_estimate(seed: u64, ph: &ParamHamiltonian, budget: Budget) -> Result<Estimate> {
    let ln_d = (ph.dim() as f64).ln();
    if l1(&ph.theta) == 0.0 {
        return Ok(Estimate::exact(ln_d));
    }
    let (norm, q) = l1_and_term_distribution(&ph.theta)?;
    estimate(seed, budget, norm, ln_d, |rng| {
        let (j, x) = thermal_shot(rng, ph, &q)?;
        Ok(-norm * sign(ph.theta[j]) * x)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{build_heisenberg, build_tfim};
    use crate::qlinalg::{c64, expectation, CVector};
    use crate::quadrature::Rule;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_heisenberg(rng: &mut ChaCha8Rng, scale: f64) -> ParamHamiltonian {
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(-scale..scale)).collect();
        let s: Vec<f64> = (0..6).map(|_| rng.random_range(-scale..scale)).collect();
        build_heisenberg(2, &w, &s).unwrap()
    }

    fn within(e: &Estimate, exact: f64) {
        assert!((e.value - exact).abs() < 4.0 * e.stderr.max(1e-12), "{} ± {} vs {exact}", e.value, e.stderr);
    }

    #[test]
    fn thermal_state_basics() {
        let ph = build_tfim(2, &[0.0], &[0.0, 0.0], 0.0).unwrap();
        let ts = thermal_state(&ph, &ph.theta).unwrap();
        assert!((ts.log_z - 4f64.ln()).abs() < 1e-14);
        let z = ParamHamiltonian::new(1, vec!["Z".parse().unwrap()], vec![0.7]).unwrap();
        let ts = thermal_state(&z, &z.theta).unwrap();
        let p0 = (-0.7f64).exp() / ((-0.7f64).exp() + 0.7f64.exp());
        assert!((ts.rho.matrix()[(0, 0)].re - p0).abs() < 1e-14);
        assert!((ts.log_z - (2.0 * 0.7f64.cosh()).ln()).abs() < 1e-14);
        assert!((ts.rho.matrix().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn logsumexp_is_stable() {
        assert!((logsumexp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((logsumexp(&[-1000.0, 0.0]) - 0.0).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_special_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ph = random_heisenberg(&mut rng, 1.0);
        let ts = thermal_state(&ph, &ph.theta).unwrap();
        let xi = cross_entropy_exact(&ts.rho, &ph, &ts).unwrap();
        assert!((xi - von_neumann_entropy(&ts.rho).unwrap()).abs() < 1e-10);
        let zero = ph.with_theta(vec![0.0; ph.num_terms()]).unwrap();
        let ts0 = thermal_state(&zero, &zero.theta).unwrap();
        let eta = DensityMatrix::haar_random(&mut rng, 4);
        assert!((cross_entropy_exact(&eta, &zero, &ts0).unwrap() - 4f64.ln()).abs() < 1e-12);
        let e = cross_entropy_estimate(1, &eta, &zero, Budget::Trials(10)).unwrap();
        assert_eq!((e.value, e.stderr), (4f64.ln(), 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn two_forms_agree_and_relative_entropy_nonnegative(seed in any::<u64>(), mixed in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ph = random_heisenberg(&mut rng, 1.5);
            let ts = thermal_state(&ph, &ph.theta).unwrap();
            let pure = DensityMatrix::haar_random(&mut rng, 4);
            let full = DensityMatrix::maximally_mixed(4);
            let eta = DensityMatrix::mixture(&[(1.0 - mixed, &pure), (mixed, &full)]).unwrap();
            let f = cross_entropy_forms(&eta, &ph, &ts).unwrap();
            prop_assert!((f.log_form - f.energy_form).abs() < 1e-9);
            prop_assert!(f.energy_form - von_neumann_entropy(&eta).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn telescoping_by_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ph = build_tfim(2, &[0.9], &[-0.6, 0.4], 0.3).unwrap();
        let eta = DensityMatrix::haar_random(&mut rng, 4);
        let ts = thermal_state(&ph, &ph.theta).unwrap();
        let rule = Rule::new(20);
        let mut total = 4f64.ln();
        for j in 0..ph.num_terms() {
            let hj = ph.term_matrix(j);
            let on_eta = expectation(hj, &eta).unwrap();
            let integrand = |l: f64| {
                let t = thermal_state(&ph, &masked(&ph.theta, j, l).unwrap()).unwrap();
                on_eta - expectation(hj, &t.rho).unwrap()
            };
            total += ph.theta[j] * rule.composite(integrand, 0.0, 1.0, 4);
        }
        assert!((total - cross_entropy_exact(&eta, &ph, &ts).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn estimates_match_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ph = random_heisenberg(&mut rng, 0.5);
        let ts = thermal_state(&ph, &ph.theta).unwrap();
        within(&log_partition_estimate(5, &ph, Budget::Trials(200_000)).unwrap(), ts.log_z);
        let eta = DensityMatrix::haar_random(&mut rng, 4);
        let exact = cross_entropy_exact(&eta, &ph, &ts).unwrap();
        within(&cross_entropy_estimate(6, &eta, &ph, Budget::Trials(200_000)).unwrap(), exact);

        let z = ParamHamiltonian::new(1, vec!["Z".parse().unwrap()], vec![-0.8]).unwrap();
        within(&log_partition_estimate(7, &z, Budget::Trials(200_000)).unwrap(), (2.0 * 0.8f64.cosh()).ln());
    }

    #[test]
    fn maximally_mixed_eta_has_zero_mean_outcomes() {
        let ph = ParamHamiltonian::new(1, vec!["X".parse().unwrap()], vec![0.9]).unwrap();
        let eta = DensityMatrix::maximally_mixed(2);
        let plus = DensityMatrix::pure(&CVector::from_vec(vec![c64(1., 0.), c64(1., 0.)])).unwrap();
        assert_eq!(expectation(ph.term_matrix(0), &eta).unwrap(), 0.0);
        let ts = thermal_state(&ph, &ph.theta).unwrap();
        let e = cross_entropy_estimate(8, &eta, &ph, Budget::Trials(100_000)).unwrap();
        within(&e, cross_entropy_exact(&eta, &ph, &ts).unwrap());
        let e = cross_entropy_estimate(9, &plus, &ph, Budget::Trials(100_000)).unwrap();
        within(&e, cross_entropy_exact(&plus, &ph, &ts).unwrap());
    }
}
