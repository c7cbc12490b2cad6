//! Shot-level simulation of the hybrid estimators for gradients and objectives.
//!
//! Every trial draws its classical latents, prepares σ and a controlled unitary U, and samples the
//! Hadamard-test ancilla bit z together with the eigenvalue x of the measured Pauli term from
//! their exact joint law. E[z·x] = Re Tr[H U σ].

use std::f64::consts::{LN_2, PI};

use rand::RngCore;

use crate::activations::{Activation, ActivationKind};
use crate::densities::{
    sample_gamma, sample_gaussian, sample_kappa, sample_mu, sample_uniform, sample_xi_tagged, uniform_open,
    TrialRng, XiBranch,
};
use crate::error::{Error, Result};
use crate::hamiltonians::{l1_and_term_distribution, masked, ParamHamiltonian};
use crate::montecarlo::{estimate, Budget, Estimate};
use crate::qlinalg::{
    check_distribution, eigh, evolve, sample_index, trace_product, CMatrix, DensityMatrix, HermitianEigensystem,
    Measurement,
};

/// Samples (z, x) with P(z, k) = ¼ Tr[Π_k (I + zU) σ (I + zU)†].
pub fn hadamard_joint_sample<R: RngCore + ?Sized>(
    rng: &mut R,
    u: &CMatrix,
    meas: &Measurement,
    sigma: &CMatrix,
) -> Result<(f64, f64)> {
    let d = sigma.nrows();
    if u.nrows() != d || meas.projectors.first().map(|p| p.nrows()) != Some(d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: u.nrows(),
        });
    }
    let u_sigma = u * sigma;
    let u_sigma_u = &u_sigma * u.adjoint();
    let mut probs = Vec::with_capacity(2 * meas.outcomes.len());
    for p in &meas.projectors {
        let a = trace_product(p, sigma).re;
        let b = trace_product(p, &u_sigma).re;
        let c = trace_product(p, &u_sigma_u).re;
        probs.push(0.25 * (a + c + 2.0 * b));
        probs.push(0.25 * (a + c - 2.0 * b));
    }
    check_distribution(&probs)?;
    let i = sample_index(rng, &probs);
    let z = if i % 2 == 0 { 1.0 } else { -1.0 };
    Ok((z, meas.outcomes[i / 2]))
}

/// Re Tr[H U σ] for the measured observable H = Σ_k x_k Π_k.
pub fn hadamard_mean(u: &CMatrix, meas: &Measurement, sigma: &CMatrix) -> f64 {
    let u_sigma = u * sigma;
    meas.outcomes
        .iter()
        .zip(&meas.projectors)
        .map(|(x, p)| x * trace_product(p, &u_sigma).re)
        .sum()
}

pub(crate) fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn check_term(ph: &ParamHamiltonian, j: usize) -> Result<()> {
    if j >= ph.num_terms() {
        return Err(Error::InvalidArgument(format!(
            "term index {j} out of range for J = {}",
            ph.num_terms()
        )));
    }
    Ok(())
}

pub(crate) fn check_state(ph: &ParamHamiltonian, rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != ph.dim() {
        return Err(Error::DimensionMismatch {
            expected: ph.dim(),
            found: rho.dim(),
        });
    }
    Ok(())
}

pub(crate) fn l1(params: &[f64]) -> f64 {
    params.iter().map(|x| x.abs()).sum()
}

/// One tanh-gradient circuit: z·x with E = Re Tr[H_j e^{iHt/T} 𝒰_{st/T}(ρ)], t ∼ μ, s ∼ υ.
fn tanh_gradient_shot(
    rng: &mut TrialRng,
    es: &HermitianEigensystem,
    meas: &Measurement,
    rho: &CMatrix,
    temperature: f64,
) -> Result<f64> {
    let t = sample_mu(rng);
    let s = sample_uniform(rng);
    let u = es.propagator(-t / temperature);
    let sigma = evolve(es, rho, s * t / temperature);
    let (z, x) = hadamard_joint_sample(rng, &u, meas, &sigma)?;
    Ok(z * x)
}

/// ∂_j Tr[tanh(H(θ)/T)ρ]; per-trial value z·x/T.
pub fn estimate_tanh_gradient(
    seed: u64,
    ph: &ParamHamiltonian,
    j: usize,
    temperature: f64,
    rho: &DensityMatrix,
    budget: Budget,
) -> Result<Estimate> {
    check_term(ph, j)?;
    check_state(ph, rho)?;
    let es = eigh(&ph.matrix())?;
    let meas = ph.term_measurement(j);
    let bound = meas.max_abs_outcome() / temperature;
    estimate(seed, budget, bound, 0.0, |rng| {
        Ok(tanh_gradient_shot(rng, &es, meas, rho.matrix(), temperature)? / temperature)
    })
}

/// One telescoping term of the tanh objective: j ∼ q, λ ∼ υ, gradient circuit on H(θ^{(j)}(λ)).
fn tanh_objective_shot(
    rng: &mut TrialRng,
    ph: &ParamHamiltonian,
    q: &[f64],
    rho: &CMatrix,
    temperature: f64,
) -> Result<(usize, f64)> {
    let j = sample_index(rng, q);
    let lambda = sample_uniform(rng);
    let es = eigh(&ph.assemble(&masked(&ph.theta, j, lambda)?)?)?;
    let zx = tanh_gradient_shot(rng, &es, ph.term_measurement(j), rho, temperature)?;
    Ok((j, zx))
}

/// Tr[tanh(H(θ)/T)ρ] by telescoping; per-trial value (‖θ‖₁/T)·sign(θ_j)·z·x.
pub fn estimate_tanh_objective(
    seed: u64,
    ph: &ParamHamiltonian,
    temperature: f64,
    rho: &DensityMatrix,
    budget: Budget,
) -> Result<Estimate> {
    check_state(ph, rho)?;
    if l1(&ph.theta) == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let (norm, q) = l1_and_term_distribution(&ph.theta)?;
    let bound = norm / temperature;
    estimate(seed, budget, bound, 0.0, |rng| {
        let (j, zx) = tanh_objective_shot(rng, ph, &q, rho.matrix(), temperature)?;
        Ok(bound * sign(ph.theta[j]) * zx)
    })
}

/// scale·Tr[H(θ)ρ]: measure H_j for j ∼ q and weight by scale·‖θ‖₁·sign(θ_j).
pub fn estimate_linear_term(
    seed: u64,
    ph: &ParamHamiltonian,
    rho: &DensityMatrix,
    scale: f64,
    budget: Budget,
) -> Result<Estimate> {
    check_state(ph, rho)?;
    if l1(&ph.theta) == 0.0 || scale == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let (norm, q) = l1_and_term_distribution(&ph.theta)?;
    let bound = scale.abs() * norm;
    estimate(seed, budget, bound, 0.0, |rng| linear_shot(rng, ph, &q, norm, rho.matrix()).map(|v| scale * v))
}

/// ‖θ‖₁·sign(θ_j)·x with j ∼ q and x the outcome of H_j on ρ.
fn linear_shot(rng: &mut TrialRng, ph: &ParamHamiltonian, q: &[f64], norm: f64, rho: &CMatrix) -> Result<f64> {
    let j = sample_index(rng, q);
    let x = ph.term_measurement(j).sample(rng, rho)?;
    Ok(norm * sign(ph.theta[j]) * x)
}

/// Constants of an activation whose gradient splits as c·Tr[H_jρ] + ζ_j.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZetaFamily {
    pub activation: Activation,
    /// Label y = ±1; only the logistic loss depends on it.
    pub label: f64,
}

impl ZetaFamily {
    pub fn new(activation: Activation, label: f64) -> Result<Self> {
        match activation.kind {
            ActivationKind::Logloss
            | ActivationKind::Softplus
            | ActivationKind::Silu
            | ActivationKind::Grelu
            | ActivationKind::Gelu => {}
            other => {
                return Err(Error::Unsupported(format!(
                    "no gradient circuit for the {other} activation"
                )))
            }
        }
        if label != 1.0 && label != -1.0 {
            return Err(Error::InvalidArgument(format!("label must be ±1, got {label}")));
        }
        Ok(Self { activation, label })
    }

    fn temperature(&self) -> f64 {
        self.activation.temperature
    }

    /// The scalar function whose operator expectation this family differentiates.
    pub fn objective_activation(&self) -> Activation {
        match (self.activation.kind, self.label < 0.0) {
            (ActivationKind::Logloss, true) => Activation {
                kind: ActivationKind::Softplus,
                temperature: self.temperature(),
            },
            _ => self.activation,
        }
    }

    /// Coefficient c of the linear part.
    pub fn linear_coefficient(&self) -> f64 {
        match self.activation.kind {
            ActivationKind::Logloss => -0.5 * self.label,
            _ => 0.5,
        }
    }

    /// Per-trial prefactor multiplying ‖θ‖₁·s·sign(θ_k)·z·x.
    pub fn coefficient(&self) -> f64 {
        let t = self.temperature();
        match self.activation.kind {
            ActivationKind::Logloss | ActivationKind::Softplus => 0.5 / t,
            ActivationKind::Silu => 1.0 / t,
            ActivationKind::Grelu => (2.0 / PI).sqrt() / t,
            ActivationKind::Gelu => 2.0 * (2.0 / PI).sqrt() / t,
            _ => unreachable!("checked in ZetaFamily::new"),
        }
    }

    /// φ(0).
    pub fn value_at_zero(&self) -> f64 {
        let t = self.temperature();
        match self.activation.kind {
            ActivationKind::Logloss | ActivationKind::Softplus => t * LN_2,
            ActivationKind::Grelu => t / (2.0 * PI).sqrt(),
            _ => 0.0,
        }
    }

    /// Evolution time τ of the ζ circuit.
    fn sample_time(&self, rng: &mut TrialRng) -> f64 {
        let t = self.temperature();
        match self.activation.kind {
            ActivationKind::Logloss => self.label * sample_gamma(rng) / t,
            ActivationKind::Softplus => sample_gamma(rng) / t,
            ActivationKind::Silu => match sample_xi_tagged(rng) {
                (v, XiBranch::Gamma) => v / t,
                (v, XiBranch::Mu) => v / (2.0 * t),
            },
            ActivationKind::Grelu => sample_uniform(rng) * sample_gaussian(rng, 1.0 / t),
            ActivationKind::Gelu => sample_kappa(rng) * sample_gaussian(rng, 1.0 / t),
            _ => unreachable!("checked in ZetaFamily::new"),
        }
    }
}

/// One ζ_j circuit at parameters `params`: U = H_j e^{iHτ}, σ = 𝒰_{sτ}(ρ), measure H_k with k ∼ q.
/// Returns coef·‖params‖₁·s·sign(params_k)·z·x.
fn zeta_shot(
    rng: &mut TrialRng,
    family: &ZetaFamily,
    ph: &ParamHamiltonian,
    params: &[f64],
    es: &HermitianEigensystem,
    j: usize,
    rho: &CMatrix,
) -> Result<f64> {
    let norm = l1(params);
    if norm == 0.0 {
        return Ok(0.0);
    }
    let q: Vec<f64> = params.iter().map(|p| p.abs() / norm).collect();
    let tau = family.sample_time(rng);
    let s = sample_uniform(rng);
    let k = sample_index(rng, &q);
    let u = ph.term_matrix(j) * es.propagator(-tau);
    let sigma = evolve(es, rho, s * tau);
    let (z, x) = hadamard_joint_sample(rng, &u, ph.term_measurement(k), &sigma)?;
    Ok(family.coefficient() * norm * s * sign(params[k]) * z * x)
}

/// ζ_j = ∂_j Tr[φ(H(θ))ρ] − c·Tr[H_jρ].
pub fn estimate_zeta_j(
    seed: u64,
    ph: &ParamHamiltonian,
    j: usize,
    family: &ZetaFamily,
    rho: &DensityMatrix,
    budget: Budget,
) -> Result<Estimate> {
    check_term(ph, j)?;
    check_state(ph, rho)?;
    let norm = l1(&ph.theta);
    if norm == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let es = eigh(&ph.matrix())?;
    let bound = family.coefficient() * norm;
    estimate(seed, budget, bound, 0.0, |rng| {
        zeta_shot(rng, family, ph, &ph.theta, &es, j, rho.matrix())
    })
}

/// Full ∂_j Tr[φ(H(θ))ρ]: each trial adds c·x from a direct H_j measurement to a ζ_j circuit.
pub fn estimate_activation_gradient(
    seed: u64,
    ph: &ParamHamiltonian,
    j: usize,
    family: &ZetaFamily,
    rho: &DensityMatrix,
    budget: Budget,
) -> Result<Estimate> {
    check_term(ph, j)?;
    check_state(ph, rho)?;
    let es = eigh(&ph.matrix())?;
    let c = family.linear_coefficient();
    let meas = ph.term_measurement(j);
    let bound = c.abs() + family.coefficient() * l1(&ph.theta);
    estimate(seed, budget, bound, 0.0, |rng| {
        let direct = c * meas.sample(rng, rho.matrix())?;
        Ok(direct + zeta_shot(rng, family, ph, &ph.theta, &es, j, rho.matrix())?)
    })
}

/// Tr[φ(H(θ))ρ] = φ(0) + c·Tr[H(θ)ρ] + Σ_j θ_j ∫₀¹ ζ_j(θ^{(j)}(λ)) dλ, with j uniform on [J].
pub fn estimate_objective_telescoped(
    seed: u64,
    ph: &ParamHamiltonian,
    family: &ZetaFamily,
    rho: &DensityMatrix,
    budget: Budget,
) -> Result<Estimate> {
    check_state(ph, rho)?;
    let phi0 = family.value_at_zero();
    if l1(&ph.theta) == 0.0 {
        return Ok(Estimate::exact(phi0));
    }
    let (norm, q) = l1_and_term_distribution(&ph.theta)?;
    let c = family.linear_coefficient();
    let jj = ph.num_terms();
    let max_theta = ph.theta.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let bound = c.abs() * norm + jj as f64 * max_theta * norm * family.coefficient();
    estimate(seed, budget, bound, phi0, |rng| {
        let linear = c * linear_shot(rng, ph, &q, norm, rho.matrix())?;
        let j = ((uniform_open(rng) * jj as f64) as usize).min(jj - 1);
        let lambda = sample_uniform(rng);
        if ph.theta[j] == 0.0 {
            return Ok(linear);
        }
        let params = masked(&ph.theta, j, lambda)?;
        let es = eigh(&ph.assemble(&params)?)?;
        let z = zeta_shot(rng, family, ph, &params, &es, j, rho.matrix())?;
        Ok(linear + jj as f64 * ph.theta[j] * z)
    })
}

/// ∂_j of (1/M) Σ_m (Tr[tanh(H(θ)/T)ρ_m] − y_m)².
///
/// Each trial multiplies an objective shot and an independent gradient shot on the same ρ_m:
/// Y = 2·((‖θ‖₁/T)·sign(θ_k)·z₁x₁ − y_m)·z₂x₂/T.
pub fn estimate_sqloss_gradient(
    seed: u64,
    items: &[(DensityMatrix, f64)],
    ph: &ParamHamiltonian,
    temperature: f64,
    j: usize,
    budget: Budget,
) -> Result<Estimate> {
    check_term(ph, j)?;
    if items.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    for (rho, _) in items {
        check_state(ph, rho)?;
    }
    let es = eigh(&ph.matrix())?;
    let meas = ph.term_measurement(j);
    let norm = l1(&ph.theta);
    let q = if norm > 0.0 {
        l1_and_term_distribution(&ph.theta)?.1
    } else {
        Vec::new()
    };
    let y_max = items.iter().fold(0.0f64, |m, (_, y)| m.max(y.abs()));
    let bound = 2.0 * (norm / temperature + y_max) / temperature;
    let m_count = items.len();
    estimate(seed, budget, bound, 0.0, |rng| {
        let m = ((uniform_open(rng) * m_count as f64) as usize).min(m_count - 1);
        let (rho, y) = (&items[m].0, items[m].1);
        let f = if norm > 0.0 {
            let (k, zx) = tanh_objective_shot(rng, ph, &q, rho.matrix(), temperature)?;
            norm / temperature * sign(ph.theta[k]) * zx
        } else {
            0.0
        };
        let g = tanh_gradient_shot(rng, &es, meas, rho.matrix(), temperature)? / temperature;
        Ok(2.0 * (f - y) * g)
    })
}
