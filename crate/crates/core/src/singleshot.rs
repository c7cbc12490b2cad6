//! Single-shot neuron firing.
//!
//! Measuring the qumode after the controlled displacement yields p = a_i + δ, where i is drawn
//! with probability ⟨v_i|ρ|v_i⟩ in the eigenbasis of A and δ is drawn from the control density.
//! The simulation samples that output law directly.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::activations::{Activation, ActivationKind};
use crate::densities::{gaussian_pdf, logistic_pdf, sample_gaussian, sample_logistic, TrialRng};
use crate::error::{Error, Result};
use crate::hamiltonians::ParamHamiltonian;
use crate::montecarlo::run_trials;
use crate::observables::diagonal_in_eigenbasis;
use crate::qlinalg::{check_distribution, eigh, sample_index, CMatrix, DensityMatrix};

/// Even control density of the qumode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConvolutionKernel {
    Logistic(f64),
    Gaussian(f64),
    /// e^{−p²}/√π, a Gaussian of variance ½.
    Vacuum,
}

impl ConvolutionKernel {
    pub fn pdf(&self, p: f64) -> f64 {
        match *self {
            ConvolutionKernel::Logistic(t) => logistic_pdf(p, t),
            ConvolutionKernel::Gaussian(s) => gaussian_pdf(p, s),
            ConvolutionKernel::Vacuum => gaussian_pdf(p, std::f64::consts::FRAC_1_SQRT_2),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ConvolutionKernel::Logistic(t) => sample_logistic(rng, t),
            ConvolutionKernel::Gaussian(s) => sample_gaussian(rng, s),
            ConvolutionKernel::Vacuum => sample_gaussian(rng, std::f64::consts::FRAC_1_SQRT_2),
        }
    }
}

/// Classical post-processing r(p) of the measured momentum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Readout {
    /// +1 for p ≥ 0, −1 otherwise.
    Sign,
    IndicatorNonneg,
    /// T₂·max(p, 0).
    ReluScaled(f64),
    Linear,
}

impl Readout {
    pub fn apply(&self, p: f64) -> f64 {
        match *self {
            Readout::Sign => {
                if p >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Readout::IndicatorNonneg => {
                if p >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Readout::ReluScaled(t2) => t2 * p.max(0.0),
            Readout::Linear => p,
        }
    }
}

/// Eigenvalues a_i of A with Born weights ⟨v_i|ρ|v_i⟩.
#[derive(Clone, Debug)]
pub struct SpectralLaw {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl SpectralLaw {
    pub fn new(a: &CMatrix, rho: &DensityMatrix) -> Result<Self> {
        if a.nrows() != rho.dim() {
            return Err(Error::DimensionMismatch {
                expected: rho.dim(),
                found: a.nrows(),
            });
        }
        let es = eigh(a)?;
        let probs = diagonal_in_eigenbasis(&es, rho.matrix());
        check_distribution(&probs)?;
        Ok(Self {
            values: es.values,
            probs,
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            probs: self.probs.clone(),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.values[sample_index(rng, &self.probs)]
    }
}

/// r(a_i + δ) with i ∼ law and δ ∼ kernel.
pub fn convolution_sample<R: Rng + ?Sized>(
    rng: &mut R,
    kernel: &ConvolutionKernel,
    law: &SpectralLaw,
    readout: &Readout,
) -> f64 {
    let a = law.draw(rng);
    readout.apply(a + kernel.sample(rng))
}

/// r₁(a_i t₁ + δ₁)·r₂(a_i t₂ + δ₂) with one eigenindex i shared by both qumodes.
pub fn conv_mult_sample<R: Rng + ?Sized>(
    rng: &mut R,
    kernels: (&ConvolutionKernel, &ConvolutionKernel),
    law: &SpectralLaw,
    times: (f64, f64),
    readouts: (&Readout, &Readout),
) -> f64 {
    let a = law.draw(rng);
    let p1 = a * times.0 + kernels.0.sample(rng);
    let p2 = a * times.1 + kernels.1.sample(rng);
    readouts.0.apply(p1) * readouts.1.apply(p2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Neuron {
    Fd,
    Relu,
    Silu,
    Erf,
    Grelu,
    Gelu,
}

impl Neuron {
    pub const ALL: [Neuron; 6] = [Neuron::Fd, Neuron::Relu, Neuron::Silu, Neuron::Erf, Neuron::Grelu, Neuron::Gelu];

    pub fn name(self) -> &'static str {
        match self {
            Neuron::Fd => "fd",
            Neuron::Relu => "relu",
            Neuron::Silu => "silu",
            Neuron::Erf => "erf",
            Neuron::Grelu => "grelu",
            Neuron::Gelu => "gelu",
        }
    }

    /// The activation whose expectation the neuron's mean output equals.
    pub fn expected_activation(self, t1: f64, t2: f64) -> Result<Activation> {
        let t = t1 * t2;
        match self {
            Neuron::Fd => Activation::new(ActivationKind::Tanh, 2.0 * t),
            Neuron::Relu => Activation::new(ActivationKind::Softplus, t),
            Neuron::Silu => Activation::new(ActivationKind::Silu, t),
            Neuron::Erf => Activation::new(ActivationKind::Erf, 2.0 * t),
            Neuron::Grelu => Activation::new(ActivationKind::Grelu, t),
            Neuron::Gelu => Activation::new(ActivationKind::Gelu, t),
        }
    }
}

impl fmt::Display for Neuron {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Neuron {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = s.to_ascii_lowercase();
        Neuron::ALL
            .into_iter()
            .find(|n| n.name() == k)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown neuron \"{s}\"")))
    }
}

/// A neuron bound to H(θ), ρ and the temperatures (T₁, T₂), ready to fire repeatedly.
#[derive(Clone, Debug)]
pub struct NeuronCircuit {
    pub neuron: Neuron,
    law: SpectralLaw,
    t1: f64,
    t2: f64,
}

impl NeuronCircuit {
    pub fn new(neuron: Neuron, ph: &ParamHamiltonian, params: &[f64], t1: f64, t2: f64, rho: &DensityMatrix) -> Result<Self> {
        if !(t1 > 0.0 && t2 > 0.0) || !t1.is_finite() || !t2.is_finite() {
            return Err(Error::InvalidArgument(format!("temperatures must be positive, got ({t1}, {t2})")));
        }
        let law = SpectralLaw::new(&ph.assemble(params)?, rho)?;
        Ok(Self { neuron, law, t1, t2 })
    }

    pub fn expected_activation(&self) -> Activation {
        self.neuron
            .expected_activation(self.t1, self.t2)
            .expect("temperatures validated")
    }

    /// Exact mean output Σ_i p_i φ(λ_i).
    pub fn exact_mean(&self) -> f64 {
        let act = self.expected_activation();
        self.law.values.iter().zip(&self.law.probs).map(|(l, p)| p * act.value(*l)).sum()
    }

    pub fn fire<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (t1, t2) = (self.t1, self.t2);
        let scaled = |factor: f64| self.law.scaled(factor);
        match self.neuron {
            Neuron::Fd => convolution_sample(rng, &ConvolutionKernel::Logistic(t1), &scaled(1.0 / t2), &Readout::Sign),
            Neuron::Relu => convolution_sample(
                rng,
                &ConvolutionKernel::Logistic(t1),
                &scaled(1.0 / t2),
                &Readout::ReluScaled(t2),
            ),
            Neuron::Erf => convolution_sample(rng, &ConvolutionKernel::Gaussian(t1), &scaled(1.0 / t2), &Readout::Sign),
            Neuron::Grelu => convolution_sample(
                rng,
                &ConvolutionKernel::Gaussian(t1),
                &scaled(1.0 / t2),
                &Readout::ReluScaled(t2),
            ),
            Neuron::Silu => conv_mult_sample(
                rng,
                (&ConvolutionKernel::Vacuum, &ConvolutionKernel::Logistic(t1)),
                &self.law,
                (1.0, 1.0 / t2),
                (&Readout::Linear, &Readout::IndicatorNonneg),
            ),
            Neuron::Gelu => conv_mult_sample(
                rng,
                (&ConvolutionKernel::Vacuum, &ConvolutionKernel::Gaussian(t1)),
                &self.law,
                (1.0, 1.0 / t2),
                (&Readout::Linear, &Readout::IndicatorNonneg),
            ),
        }
    }
}

fn fire_once<R: Rng + ?Sized>(
    rng: &mut R,
    neuron: Neuron,
    ph: &ParamHamiltonian,
    params: &[f64],
    t1: f64,
    t2: f64,
    rho: &DensityMatrix,
) -> Result<f64> {
    Ok(NeuronCircuit::new(neuron, ph, params, t1, t2, rho)?.fire(rng))
}

/// ±1 with mean Tr[tanh(H(θ)/(2T₁T₂))ρ].
pub fn fd_fire<R: Rng + ?Sized>(rng: &mut R, ph: &ParamHamiltonian, params: &[f64], t1: f64, t2: f64, rho: &DensityMatrix) -> Result<f64> {
    fire_once(rng, Neuron::Fd, ph, params, t1, t2, rho)
}

/// Nonnegative output with mean Tr[r_{T₁T₂}(H(θ))ρ].
pub fn relu_fire<R: Rng + ?Sized>(rng: &mut R, ph: &ParamHamiltonian, params: &[f64], t1: f64, t2: f64, rho: &DensityMatrix) -> Result<f64> {
    fire_once(rng, Neuron::Relu, ph, params, t1, t2, rho)
}

/// Output with mean Tr[silu_{T₁T₂}(H(θ))ρ].
pub fn silu_fire<R: Rng + ?Sized>(rng: &mut R, ph: &ParamHamiltonian, params: &[f64], t1: f64, t2: f64, rho: &DensityMatrix) -> Result<f64> {
    fire_once(rng, Neuron::Silu, ph, params, t1, t2, rho)
}

/// Gaussian-kernel variants: erf, GReLU and GeLU.
pub fn gaussian_variant_fire<R: Rng + ?Sized>(
    rng: &mut R,
    ph: &ParamHamiltonian,
    params: &[f64],
    t1: f64,
    t2: f64,
    rho: &DensityMatrix,
    kind: Neuron,
) -> Result<f64> {
    if !matches!(kind, Neuron::Erf | Neuron::Grelu | Neuron::Gelu) {
        return Err(Error::InvalidArgument(format!("{kind} is not a Gaussian-kernel neuron")));
    }
    fire_once(rng, kind, ph, params, t1, t2, rho)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShotSummary {
    pub mean: f64,
    pub stderr: f64,
    pub shots: u64,
    pub exact: f64,
}

/// Fires `shots` times, shot i on stream (seed, i).
pub fn run_shots(seed: u64, circuit: &NeuronCircuit, shots: u64) -> Result<ShotSummary> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shot count must be positive".into()));
    }
    let sums = run_trials(seed, shots, |rng: &mut TrialRng| Ok(circuit.fire(rng)))?;
    Ok(ShotSummary {
        mean: sums.mean(),
        stderr: sums.stderr(),
        shots: sums.count,
        exact: circuit.exact_mean(),
    })
}
