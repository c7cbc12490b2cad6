//! Exact activation observables φ(H(θ)), objective values and their gradients.

use crate::activations::{Activation, ActivationKind};
use crate::error::{Error, Result};
use crate::hamiltonians::ParamHamiltonian;
use crate::qlinalg::{c64, eigh, trace_product, CMatrix, DensityMatrix, HermitianEigensystem};

/// φ(H(params)).
pub fn activation_observable(ph: &ParamHamiltonian, params: &[f64], act: &Activation) -> Result<CMatrix> {
    eigh(&ph.assemble(params)?)?.matrix_function(|x| act.value(x))
}

/// The objective Tr[φ(H(θ))ρ].
#[derive(Clone, Debug)]
pub struct Objective {
    pub hamiltonian: ParamHamiltonian,
    pub activation: Activation,
    pub rho: DensityMatrix,
}

impl Objective {
    pub fn new(hamiltonian: ParamHamiltonian, activation: Activation, rho: DensityMatrix) -> Result<Self> {
        if rho.dim() != hamiltonian.dim() {
            return Err(Error::DimensionMismatch {
                expected: hamiltonian.dim(),
                found: rho.dim(),
            });
        }
        Ok(Self {
            hamiltonian,
            activation,
            rho,
        })
    }

    pub fn value(&self) -> Result<f64> {
        objective_value(self)
    }

    pub fn gradient(&self) -> Result<Vec<f64>> {
        exact_gradient(self)
    }
}

pub fn objective_value(obj: &Objective) -> Result<f64> {
    let es = eigh(&obj.hamiltonian.matrix())?;
    let v = spectral_expectation(&es, &obj.activation, obj.rho.matrix());
    check_range(&obj.activation, v)?;
    Ok(v)
}

/// Σ_k φ(λ_k)⟨v_k|x|v_k⟩ for Hermitian x.
pub fn spectral_expectation(es: &HermitianEigensystem, act: &Activation, x: &CMatrix) -> f64 {
    let diag = diagonal_in_eigenbasis(es, x);
    es.values
        .iter()
        .zip(&diag)
        .map(|(&l, &p)| act.value(l) * p)
        .sum()
}

/// ⟨v_k|x|v_k⟩ for every eigenvector.
pub fn diagonal_in_eigenbasis(es: &HermitianEigensystem, x: &CMatrix) -> Vec<f64> {
    let xv = x * &es.vectors;
    (0..es.dim())
        .map(|k| es.vectors.column(k).dotc(&xv.column(k)).re)
        .collect()
}

fn check_range(act: &Activation, v: f64) -> Result<()> {
    let tol = 1e-10;
    let ok = match act.kind {
        ActivationKind::Tanh | ActivationKind::Erf => v.abs() <= 1.0 + tol,
        ActivationKind::Fermi => (-tol..=1.0 + tol).contains(&v),
        _ => v.is_finite(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{act} objective {v} outside the activation range")))
    }
}

pub fn exact_gradient(obj: &Objective) -> Result<Vec<f64>> {
    let (_, grad) = value_and_gradient(&obj.hamiltonian, &obj.hamiltonian.theta, &obj.activation, obj.rho.matrix())?;
    Ok(grad)
}

/// Tr[φ(H(params))x] and its gradient in params for any Hermitian x.
///
/// Linear in x, so a weighted sum of states costs one eigendecomposition.
pub fn value_and_gradient(
    ph: &ParamHamiltonian,
    params: &[f64],
    act: &Activation,
    x: &CMatrix,
) -> Result<(f64, Vec<f64>)> {
    let es = eigh(&ph.assemble(params)?)?;
    let value = spectral_expectation(&es, act, x);
    let g = frechet_apply_es(&es, act, x);
    let grad = ph
        .term_matrices()
        .iter()
        .map(|h| trace_product(h, &g).re)
        .collect();
    Ok((value, grad))
}

pub fn finite_diff_gradient(obj: &Objective, h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let ph = &obj.hamiltonian;
    let rho = obj.rho.matrix();
    let eval = |p: &[f64]| -> Result<f64> {
        let es = eigh(&ph.assemble(p)?)?;
        Ok(spectral_expectation(&es, &obj.activation, rho))
    };
    let mut p = ph.theta.clone();
    let mut grad = Vec::with_capacity(p.len());
    for j in 0..p.len() {
        let base = p[j];
        p[j] = base + h;
        let up = eval(&p)?;
        p[j] = base - h;
        let down = eval(&p)?;
        p[j] = base;
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Fréchet derivative Dφ(H)[X] = Σ_{k,l} φ^{[1]}(λ_k, λ_l) Π_k X Π_l.
pub fn frechet_apply(h: &CMatrix, act: &Activation, x: &CMatrix) -> Result<CMatrix> {
    if h.nrows() != x.nrows() || x.nrows() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            found: x.nrows(),
        });
    }
    Ok(frechet_apply_es(&eigh(h)?, act, x))
}

pub fn frechet_apply_es(es: &HermitianEigensystem, act: &Activation, x: &CMatrix) -> CMatrix {
    let mut xe = es.to_eigenbasis(x);
    let d = es.dim();
    for k in 0..d {
        for l in 0..d {
            xe[(k, l)] *= c64(act.divided_difference(es.values[k], es.values[l]), 0.0);
        }
    }
    es.from_eigenbasis(&xe)
}
