//! Dense complex linear algebra on d = 2^n dimensional spaces.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

const HERMITIAN_TOL: f64 = 1e-10;
const STATE_TOL: f64 = 1e-10;

pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Tr[a·b] without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let d = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Largest entry of |M − M†|.
pub fn asymmetry(m: &CMatrix) -> f64 {
    let d = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn hermitian_part(m: &CMatrix) -> Result<CMatrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let asym = asymmetry(m);
    if asym > HERMITIAN_TOL * max_abs(m) {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    Ok((m + m.adjoint()).scale(0.5))
}

/// Eigenvalues in ascending order with matching column eigenvectors.
#[derive(Clone, Debug)]
pub struct HermitianEigensystem {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn eigh(m: &CMatrix) -> Result<HermitianEigensystem> {
    let h = hermitian_part(m)?;
    let d = h.nrows();
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEigensystem { values, vectors })
}

impl HermitianEigensystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// V · diag(w) · V† for complex weights.
    pub fn compose(&self, weights: &[C64]) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (k, w) in weights.iter().enumerate() {
            let mut col = scaled.column_mut(k);
            col *= *w;
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let w: Vec<C64> = self.values.iter().map(|&l| c64(l, 0.0)).collect();
        self.compose(&w)
    }

    /// V† X V.
    pub fn to_eigenbasis(&self, x: &CMatrix) -> CMatrix {
        self.vectors.adjoint() * x * &self.vectors
    }

    /// V X V†.
    pub fn from_eigenbasis(&self, x: &CMatrix) -> CMatrix {
        &self.vectors * x * self.vectors.adjoint()
    }

    pub fn matrix_function(&self, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
        let mut w = Vec::with_capacity(self.dim());
        for &l in &self.values {
            let v = f(l);
            if !v.is_finite() {
                return Err(Error::NonFinite { eigenvalue: l });
            }
            w.push(c64(v, 0.0));
        }
        Ok(self.compose(&w))
    }

    /// e^{−iHt}.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let w: Vec<C64> = self
            .values
            .iter()
            .map(|&l| C64::from_polar(1.0, -l * t))
            .collect();
        self.compose(&w)
    }
}

pub fn matrix_function(es: &HermitianEigensystem, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    es.matrix_function(f)
}

pub fn propagator(es: &HermitianEigensystem, t: f64) -> CMatrix {
    es.propagator(t)
}

/// 𝒰_t(ρ) = e^{−iHt} ρ e^{iHt}.
pub fn evolve(es: &HermitianEigensystem, rho: &CMatrix, t: f64) -> CMatrix {
    let u = es.propagator(t);
    &u * rho * u.adjoint()
}

/// Positive unit-trace Hermitian matrix.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let h = hermitian_part(&m).map_err(|e| match e {
            Error::NotHermitian { asymmetry } => {
                Error::InvalidState(format!("not Hermitian (asymmetry {asymmetry:e})"))
            }
            other => other,
        })?;
        let tr: f64 = (0..h.nrows()).map(|i| h[(i, i)].re).sum();
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let es = eigh(&h)?;
        if let Some(&low) = es.values.first() {
            if low < -STATE_TOL {
                return Err(Error::InvalidState(format!("negative eigenvalue {low:e}")));
            }
        }
        Ok(Self { matrix: h })
    }

    /// |ψ⟩⟨ψ| after normalizing ψ.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let v = psi.unscale(norm);
        Ok(Self {
            matrix: &v * v.adjoint(),
        })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: identity(dim).unscale(dim as f64),
        }
    }

    /// Uniformly random pure state: a normalized complex Gaussian vector.
    pub fn haar_random<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Self {
        use rand_distr::StandardNormal;
        loop {
            let psi = CVector::from_fn(dim, |_, _| {
                c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            if let Ok(s) = Self::pure(&psi) {
                return s;
            }
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Mixture Σ w_i ρ_i with nonnegative weights summing to one.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let dim = parts
            .first()
            .map(|(_, r)| r.dim())
            .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
        let mut m = CMatrix::zeros(dim, dim);
        for (w, r) in parts {
            if r.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.dim(),
                });
            }
            m += r.matrix.scale(*w);
        }
        Self::new(m)
    }
}

/// Tr[obs·ρ], rejecting an imaginary residue above 1e−10.
pub fn expectation(obs: &CMatrix, rho: &DensityMatrix) -> Result<f64> {
    if obs.nrows() != rho.dim() || obs.ncols() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: obs.nrows(),
        });
    }
    let v = trace_product(obs, rho.matrix());
    if v.im.abs() > 1e-10 * (1.0 + max_abs(obs)) {
        return Err(Error::NotHermitian { asymmetry: v.im.abs() });
    }
    Ok(v.re)
}

/// Projective measurement: distinct outcomes and their spectral projectors.
#[derive(Clone, Debug)]
pub struct Measurement {
    pub outcomes: Vec<f64>,
    pub projectors: Vec<CMatrix>,
}

impl Measurement {
    /// Groups eigenvalues closer than 1e−9 into one outcome.
    pub fn from_hermitian(m: &CMatrix) -> Result<Self> {
        let es = eigh(m)?;
        let d = es.dim();
        let mut outcomes: Vec<f64> = Vec::new();
        let mut projectors: Vec<CMatrix> = Vec::new();
        let mut k = 0;
        while k < d {
            let mut end = k + 1;
            while end < d && es.values[end] - es.values[k] < 1e-9 {
                end += 1;
            }
            let mean = es.values[k..end].iter().sum::<f64>() / (end - k) as f64;
            let mut p = CMatrix::zeros(d, d);
            for c in k..end {
                let v = es.vectors.column(c);
                p += &v * v.adjoint();
            }
            outcomes.push(mean);
            projectors.push(p);
            k = end;
        }
        Ok(Self {
            outcomes,
            projectors,
        })
    }

    /// Outcomes ±1 with projectors (I ± P)/2 for a Hermitian involution P.
    pub fn involution(p: &CMatrix) -> Self {
        let d = p.nrows();
        let id = identity(d);
        if (p - &id).iter().all(|z| z.norm() < 1e-12) {
            return Self {
                outcomes: vec![1.0],
                projectors: vec![id],
            };
        }
        if (p + &id).iter().all(|z| z.norm() < 1e-12) {
            return Self {
                outcomes: vec![-1.0],
                projectors: vec![id],
            };
        }
        Self {
            outcomes: vec![-1.0, 1.0],
            projectors: vec![(&id - p).scale(0.5), (&id + p).scale(0.5)],
        }
    }

    pub fn max_abs_outcome(&self) -> f64 {
        self.outcomes.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    /// Born probabilities Tr[Π_k ρ].
    pub fn probabilities(&self, rho: &CMatrix) -> Result<Vec<f64>> {
        let probs: Vec<f64> = self
            .projectors
            .iter()
            .map(|p| trace_product(p, rho).re)
            .collect();
        check_distribution(&probs)?;
        Ok(probs)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, rho: &CMatrix) -> Result<f64> {
        let probs = self.probabilities(rho)?;
        Ok(self.outcomes[sample_index(rng, &probs)])
    }
}

pub(crate) fn check_distribution(probs: &[f64]) -> Result<()> {
    let tol = 1e-10;
    let mut total = 0.0;
    for &p in probs {
        if !(p >= -tol && p <= 1.0 + tol) {
            return Err(Error::Numeric(format!("probability {p} outside [0,1]")));
        }
        total += p;
    }
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::Numeric(format!("probabilities sum to {total}")));
    }
    Ok(())
}

/// Draws an index from nonnegative weights that sum to approximately one.
pub(crate) fn sample_index<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let total: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}
