//! Pauli strings, parameterized Hamiltonians H(θ) = Σ_j θ_j H_j and the named models.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qlinalg::{c64, CMatrix, Measurement};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn matrix(self) -> CMatrix {
        let (o, l, i) = (c64(0., 0.), c64(1., 0.), c64(0., 1.));
        let v = match self {
            Pauli::I => [l, o, o, l],
            Pauli::X => [o, l, l, o],
            Pauli::Y => [o, -i, i, o],
            Pauli::Z => [l, o, o, -l],
        };
        CMatrix::from_row_slice(2, 2, &v)
    }

    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis; qubit 1 is the leftmost (most significant) factor.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::InvalidArgument("empty Pauli string".into()));
        }
        Ok(Self { letters })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            letters: vec![Pauli::I; n],
        }
    }

    /// Identity except the given (0-based) sites.
    pub fn with_sites(n: usize, sites: &[(usize, Pauli)]) -> Self {
        let mut letters = vec![Pauli::I; n];
        for &(q, p) in sites {
            letters[q] = p;
        }
        Self { letters }
    }

    pub fn n(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn is_diagonal(&self) -> bool {
        self.letters.iter().all(|p| matches!(p, Pauli::I | Pauli::Z))
    }

    pub fn matrix(&self) -> CMatrix {
        let mut m = self.letters[0].matrix();
        for p in &self.letters[1..] {
            m = m.kronecker(&p.matrix());
        }
        m
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::InvalidArgument(format!(
                    "invalid Pauli letter '{other}' in \"{s}\""
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(letters)
    }
}

/// H(θ) = Σ_j θ_j H_j with cached dense term matrices.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawHamiltonian", into = "RawHamiltonian")]
pub struct ParamHamiltonian {
    n: usize,
    terms: Vec<PauliString>,
    pub theta: Vec<f64>,
    term_matrices: Vec<CMatrix>,
    measurements: Vec<Measurement>,
}

#[derive(Serialize, Deserialize)]
struct RawHamiltonian {
    n: usize,
    terms: Vec<String>,
    theta: Vec<f64>,
}

impl TryFrom<RawHamiltonian> for ParamHamiltonian {
    type Error = Error;

    fn try_from(raw: RawHamiltonian) -> Result<Self> {
        let terms = raw
            .terms
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<PauliString>>>()?;
        ParamHamiltonian::new(raw.n, terms, raw.theta)
    }
}

impl From<ParamHamiltonian> for RawHamiltonian {
    fn from(ph: ParamHamiltonian) -> Self {
        RawHamiltonian {
            n: ph.n,
            terms: ph.terms.iter().map(|t| t.to_string()).collect(),
            theta: ph.theta,
        }
    }
}

impl ParamHamiltonian {
    pub fn new(n: usize, terms: Vec<PauliString>, theta: Vec<f64>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("Hamiltonian needs at least one term".into()));
        }
        if n == 0 || n > 12 {
            return Err(Error::InvalidArgument(format!("qubit count {n} outside 1..=12")));
        }
        if let Some(t) = terms.iter().find(|t| t.n() != n) {
            return Err(Error::InvalidArgument(format!(
                "term {t} acts on {} qubits, expected {n}",
                t.n()
            )));
        }
        if theta.len() != terms.len() {
            return Err(Error::DimensionMismatch {
                expected: terms.len(),
                found: theta.len(),
            });
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        let term_matrices: Vec<CMatrix> = terms.iter().map(|t| t.matrix()).collect();
        let measurements = term_matrices.iter().map(Measurement::involution).collect();
        Ok(Self {
            n,
            terms,
            theta,
            term_matrices,
            measurements,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    pub fn term_matrix(&self, j: usize) -> &CMatrix {
        &self.term_matrices[j]
    }

    pub fn term_matrices(&self) -> &[CMatrix] {
        &self.term_matrices
    }

    /// Projective measurement of H_j (outcomes ±1).
    pub fn term_measurement(&self, j: usize) -> &Measurement {
        &self.measurements[j]
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != self.num_terms() {
            return Err(Error::DimensionMismatch {
                expected: self.num_terms(),
                found: theta.len(),
            });
        }
        let mut out = self.clone();
        out.theta = theta;
        Ok(out)
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(PauliString::is_diagonal)
    }

    pub fn assemble(&self, params: &[f64]) -> Result<CMatrix> {
        if params.len() != self.num_terms() {
            return Err(Error::DimensionMismatch {
                expected: self.num_terms(),
                found: params.len(),
            });
        }
        let d = self.dim();
        let mut h = CMatrix::zeros(d, d);
        for (m, &p) in self.term_matrices.iter().zip(params) {
            if p != 0.0 {
                h.zip_apply(m, |a, b| *a += b * p);
            }
        }
        Ok(h)
    }

    pub fn matrix(&self) -> CMatrix {
        self.assemble(&self.theta).expect("theta length is an invariant")
    }

    pub fn masked(&self, j: usize, lambda: f64) -> Result<Vec<f64>> {
        masked(&self.theta, j, lambda)
    }
}

/// θ^{(j)}(λ) = (0,…,0, λθ_j, θ_{j+1},…,θ_J) with 0-based j.
pub fn masked(theta: &[f64], j: usize, lambda: f64) -> Result<Vec<f64>> {
    if j >= theta.len() {
        return Err(Error::InvalidArgument(format!(
            "term index {j} out of range for J = {}",
            theta.len()
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0,1]")));
    }
    let mut v = theta.to_vec();
    v[..j].iter_mut().for_each(|x| *x = 0.0);
    v[j] *= lambda;
    Ok(v)
}

/// (‖θ‖₁, q) with q(j) = |θ_j|/‖θ‖₁.
pub fn l1_and_term_distribution(params: &[f64]) -> Result<(f64, Vec<f64>)> {
    let norm: f64 = params.iter().map(|x| x.abs()).sum();
    if !(norm > 0.0) {
        return Err(Error::InvalidArgument(
            "all-zero parameter vector has no term distribution".into(),
        ));
    }
    Ok((norm, params.iter().map(|x| x.abs() / norm).collect()))
}

/// (‖θ^{(j)}(λ)‖₁, q_{j,λ}): the term distribution of the masked vector.
pub fn conditional_term_distribution(theta: &[f64], j: usize, lambda: f64) -> Result<(f64, Vec<f64>)> {
    l1_and_term_distribution(&masked(theta, j, lambda)?)
}

fn require_chain(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "model needs at least 2 qubits, got {n}"
        )));
    }
    Ok(())
}

fn check_len(name: &str, v: &[f64], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "{name} has {} entries, expected {expected}",
            v.len()
        )));
    }
    Ok(())
}

fn ising_like(n: usize, w_pair: &[f64], w_site: &[f64], b: f64, site: Pauli) -> Result<ParamHamiltonian> {
    require_chain(n)?;
    check_len("W", w_pair, n - 1)?;
    check_len("w", w_site, n)?;
    let mut terms = Vec::with_capacity(2 * n);
    let mut theta = Vec::with_capacity(2 * n);
    for i in 0..n - 1 {
        terms.push(PauliString::with_sites(n, &[(i, Pauli::Z), (i + 1, Pauli::Z)]));
        theta.push(w_pair[i]);
    }
    for i in 0..n {
        terms.push(PauliString::with_sites(n, &[(i, site)]));
        theta.push(w_site[i]);
    }
    terms.push(PauliString::identity(n));
    theta.push(b);
    ParamHamiltonian::new(n, terms, theta)
}

/// Transverse-field Ising model: ZZ on neighbors, X on each site, identity offset b.
pub fn build_tfim(n: usize, w_pair: &[f64], w_site: &[f64], b: f64) -> Result<ParamHamiltonian> {
    ising_like(n, w_pair, w_site, b, Pauli::X)
}

/// Classical Ising model: as TFIM with Z single-site terms (diagonal).
pub fn build_im(n: usize, w_pair: &[f64], w_site: &[f64], b: f64) -> Result<ParamHamiltonian> {
    ising_like(n, w_pair, w_site, b, Pauli::Z)
}

/// Heisenberg chain: αα neighbor couplings and single-site α for α ∈ {x,y,z}; J = 6n−3.
///
/// `w_pair` is ordered (XX,YY,ZZ) per bond, `w_site` (X,Y,Z) per site.
pub fn build_heisenberg(n: usize, w_pair: &[f64], w_site: &[f64]) -> Result<ParamHamiltonian> {
    require_chain(n)?;
    check_len("W", w_pair, 3 * (n - 1))?;
    check_len("w", w_site, 3 * n)?;
    let axes = [Pauli::X, Pauli::Y, Pauli::Z];
    let mut terms = Vec::with_capacity(6 * n - 3);
    let mut theta = Vec::with_capacity(6 * n - 3);
    for i in 0..n - 1 {
        for (a, &p) in axes.iter().enumerate() {
            terms.push(PauliString::with_sites(n, &[(i, p), (i + 1, p)]));
            theta.push(w_pair[3 * i + a]);
        }
    }
    for i in 0..n {
        for (a, &p) in axes.iter().enumerate() {
            terms.push(PauliString::with_sites(n, &[(i, p)]));
            theta.push(w_site[3 * i + a]);
        }
    }
    ParamHamiltonian::new(n, terms, theta)
}

/// Fully connected Ising model: Z_iZ_j for every pair i<j plus Z_i; J = n(n+1)/2.
pub fn build_fcim(n: usize, w_pair: &[f64], w_site: &[f64]) -> Result<ParamHamiltonian> {
    require_chain(n)?;
    check_len("W", w_pair, n * (n - 1) / 2)?;
    check_len("w", w_site, n)?;
    let mut terms = Vec::new();
    let mut theta = Vec::new();
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            terms.push(PauliString::with_sites(n, &[(i, Pauli::Z), (j, Pauli::Z)]));
            theta.push(w_pair[k]);
            k += 1;
        }
    }
    for i in 0..n {
        terms.push(PauliString::with_sites(n, &[(i, Pauli::Z)]));
        theta.push(w_site[i]);
    }
    ParamHamiltonian::new(n, terms, theta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Tfim,
    Im,
    Heisenberg,
    Fcim,
}

impl ModelFamily {
    pub fn num_params(self, n: usize) -> usize {
        match self {
            ModelFamily::Tfim | ModelFamily::Im => 2 * n,
            ModelFamily::Heisenberg => 6 * n - 3,
            ModelFamily::Fcim => n * (n + 1) / 2,
        }
    }

    /// Builds the model with a flat parameter vector in term order.
    pub fn build(self, n: usize, theta: &[f64]) -> Result<ParamHamiltonian> {
        check_len("theta", theta, self.num_params(n))?;
        match self {
            ModelFamily::Tfim => build_tfim(n, &theta[..n - 1], &theta[n - 1..2 * n - 1], theta[2 * n - 1]),
            ModelFamily::Im => build_im(n, &theta[..n - 1], &theta[n - 1..2 * n - 1], theta[2 * n - 1]),
            ModelFamily::Heisenberg => build_heisenberg(n, &theta[..3 * (n - 1)], &theta[3 * (n - 1)..]),
            ModelFamily::Fcim => {
                let p = n * (n - 1) / 2;
                build_fcim(n, &theta[..p], &theta[p..])
            }
        }
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tfim" => Ok(ModelFamily::Tfim),
            "im" => Ok(ModelFamily::Im),
            "heisenberg" | "heis" => Ok(ModelFamily::Heisenberg),
            "fcim" => Ok(ModelFamily::Fcim),
            other => Err(Error::InvalidArgument(format!("unknown model family \"{other}\""))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::{eigh, identity, max_abs};

    #[test]
    fn pauli_strings_are_hermitian_involutions() {
        for s in ["X", "Y", "Z", "XY", "ZIY", "YYX"] {
            let m: PauliString = s.parse().unwrap();
            let p = m.matrix();
            assert!(max_abs(&(&p - p.adjoint())) < 1e-12);
            assert!(max_abs(&(&p * &p - identity(p.nrows()))) < 1e-12);
        }
        assert!("XQ".parse::<PauliString>().is_err());
    }

    #[test]
    fn assemble_examples() {
        let ph = ParamHamiltonian::new(1, vec!["Z".parse().unwrap()], vec![2.0]).unwrap();
        let h = ph.matrix();
        assert_eq!(h[(0, 0)].re, 2.0);
        assert_eq!(h[(1, 1)].re, -2.0);
        assert!(max_abs(&ph.assemble(&[0.0]).unwrap()) == 0.0);
        let tfim = build_tfim(2, &[1.0], &[0.0, 0.0], 0.0).unwrap();
        let zz: PauliString = "ZZ".parse().unwrap();
        assert!(max_abs(&(tfim.matrix() - zz.matrix())) < 1e-15);
        assert!(ph.assemble(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn model_term_counts() {
        let t = build_tfim(2, &[0.1], &[0.2, 0.3], 0.4).unwrap();
        let names: Vec<String> = t.terms().iter().map(|p| p.to_string()).collect();
        assert_eq!(names, ["ZZ", "XI", "IX", "II"]);
        assert_eq!(build_heisenberg(2, &[0.0; 3], &[0.0; 6]).unwrap().num_terms(), 9);
        assert_eq!(build_heisenberg(7, &[0.0; 18], &[0.0; 21]).unwrap().num_terms(), 39);
        assert_eq!(build_fcim(2, &[0.0], &[0.0; 2]).unwrap().num_terms(), 3);
        assert_eq!(build_fcim(7, &[0.0; 21], &[0.0; 7]).unwrap().num_terms(), 28);
        assert!(build_tfim(1, &[], &[0.0], 0.0).is_err());
        assert!(build_heisenberg(1, &[], &[0.0; 3]).is_err());
    }

    #[test]
    fn tfim_three_site_zz_spectrum() {
        let t = build_tfim(3, &[1.0, 1.0], &[0.0; 3], 0.0).unwrap();
        let es = eigh(&t.matrix()).unwrap();
        let mut expected: Vec<f64> = (0..8u32)
            .map(|b| {
                let z = |q: u32| if b >> (2 - q) & 1 == 0 { 1.0 } else { -1.0 };
                z(0) * z(1) + z(1) * z(2)
            })
            .collect();
        expected.sort_by(f64::total_cmp);
        assert_eq!(expected, vec![-2.0, -2.0, 0.0, 0.0, 0.0, 0.0, 2.0, 2.0]);
        for (a, b) in es.values.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn im_is_diagonal_with_classical_energies() {
        let im = build_im(2, &[1.0], &[1.0, 1.0], 0.0).unwrap();
        let h = im.matrix();
        let diag: Vec<f64> = (0..4).map(|i| h[(i, i)].re).collect();
        assert_eq!(diag, vec![3.0, -1.0, -1.0, -1.0]);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(h[(i, j)].norm(), 0.0);
                }
            }
        }
        assert!(im.is_diagonal());
        let fc = build_fcim(3, &[0.3, -0.2, 0.5], &[0.1, 0.2, 0.3]).unwrap();
        assert!(fc.is_diagonal());
        let h = fc.matrix();
        assert!((0..8).all(|i| (0..8).all(|j| i == j || h[(i, j)].norm() == 0.0)));
    }

    #[test]
    fn masking_examples() {
        let theta = [2.0, -3.0, 5.0];
        assert_eq!(masked(&theta, 0, 1.0).unwrap(), theta.to_vec());
        assert_eq!(masked(&theta, 2, 0.0).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(masked(&theta, 1, 0.5).unwrap(), vec![0.0, -1.5, 5.0]);
        assert!(masked(&theta, 3, 0.5).is_err());
        assert!(masked(&theta, 0, 1.5).is_err());
    }

    #[test]
    fn term_distributions() {
        let (n, q) = l1_and_term_distribution(&[1.0, -1.0]).unwrap();
        assert_eq!((n, q), (2.0, vec![0.5, 0.5]));
        let (_, q) = l1_and_term_distribution(&[3.0, 0.0, 1.0]).unwrap();
        assert_eq!(q, vec![0.75, 0.0, 0.25]);
        let (n, q) = conditional_term_distribution(&[2.0, 2.0], 0, 0.5).unwrap();
        assert_eq!(n, 3.0);
        assert!((q[0] - 1.0 / 3.0).abs() < 1e-15 && (q[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!(l1_and_term_distribution(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let ph = build_heisenberg(2, &[0.1, 0.2, 0.3], &[0.4, 0.5, 0.6, 0.7, 0.8, 0.9]).unwrap();
        let s = serde_json::to_string(&ph).unwrap();
        let back: ParamHamiltonian = serde_json::from_str(&s).unwrap();
        assert_eq!(back.theta, ph.theta);
        assert_eq!(back.terms(), ph.terms());
        let bad = r#"{"n":2,"terms":["ZZ","X"],"theta":[1,2]}"#;
        assert!(serde_json::from_str::<ParamHamiltonian>(bad).is_err());
    }

    #[test]
    fn family_builder_matches_direct() {
        let th: Vec<f64> = (0..9).map(|i| i as f64 * 0.1).collect();
        let a = ModelFamily::Heisenberg.build(2, &th).unwrap();
        let b = build_heisenberg(2, &th[..3], &th[3..]).unwrap();
        assert!(max_abs(&(a.matrix() - b.matrix())) == 0.0);
        assert_eq!(ModelFamily::Fcim.num_params(3), 6);
        assert_eq!(ModelFamily::Tfim.build(3, &[0.0; 6]).unwrap().num_terms(), 6);
    }
}
