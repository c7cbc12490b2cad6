//! Labeled quantum datasets, squared and logistic losses, gradient descent and the
//! function-approximation and classification protocols.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activations::{Activation, ActivationKind};
use crate::densities::stream_rng;
use crate::error::{Error, Result};
use crate::hamiltonians::{ModelFamily, ParamHamiltonian};
use crate::observables::{frechet_apply_es, spectral_expectation};
use crate::qlinalg::{c64, eigh, trace_product, CMatrix, CVector, DensityMatrix, HermitianEigensystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

#[derive(Clone, Debug)]
pub struct LabeledDataset {
    pub items: Vec<(DensityMatrix, f64)>,
    pub task: Task,
}

impl LabeledDataset {
    /// Classification labels must be ±1; regression labels finite.
    pub fn new(items: Vec<(DensityMatrix, f64)>, task: Task) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidArgument("dataset is empty".into()));
        }
        let dim = items[0].0.dim();
        for (m, (rho, y)) in items.iter().enumerate() {
            if rho.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: rho.dim(),
                });
            }
            let ok = match task {
                Task::Classification => *y == 1.0 || *y == -1.0,
                Task::Regression => y.is_finite(),
            };
            if !ok {
                return Err(Error::InvalidArgument(format!("label {y} of item {m} is invalid for {task:?}")));
            }
        }
        Ok(Self { items, task })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.items[0].0.dim()
    }
}

fn ket(amps: &[(f64, f64)]) -> CVector {
    CVector::from_iterator(amps.len(), amps.iter().map(|&(re, im)| c64(re, im)))
}

fn kron_all(factors: &[&CVector]) -> CVector {
    factors
        .iter()
        .fold(CVector::from_element(1, c64(1.0, 0.0)), |acc, f| acc.kronecker(*f))
}

/// All 2ⁿ product states with every qubit in one of the two given single-qubit states.
fn product_basis(n: usize, pair: [CVector; 2]) -> Vec<DensityMatrix> {
    (0..1usize << n)
        .map(|bits| {
            let factors: Vec<&CVector> = (0..n).map(|q| &pair[(bits >> (n - 1 - q)) & 1]).collect();
            DensityMatrix::pure(&kron_all(&factors)).expect("unit vector")
        })
        .collect()
}

pub fn computational_states(n: usize) -> Vec<DensityMatrix> {
    product_basis(n, [ket(&[(1., 0.), (0., 0.)]), ket(&[(0., 0.), (1., 0.)])])
}

pub fn hadamard_states(n: usize) -> Vec<DensityMatrix> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    product_basis(n, [ket(&[(h, 0.), (h, 0.)]), ket(&[(h, 0.), (-h, 0.)])])
}

pub fn y_basis_states(n: usize) -> Vec<DensityMatrix> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    product_basis(n, [ket(&[(h, 0.), (0., h)]), ket(&[(h, 0.), (0., -h)])])
}

/// √p|0…0⟩ + √(1−p)|1…1⟩.
pub fn biased_cat(n: usize, p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p = {p} outside [0,1]")));
    }
    let d = 1usize << n;
    let mut v = CVector::zeros(d);
    v[0] = c64(p.sqrt(), 0.0);
    v[d - 1] = c64((1.0 - p).sqrt(), 0.0);
    DensityMatrix::pure(&v)
}

/// Φ±, Ψ± for n = 2; the GHZ pair (|0…0⟩ ± |1…1⟩)/√2 otherwise.
pub fn entangled_states(n: usize) -> Vec<DensityMatrix> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let d = 1usize << n;
    let pair = |a: usize, b: usize, s: f64| {
        let mut v = CVector::zeros(d);
        v[a] = c64(h, 0.0);
        v[b] = c64(s * h, 0.0);
        DensityMatrix::pure(&v).expect("unit vector")
    };
    let mut out = vec![pair(0, d - 1, 1.0), pair(0, d - 1, -1.0)];
    if n == 2 {
        out.push(pair(1, 2, 1.0));
        out.push(pair(1, 2, -1.0));
    }
    out
}

pub const CAT_BIASES: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

/// Function-approximation roster: computational, Hadamard, Bell (GHZ for n ≠ 2), biased cat states, I/d.
pub fn regression_roster(n: usize) -> Vec<DensityMatrix> {
    let mut out = computational_states(n);
    out.extend(hadamard_states(n));
    out.extend(entangled_states(n));
    out.extend(CAT_BIASES.iter().map(|&p| biased_cat(n, p).expect("p in range")));
    out.push(DensityMatrix::maximally_mixed(1 << n));
    out
}

/// Classification roster: Z-, X- and Y-basis product states in equal part.
pub fn classification_roster(n: usize) -> Vec<DensityMatrix> {
    let mut out = computational_states(n);
    out.extend(hadamard_states(n));
    out.extend(y_basis_states(n));
    out
}

/// Every roster state above, Y basis included.
pub fn standard_roster(n: usize) -> Vec<DensityMatrix> {
    let mut out = regression_roster(n);
    out.extend(y_basis_states(n));
    out
}

/// Target parameters ζ with entries uniform on [−2, 2].
pub fn random_target<R: Rng + ?Sized>(rng: &mut R, family: ModelFamily, n: usize) -> Result<ParamHamiltonian> {
    let zeta: Vec<f64> = (0..family.num_params(n)).map(|_| rng.random_range(-2.0..=2.0)).collect();
    family.build(n, &zeta)
}

fn sign_label(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn map_items<T, F>(items: &[(DensityMatrix, f64)], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&(DensityMatrix, f64)) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Labels Tr[φ(H★)ρ_m], or their signs for classification (ties give +1).
pub fn generate_dataset(
    target: &ParamHamiltonian,
    act: &Activation,
    states: Vec<DensityMatrix>,
    task: Task,
) -> Result<LabeledDataset> {
    let es = eigh(&target.matrix())?;
    let items: Vec<(DensityMatrix, f64)> = states.into_iter().map(|rho| (rho, 0.0)).collect();
    for (rho, _) in &items {
        if rho.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                found: rho.dim(),
            });
        }
    }
    let labels = map_items(&items, |(rho, _)| spectral_expectation(&es, act, rho.matrix()));
    let items = items
        .into_iter()
        .zip(labels)
        .map(|((rho, _), z)| {
            let y = match task {
                Task::Classification => sign_label(z),
                Task::Regression => z,
            };
            (rho, y)
        })
        .collect();
    LabeledDataset::new(items, task)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Squared,
    Logistic,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Squared => "squared",
            LossKind::Logistic => "logistic",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "squared" | "sq" => Ok(LossKind::Squared),
            "logistic" | "log" => Ok(LossKind::Logistic),
            other => Err(Error::InvalidArgument(format!("unknown loss \"{other}\""))),
        }
    }
}

/// A loss with its activation; the logistic loss only uses the temperature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Loss {
    Squared(Activation),
    Logistic { temperature: f64 },
}

impl Loss {
    pub fn new(kind: LossKind, activation: Activation) -> Self {
        match kind {
            LossKind::Squared => Loss::Squared(activation),
            LossKind::Logistic => Loss::Logistic {
                temperature: activation.temperature,
            },
        }
    }

    pub fn kind(&self) -> LossKind {
        match self {
            Loss::Squared(_) => LossKind::Squared,
            Loss::Logistic { .. } => LossKind::Logistic,
        }
    }
}

fn check_model(ds: &LabeledDataset, ph: &ParamHamiltonian) -> Result<()> {
    if ds.dim() != ph.dim() {
        return Err(Error::DimensionMismatch {
            expected: ph.dim(),
            found: ds.dim(),
        });
    }
    Ok(())
}

/// T·ln(1 + e^{−yx/T}) as an activation of x.
fn logistic_branch(label: f64, temperature: f64) -> Activation {
    let kind = if label > 0.0 {
        ActivationKind::Logloss
    } else {
        ActivationKind::Softplus
    };
    Activation::new(kind, temperature).expect("validated temperature")
}

fn gradient_from(ph: &ParamHamiltonian, g: &CMatrix) -> Vec<f64> {
    ph.term_matrices().iter().map(|h| trace_product(h, g).re).collect()
}

fn weighted_sum(ds: &LabeledDataset, weights: &[f64]) -> CMatrix {
    let d = ds.dim();
    let mut x = CMatrix::zeros(d, d);
    for ((rho, _), w) in ds.items.iter().zip(weights) {
        if *w != 0.0 {
            x += rho.matrix() * c64(*w, 0.0);
        }
    }
    x
}

fn squared_parts(ds: &LabeledDataset, es: &HermitianEigensystem, act: &Activation) -> Vec<f64> {
    map_items(&ds.items, |(rho, y)| spectral_expectation(es, act, rho.matrix()) - y)
}

/// (1/M) Σ_m (Tr[φ(H(θ))ρ_m] − y_m)².
pub fn squared_loss(ds: &LabeledDataset, ph: &ParamHamiltonian, params: &[f64], act: &Activation) -> Result<f64> {
    check_model(ds, ph)?;
    let es = eigh(&ph.assemble(params)?)?;
    let r = squared_parts(ds, &es, act);
    Ok(r.iter().map(|e| e * e).sum::<f64>() / ds.len() as f64)
}

/// (1/M) Σ_m T·Tr[ln(I + e^{−y_m H(θ)/T})ρ_m].
pub fn logistic_loss(ds: &LabeledDataset, ph: &ParamHamiltonian, params: &[f64], temperature: f64) -> Result<f64> {
    check_model(ds, ph)?;
    Activation::new(ActivationKind::Logloss, temperature)?;
    let es = eigh(&ph.assemble(params)?)?;
    let parts = map_items(&ds.items, |(rho, y)| {
        spectral_expectation(&es, &logistic_branch(*y, temperature), rho.matrix())
    });
    Ok(parts.iter().sum::<f64>() / ds.len() as f64)
}

/// Loss value and its exact gradient at `params`.
pub fn loss_and_gradient(ds: &LabeledDataset, ph: &ParamHamiltonian, params: &[f64], loss: &Loss) -> Result<(f64, Vec<f64>)> {
    check_model(ds, ph)?;
    let es = eigh(&ph.assemble(params)?)?;
    let m = ds.len() as f64;
    match *loss {
        Loss::Squared(act) => {
            let r = squared_parts(ds, &es, &act);
            let value = r.iter().map(|e| e * e).sum::<f64>() / m;
            let w: Vec<f64> = r.iter().map(|e| 2.0 * e / m).collect();
            let g = frechet_apply_es(&es, &act, &weighted_sum(ds, &w));
            Ok((value, gradient_from(ph, &g)))
        }
        Loss::Logistic { temperature } => {
            let pos = logistic_branch(1.0, temperature);
            let neg = logistic_branch(-1.0, temperature);
            let parts = map_items(&ds.items, |(rho, y)| {
                spectral_expectation(&es, &logistic_branch(*y, temperature), rho.matrix())
            });
            let value = parts.iter().sum::<f64>() / m;
            let wp: Vec<f64> = ds.items.iter().map(|(_, y)| if *y > 0.0 { 1.0 / m } else { 0.0 }).collect();
            let wn: Vec<f64> = ds.items.iter().map(|(_, y)| if *y > 0.0 { 0.0 } else { 1.0 / m }).collect();
            let g = frechet_apply_es(&es, &pos, &weighted_sum(ds, &wp)) + frechet_apply_es(&es, &neg, &weighted_sum(ds, &wn));
            Ok((value, gradient_from(ph, &g)))
        }
    }
}

pub fn loss_gradient(ds: &LabeledDataset, ph: &ParamHamiltonian, params: &[f64], loss: &Loss) -> Result<Vec<f64>> {
    Ok(loss_and_gradient(ds, ph, params, loss)?.1)
}

pub fn loss_value(ds: &LabeledDataset, ph: &ParamHamiltonian, params: &[f64], loss: &Loss) -> Result<f64> {
    match *loss {
        Loss::Squared(act) => squared_loss(ds, ph, params, &act),
        Loss::Logistic { temperature } => logistic_loss(ds, ph, params, temperature),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    #[serde(rename = "T")]
    pub temperature: f64,
    pub max_iterations: usize,
    /// Stop once |L_t − L_{t−1}| falls below this.
    pub tolerance: f64,
    /// Initial θ entries are uniform on [−init_range, init_range].
    pub init_range: f64,
    pub divergence_threshold: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            temperature: 2.0,
            max_iterations: 500,
            tolerance: 1e-8,
            init_range: 1.0,
            divergence_threshold: 1e6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, v: f64| Error::InvalidArgument(format!("config.{key} = {v} is invalid"));
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(bad("learning_rate", self.learning_rate));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(bad("T", self.temperature));
        }
        if !(self.tolerance >= 0.0) {
            return Err(bad("tolerance", self.tolerance));
        }
        if !(self.init_range >= 0.0) || !self.init_range.is_finite() {
            return Err(bad("init_range", self.init_range));
        }
        if !(self.divergence_threshold > 0.0) {
            return Err(bad("divergence_threshold", self.divergence_threshold));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("config.max_iterations must be positive".into()));
        }
        Ok(())
    }

    pub fn initial_theta(&self, len: usize, stream: u64) -> Vec<f64> {
        let mut rng = stream_rng(self.seed, stream);
        let r = self.init_range;
        (0..len)
            .map(|_| if r == 0.0 { 0.0 } else { rng.random_range(-r..=r) })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainTrace {
    /// Loss at θ_t before the t-th update.
    pub losses: Vec<f64>,
    pub theta: Vec<f64>,
    pub converged: bool,
}

impl TrainTrace {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("at least one iteration")
    }
}

/// Gradient descent θ ← θ − η∇L from `theta0`.
pub fn train_from(
    ds: &LabeledDataset,
    model: &ParamHamiltonian,
    theta0: Vec<f64>,
    config: &TrainConfig,
    loss: &Loss,
) -> Result<TrainTrace> {
    config.validate()?;
    if theta0.len() != model.num_terms() {
        return Err(Error::DimensionMismatch {
            expected: model.num_terms(),
            found: theta0.len(),
        });
    }
    let mut theta = theta0;
    let mut losses = Vec::with_capacity(config.max_iterations);
    let mut converged = false;
    for it in 0..config.max_iterations {
        let (l, g) = loss_and_gradient(ds, model, &theta, loss)?;
        if !l.is_finite() || l > config.divergence_threshold {
            return Err(Error::Diverged { iteration: it, loss: l });
        }
        let done = losses.last().is_some_and(|prev: &f64| (l - prev).abs() < config.tolerance);
        losses.push(l);
        if done {
            converged = true;
            break;
        }
        if it + 1 < config.max_iterations {
            for (t, gj) in theta.iter_mut().zip(&g) {
                *t -= config.learning_rate * gj;
            }
        }
    }
    Ok(TrainTrace {
        losses,
        theta,
        converged,
    })
}

/// Gradient descent from θ uniform on the configured range, drawn from stream `stream` of the seed.
pub fn train(ds: &LabeledDataset, model: &ParamHamiltonian, config: &TrainConfig, loss: &Loss, stream: u64) -> Result<TrainTrace> {
    config.validate()?;
    train_from(ds, model, config.initial_theta(model.num_terms(), stream), config, loss)
}

/// sign(Tr[φ(H)ρ]) with ties predicting +1.
pub fn predict(es: &HermitianEigensystem, act: &Activation, rho: &DensityMatrix) -> f64 {
    sign_label(spectral_expectation(es, act, rho.matrix()))
}

/// Fraction of `n_states` Haar-random pure states on which sign Tr[tanh(H(θ)/T)ρ] matches the target's.
pub fn validate_accuracy<R: Rng + ?Sized>(
    rng: &mut R,
    model: &ParamHamiltonian,
    target: &ParamHamiltonian,
    temperature: f64,
    n_states: usize,
) -> Result<f64> {
    if model.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            found: model.dim(),
        });
    }
    if n_states == 0 {
        return Err(Error::InvalidArgument("validation needs at least one state".into()));
    }
    let act = Activation::new(ActivationKind::Tanh, temperature)?;
    let em = eigh(&model.matrix())?;
    let et = eigh(&target.matrix())?;
    let mut hits = 0usize;
    for _ in 0..n_states {
        let rho = DensityMatrix::haar_random(rng, model.dim());
        if predict(&em, &act, &rho) == predict(&et, &act, &rho) {
            hits += 1;
        }
    }
    Ok(hits as f64 / n_states as f64)
}

/// Quantum and classical traces trained on the same dataset.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonTrace {
    pub quantum: TrainTrace,
    pub classical: TrainTrace,
}

impl ComparisonTrace {
    /// (iteration, loss_q, loss_c); a trace that converged early repeats its final loss.
    pub fn rows(&self) -> Vec<(usize, f64, f64)> {
        let len = self.quantum.losses.len().max(self.classical.losses.len());
        let at = |t: &TrainTrace, i: usize| t.losses[i.min(t.losses.len() - 1)];
        (0..len).map(|i| (i, at(&self.quantum, i), at(&self.classical, i))).collect()
    }
}

const QUANTUM_STREAM: u64 = 1;
const CLASSICAL_STREAM: u64 = 2;
const VALIDATION_STREAM: u64 = 3;

/// Trains a quantum and a classical family against one target dataset.
pub fn compare_models(
    ds: &LabeledDataset,
    n: usize,
    quantum: ModelFamily,
    classical: ModelFamily,
    config: &TrainConfig,
    loss: &Loss,
) -> Result<(ComparisonTrace, ParamHamiltonian, ParamHamiltonian)> {
    let q0 = quantum.build(n, &vec![0.0; quantum.num_params(n)])?;
    let c0 = classical.build(n, &vec![0.0; classical.num_params(n)])?;
    let tq = train(ds, &q0, config, loss, QUANTUM_STREAM)?;
    let tc = train(ds, &c0, config, loss, CLASSICAL_STREAM)?;
    let qm = q0.with_theta(tq.theta.clone())?;
    let cm = c0.with_theta(tc.theta.clone())?;
    Ok((
        ComparisonTrace {
            quantum: tq,
            classical: tc,
        },
        qm,
        cm,
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassificationResult {
    pub n: usize,
    pub seed: u64,
    pub quantum_acc: f64,
    pub classical_acc: f64,
    pub final_loss_q: f64,
    pub final_loss_c: f64,
    #[serde(skip)]
    pub trace: ComparisonTrace,
}

/// Heisenberg target with ζ ∼ U[−2,2], Z/X/Y product-state training set labeled by
/// sign Tr[tanh(H★/T)ρ], Heisenberg versus fully connected Ising under the logistic loss,
/// accuracy on `validation_states` Haar-random states.
pub fn classification_protocol(n: usize, config: &TrainConfig, validation_states: usize) -> Result<ClassificationResult> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let target = random_target(&mut rng, ModelFamily::Heisenberg, n)?;
    let act = Activation::new(ActivationKind::Tanh, config.temperature)?;
    let ds = generate_dataset(&target, &act, classification_roster(n), Task::Classification)?;
    let loss = Loss::Logistic {
        temperature: config.temperature,
    };
    let (trace, qm, cm) = compare_models(&ds, n, ModelFamily::Heisenberg, ModelFamily::Fcim, config, &loss)?;
    let quantum_acc = validate_accuracy(&mut stream_rng(config.seed, VALIDATION_STREAM), &qm, &target, config.temperature, validation_states)?;
    let classical_acc = validate_accuracy(&mut stream_rng(config.seed, VALIDATION_STREAM), &cm, &target, config.temperature, validation_states)?;
    Ok(ClassificationResult {
        n,
        seed: config.seed,
        quantum_acc,
        classical_acc,
        final_loss_q: trace.quantum.final_loss(),
        final_loss_c: trace.classical.final_loss(),
        trace,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RegressionResult {
    pub n: usize,
    pub seed: u64,
    pub activation: Activation,
    pub final_loss_q: f64,
    pub final_loss_c: f64,
    #[serde(skip)]
    pub trace: ComparisonTrace,
}

/// TFIM target with ζ ∼ U[−2,2], regression roster labeled by Tr[φ(H★)ρ], TFIM versus Ising
/// under the squared loss.
pub fn regression_protocol(n: usize, kind: ActivationKind, config: &TrainConfig) -> Result<RegressionResult> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let target = random_target(&mut rng, ModelFamily::Tfim, n)?;
    let act = Activation::new(kind, config.temperature)?;
    let ds = generate_dataset(&target, &act, regression_roster(n), Task::Regression)?;
    let (trace, _, _) = compare_models(&ds, n, ModelFamily::Tfim, ModelFamily::Im, config, &Loss::Squared(act))?;
    Ok(RegressionResult {
        n,
        seed: config.seed,
        activation: act,
        final_loss_q: trace.quantum.final_loss(),
        final_loss_c: trace.classical.final_loss(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::build_tfim;
    use crate::qlinalg::{identity, matrix_function};

    fn fd(ds: &LabeledDataset, ph: &ParamHamiltonian, params: &[f64], loss: &Loss, h: f64) -> Vec<f64> {
        (0..params.len())
            .map(|j| {
                let mut p = params.to_vec();
                p[j] += h;
                let up = loss_value(ds, ph, &p, loss).unwrap();
                p[j] -= 2.0 * h;
                let down = loss_value(ds, ph, &p, loss).unwrap();
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    fn single_z() -> ParamHamiltonian {
        ParamHamiltonian::new(1, vec!["Z".parse().unwrap()], vec![0.0]).unwrap()
    }

    #[test]
    fn rosters_are_valid() {
        let r = standard_roster(2);
        assert_eq!(r.len(), 4 + 4 + 4 + CAT_BIASES.len() + 1 + 4);
        for rho in &r {
            assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
        }
        assert_eq!(classification_roster(3).len(), 24);
        assert_eq!(entangled_states(3).len(), 2);
        let z = ParamHamiltonian::new(1, vec!["Y".parse().unwrap()], vec![1.0]).unwrap();
        let ys = y_basis_states(1);
        assert!((trace_product(&z.matrix(), ys[0].matrix()).re - 1.0).abs() < 1e-12);
        assert!((trace_product(&z.matrix(), ys[1].matrix()).re + 1.0).abs() < 1e-12);
    }

    #[test]
    fn labels_on_eigenstates_and_mixed_state() {
        let target = build_tfim(2, &[0.9], &[0.4, -0.7], 0.0).unwrap();
        let es = eigh(&target.matrix()).unwrap();
        let t = 2.0;
        let states: Vec<DensityMatrix> = (0..4)
            .map(|k| DensityMatrix::pure(&es.vectors.column(k).into_owned()).unwrap())
            .collect();
        let ds = generate_dataset(&target, &Activation::tanh(t), states, Task::Regression).unwrap();
        for (k, (_, y)) in ds.items.iter().enumerate() {
            assert!((y - (es.values[k] / t).tanh()).abs() < 1e-12);
        }
        let sym = ParamHamiltonian::new(2, vec!["XZ".parse().unwrap()], vec![1.3]).unwrap();
        let ds = generate_dataset(&sym, &Activation::tanh(t), vec![DensityMatrix::maximally_mixed(4)], Task::Regression).unwrap();
        assert!(ds.items[0].1.abs() < 1e-15);
        let ds = generate_dataset(&sym, &Activation::tanh(t), vec![DensityMatrix::maximally_mixed(4)], Task::Classification).unwrap();
        assert_eq!(ds.items[0].1, 1.0);
    }

    #[test]
    fn squared_loss_examples_and_two_copy_form() {
        let ph = single_z();
        let t = 2.0;
        let zero = computational_states(1).remove(0);
        let ds = LabeledDataset::new(vec![(zero.clone(), 0.3)], Task::Regression).unwrap();
        let theta = 0.8;
        let v = squared_loss(&ds, &ph, &[theta], &Activation::tanh(t)).unwrap();
        assert!((v - ((theta / t).tanh() - 0.3).powi(2)).abs() < 1e-14);

        let plus = hadamard_states(1).remove(0);
        let ds = LabeledDataset::new(vec![(zero, 0.3), (plus, -0.5)], Task::Regression).unwrap();
        let ph = ParamHamiltonian::new(1, vec!["Z".parse().unwrap(), "X".parse().unwrap()], vec![0.0, 0.0]).unwrap();
        let params = [0.7, -0.4];
        let act = Activation::tanh(t);
        let phi = eigh(&ph.assemble(&params).unwrap()).unwrap().matrix_function(|x| act.value(x)).unwrap();
        let m = ds.len();
        let d = 2;
        let big = m * d * d;
        let mut delta = CMatrix::zeros(big, big);
        let mut rho_bar = CMatrix::zeros(big, big);
        for (k, (rho, y)) in ds.items.iter().enumerate() {
            let shifted = &phi - identity(d) * c64(*y, 0.0);
            let mut proj = CMatrix::zeros(m, m);
            proj[(k, k)] = c64(1.0, 0.0);
            delta += proj.kronecker(&shifted.kronecker(&shifted));
            rho_bar += proj.kronecker(&rho.matrix().kronecker(rho.matrix())) * c64(1.0 / m as f64, 0.0);
        }
        let two_copy = trace_product(&delta, &rho_bar).re;
        assert!((two_copy - squared_loss(&ds, &ph, &params, &act).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn logistic_loss_examples_and_spectral_form() {
        let ph = build_tfim(2, &[0.0], &[0.0, 0.0], 0.0).unwrap();
        let ds = generate_dataset(
            &build_tfim(2, &[1.0], &[0.5, -0.5], 0.1).unwrap(),
            &Activation::tanh(2.0),
            classification_roster(2),
            Task::Classification,
        )
        .unwrap();
        let v = logistic_loss(&ds, &ph, &ph.theta, 2.0).unwrap();
        assert!((v - 2.0 * 2f64.ln()).abs() < 1e-12);

        let params = [0.6, -0.3, 0.8, 0.2];
        let flipped: Vec<(DensityMatrix, f64)> = ds.items.iter().map(|(r, y)| (r.clone(), -y)).collect();
        let flipped = LabeledDataset::new(flipped, Task::Classification).unwrap();
        let neg: Vec<f64> = params.iter().map(|x| -x).collect();
        let a = logistic_loss(&ds, &ph, &params, 2.0).unwrap();
        let b = logistic_loss(&flipped, &ph, &neg, 2.0).unwrap();
        assert!((a - b).abs() < 1e-12);

        let es = eigh(&ph.assemble(&params).unwrap()).unwrap();
        let t = 2.0;
        let mut operator = 0.0;
        let mut spectral = 0.0;
        for (rho, y) in &ds.items {
            let h = ph.assemble(&params).unwrap() * c64(-y / t, 0.0);
            let log_op = matrix_function(&eigh(&h).unwrap(), |x| x.exp().ln_1p()).unwrap();
            operator += t * trace_product(&log_op, rho.matrix()).re;
            let q = crate::observables::diagonal_in_eigenbasis(&es, rho.matrix());
            spectral += t * es.values.iter().zip(&q).map(|(l, qk)| qk * (-y * l / t).exp().ln_1p()).sum::<f64>();
        }
        let m = ds.len() as f64;
        assert!((operator / m - a).abs() < 1e-10);
        assert!((spectral / m - a).abs() < 1e-10);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let target = random_target(&mut rng, ModelFamily::Heisenberg, 2).unwrap();
        let model = ModelFamily::Heisenberg.build(2, &[0.0; 9]).unwrap();
        let params: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        for kind in [ActivationKind::Tanh, ActivationKind::Softplus, ActivationKind::Gelu] {
            let act = Activation::new(kind, 2.0).unwrap();
            for task in [Task::Regression, Task::Classification] {
                let ds = generate_dataset(&target, &act, standard_roster(2), task).unwrap();
                for loss in [Loss::Squared(act), Loss::Logistic { temperature: 2.0 }] {
                    if task == Task::Regression && loss.kind() == LossKind::Logistic {
                        continue;
                    }
                    let g = loss_gradient(&ds, &model, &params, &loss).unwrap();
                    let f = fd(&ds, &model, &params, &loss, 1e-5);
                    for (a, b) in g.iter().zip(&f) {
                        assert!((a - b).abs() < 1e-6, "{kind} {loss:?}: {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn gradient_vanishes_at_realizable_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let target = random_target(&mut rng, ModelFamily::Tfim, 2).unwrap();
        let act = Activation::tanh(2.0);
        let ds = generate_dataset(&target, &act, regression_roster(2), Task::Regression).unwrap();
        let (l, g) = loss_and_gradient(&ds, &target, &target.theta, &Loss::Squared(act)).unwrap();
        assert!(l < 1e-28);
        assert!(g.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn scalar_gradient_closed_form() {
        let ph = single_z();
        let zero = computational_states(1).remove(0);
        let ds = LabeledDataset::new(vec![(zero, 0.2)], Task::Regression).unwrap();
        let (t, theta) = (2.0, 0.9);
        let g = loss_gradient(&ds, &ph, &[theta], &Loss::Squared(Activation::tanh(t))).unwrap();
        let th = (theta / t).tanh();
        assert!((g[0] - 2.0 * (th - 0.2) * (1.0 - th * th) / t).abs() < 1e-12);
    }

    #[test]
    fn training_is_reproducible_and_zero_rate_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let target = random_target(&mut rng, ModelFamily::Tfim, 2).unwrap();
        let act = Activation::tanh(2.0);
        let ds = generate_dataset(&target, &act, regression_roster(2), Task::Regression).unwrap();
        let model = ModelFamily::Tfim.build(2, &[0.0; 4]).unwrap();
        let config = TrainConfig {
            max_iterations: 50,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = train(&ds, &model, &config, &Loss::Squared(act), 0).unwrap();
        let b = train(&ds, &model, &config, &Loss::Squared(act), 0).unwrap();
        assert_eq!(a, b);
        assert!(a.losses.len() <= 50);
        let frozen = TrainConfig {
            learning_rate: 0.0,
            ..config
        };
        let c = train(&ds, &model, &frozen, &Loss::Squared(act), 0).unwrap();
        assert!(c.losses.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(c.theta, config.initial_theta(4, 0));
    }

    #[test]
    fn self_realizable_target_is_learned() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let target = random_target(&mut rng, ModelFamily::Tfim, 2).unwrap();
        let act = Activation::tanh(2.0);
        let ds = generate_dataset(&target, &act, regression_roster(2), Task::Regression).unwrap();
        let model = ModelFamily::Tfim.build(2, &[0.0; 4]).unwrap();
        let trace = train(&ds, &model, &TrainConfig::default(), &Loss::Squared(act), 0).unwrap();
        assert!(trace.final_loss() < 1e-3, "final loss {}", trace.final_loss());
    }

    #[test]
    fn divergence_aborts() {
        let ds = LabeledDataset::new(vec![(DensityMatrix::maximally_mixed(2), 0.0)], Task::Regression).unwrap();
        let ph = single_z();
        let config = TrainConfig {
            learning_rate: 10.0,
            divergence_threshold: 1e6,
            ..TrainConfig::default()
        };
        let act = Activation::new(ActivationKind::Softplus, 1.0).unwrap();
        let r = train_from(&ds, &ph, vec![1e7], &config, &Loss::Squared(act));
        assert!(matches!(r, Err(Error::Diverged { iteration: 0, .. })));
    }

    #[test]
    fn model_equal_to_target_validates_perfectly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let target = random_target(&mut rng, ModelFamily::Heisenberg, 2).unwrap();
        assert_eq!(validate_accuracy(&mut rng, &target, &target, 2.0, 200).unwrap(), 1.0);
    }

    #[test]
    fn untrained_accuracy_is_near_half() {
        let mut total = 0.0;
        let runs = 40;
        for s in 0..runs {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + s);
            let target = random_target(&mut rng, ModelFamily::Heisenberg, 2).unwrap();
            let model = random_target(&mut rng, ModelFamily::Heisenberg, 2).unwrap();
            total += validate_accuracy(&mut rng, &model, &target, 2.0, 100).unwrap();
        }
        let mean = total / runs as f64;
        assert!((mean - 0.5).abs() < 0.1, "mean accuracy {mean}");
    }

    #[test]
    fn dataset_validation() {
        let rho = DensityMatrix::maximally_mixed(2);
        assert!(LabeledDataset::new(vec![(rho.clone(), 0.5)], Task::Classification).is_err());
        assert!(LabeledDataset::new(vec![(rho.clone(), f64::NAN)], Task::Regression).is_err());
        assert!(LabeledDataset::new(vec![], Task::Regression).is_err());
        assert!(LabeledDataset::new(vec![(rho, 1.0), (DensityMatrix::maximally_mixed(4), 1.0)], Task::Classification).is_err());
    }
}
