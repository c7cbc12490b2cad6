//! Quantum observable networks: layered activation observables over Pauli base terms.
//!
//! Layer ℓ maps observables A^{(ℓ−1)}_1..A^{(ℓ−1)}_{J_{ℓ−1}} to A^{(ℓ)}_i = φ_ℓ(B^{(ℓ)}_i) with
//! B^{(ℓ)}_i = Σ_j θ^{(ℓ)}_{ij} A^{(ℓ−1)}_j. Gradients propagate Fréchet derivatives backwards.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::activations::Activation;
use crate::error::{Error, Result};
use crate::hamiltonians::PauliString;
use crate::observables::frechet_apply_es;
use crate::qlinalg::{c64, eigh, trace_product, CMatrix, DensityMatrix, HermitianEigensystem};

pub const MAX_DEPTH: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// J_ℓ × J_{ℓ−1}.
    pub weights: DMatrix<f64>,
    pub activation: Activation,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerSpec {
    pub weights: Vec<Vec<f64>>,
    pub activation: Activation,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub n: usize,
    pub base: Vec<String>,
    pub layers: Vec<LayerSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "NetworkSpec", into = "NetworkSpec")]
pub struct ObservableNetwork {
    n: usize,
    base_terms: Vec<PauliString>,
    base: Vec<CMatrix>,
    pub layers: Vec<Layer>,
}

impl TryFrom<NetworkSpec> for ObservableNetwork {
    type Error = Error;

    fn try_from(spec: NetworkSpec) -> Result<Self> {
        let terms = spec
            .base
            .iter()
            .map(|s| s.parse::<PauliString>())
            .collect::<Result<Vec<_>>>()?;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (l, ls) in spec.layers.into_iter().enumerate() {
            let rows = ls.weights.len();
            let cols = ls.weights.first().map_or(0, Vec::len);
            if ls.weights.iter().any(|r| r.len() != cols) {
                return Err(Error::InvalidArgument(format!("layers[{l}].weights is ragged")));
            }
            let flat: Vec<f64> = ls.weights.into_iter().flatten().collect();
            layers.push(Layer {
                weights: DMatrix::from_row_slice(rows, cols, &flat),
                activation: ls.activation,
            });
        }
        ObservableNetwork::new(spec.n, terms, layers)
    }
}

impl From<ObservableNetwork> for NetworkSpec {
    fn from(net: ObservableNetwork) -> Self {
        NetworkSpec {
            n: net.n,
            base: net.base_terms.iter().map(ToString::to_string).collect(),
            layers: net
                .layers
                .into_iter()
                .map(|l| LayerSpec {
                    weights: l.weights.row_iter().map(|r| r.iter().copied().collect()).collect(),
                    activation: l.activation,
                })
                .collect(),
        }
    }
}

/// Per-layer eigensystems of B^{(ℓ)}_i and the observables A^{(ℓ)}_i.
#[derive(Clone, Debug)]
pub struct LayerCache {
    pub pre: Vec<Vec<HermitianEigensystem>>,
    /// observables[0] are the base terms; observables[ℓ] the outputs of layer ℓ.
    pub observables: Vec<Vec<CMatrix>>,
}

impl ObservableNetwork {
    pub fn new(n: usize, base_terms: Vec<PauliString>, layers: Vec<Layer>) -> Result<Self> {
        if base_terms.is_empty() || layers.is_empty() {
            return Err(Error::InvalidArgument("network needs base terms and at least one layer".into()));
        }
        if let Some(t) = base_terms.iter().find(|t| t.n() != n) {
            return Err(Error::InvalidArgument(format!("base term {t} does not act on {n} qubits")));
        }
        let mut width = base_terms.len();
        for (l, layer) in layers.iter().enumerate() {
            if layer.weights.ncols() != width || layer.weights.nrows() == 0 {
                return Err(Error::InvalidArgument(format!(
                    "layers[{l}].weights is {}x{}, expected {} columns",
                    layer.weights.nrows(),
                    layer.weights.ncols(),
                    width
                )));
            }
            if layer.weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::InvalidArgument(format!("layers[{l}].weights has a non-finite entry")));
            }
            width = layer.weights.nrows();
        }
        let base = base_terms.iter().map(PauliString::matrix).collect();
        Ok(Self {
            n,
            base_terms,
            base,
            layers,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weights.nrows())
    }

    pub fn base(&self) -> &[CMatrix] {
        &self.base
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len()).sum()
    }

    pub fn cache(&self) -> Result<LayerCache> {
        let mut observables = vec![self.base.clone()];
        let mut pre = Vec::with_capacity(self.depth());
        for layer in &self.layers {
            let prev = observables.last().expect("nonempty");
            let mut es_row = Vec::with_capacity(layer.weights.nrows());
            let mut obs_row = Vec::with_capacity(layer.weights.nrows());
            for i in 0..layer.weights.nrows() {
                let b = combine(layer.weights.row(i).iter().copied(), prev);
                let es = eigh(&b)?;
                obs_row.push(es.matrix_function(|x| layer.activation.value(x))?);
                es_row.push(es);
            }
            pre.push(es_row);
            observables.push(obs_row);
        }
        Ok(LayerCache { pre, observables })
    }

    fn check_state(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rho.dim(),
            });
        }
        Ok(())
    }
}

fn combine(weights: impl Iterator<Item = f64>, obs: &[CMatrix]) -> CMatrix {
    let d = obs[0].nrows();
    let mut b = CMatrix::zeros(d, d);
    for (w, a) in weights.zip(obs) {
        if w != 0.0 {
            b += a * c64(w, 0.0);
        }
    }
    b
}

/// Outputs Tr[A^{(L)}_k ρ].
pub fn forward(net: &ObservableNetwork, rho: &DensityMatrix) -> Result<Vec<f64>> {
    net.check_state(rho)?;
    let cache = net.cache()?;
    Ok(cache
        .observables
        .last()
        .expect("nonempty")
        .iter()
        .map(|a| trace_product(a, rho.matrix()).re)
        .collect())
}

/// ∂ Tr[A^{(L)}_k ρ] / ∂θ^{(ℓ)}_{ij}, one J_ℓ × J_{ℓ−1} matrix per layer.
///
/// G^{(L)}_k = 𝒟_{B^{(L)}_k}(ρ); R^{(ℓ−1)}_i = Σ_j θ^{(ℓ)}_{ji} G^{(ℓ)}_j and G^{(ℓ−1)}_i = 𝒟_{B^{(ℓ−1)}_i}(R^{(ℓ−1)}_i).
pub fn network_gradient(net: &ObservableNetwork, rho: &DensityMatrix, k: usize) -> Result<Vec<DMatrix<f64>>> {
    net.check_state(rho)?;
    let depth = net.depth();
    if depth > MAX_DEPTH {
        return Err(Error::Unsupported(format!("exact network gradients need depth ≤ {MAX_DEPTH}, got {depth}")));
    }
    if k >= net.output_width() {
        return Err(Error::InvalidArgument(format!(
            "output index {k} out of range for width {}",
            net.output_width()
        )));
    }
    let cache = net.cache()?;
    let mut grads: Vec<DMatrix<f64>> = net
        .layers
        .iter()
        .map(|l| DMatrix::zeros(l.weights.nrows(), l.weights.ncols()))
        .collect();

    let top = &net.layers[depth - 1];
    let mut g: Vec<Option<CMatrix>> = vec![None; top.weights.nrows()];
    g[k] = Some(frechet_apply_es(&cache.pre[depth - 1][k], &top.activation, rho.matrix()));

    for l in (0..depth).rev() {
        let inputs = &cache.observables[l];
        for (i, gi) in g.iter().enumerate() {
            if let Some(gi) = gi {
                for (j, a) in inputs.iter().enumerate() {
                    grads[l][(i, j)] = trace_product(a, gi).re;
                }
            }
        }
        if l == 0 {
            break;
        }
        let w = &net.layers[l].weights;
        let below = &net.layers[l - 1];
        let mut next = Vec::with_capacity(w.ncols());
        for i in 0..w.ncols() {
            let d = net.dim();
            let mut r = CMatrix::zeros(d, d);
            let mut any = false;
            for (j, gj) in g.iter().enumerate() {
                if let Some(gj) = gj {
                    if w[(j, i)] != 0.0 {
                        r += gj * c64(w[(j, i)], 0.0);
                        any = true;
                    }
                }
            }
            next.push(any.then(|| frechet_apply_es(&cache.pre[l - 1][i], &below.activation, &r)));
        }
        g = next;
    }
    Ok(grads)
}
