//! Scalar activation families with value, derivative and first divided difference.

use std::f64::consts::{FRAC_2_SQRT_PI, PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF Φ(z) = ½ erfc(−z/√2).
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// 1/(1+e^{−z}) without overflow.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1+e^z) without overflow.
pub fn log1p_exp(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Tanh,
    Fermi,
    Softplus,
    Silu,
    Erf,
    Grelu,
    Gelu,
    Logloss,
    Linear,
}

impl ActivationKind {
    /// The eight temperature-dependent families.
    pub const NONLINEAR: [ActivationKind; 8] = [
        ActivationKind::Tanh,
        ActivationKind::Fermi,
        ActivationKind::Softplus,
        ActivationKind::Silu,
        ActivationKind::Erf,
        ActivationKind::Grelu,
        ActivationKind::Gelu,
        ActivationKind::Logloss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Tanh => "tanh",
            ActivationKind::Fermi => "fermi",
            ActivationKind::Softplus => "softplus",
            ActivationKind::Silu => "silu",
            ActivationKind::Erf => "erf",
            ActivationKind::Grelu => "grelu",
            ActivationKind::Gelu => "gelu",
            ActivationKind::Logloss => "logloss",
            ActivationKind::Linear => "linear",
        }
    }

    pub fn is_odd(self) -> bool {
        matches!(self, ActivationKind::Tanh | ActivationKind::Erf | ActivationKind::Linear)
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = s.to_ascii_lowercase();
        ActivationKind::NONLINEAR
            .into_iter()
            .chain([ActivationKind::Linear])
            .find(|a| a.name() == k)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown activation \"{s}\"")))
    }
}

/// An activation family at temperature T. Configs spell it `{"kind": "tanh", "T": 2.0}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawActivation")]
pub struct Activation {
    pub kind: ActivationKind,
    #[serde(rename = "T")]
    pub temperature: f64,
}

#[derive(Deserialize)]
struct RawActivation {
    kind: ActivationKind,
    #[serde(rename = "T", default = "unit")]
    temperature: f64,
}

fn unit() -> f64 {
    1.0
}

impl TryFrom<RawActivation> for Activation {
    type Error = Error;

    fn try_from(raw: RawActivation) -> Result<Self> {
        Activation::new(raw.kind, raw.temperature)
    }
}

impl Activation {
    pub fn new(kind: ActivationKind, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "temperature must be positive and finite, got {temperature}"
            )));
        }
        Ok(Self { kind, temperature })
    }

    pub fn tanh(t: f64) -> Self {
        Self::new(ActivationKind::Tanh, t).expect("positive temperature")
    }

    pub fn linear() -> Self {
        Self {
            kind: ActivationKind::Linear,
            temperature: 1.0,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let t = self.temperature;
        let z = x / t;
        match self.kind {
            ActivationKind::Tanh => z.tanh(),
            ActivationKind::Fermi => logistic(z),
            ActivationKind::Softplus => t * log1p_exp(z),
            ActivationKind::Silu => x * logistic(z),
            ActivationKind::Erf => libm::erf(SQRT_2 * z),
            ActivationKind::Grelu => x * normal_cdf(z) + t * normal_pdf(z),
            ActivationKind::Gelu => x * normal_cdf(z),
            ActivationKind::Logloss => t * log1p_exp(-z),
            ActivationKind::Linear => x,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let t = self.temperature;
        let z = x / t;
        match self.kind {
            ActivationKind::Tanh => {
                let e = (-2.0 * z.abs()).exp();
                4.0 * e / ((1.0 + e) * (1.0 + e)) / t
            }
            ActivationKind::Fermi => {
                let e = (-z.abs()).exp();
                e / ((1.0 + e) * (1.0 + e)) / t
            }
            ActivationKind::Softplus => logistic(z),
            ActivationKind::Silu => {
                let f = logistic(z);
                f + z * f * (1.0 - f)
            }
            ActivationKind::Erf => FRAC_2_SQRT_PI * SQRT_2 / t * (-2.0 * z * z).exp(),
            ActivationKind::Grelu => normal_cdf(z),
            ActivationKind::Gelu => normal_cdf(z) + z * normal_pdf(z),
            ActivationKind::Logloss => -logistic(-z),
            ActivationKind::Linear => 1.0,
        }
    }

    /// f^{[1]}(x, y); the midpoint derivative when |x − y| ≤ 1e−7·max(1, |x|, |y|).
    pub fn divided_difference(&self, x: f64, y: f64) -> f64 {
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        let tau = 1e-7 * 1f64.max(a.abs()).max(b.abs());
        if b - a <= tau {
            return self.derivative(0.5 * (a + b));
        }
        (self.value(b) - self.value(a)) / (b - a)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(T={})", self.kind, self.temperature)
    }
}
