//! Samplers and pdfs for the latent densities μ, γ, ξ, logistic, Gaussian, υ and κ.
//!
//! μ and γ have no closed-form inverse CDF; both are tabulated once by integrating the pdf
//! cell by cell with Gauss–Legendre and inverted by linear interpolation.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::quadrature::Rule;

pub type TrialRng = ChaCha8Rng;

/// Generator for trial `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on the open interval (0, 1).
pub fn uniform_open<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

pub const MU_BOUND: f64 = 60.0;
pub const GAMMA_BOUND: f64 = 40.0;

/// μ(t) = t / (2 sinh(πt/2)), with μ(0) = 1/π.
pub fn mu_pdf(t: f64) -> f64 {
    let a = t.abs();
    if a < 1e-8 {
        return 1.0 / PI;
    }
    // t / (2 sinh(πt/2)) = t e^{−πt/2} / (1 − e^{−πt})
    a * (-0.5 * PI * a).exp() / (-(-PI * a).exp_m1())
}

/// γ(t) = (2/π) ln coth(π|t|/2); infinite at t = 0.
pub fn gamma_pdf(t: f64) -> f64 {
    let a = PI * t.abs();
    if a == 0.0 {
        return f64::INFINITY;
    }
    let e = (-a).exp();
    (2.0 / PI) * (e.ln_1p() - (-(-a).exp_m1()).ln())
}

/// ξ = (γ + μ) / 2.
pub fn xi_pdf(t: f64) -> f64 {
    0.5 * (gamma_pdf(t) + mu_pdf(t))
}

/// Logistic density of scale T: e^{−p/T} / (T (1 + e^{−p/T})²).
pub fn logistic_pdf(p: f64, temperature: f64) -> f64 {
    let e = (-(p / temperature).abs()).exp();
    e / (temperature * (1.0 + e) * (1.0 + e))
}

pub fn gaussian_pdf(x: f64, sigma: f64) -> f64 {
    let z = x / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
}

/// Monotone knots (t_i, F_i) of an even density, inverted by linear interpolation.
#[derive(Clone, Debug)]
pub struct TabulatedInverseCdf {
    knots: Vec<f64>,
    cdf: Vec<f64>,
}

impl TabulatedInverseCdf {
    /// Tabulates an even pdf from knots on [0, B] (starting at 0); `head` is the mass in the first cell.
    fn from_half_grid(pdf: impl Fn(f64) -> f64, half: &[f64], head: Option<f64>) -> Self {
        let rule = Rule::new(8);
        let mut cum = vec![0.0; half.len()];
        for i in 1..half.len() {
            let cell = match (i, head) {
                (1, Some(m)) => m,
                _ => rule.integrate(&pdf, half[i - 1], half[i]),
            };
            cum[i] = cum[i - 1] + cell;
        }
        let total = *cum.last().expect("non-empty grid");
        let n = half.len();
        let mut knots = Vec::with_capacity(2 * n - 1);
        let mut cdf = Vec::with_capacity(2 * n - 1);
        for i in (1..n).rev() {
            knots.push(-half[i]);
            cdf.push(0.5 - 0.5 * cum[i] / total);
        }
        for i in 0..n {
            knots.push(half[i]);
            cdf.push(0.5 + 0.5 * cum[i] / total);
        }
        cdf[0] = 0.0;
        *cdf.last_mut().expect("non-empty grid") = 1.0;
        Self { knots, cdf }
    }

    pub fn bound(&self) -> f64 {
        *self.knots.last().expect("non-empty table")
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (t0, t1) = (self.knots[i - 1], self.knots[i]);
        if c1 <= c0 {
            return t0;
        }
        t0 + (t1 - t0) * (u - c0) / (c1 - c0)
    }

    /// Interpolated CDF at t.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= self.knots[0] {
            return 0.0;
        }
        if t >= self.bound() {
            return 1.0;
        }
        let i = self.knots.partition_point(|&k| k <= t);
        let (t0, t1) = (self.knots[i - 1], self.knots[i]);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        c0 + (c1 - c0) * (t - t0) / (t1 - t0)
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(uniform_open(rng))
    }
}

const TABLE_KNOTS: usize = 1 << 16;

pub fn mu_table() -> &'static TabulatedInverseCdf {
    static TABLE: OnceLock<TabulatedInverseCdf> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = TABLE_KNOTS / 2;
        let half: Vec<f64> = (0..=n).map(|i| MU_BOUND * i as f64 / n as f64).collect();
        TabulatedInverseCdf::from_half_grid(mu_pdf, &half, None)
    })
}

pub fn gamma_table() -> &'static TabulatedInverseCdf {
    static TABLE: OnceLock<TabulatedInverseCdf> = OnceLock::new();
    TABLE.get_or_init(|| {
        let (lo, mid) = (1e-14f64, 0.5f64);
        let n_log = 1 << 13;
        let n_lin = TABLE_KNOTS / 2 - n_log;
        let mut half = vec![0.0];
        let ratio = (mid / lo).ln() / n_log as f64;
        half.extend((0..n_log).map(|i| lo * (ratio * i as f64).exp()));
        half.extend((0..=n_lin).map(|i| mid + (GAMMA_BOUND - mid) * i as f64 / n_lin as f64));
        // ∫_0^a γ ≈ (2/π) a (ln(2/(πa)) + 1) for tiny a.
        let head = (2.0 / PI) * lo * ((2.0 / (PI * lo)).ln() + 1.0);
        TabulatedInverseCdf::from_half_grid(gamma_pdf, &half, Some(head))
    })
}

pub fn sample_uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    uniform_open(rng)
}

pub fn sample_mu<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    mu_table().sample(rng)
}

pub fn sample_gamma<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    gamma_table().sample(rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XiBranch {
    Gamma,
    Mu,
}

/// Draw from ξ, reporting which mixture component produced it.
pub fn sample_xi_tagged<R: RngCore + ?Sized>(rng: &mut R) -> (f64, XiBranch) {
    if rng.next_u64() >> 63 == 0 {
        (sample_gamma(rng), XiBranch::Gamma)
    } else {
        (sample_mu(rng), XiBranch::Mu)
    }
}

pub fn sample_xi<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    sample_xi_tagged(rng).0
}

/// Logistic draw T ln(u/(1−u)).
pub fn sample_logistic<R: RngCore + ?Sized>(rng: &mut R, temperature: f64) -> f64 {
    let u = uniform_open(rng);
    temperature * (u / (1.0 - u)).ln()
}

pub fn sample_gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    sigma * z
}

/// κ = ½δ₁ + ½·U[0,1].
pub fn sample_kappa<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    if rng.next_u64() >> 63 == 0 {
        1.0
    } else {
        uniform_open(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive;

    const DRAWS: usize = 1_000_000;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    fn draws(seed: u64, f: impl Fn(&mut TrialRng) -> f64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        (0..DRAWS).map(|_| f(&mut rng)).collect()
    }

    fn even_integral(pdf: impl Fn(f64) -> f64, b: f64) -> f64 {
        2.0 * (adaptive(&pdf, 0.0, 1.0, 1e-13) + adaptive(&pdf, 1.0, b, 1e-13))
    }

    /// Largest gap between the empirical CDFs of the positive draws and the mirrored negative draws.
    fn mirror_ks(xs: &[f64]) -> f64 {
        let mut pos: Vec<f64> = xs.iter().copied().filter(|x| *x > 0.0).collect();
        let mut neg: Vec<f64> = xs.iter().filter(|x| **x < 0.0).map(|x| -x).collect();
        pos.sort_by(f64::total_cmp);
        neg.sort_by(f64::total_cmp);
        let (mut i, mut j, mut worst) = (0, 0, 0.0f64);
        while i < pos.len() && j < neg.len() {
            if pos[i] <= neg[j] {
                i += 1;
            } else {
                j += 1;
            }
            worst = worst.max((i as f64 / pos.len() as f64 - j as f64 / neg.len() as f64).abs());
        }
        worst
    }

    #[test]
    fn pdfs_are_normalized() {
        assert!((even_integral(mu_pdf, MU_BOUND) - 1.0).abs() < 1e-8);
        assert!((even_integral(gamma_pdf, GAMMA_BOUND) - 1.0).abs() < 1e-8);
        assert!((even_integral(xi_pdf, GAMMA_BOUND) - 1.0).abs() < 1e-8);
        assert!((even_integral(|p| logistic_pdf(p, 0.7), 60.0) - 1.0).abs() < 1e-10);
        assert!((mu_pdf(0.0) - 1.0 / PI).abs() < 1e-15);
        assert!((mu_pdf(1e-7) - 1.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn tables_match_quadrature_quantiles() {
        for (table, pdf, bound) in [
            (mu_table(), mu_pdf as fn(f64) -> f64, MU_BOUND),
            (gamma_table(), gamma_pdf as fn(f64) -> f64, GAMMA_BOUND),
        ] {
            assert!(table.knots.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(table.bound(), bound);
            for i in 1..1000 {
                let u = i as f64 / 1000.0;
                let t = table.quantile(u);
                let exact = 0.5 + t.signum() * adaptive(pdf, 0.0, t.abs(), 1e-13);
                assert!((exact - u).abs() < 1e-6, "u={u} t={t} exact={exact}");
            }
        }
    }

    #[test]
    fn mu_sampler_moments() {
        let xs = draws(1, |r| sample_mu(r));
        let (m, se) = moments(&xs);
        assert!(m.abs() < 4.0 * se);
        let second = xs.iter().map(|x| x * x).sum::<f64>() / DRAWS as f64;
        let exact = even_integral(|t| t * t * mu_pdf(t), MU_BOUND);
        assert!((second / exact - 1.0).abs() < 0.01);
    }

    #[test]
    fn gamma_sampler_symmetric_near_singularity() {
        let xs = draws(2, |r| sample_gamma(r));
        assert!(xs.iter().all(|x| x.is_finite() && x.abs() <= GAMMA_BOUND));
        let near = xs.iter().filter(|x| x.abs() < 1e-3).count();
        assert!(near > 0);
        assert!(mirror_ks(&xs) < 0.005);
        let (m, se) = moments(&xs);
        assert!(m.abs() < 4.0 * se);
    }

    #[test]
    fn xi_histogram_matches_mixture() {
        let xs = draws(3, |r| sample_xi(r));
        let (m, se) = moments(&xs);
        assert!(m.abs() < 4.0 * se);
        let edges: Vec<f64> = (-16..=16).map(|i| i as f64 * 0.25).collect();
        let mut chi2 = 0.0;
        let mut dof = 0;
        for w in edges.windows(2) {
            let p = adaptive(xi_pdf, w[0], w[1], 1e-12);
            let observed = xs.iter().filter(|x| **x >= w[0] && **x < w[1]).count() as f64;
            let expected = p * DRAWS as f64;
            chi2 += (observed - expected).powi(2) / expected;
            dof += 1;
        }
        // 99th percentile of χ² with 31 degrees of freedom is about 52.2.
        assert_eq!(dof, 32);
        assert!(chi2 < 53.5, "chi2 = {chi2}");
    }

    #[test]
    fn logistic_sampler() {
        let t = 0.8;
        let xs = draws(4, |r| sample_logistic(r, t));
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        assert!(sorted[DRAWS / 2].abs() < 0.01);
        for p in [-2.0, -0.5, 0.0, 0.3, 1.7] {
            let emp = xs.iter().filter(|x| **x <= p).count() as f64 / DRAWS as f64;
            let f = 1.0 / (1.0 + (-p / t).exp());
            assert!((emp - f).abs() < 0.003);
        }
        let var = xs.iter().map(|x| x * x).sum::<f64>() / DRAWS as f64;
        let exact = even_integral(|p| p * p * logistic_pdf(p, t), 80.0);
        assert!((exact - PI * PI * t * t / 3.0).abs() < 1e-8);
        assert!((var / exact - 1.0).abs() < 0.01);
    }

    #[test]
    fn gaussian_sampler() {
        let sigma = 1.0 / 2.5;
        let xs = draws(5, |r| sample_gaussian(r, sigma));
        let (m, se) = moments(&xs);
        assert!(m.abs() < 4.0 * se);
        let sd = (xs.iter().map(|x| x * x).sum::<f64>() / DRAWS as f64).sqrt();
        assert!((sd / sigma - 1.0).abs() < 0.01);
    }

    #[test]
    fn kappa_sampler() {
        let xs = draws(6, |r| sample_kappa(r));
        let ones = xs.iter().filter(|x| **x == 1.0).count() as f64 / DRAWS as f64;
        assert!((ones - 0.5).abs() < 0.002);
        let mean = xs.iter().sum::<f64>() / DRAWS as f64;
        assert!((mean - 0.75).abs() < 0.002);
        let mut rest: Vec<f64> = xs.into_iter().filter(|x| *x != 1.0).collect();
        rest.sort_by(f64::total_cmp);
        let n = rest.len() as f64;
        let ks = rest
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i as f64 + 1.0) / n - x).abs().max((x - i as f64 / n).abs()))
            .fold(0.0, f64::max);
        // 1.63/√n is the 1% critical value.
        assert!(ks < 1.63 / n.sqrt());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = (0..5).map({
            let mut r = stream_rng(9, 3);
            move |_| sample_mu(&mut r)
        }).collect();
        let b: Vec<f64> = (0..5).map({
            let mut r = stream_rng(9, 3);
            move |_| sample_mu(&mut r)
        }).collect();
        let c: Vec<f64> = (0..5).map({
            let mut r = stream_rng(9, 4);
            move |_| sample_mu(&mut r)
        }).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let mut r = stream_rng(0, 0);
        for _ in 0..10_000 {
            let u = uniform_open(&mut r);
            assert!(u > 0.0 && u < 1.0);
        }
    }
}
