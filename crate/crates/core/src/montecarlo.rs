//! Seeded trial engine, Hoeffding planning and estimate summaries.
//!
//! Trial i draws from its own stream (seed, i). Trials are summed in fixed chunks and the chunk
//! sums are combined in index order, so the result does not depend on the worker count.

use serde::Serialize;

use crate::densities::{stream_rng, TrialRng};
use crate::error::{Error, Result};

pub const CHUNK: u64 = 4096;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TrialSums {
    pub count: u64,
    pub sum: f64,
    pub sumsq: f64,
}

impl TrialSums {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    pub fn merge(&mut self, other: &TrialSums) {
        self.count += other.count;
        self.sum += other.sum;
        self.sumsq += other.sumsq;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.sum / self.count as f64
    }

    /// Standard error of the mean from the sample variance.
    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let var = ((self.sumsq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Execution::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Execution::Sequential
        }
    }
}

fn run_chunk<F>(seed: u64, start: u64, end: u64, trial: &F) -> Result<TrialSums>
where
    F: Fn(&mut TrialRng) -> Result<f64>,
{
    let mut sums = TrialSums::default();
    for i in start..end {
        let mut rng = stream_rng(seed, i);
        let y = trial(&mut rng)?;
        if !y.is_finite() {
            return Err(Error::Numeric(format!("trial {i} produced {y}")));
        }
        sums.push(y);
    }
    Ok(sums)
}

/// Runs `k` trials with the default execution mode.
pub fn run_trials<F>(seed: u64, k: u64, trial: F) -> Result<TrialSums>
where
    F: Fn(&mut TrialRng) -> Result<f64> + Sync,
{
    run_trials_with(Execution::default(), seed, k, trial)
}

pub fn run_trials_with<F>(exec: Execution, seed: u64, k: u64, trial: F) -> Result<TrialSums>
where
    F: Fn(&mut TrialRng) -> Result<f64> + Sync,
{
    let chunks = k.div_ceil(CHUNK);
    let bounds = move |c: u64| (c * CHUNK, ((c + 1) * CHUNK).min(k));
    let parts: Vec<Result<TrialSums>> = match exec {
        Execution::Sequential => (0..chunks)
            .map(|c| {
                let (a, b) = bounds(c);
                run_chunk(seed, a, b, &trial)
            })
            .collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let (a, b) = bounds(c);
                    run_chunk(seed, a, b, &trial)
                })
                .collect()
        }
    };
    let mut total = TrialSums::default();
    for p in parts {
        total.merge(&p?);
    }
    Ok(total)
}

/// Trial count K = ⌈(2M²/ε²) ln(2/δ)⌉ for a two-sided Hoeffding guarantee on values in [−M, M].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimatorPlan {
    pub epsilon: f64,
    pub delta: f64,
    pub trials: u64,
    pub bound: f64,
}

pub fn plan_trials(epsilon: f64, delta: f64, bound: f64) -> Result<EstimatorPlan> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0,1), got {delta}")));
    }
    if !(bound >= 0.0) || !bound.is_finite() {
        return Err(Error::InvalidArgument(format!("bound must be finite and nonnegative, got {bound}")));
    }
    let k = (2.0 * bound * bound / (epsilon * epsilon) * (2.0 / delta).ln()).ceil();
    Ok(EstimatorPlan {
        epsilon,
        delta,
        trials: (k as u64).max(1),
        bound,
    })
}

/// How many trials an estimator may spend.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Budget {
    Hoeffding { epsilon: f64, delta: f64 },
    Trials(u64),
}

impl Budget {
    pub fn trials(&self, bound: f64) -> Result<u64> {
        match *self {
            Budget::Hoeffding { epsilon, delta } => Ok(plan_trials(epsilon, delta, bound)?.trials),
            Budget::Trials(0) => Err(Error::InvalidArgument("trial count must be positive".into())),
            Budget::Trials(k) => Ok(k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub trials: u64,
    /// Bound M on the magnitude of a single trial.
    pub bound: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
            trials: 0,
            bound: 0.0,
        }
    }

    pub(crate) fn from_sums(sums: &TrialSums, offset: f64, bound: f64) -> Self {
        Self {
            value: offset + sums.mean(),
            stderr: sums.stderr(),
            trials: sums.count,
            bound,
        }
    }
}

/// Runs a bounded estimator: `trial` values must lie in [−bound, bound].
pub(crate) fn estimate<F>(seed: u64, budget: Budget, bound: f64, offset: f64, trial: F) -> Result<Estimate>
where
    F: Fn(&mut TrialRng) -> Result<f64> + Sync,
{
    let k = budget.trials(bound)?;
    let slack = 1e-9 * (1.0 + bound);
    let sums = run_trials(seed, k, |rng| {
        let y = trial(rng)?;
        if y.abs() > bound + slack {
            return Err(Error::Numeric(format!("trial value {y} exceeds bound {bound}")));
        }
        Ok(y)
    })?;
    Ok(Estimate::from_sums(&sums, offset, bound))
}
