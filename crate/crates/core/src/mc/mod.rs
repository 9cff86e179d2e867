//! Monte Carlo estimators and the bundled verification experiments.
//!
//! Every estimator splits its `N` samples into fixed chunks of
//! [`CHUNK_SIZE`]. Chunk `i` draws from substream `i` of the caller's
//! [`RngStream`] and partial results are merged in chunk order, so the output
//! does not depend on how many worker threads rayon uses.

mod estimators;
mod experiment;

pub use estimators::*;
pub use experiment::*;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{RngStream, StreamRng};

pub const CHUNK_SIZE: u64 = 2048;
pub const MIN_SAMPLES: u64 = 10_000;
pub const DEFAULT_SAMPLES: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_Z_MAX: f64 = 3.0;
/// Largest tolerated fraction of probability-zero degenerate samples.
pub const MAX_DEGENERATE_FRACTION: f64 = 1e-3;

/// A Monte Carlo estimate with its Wald standard error and, when known,
/// the exact value it should match.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    /// `None` for derived quantities without a sampling distribution
    /// (solutions of the constrained least-squares inversion).
    pub stderr: Option<f64>,
    pub samples: u64,
    pub exact: Option<f64>,
    /// `(value − exact) / stderr`; 0 when both the error and `stderr` vanish.
    pub z: Option<f64>,
    /// Absolute tolerance used instead of `z` when set.
    pub tolerance: Option<f64>,
    pub pass: bool,
}

impl Estimate {
    fn raw(name: &str, value: f64, stderr: Option<f64>, samples: u64) -> Self {
        Self {
            name: name.to_string(),
            value,
            stderr,
            samples,
            exact: None,
            z: None,
            tolerance: None,
            pass: true,
        }
    }

    /// Mean of `hits` indicators out of `samples`, `stderr = √(p̂(1−p̂)/N)`.
    pub fn from_indicator(name: &str, hits: u64, samples: u64) -> Self {
        let n = samples.max(1) as f64;
        let p = hits as f64 / n;
        Self::raw(name, p, Some((p * (1.0 - p) / n).sqrt()), samples)
    }

    pub fn from_moments(name: &str, m: &Moments) -> Self {
        let var = if m.count > 1 {
            m.m2 / (m.count - 1) as f64
        } else {
            0.0
        };
        Self::raw(
            name,
            m.mean,
            Some((var / m.count.max(1) as f64).sqrt()),
            m.count,
        )
    }

    /// A value with no standard error, checked against `exact` by `tolerance`.
    pub fn point(name: &str, value: f64, samples: u64) -> Self {
        Self::raw(name, value, None, samples)
    }

    /// Multiplies value and standard error by a positive constant.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.value *= factor;
        self.stderr = self.stderr.map(|s| s * factor);
        self
    }

    pub fn with_exact(mut self, exact: f64) -> Self {
        self.exact = Some(exact);
        self.z = match self.stderr {
            Some(s) if s > 0.0 => Some((self.value - exact) / s),
            _ if (self.value - exact).abs() <= 1e-12 => Some(0.0),
            _ => None,
        };
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = Some(tolerance);
        self
    }

    /// `a − b` for independent estimates, compared against 0.
    pub fn difference(name: &str, a: &Estimate, b: &Estimate) -> Self {
        let sa = a.stderr.unwrap_or(0.0);
        let sb = b.stderr.unwrap_or(0.0);
        Self::raw(
            name,
            a.value - b.value,
            Some((sa * sa + sb * sb).sqrt()),
            a.samples.min(b.samples),
        )
        .with_exact(0.0)
    }

    /// Sets and returns `pass`: within tolerance when one is given, else
    /// `|z| ≤ z_max`. Estimates without an exact value always pass.
    pub fn check(&mut self, z_max: f64) -> bool {
        self.pass = match (self.exact, self.tolerance) {
            (None, _) => true,
            (Some(e), Some(tol)) => (self.value - e).abs() <= tol,
            (Some(_), None) => self.z.is_some_and(|z| z.abs() <= z_max),
        };
        self.pass
    }
}

/// Streaming count, mean and sum of squared deviations.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }
}

/// Indicator tally with the two kinds of excluded or flagged samples used by
/// the Gaussian-image estimators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub hits: u64,
    pub trials: u64,
    /// Samples whose image cone was all of ℝᵏ.
    pub full_space: u64,
    /// Probability-zero degeneracies, excluded from `trials`.
    pub degenerate: u64,
}

impl Tally {
    pub fn merge(&mut self, o: &Tally) {
        self.hits += o.hits;
        self.trials += o.trials;
        self.full_space += o.full_space;
        self.degenerate += o.degenerate;
    }

    pub fn estimate(&self, name: &str) -> Estimate {
        Estimate::from_indicator(name, self.hits, self.trials)
    }

    fn check_degenerate(&self, what: &'static str) -> Result<()> {
        let total = self.trials + self.degenerate;
        if self.degenerate as f64 > MAX_DEGENERATE_FRACTION * total as f64 {
            return Err(Error::DegenerateSamples {
                what,
                degenerate: self.degenerate,
                samples: total,
            });
        }
        Ok(())
    }
}

pub(crate) fn check_samples(samples: u64) -> Result<()> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "at least {MIN_SAMPLES} samples are required, got {samples}"
        )));
    }
    Ok(())
}

/// Runs `per_chunk(rng, len)` on each chunk in parallel and returns the
/// partial results in chunk order.
pub(crate) fn run_chunked<A, F>(samples: u64, stream: RngStream, per_chunk: F) -> Result<Vec<A>>
where
    A: Send,
    F: Fn(&mut StreamRng, u64) -> Result<A> + Sync,
{
    let chunks = samples.div_ceil(CHUNK_SIZE);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK_SIZE.min(samples - c * CHUNK_SIZE);
            per_chunk(&mut stream.substream(c).rng(), len)
        })
        .collect()
}
