//! Monte Carlo and quadrature result types.

use crate::real::{from_usize, Real};

/// Sample mean with its standard error.
///
/// `analytic` marks values obtained by quadrature or closed form, reported
/// with `stderr = 0`. `ess` is set by importance-weighted estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorResult<R> {
    pub mean: R,
    pub stderr: R,
    pub n: usize,
    pub ess: Option<R>,
    pub analytic: bool,
}

/// Weighted estimators with fewer effective samples than this are flagged.
pub const LOW_ESS: f64 = 100.0;

impl<R: Real> EstimatorResult<R> {
    pub fn exact(value: R) -> Self {
        EstimatorResult { mean: value, stderr: R::zero(), n: 1, ess: None, analytic: true }
    }

    pub fn from_samples(samples: &[R]) -> Self {
        let mut acc = Welford::new();
        for &x in samples {
            acc.push(x);
        }
        acc.result()
    }

    /// True when an importance-weighted estimate rests on too few effective samples.
    pub fn low_ess(&self) -> bool {
        self.ess.is_some_and(|e| e.to_f64().unwrap_or(0.0) < LOW_ESS)
    }

    /// `|self − other| / sqrt(se1² + se2²)`; infinite when both errors vanish
    /// and the means differ.
    pub fn z_distance(&self, other: &Self) -> R {
        let diff = (self.mean - other.mean).abs();
        let se = (self.stderr * self.stderr + other.stderr * other.stderr).sqrt();
        if se > R::zero() {
            diff / se
        } else if diff == R::zero() {
            R::zero()
        } else {
            R::infinity()
        }
    }

    /// `|mean − target| / stderr`.
    pub fn z_score(&self, target: R) -> R {
        self.z_distance(&EstimatorResult::exact(target))
    }

    pub fn scaled(&self, factor: R) -> Self {
        EstimatorResult { mean: self.mean * factor, stderr: self.stderr * factor.abs(), ..*self }
    }

    pub fn shifted(&self, offset: R) -> Self {
        EstimatorResult { mean: self.mean + offset, ..*self }
    }
}

/// Streaming mean/variance accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford<R> {
    n: usize,
    mean: R,
    m2: R,
}

impl<R: Real> Welford<R> {
    pub fn new() -> Self {
        Welford { n: 0, mean: R::zero(), m2: R::zero() }
    }

    pub fn push(&mut self, x: R) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean = self.mean + delta / from_usize(self.n);
        self.m2 = self.m2 + delta * (x - self.mean);
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mean(&self) -> R {
        self.mean
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> R {
        if self.n < 2 {
            R::zero()
        } else {
            self.m2 / from_usize(self.n - 1)
        }
    }

    pub fn result(&self) -> EstimatorResult<R> {
        let stderr = if self.n == 0 { R::zero() } else { (self.variance() / from_usize(self.n)).sqrt() };
        EstimatorResult { mean: self.mean, stderr, n: self.n, ess: None, analytic: false }
    }
}

/// Kish effective sample size `(Σw)² / Σw²`.
pub fn effective_sample_size<R: Real>(weights: &[R]) -> R {
    let s: R = weights.iter().copied().sum();
    let s2: R = weights.iter().map(|&w| w * w).sum();
    if s2 == R::zero() {
        R::zero()
    } else {
        s * s / s2
    }
}

/// Importance-weighted mean of i.i.d. terms `w_i f_i`, reported with the
/// Kish effective sample size of the weights.
pub fn weighted_mean<R: Real>(terms: &[R], weights: &[R]) -> EstimatorResult<R> {
    let mut result = EstimatorResult::from_samples(terms);
    result.ess = Some(effective_sample_size(weights));
    result
}

/// Outcome of a numerical integral that may diverge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult<R> {
    /// `None` exactly when `diverged`.
    pub value: Option<R>,
    pub error_estimate: R,
    pub diverged: bool,
    /// Upper limit at which the integral was truncated or divergence declared.
    pub truncation_t: R,
}

impl<R: Real> QuadratureResult<R> {
    pub fn finite(value: R, error_estimate: R, truncation_t: R) -> Self {
        QuadratureResult { value: Some(value), error_estimate, diverged: false, truncation_t }
    }

    pub fn divergent(truncation_t: R) -> Self {
        QuadratureResult { value: None, error_estimate: R::infinity(), diverged: true, truncation_t }
    }
}
