use std::fmt;

use crate::config::BranchConfig;
use crate::engine::run_replicas;
use crate::error::{Error, Result};
use crate::real::{lit, Real};
use crate::state::StateKind;
use crate::stats::ks_distance;

use super::config_d;

const REAL_BINS: usize = 50;

/// Which replicas contribute to the pooled sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Conditioning<R> {
    /// At least one live particle at `T`.
    Survival,
    /// `D_T > ε`.
    DPositive(R),
}

impl<R: Real> fmt::Display for Conditioning<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Conditioning::Survival => f.write_str("survival at T"),
            Conditioning::DPositive(eps) => write!(f, "D_T > {eps}"),
        }
    }
}

/// How particles from different replicas are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    /// Every live particle counts once (size-biased toward large families).
    Pooled,
    /// Each retained replica carries total weight one.
    PerReplica,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QsdSample<R> {
    pub replica: usize,
    pub index: usize,
    pub position: R,
    pub weight: R,
}

/// Empirical quasi-stationary distribution at time `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct QsdReport<R> {
    pub pooled_samples: usize,
    pub survivors: usize,
    pub n_rep: usize,
    pub overflowed: usize,
    /// Weighted KS distance to the normalized eigenmeasure, when its cdf is known.
    pub ks_distance: Option<R>,
    /// `(lo, hi, mass)` with masses summing to one.
    pub histogram: Vec<(R, R, R)>,
    pub conditioning: String,
    pub pooling: Pooling,
    pub samples: Vec<QsdSample<R>>,
}

/// Runs `n_rep` replicas to `t`, keeps those satisfying `condition`, and
/// pools the positions of their live particles.
pub fn qsd_sample<R: Real>(
    config: &BranchConfig<R>,
    t: R,
    n_rep: usize,
    condition: Conditioning<R>,
    pooling: Pooling,
    workers: usize,
) -> Result<QsdReport<R>> {
    let mut cfg = config.clone();
    cfg.t_end = t;
    cfg.snapshot_times = vec![t];
    let run = run_replicas(&cfg, n_rep, workers, |_, traj| {
        let pop = traj.snapshot_at(t)?;
        let keep = match condition {
            Conditioning::Survival => !pop.is_empty(),
            Conditioning::DPositive(eps) => config_d(&cfg, pop).is_ok_and(|d| d > eps),
        };
        if !keep {
            return None;
        }
        Some(pop.states().filter_map(|s| s.coordinate()).collect::<Vec<R>>())
    })?;

    let mut samples = Vec::new();
    let mut survivors = 0;
    for (replica, positions) in run.outputs.iter().enumerate() {
        let Some(positions) = positions else { continue };
        if positions.is_empty() {
            continue;
        }
        survivors += 1;
        let weight = match pooling {
            Pooling::Pooled => R::one(),
            Pooling::PerReplica => R::one() / lit(positions.len() as f64),
        };
        samples.extend(positions.iter().enumerate().map(|(index, &position)| QsdSample { replica, index, position, weight }));
    }
    if samples.is_empty() {
        return Err(Error::NoSurvivors);
    }

    let positions: Vec<R> = samples.iter().map(|s| s.position).collect();
    let weights: Vec<R> = samples.iter().map(|s| s.weight).collect();
    let ks = cfg.motion.eigen.cdf_fn().map(|cdf| ks_distance(&positions, Some(&weights), |x| cdf(x)));
    let histogram = histogram(&positions, &weights, cfg.motion.state_kind);
    Ok(QsdReport {
        pooled_samples: samples.len(),
        survivors,
        n_rep,
        overflowed: run.overflowed,
        ks_distance: ks,
        histogram,
        conditioning: condition.to_string(),
        pooling,
        samples,
    })
}

fn histogram<R: Real>(positions: &[R], weights: &[R], kind: StateKind) -> Vec<(R, R, R)> {
    let lo = positions.iter().copied().fold(R::infinity(), R::min);
    let hi = positions.iter().copied().fold(R::neg_infinity(), R::max);
    let edges: Vec<R> = match kind {
        StateKind::Integer => {
            let (a, b) = (lo.floor().to_i64().unwrap_or(0), hi.floor().to_i64().unwrap_or(0));
            (a..=b + 1).map(|k| lit(k as f64)).collect()
        }
        StateKind::Real => {
            let width = if hi > lo { (hi - lo) / lit(REAL_BINS as f64) } else { R::one() };
            let bins = if hi > lo { REAL_BINS } else { 1 };
            (0..=bins).map(|k| lo + width * lit(k as f64)).collect()
        }
    };
    let bins = edges.len() - 1;
    let mut mass = vec![R::zero(); bins];
    for (&x, &w) in positions.iter().zip(weights) {
        let idx = edges.partition_point(|&e| e <= x).saturating_sub(1).min(bins - 1);
        mass[idx] = mass[idx] + w;
    }
    let total: R = mass.iter().copied().sum();
    (0..bins).map(|k| (edges[k], edges[k + 1], mass[k] / total)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_masses_sum_to_one() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let ws = vec![1.0; xs.len()];
        let h = histogram(&xs, &ws, StateKind::Real);
        assert_eq!(h.len(), REAL_BINS);
        let total: f64 = h.iter().map(|b| b.2).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integer_histogram_has_unit_bins() {
        let h = histogram(&[0.0, 0.0, 2.0], &[1.0, 1.0, 2.0], StateKind::Integer);
        assert_eq!(h, vec![(0.0, 1.0, 0.5), (1.0, 2.0, 0.0), (2.0, 3.0, 0.5)]);
    }
}
