use crate::config::BranchConfig;
use crate::engine::run_replicas;
use crate::error::{Error, Result};
use crate::estimate::{EstimatorResult, Welford};
use crate::real::{lit, Real};
use crate::rng::replica_seed;
use crate::state::{Interval, ParticleState, StateKind};

use super::config_d;

/// Fraction of one-unit offspring positions allowed outside the grid.
pub const MAX_BOUNDARY_MASS: f64 = 0.01;

fn indicator<R: Real>(b: bool) -> R {
    if b {
        R::one()
    } else {
        R::zero()
    }
}

fn horizon<R: Real>(config: &BranchConfig<R>, t: R) -> BranchConfig<R> {
    let mut cfg = config.clone();
    cfg.t_end = t;
    cfg.snapshot_times = vec![t];
    cfg
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaReport<R> {
    /// Fraction of replicas extinct by `T`.
    pub eta: EstimatorResult<R>,
    /// Fraction that went extinct in `(T/2, T]`; near zero once `T` saturates.
    pub late_extinction: EstimatorResult<R>,
    /// Replicas stopped at `max_population`, counted as surviving.
    pub overflowed: usize,
}

/// `η̂(x)`: fraction of replicas with no live particle at `t`.
///
/// A replica whose live population exceeds `max_population` is stopped and
/// counted as surviving; with that many independent particles extinction is
/// negligible, so the cap acts as a cost bound rather than a bias.
pub fn eta_mc<R: Real>(config: &BranchConfig<R>, t: R, n_rep: usize, workers: usize) -> Result<EtaReport<R>> {
    let cfg = horizon(config, t);
    let half = t * lit(0.5);
    let run = run_replicas(&cfg, n_rep, workers, |_, traj| match traj.extinct_time {
        Some(at) => (true, at > half),
        None => (false, false),
    })?;
    let eta: Vec<R> = run.outputs.iter().map(|o| indicator(o.0)).collect();
    let late: Vec<R> = run.outputs.iter().map(|o| indicator(o.1)).collect();
    Ok(EtaReport {
        eta: EstimatorResult::from_samples(&eta),
        late_extinction: EstimatorResult::from_samples(&late),
        overflowed: run.overflowed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaReport<R> {
    /// Fraction of replicas with `D_T < ε`.
    pub sigma: EstimatorResult<R>,
    /// Fraction extinct by `T`, from the same replicas.
    pub eta: EstimatorResult<R>,
    /// Paired estimate of `σ̂ − η̂`.
    pub difference: EstimatorResult<R>,
    pub eps: R,
    pub t: R,
    /// Replicas excluded because they exceeded `max_population`.
    pub overflowed: usize,
}

/// `σ̂(x)`: fraction of replicas with `D_T < ε`, a finite-horizon surrogate
/// for `P_x(D_∞ = 0)`, reported with `η̂` so that `η̂ ≤ σ̂ ≤ 1` is visible.
pub fn sigma_mc<R: Real>(config: &BranchConfig<R>, t: R, eps: R, n_rep: usize, workers: usize) -> Result<SigmaReport<R>> {
    if !(config.motion.h(&config.x0) > R::zero()) {
        return Err(Error::ZeroEigenfunction);
    }
    let cfg = horizon(config, t);
    let run = run_replicas(&cfg, n_rep, workers, |_, traj| {
        let pop = traj.snapshot_at(t)?;
        let d = config_d(&cfg, pop).ok()?;
        Some((d < eps, pop.is_empty()))
    })?;
    let (mut s, mut e, mut diff) = (Welford::new(), Welford::new(), Welford::new());
    for &(small, extinct) in run.outputs.iter().flatten() {
        s.push(indicator::<R>(small));
        e.push(indicator::<R>(extinct));
        diff.push(indicator::<R>(small) - indicator::<R>(extinct));
    }
    Ok(SigmaReport {
        sigma: s.result(),
        eta: e.result(),
        difference: diff.result(),
        eps,
        t,
        overflowed: run.overflowed,
    })
}

/// `Ĝ(g)(x) = E_x(∏ g(u_1))` over the live particles after one time unit
/// (empty product = 1; absorbed particles contribute 1).
pub fn g_apply<R: Real>(
    g: impl Fn(&ParticleState<R>) -> R + Sync,
    x: ParticleState<R>,
    config_one_unit: &BranchConfig<R>,
    n_mc: usize,
    workers: usize,
) -> Result<EstimatorResult<R>> {
    Ok(g_apply_counting(&g, x, config_one_unit, config_one_unit.seed, n_mc, workers, |_| true)?.0)
}

/// `Ĝ` plus the number of live positions for which `inside` fails and the
/// total number of live positions.
fn g_apply_counting<R: Real>(
    g: &(impl Fn(&ParticleState<R>) -> R + Sync),
    x: ParticleState<R>,
    config: &BranchConfig<R>,
    seed: u64,
    n_mc: usize,
    workers: usize,
    inside: impl Fn(&ParticleState<R>) -> bool + Sync,
) -> Result<(EstimatorResult<R>, usize, usize)> {
    let mut cfg = horizon(config, R::one());
    cfg.x0 = x;
    cfg.seed = seed;
    let run = run_replicas(&cfg, n_mc, workers, |_, traj| {
        let pop = traj.snapshot_at(R::one())?;
        let product = pop.states().fold(R::one(), |acc, s| acc * g(s));
        let outside = pop.states().filter(|s| !inside(s)).count();
        Some((product, outside, pop.len()))
    })?;
    let mut acc = Welford::new();
    let (mut outside, mut total) = (0, 0);
    for &(p, o, n) in run.outputs.iter().flatten() {
        acc.push(p);
        outside += o;
        total += n;
    }
    Ok((acc.result(), outside, total))
}

fn grid_lookup<R: Real>(grid: &[ParticleState<R>], values: &[R], s: &ParticleState<R>) -> R {
    let Some(x) = s.coordinate().filter(|_| s.is_live()) else {
        return R::one();
    };
    let mut best = 0;
    let mut best_gap = R::infinity();
    for (i, p) in grid.iter().enumerate() {
        if let Some(c) = p.coordinate() {
            let gap = (c - x).abs();
            if gap < best_gap {
                best_gap = gap;
                best = i;
            }
        }
    }
    values[best]
}

/// Iterates `g ← Ĝ(g)` from `g = 0` on `x_grid`, with fresh Monte Carlo each
/// sweep. Off-grid states take the value of the nearest grid point. Returns
/// all iterates, starting with the zero vector.
pub fn g_iterate<R: Real>(
    x_grid: &[ParticleState<R>],
    config_one_unit: &BranchConfig<R>,
    n_iter: usize,
    n_mc: usize,
    workers: usize,
) -> Result<Vec<Vec<R>>> {
    if x_grid.is_empty() {
        return Err(Error::InvalidConfig("g-iteration grid is empty".into()));
    }
    let coords: Vec<R> = x_grid.iter().filter_map(|s| s.coordinate()).collect();
    let lo = coords.iter().copied().fold(R::infinity(), R::min);
    let hi = coords.iter().copied().fold(R::neg_infinity(), R::max);
    let integer = config_one_unit.motion.state_kind == StateKind::Integer;
    let inside = |s: &ParticleState<R>| match s.coordinate() {
        Some(c) if integer => coords.contains(&c),
        Some(c) => c >= lo && c <= hi,
        None => true,
    };

    let mut iterates = vec![vec![R::zero(); x_grid.len()]];
    for sweep in 0..n_iter {
        let current = iterates.last().cloned().unwrap_or_default();
        let g = |s: &ParticleState<R>| grid_lookup(x_grid, &current, s);
        let sweep_seed = replica_seed(config_one_unit.seed, sweep as u64);
        let mut next = Vec::with_capacity(x_grid.len());
        let (mut outside, mut total) = (0, 0);
        for (i, &x) in x_grid.iter().enumerate() {
            let seed = replica_seed(sweep_seed, i as u64);
            let (est, o, n) = g_apply_counting(&g, x, config_one_unit, seed, n_mc, workers, inside)?;
            next.push(est.mean);
            outside += o;
            total += n;
        }
        if total > 0 {
            let fraction = outside as f64 / total as f64;
            if fraction > MAX_BOUNDARY_MASS {
                return Err(Error::TruncationTooSmall { fraction });
            }
        }
        log::info!("g-iteration sweep {}/{n_iter}", sweep + 1);
        iterates.push(next);
    }
    Ok(iterates)
}

/// Fraction of replicas with at least one live particle in `k` at `t`.
pub fn local_survival_mc<R: Real>(
    config: &BranchConfig<R>,
    k: &Interval<R>,
    t: R,
    n_rep: usize,
    workers: usize,
) -> Result<EstimatorResult<R>> {
    let cfg = horizon(config, t);
    let run = run_replicas(&cfg, n_rep, workers, |_, traj| traj.snapshot_at(t).map(|p| indicator::<R>(p.count_in(k) > 0)))?;
    let samples: Vec<R> = run.outputs.into_iter().flatten().collect();
    Ok(EstimatorResult::from_samples(&samples))
}
