//! Statistics of the branching process: the Malthusian martingale `D_t`, the
//! asymptotic variance `Φ_x`, `W_t`, empirical ratios, quasi-stationary
//! sampling and the extinction functionals.

mod extinction;
mod qsd;

pub use extinction::{eta_mc, g_apply, g_iterate, local_survival_mc, sigma_mc, EtaReport, SigmaReport};
pub use qsd::{qsd_sample, Conditioning, Pooling, QsdReport, QsdSample};

use crate::config::BranchConfig;
use crate::engine::{run_replicas, Population};
use crate::error::{Error, Result};
use crate::estimate::{EstimatorResult, QuadratureResult, Welford};
use crate::motions::MotionModel;
use crate::quadrature::integrate;
use crate::real::{lit, to_f64, Real};
use crate::spine::m_second_moment;
use crate::state::{Interval, ParticleState};

/// Monte Carlo paths used for `E_x(M_s²)` when no closed form or density exists.
pub const M2_FALLBACK_PATHS: usize = 100_000;
/// Longest horizon explored by [`phi_quadrature`] before giving up.
pub const PHI_MAX_HORIZON: usize = 1000;
/// Width of the tail window for the growth-rate fit.
const SLOPE_WINDOW: usize = 10;

/// `D_t = (1/h(x0)) Σ h(u_t) e^{−(r(m1−1)−λ)t}` over the live particles.
pub fn malthusian_d<R: Real>(pop: &Population<R>, motion: &MotionModel<R>, x0: &ParticleState<R>, r: R, m1: R) -> Result<R> {
    let hx = motion.h(x0);
    if !(hx > R::zero()) {
        return Err(Error::ZeroEigenfunction);
    }
    let discount = (-(r * (m1 - R::one()) - motion.lambda()) * pop.time).exp();
    let total: R = pop.states().map(|s| motion.h(s)).sum();
    Ok(total * discount / hx)
}

/// `D_t` for a config's own motion, branching rate and start.
pub fn config_d<R: Real>(config: &BranchConfig<R>, pop: &Population<R>) -> Result<R> {
    malthusian_d(pop, &config.motion, &config.x0, config.r, config.offspring.m1())
}

/// `W_t(B, B') = ξ_t(B) / E_x(ξ_t(B'))`.
pub fn w_statistic<R: Real>(pop: &Population<R>, b: &Interval<R>, expected_b_prime: R) -> R {
    lit::<R>(pop.count_in(b) as f64) / expected_b_prime
}

/// `ν_t(B, B') = ξ_t(B) / ξ_t(B')`.
pub fn empirical_ratio<R: Real>(pop: &Population<R>, b: &Interval<R>, b_prime: &Interval<R>) -> Result<R> {
    let den = pop.count_in(b_prime);
    if den == 0 {
        return Err(Error::EmptyDenominator);
    }
    Ok(lit::<R>(pop.count_in(b) as f64) / lit(den as f64))
}

/// Evaluates `E_x(M_s²)`, mapping non-finite values to `None`.
fn m2_at<R: Real>(motion: &MotionModel<R>, x: ParticleState<R>, s: R) -> Result<Option<R>> {
    let v = m_second_moment(motion, x, s, M2_FALLBACK_PATHS, 0)?.mean;
    Ok(if v.is_finite() { Some(v) } else { None })
}

/// Least-squares slope of `ys` against `0, 1, …`.
fn slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// `Φ_x = (m2 − m1) r ∫₀^∞ E_x(M_s²) e^{−r(m1−1)s} ds`.
///
/// Integrates unit panels and tracks the growth rate of `ln E_x(M_s²)` over
/// the trailing ten units. The integral is truncated once the exponential tail
/// bound `f(T)/(r(m1−1) − slope)` drops below `tol/2`; divergence is declared
/// when the fitted rate reaches `r(m1−1) − 1e−6` at two consecutive decade
/// checkpoints, when the integrand overflows, or when the horizon cap is hit.
pub fn phi_quadrature<R: Real>(
    motion: &MotionModel<R>,
    x: ParticleState<R>,
    r: R,
    m1: R,
    m2: R,
    tol: R,
) -> Result<QuadratureResult<R>> {
    let g = r * (m1 - R::one());
    if !(g > motion.lambda()) {
        return Err(Error::NotSupercritical { growth: to_f64(g), lambda: to_f64(motion.lambda()) });
    }
    let coef = (m2 - m1) * r;
    let gf = to_f64(g);
    let tol_f = to_f64(tol);
    let inner_tol: R = lit(1e-12);

    let mut log_m2: Vec<f64> = vec![0.0];
    let mut value = R::zero();
    let mut error = R::zero();
    let mut steep_checkpoints = 0;
    for k in 0..PHI_MAX_HORIZON {
        let a: R = lit(k as f64);
        let mut failed = false;
        let piece = integrate(
            |s: R| match m2_at(motion, x, s) {
                Ok(Some(v)) => coef * v * (-g * s).exp(),
                _ => {
                    failed = true;
                    R::zero()
                }
            },
            a,
            a + R::one(),
            R::zero(),
            inner_tol,
        );
        let t_next = k + 1;
        let end: R = lit(t_next as f64);
        let m2_end = m2_at(motion, x, end)?;
        let Some(m2_end) = m2_end.filter(|_| !failed) else {
            return Ok(QuadratureResult::divergent(end));
        };
        value = value + piece.value;
        error = error + piece.error;
        log_m2.push(to_f64(m2_end).ln());

        if t_next < SLOPE_WINDOW {
            continue;
        }
        let rate = slope(&log_m2[t_next - SLOPE_WINDOW..=t_next]);
        if t_next % SLOPE_WINDOW == 0 {
            if rate >= gf - 1e-6 {
                steep_checkpoints += 1;
                if steep_checkpoints >= 2 {
                    return Ok(QuadratureResult::divergent(end));
                }
            } else {
                steep_checkpoints = 0;
            }
        }
        if rate < gf {
            let integrand_end = to_f64(coef * m2_end * (-g * end).exp());
            let tail = integrand_end / (gf - rate.max(0.0).min(gf));
            if tail.is_finite() && tail < tol_f / 2.0 && to_f64(error) < tol_f / 2.0 {
                let tail_r: R = lit(tail);
                return Ok(QuadratureResult::finite(value + tail_r, error + tail_r, end));
            }
        }
    }
    Ok(QuadratureResult::divergent(lit(PHI_MAX_HORIZON as f64)))
}

/// `E_x(D_t²) = E_x(M_t²) e^{−r(m1−1)t} + (m2 − m1) r ∫₀ᵗ E_x(M_s²) e^{−r(m1−1)s} ds`.
pub fn d_second_moment_analytic<R: Real>(motion: &MotionModel<R>, x: ParticleState<R>, r: R, m1: R, m2: R, t: R) -> Result<R> {
    let g = r * (m1 - R::one());
    let coef = (m2 - m1) * r;
    if t <= R::zero() {
        return Ok(R::one());
    }
    let mut failure = None;
    let panels = t.ceil().to_usize().unwrap_or(1).max(1);
    let width = t / lit(panels as f64);
    let mut total = R::zero();
    for k in 0..panels {
        let a = width * lit(k as f64);
        let piece = integrate(
            |s: R| match m_second_moment(motion, x, s, M2_FALLBACK_PATHS, 0) {
                Ok(v) => coef * v.mean * (-g * s).exp(),
                Err(e) => {
                    failure = Some(e);
                    R::zero()
                }
            },
            a,
            a + width,
            R::zero(),
            lit(1e-12),
        );
        total = total + piece.value;
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let end = m_second_moment(motion, x, t, M2_FALLBACK_PATHS, 0)?.mean;
    Ok(end * (-g * t).exp() + total)
}

/// Per-snapshot replica statistics of `D_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DMoments<R> {
    pub t: R,
    pub mean: EstimatorResult<R>,
    pub second: EstimatorResult<R>,
}

/// Replica means of `D_t` and `D_t²` at each snapshot of `config`.
/// Overflowed replicas are excluded and counted in the second return value.
pub fn d_moments<R: Real>(config: &BranchConfig<R>, n_rep: usize, workers: usize) -> Result<(Vec<DMoments<R>>, usize)> {
    let hx = config.motion.h(&config.x0);
    if !(hx > R::zero()) {
        return Err(Error::ZeroEigenfunction);
    }
    let run = run_replicas(config, n_rep, workers, |_, traj| {
        if traj.overflowed {
            return None;
        }
        Some(traj.snapshots.iter().map(|p| config_d(config, p).unwrap_or(R::zero())).collect::<Vec<R>>())
    })?;
    let times = &config.snapshot_times;
    let mut firsts = vec![Welford::new(); times.len()];
    let mut seconds = vec![Welford::new(); times.len()];
    for ds in run.outputs.iter().flatten() {
        for (j, &d) in ds.iter().enumerate() {
            firsts[j].push(d);
            seconds[j].push(d * d);
        }
    }
    let moments = times
        .iter()
        .enumerate()
        .map(|(j, &t)| DMoments { t, mean: firsts[j].result(), second: seconds[j].result() })
        .collect();
    Ok((moments, run.overflowed))
}

/// Replica estimate of `E_x(ξ_t(B)²)` at `config.t_end`.
pub fn population_second_moment<R: Real>(
    config: &BranchConfig<R>,
    b: &Interval<R>,
    n_rep: usize,
    workers: usize,
) -> Result<EstimatorResult<R>> {
    let run = run_replicas(config, n_rep, workers, |_, traj| {
        traj.snapshot_at(config.t_end).map(|p| {
            let c: R = lit(p.count_in(b) as f64);
            c * c
        })
    })?;
    let samples: Vec<R> = run.outputs.into_iter().flatten().collect();
    Ok(EstimatorResult::from_samples(&samples))
}
