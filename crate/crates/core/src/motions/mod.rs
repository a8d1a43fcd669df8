//! Underlying motions with their transition samplers and eigen-data.

mod chains;
mod diffusions;

use std::fmt;
use std::sync::Arc;

pub use chains::{ergodic_ctmc, stationary_distribution, subcritical_gw};
pub use diffusions::{killed_drifted_bm, killed_recurrent_ou, transient_ou};

use crate::eigen::EigenData;
use crate::quadrature::{integrate, integrate_to_infinity, Integral};
use crate::real::{lit, Real};
use crate::rng::RandomStream;
use crate::state::{Interval, ParticleState, StateKind};

/// Relative tolerance for integrals against transition densities.
pub const DENSITY_REL_TOL: f64 = 1e-10;

/// Transition mechanism of one motion.
pub trait Kernel<R: Real>: Send + Sync {
    /// Advances a live state by `dt`. Terminal states are never passed in.
    fn step(&self, state: ParticleState<R>, dt: R, rng: &mut RandomStream) -> ParticleState<R>;

    /// Density in `y` of the absorbed motion at time `t` started from `x`.
    fn density(&self, _x: R, _y: R, _t: R) -> Option<R> {
        None
    }

    /// `(lower end of the state space, center, scale)` of the mass of
    /// `density(x, ·, t)`, used to lay out quadrature panels.
    fn window(&self, x: R, t: R) -> (R, R, R) {
        (R::neg_infinity(), x, t.sqrt().max(lit(1e-3)))
    }

    /// Closed-form `E_x(h(X_t)²)` where one is known without a density.
    fn h_second_moment(&self, _x: &ParticleState<R>, _t: R) -> Option<R> {
        None
    }
}

/// An absorbed Markov motion bundled with its eigen-data.
#[derive(Clone)]
pub struct MotionModel<R> {
    pub name: String,
    kernel: Arc<dyn Kernel<R>>,
    /// The sampler carries no time-discretization bias.
    pub exact_step: bool,
    /// Killed diffusions split long moves into chunks of at most `step_dt`.
    pub substeps: bool,
    pub eigen: EigenData<R>,
    pub state_kind: StateKind,
}

impl<R: Real> MotionModel<R> {
    pub fn new(
        name: impl Into<String>,
        kernel: impl Kernel<R> + 'static,
        exact_step: bool,
        substeps: bool,
        eigen: EigenData<R>,
        state_kind: StateKind,
    ) -> Self {
        MotionModel { name: name.into(), kernel: Arc::new(kernel), exact_step, substeps, eigen, state_kind }
    }

    /// One sampler call over `dt`.
    pub fn step(&self, state: ParticleState<R>, dt: R, rng: &mut RandomStream) -> ParticleState<R> {
        if state.is_terminal() || dt <= R::zero() {
            return state;
        }
        self.kernel.step(state, dt, rng)
    }

    /// Evolves `state` for `duration`, in equal chunks no longer than
    /// `step_dt` when the model uses substeps.
    pub fn advance(&self, state: ParticleState<R>, duration: R, step_dt: R, rng: &mut RandomStream) -> ParticleState<R> {
        if state.is_terminal() || duration <= R::zero() {
            return state;
        }
        if !self.substeps || duration <= step_dt {
            return self.kernel.step(state, duration, rng);
        }
        let chunks = (duration / step_dt).ceil().to_usize().unwrap_or(1).max(1);
        let dt = duration / lit(chunks as f64);
        let mut s = state;
        for _ in 0..chunks {
            s = self.kernel.step(s, dt, rng);
            if s.is_terminal() {
                break;
            }
        }
        s
    }

    pub fn has_density(&self) -> bool {
        self.kernel.density(R::one(), R::one(), R::one()).is_some()
    }

    pub fn density(&self, x: R, y: R, t: R) -> Option<R> {
        self.kernel.density(x, y, t)
    }

    pub fn h(&self, state: &ParticleState<R>) -> R {
        self.eigen.h(state)
    }

    pub fn lambda(&self) -> R {
        self.eigen.lambda
    }

    /// Closed-form `E_x(h(X_t)²)` when the model provides one.
    pub fn h_second_moment(&self, x: &ParticleState<R>, t: R) -> Option<R> {
        if x.is_terminal() {
            return Some(R::zero());
        }
        self.kernel.h_second_moment(x, t)
    }

    /// `∫ g(y) density(x, y, t) dy` over the state space, or `None` without a density.
    pub fn integrate_density(&self, x: R, t: R, g: impl Fn(R) -> R) -> Option<Integral<R>> {
        let (lo, center, scale) = self.kernel.window(x, t);
        self.integrate_density_over(x, t, &Interval { lo, hi: R::infinity() }, center, scale, g)
    }

    /// `P_x(X_t ∈ B)` by quadrature of the density.
    pub fn probability_in(&self, x: R, t: R, b: &Interval<R>) -> Option<Integral<R>> {
        let (_, center, scale) = self.kernel.window(x, t);
        self.integrate_density_over(x, t, b, center, scale, |_| R::one())
    }

    /// `∫_B g(y) density(x, y, t) dy`.
    pub fn integrate_density_on(&self, x: R, t: R, b: &Interval<R>, g: impl Fn(R) -> R) -> Option<Integral<R>> {
        let (_, center, scale) = self.kernel.window(x, t);
        self.integrate_density_over(x, t, b, center, scale, g)
    }

    fn integrate_density_over(
        &self,
        x: R,
        t: R,
        b: &Interval<R>,
        center: R,
        scale: R,
        g: impl Fn(R) -> R,
    ) -> Option<Integral<R>> {
        self.kernel.density(x, x, t.max(lit(1e-12)))?;
        if t <= R::zero() {
            return None;
        }
        let (support_lo, _, _) = self.kernel.window(x, t);
        let lo = b.lo.max(support_lo);
        let hi = b.hi;
        if lo >= hi {
            return Some(Integral { value: R::zero(), error: R::zero() });
        }
        let tol: R = lit(DENSITY_REL_TOL);
        let f = |y: R| {
            let d = self.kernel.density(x, y, t).unwrap_or(R::zero());
            if d == R::zero() {
                R::zero()
            } else {
                g(y) * d
            }
        };
        Some(if hi.is_finite() && lo.is_finite() {
            // Split at the bulk so narrow densities inside wide sets are resolved.
            let panels = ((hi - lo) / scale).ceil().to_usize().unwrap_or(1).clamp(1, 10_000);
            let w = (hi - lo) / lit(panels as f64);
            let mut total = Integral { value: R::zero(), error: R::zero() };
            for k in 0..panels {
                let a = lo + w * lit(k as f64);
                let piece = integrate(f, a, a + w, R::zero(), tol);
                total.value = total.value + piece.value;
                total.error = total.error + piece.error;
            }
            total
        } else if hi.is_finite() {
            integrate_to_infinity(|u: R| f(-u), -hi, -center, scale, tol)
        } else {
            integrate_to_infinity(f, lo, center.max(lo), scale, tol)
        })
    }
}

impl<R: Real> fmt::Debug for MotionModel<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MotionModel")
            .field("name", &self.name)
            .field("exact_step", &self.exact_step)
            .field("state_kind", &self.state_kind)
            .field("eigen", &self.eigen)
            .finish()
    }
}

/// Largest deviation of `p(t)/p(t+s)` from 1 over `s ∈ [0, s_max]`, per grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularVariationReport {
    pub rows: Vec<(f64, f64)>,
}

impl RegularVariationReport {
    /// Whether the deviation shrinks along the grid and ends below `tol`.
    pub fn decays(&self, tol: f64) -> bool {
        let monotone = self.rows.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-15);
        monotone && self.rows.last().is_some_and(|r| r.1 < tol)
    }
}

/// Numerical check that `p` is regularly varying in the sense
/// `sup_{s ≤ s_max} |p(t)/p(t+s) − 1| → 0`. Both the ratio and its reciprocal
/// are measured and the larger deviation reported.
pub fn regular_variation_check(p: impl Fn(f64) -> f64, s_max: f64, t_grid: &[f64]) -> RegularVariationReport {
    const POINTS: usize = 200;
    let rows = t_grid
        .iter()
        .map(|&t| {
            let pt = p(t);
            let worst = (0..=POINTS)
                .map(|i| {
                    let ps = p(t + s_max * i as f64 / POINTS as f64);
                    (pt / ps - 1.0).abs().max((ps / pt - 1.0).abs())
                })
                .fold(0.0, f64::max);
            (t, worst)
        })
        .collect();
    RegularVariationReport { rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_p_has_zero_deviation() {
        let rep = regular_variation_check(|_| 1.0, 5.0, &[1.0, 10.0]);
        assert!(rep.rows.iter().all(|r| r.1 == 0.0));
    }

    #[test]
    fn power_law_deviation() {
        let rep = regular_variation_check(|t| t.powf(-1.5), 5.0, &[10.0, 100.0, 1000.0]);
        let last = rep.rows[2].1;
        assert!((last - ((1005.0f64 / 1000.0).powf(1.5) - 1.0)).abs() < 1e-12);
        assert!((last - 0.0075).abs() < 1e-4);
        assert!(rep.decays(0.01));
    }

    #[test]
    fn exponential_is_flagged() {
        let rep = regular_variation_check(f64::exp, 5.0, &[10.0, 100.0]);
        assert!((rep.rows[1].1 - (5.0f64.exp() - 1.0)).abs() < 1e-9);
        assert!(!rep.decays(0.01));
    }
}
