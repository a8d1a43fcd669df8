//! Many-to-one and many-to-two oracles, h-transform expectations and the
//! `s_B(x, t)` diagnostic.
//!
//! Expectations under the h-transformed law are computed by importance
//! weighting plain motion paths with `M_t = h(X_t) e^{λt} / h(x)`.

use crate::error::{Error, Result};
use crate::estimate::{effective_sample_size, EstimatorResult, Welford};
use crate::motions::MotionModel;
use crate::offspring::OffspringLaw;
use crate::real::{lit, Real};
use crate::rng::{RandomStream, StreamKey};
use crate::state::{Interval, ParticleState};

pub const MANY_TO_ONE_CONTEXT: u64 = 1;
pub const TWO_SPINE_CONTEXT: u64 = 2;
pub const H_TRANSFORM_CONTEXT: u64 = 3;
pub const M_SECOND_MOMENT_CONTEXT: u64 = 4;

/// Substep used when a motion's sampler is not exact.
const FALLBACK_STEP: f64 = 1e-3;

/// Position of a single motion path at `t`.
pub fn sample_endpoint<R: Real>(motion: &MotionModel<R>, x: ParticleState<R>, t: R, rng: &mut RandomStream) -> ParticleState<R> {
    if motion.exact_step {
        motion.step(x, t, rng)
    } else {
        motion.advance(x, t, lit(FALLBACK_STEP), rng)
    }
}

fn path_stream(seed: u64, context: u64, i: usize) -> RandomStream {
    StreamKey::new(seed, context).child(i as u32).stream()
}

/// `P_x(X_t ∈ B)` by quadrature when the motion has a density, otherwise by
/// `n_mc` independent paths.
pub fn probability_in<R: Real>(
    motion: &MotionModel<R>,
    x: ParticleState<R>,
    b: &Interval<R>,
    t: R,
    n_mc: usize,
    seed: u64,
) -> EstimatorResult<R> {
    if t <= R::zero() {
        return EstimatorResult::exact(if b.contains(&x) { R::one() } else { R::zero() });
    }
    if let Some(xv) = x.coordinate().filter(|_| motion.has_density() && x.is_live()) {
        if let Some(q) = motion.probability_in(xv, t, b) {
            return EstimatorResult::exact(q.value);
        }
    }
    let mut acc = Welford::new();
    for i in 0..n_mc {
        let mut rng = path_stream(seed, MANY_TO_ONE_CONTEXT, i);
        let y = sample_endpoint(motion, x, t, &mut rng);
        acc.push(if b.contains(&y) { R::one() } else { R::zero() });
    }
    acc.result()
}

/// Many-to-one: `E_x(ξ_t(B)) = e^{r(m1−1)t} P_x(X_t ∈ B)`.
pub fn many_to_one<R: Real>(
    motion: &MotionModel<R>,
    x: ParticleState<R>,
    b: &Interval<R>,
    t: R,
    r: R,
    m1: R,
    n_mc: usize,
    seed: u64,
) -> EstimatorResult<R> {
    let growth = (r * (m1 - R::one()) * t).exp();
    probability_in(motion, x, b, t, n_mc, seed).scaled(growth)
}

/// A pair of motions that move together until `split_time` and
/// independently afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSpineSample<R> {
    /// `E ∧ t` with `E ~ Exp((m2 − m1) r)`.
    pub split_time: R,
    pub x1: ParticleState<R>,
    pub x2: ParticleState<R>,
    /// `exp([Var(m) + (m1 − 1)²] r (E ∧ t))`.
    pub weight: R,
}

/// Draws one coupled pair at time `t`.
pub fn sample_two_spine<R: Real>(
    motion: &MotionModel<R>,
    x: ParticleState<R>,
    t: R,
    r: R,
    offspring: &OffspringLaw<R>,
    rng: &mut RandomStream,
) -> TwoSpineSample<R> {
    let (m1, m2) = (offspring.m1(), offspring.m2());
    let split_rate = (m2 - m1) * r;
    let e = if split_rate > R::zero() { rng.exponential(split_rate) } else { R::infinity() };
    let split_time = if e < t { e } else { t };
    let excess = offspring.variance() + (m1 - R::one()) * (m1 - R::one());
    let weight = (excess * r * split_time).exp();
    let joint = sample_endpoint(motion, x, split_time, rng);
    if split_time >= t {
        return TwoSpineSample { split_time, x1: joint, x2: joint, weight };
    }
    let rest = t - split_time;
    let x1 = sample_endpoint(motion, joint, rest, rng);
    let x2 = sample_endpoint(motion, joint, rest, rng);
    TwoSpineSample { split_time, x1, x2, weight }
}

/// Many-to-two estimate of `E_x(ξ_t(B)²)` (ordered pairs, diagonal included).
pub fn two_spine_second_moment<R: Real>(
    motion: &MotionModel<R>,
    x: ParticleState<R>,
    b: &Interval<R>,
    t: R,
    r: R,
    offspring: &OffspringLaw<R>,
    n_mc: usize,
    seed: u64,
) -> EstimatorResult<R> {
    if t <= R::zero() {
        return EstimatorResult::exact(if b.contains(&x) { R::one() } else { R::zero() });
    }
    let growth = (lit::<R>(2.0) * r * (offspring.m1() - R::one()) * t).exp();
    let mut acc = Welford::new();
    for i in 0..n_mc {
        let mut rng = path_stream(seed, TWO_SPINE_CONTEXT, i);
        let s = sample_two_spine(motion, x, t, r, offspring, &mut rng);
        let hit = b.contains(&s.x1) && b.contains(&s.x2);
        acc.push(if hit { s.weight } else { R::zero() });
    }
    acc.result().scaled(growth)
}

/// `Ẽ_x(f(X_t)) = (e^{λt}/h(x)) E_x(h(X_t) f(X_t))` over `n_mc` paths of the
/// absorbed motion; the result carries the effective sample size of the
/// weights `M_t`.
pub fn h_transform_expectation<R: Real>(
    motion: &MotionModel<R>,
    x: ParticleState<R>,
    f: impl Fn(&ParticleState<R>) -> R,
    t: R,
    n_mc: usize,
    seed: u64,
) -> Result<EstimatorResult<R>> {
    let hx = motion.h(&x);
    if !(hx > R::zero()) {
        return Err(Error::ZeroEigenfunction);
    }
    if t <= R::zero() {
        return Ok(EstimatorResult::exact(f(&x)));
    }
    let scale = (motion.lambda() * t).exp() / hx;
    let mut terms = Vec::with_capacity(n_mc);
    let mut weights = Vec::with_capacity(n_mc);
    for i in 0..n_mc {
        let mut rng = path_stream(seed, H_TRANSFORM_CONTEXT, i);
        let y = sample_endpoint(motion, x, t, &mut rng);
        let w = motion.h(&y) * scale;
        weights.push(w);
        terms.push(if w > R::zero() { w * f(&y) } else { R::zero() });
    }
    let mut result = EstimatorResult::from_samples(&terms);
    result.ess = Some(effective_sample_size(&weights));
    Ok(result)
}

/// One point of the `s_B(x, t)` curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbDiagnostic<R> {
    pub t: R,
    pub estimate: R,
    pub stderr: R,
}

fn nu_of<R: Real>(motion: &MotionModel<R>, b: &Interval<R>) -> Result<R> {
    motion.eigen.nu_mass(b).filter(|v| v.is_finite()).ok_or_else(|| Error::MissingNuMass(format!("{b} under {}", motion.name)))
}

/// `ŝ_B(x, t) = Ẽ_x(1_B/h(X_t))/p(t) − ν(B)` on a grid of times, by Monte Carlo.
pub fn s_b_curve<R: Real>(
    motion: &MotionModel<R>,
    x: ParticleState<R>,
    b: &Interval<R>,
    t_grid: &[R],
    n_mc: usize,
    seed: u64,
) -> Result<Vec<SbDiagnostic<R>>> {
    let nu = nu_of(motion, b)?;
    t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let f = |y: &ParticleState<R>| if b.contains(y) { R::one() / motion.h(y) } else { R::zero() };
            let est = h_transform_expectation(motion, x, f, t, n_mc, seed.wrapping_add(k as u64))?;
            let p = motion.eigen.p(t);
            Ok(SbDiagnostic { t, estimate: est.mean / p - nu, stderr: est.stderr / p })
        })
        .collect()
}

/// `s_B(x, t)` by quadrature of the transition density.
pub fn s_b_reference<R: Real>(motion: &MotionModel<R>, x: R, b: &Interval<R>, t: R) -> Result<Option<R>> {
    let nu = nu_of(motion, b)?;
    let hx = motion.h(&ParticleState::Real(x));
    if !(hx > R::zero()) {
        return Err(Error::ZeroEigenfunction);
    }
    Ok(motion.probability_in(x, t, b).map(|q| {
        (motion.lambda() * t).exp() / (hx * motion.eigen.p(t)) * q.value - nu
    }))
}

/// `E_x(M_s²) = e^{2λs} E_x(h²(X_s)) / h²(x)`: closed form when the motion
/// has one, quadrature of the density otherwise, else `n_mc` paths.
pub fn m_second_moment<R: Real>(
    motion: &MotionModel<R>,
    x: ParticleState<R>,
    s: R,
    n_mc: usize,
    seed: u64,
) -> Result<EstimatorResult<R>> {
    let hx = motion.h(&x);
    if !(hx > R::zero()) {
        return Err(Error::ZeroEigenfunction);
    }
    if s <= R::zero() {
        return Ok(EstimatorResult::exact(R::one()));
    }
    let scale = (lit::<R>(2.0) * motion.lambda() * s).exp() / (hx * hx);
    if let Some(v) = motion.h_second_moment(&x, s) {
        return Ok(EstimatorResult::exact(v * scale));
    }
    if let Some(xv) = x.coordinate().filter(|_| motion.has_density()) {
        let h2 = |y: R| {
            let h = motion.h(&ParticleState::Real(y));
            h * h
        };
        if let Some(q) = motion.integrate_density(xv, s, h2) {
            return Ok(EstimatorResult::exact(q.value * scale));
        }
    }
    let mut acc = Welford::new();
    for i in 0..n_mc {
        let mut rng = path_stream(seed, M_SECOND_MOMENT_CONTEXT, i);
        let y = sample_endpoint(motion, x, s, &mut rng);
        let h = motion.h(&y);
        acc.push(h * h * scale);
    }
    Ok(acc.result())
}
