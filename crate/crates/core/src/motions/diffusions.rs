use crate::eigen::EigenData;
use crate::error::{Error, Result};
use crate::real::{lit, to_f64, Real};
use crate::rng::RandomStream;
use crate::state::{ParticleState, StateKind};

use super::{Kernel, MotionModel};

fn normal_pdf<R: Real>(z: R, var: R) -> R {
    (-(z * z) / (var + var)).exp() / (R::TAU() * var).sqrt()
}

fn positive(name: &str, value: impl Real) -> Result<()> {
    if value > num_traits::Zero::zero() && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {}", to_f64(value))))
    }
}

/// Killed Gaussian move: from `x > 0` the free endpoint is `mean + sd·Z`; the
/// path is absorbed if the endpoint is nonpositive or, given the endpoints,
/// with the bridge crossing probability `exp(−2·a·x·y/var)`.
fn killed_gaussian_step<R: Real>(x: R, mean: R, var: R, a: R, rng: &mut RandomStream) -> ParticleState<R> {
    let z: R = rng.normal();
    let y = mean + var.sqrt() * z;
    if y <= R::zero() {
        return ParticleState::Absorbed;
    }
    let u: R = rng.uniform();
    let cross = (-(lit::<R>(2.0)) * a * x * y / var).exp();
    if u < cross {
        ParticleState::Absorbed
    } else {
        ParticleState::Real(y)
    }
}

/// Density of the killed Gaussian move: `φ(y − mean)·(1 − exp(−2axy/var))`.
fn killed_gaussian_density<R: Real>(x: R, y: R, mean: R, var: R, a: R) -> R {
    if y <= R::zero() || x <= R::zero() {
        return R::zero();
    }
    let kill = -(-(lit::<R>(2.0)) * a * x * y / var).exp_m1();
    normal_pdf(y - mean, var) * kill
}

struct KilledDriftedBm<R> {
    c: R,
}

impl<R: Real> Kernel<R> for KilledDriftedBm<R> {
    fn step(&self, state: ParticleState<R>, dt: R, rng: &mut RandomStream) -> ParticleState<R> {
        match state {
            ParticleState::Real(x) if x > R::zero() => killed_gaussian_step(x, x - self.c * dt, dt, R::one(), rng),
            ParticleState::Real(_) => ParticleState::Absorbed,
            other => other,
        }
    }

    fn density(&self, x: R, y: R, t: R) -> Option<R> {
        if t <= R::zero() {
            return Some(R::zero());
        }
        // Girsanov tilt of the killed driftless density.
        let c = self.c;
        let tilt = (-c * (y - x) - c * c * t * lit(0.5)).exp();
        Some(tilt * killed_gaussian_density(x, y, x, t, R::one()))
    }

    fn window(&self, x: R, t: R) -> (R, R, R) {
        (R::zero(), x, t.sqrt().max(lit(1e-3)))
    }
}

/// Brownian motion with drift `−c` killed at the origin.
///
/// Eigen-data: `λ = c²/2`, `h(x) = x e^{cx} / sqrt(2πλ²)`,
/// `ν(dy) = 2λ y e^{−cy} dy` (a probability), `p(t) = t^{−3/2}`.
pub fn killed_drifted_bm<R: Real>(c: R) -> Result<MotionModel<R>> {
    positive("drift c", c)?;
    let lambda = c * c * lit(0.5);
    let h_norm = (R::TAU() * lambda * lambda).sqrt();
    let eigen = EigenData::new(
        lambda,
        move |s: &ParticleState<R>| match s.coordinate() {
            Some(x) if x > R::zero() => x * (c * x).exp() / h_norm,
            _ => R::zero(),
        },
        |t: R| t.powf(lit(-1.5)),
        "h(x) = x e^{cx}/sqrt(2 pi lambda^2); nu(dy) = 2 lambda y e^{-cy} dy is a probability; p(t) = t^{-3/2}",
    )
    .with_nu_cdf(move |x: R| {
        if x <= R::zero() {
            R::zero()
        } else {
            R::one() - (R::one() + c * x) * (-c * x).exp()
        }
    });
    Ok(MotionModel::new("killed_drifted_bm", KilledDriftedBm { c }, true, true, eigen, StateKind::Real))
}

struct KilledOu<R> {
    lambda: R,
}

impl<R: Real> KilledOu<R> {
    /// `(a, v)` with `a = e^{−λt}` and `v = (1 − a²)/(2λ)`.
    fn coefficients(&self, t: R) -> (R, R) {
        let a = (-self.lambda * t).exp();
        let v = -(-(lit::<R>(2.0)) * self.lambda * t).exp_m1() / (self.lambda + self.lambda);
        (a, v)
    }
}

impl<R: Real> Kernel<R> for KilledOu<R> {
    fn step(&self, state: ParticleState<R>, dt: R, rng: &mut RandomStream) -> ParticleState<R> {
        match state {
            ParticleState::Real(x) if x > R::zero() => {
                let (a, v) = self.coefficients(dt);
                killed_gaussian_step(x, a * x, v, a, rng)
            }
            ParticleState::Real(_) => ParticleState::Absorbed,
            other => other,
        }
    }

    fn density(&self, x: R, y: R, t: R) -> Option<R> {
        if t <= R::zero() {
            return Some(R::zero());
        }
        let (a, v) = self.coefficients(t);
        Some(killed_gaussian_density(x, y, a * x, v, a))
    }

    fn window(&self, x: R, t: R) -> (R, R, R) {
        let (a, v) = self.coefficients(t);
        (R::zero(), a * x, v.sqrt().max(lit(1e-3)))
    }
}

/// Ornstein–Uhlenbeck process `dX = −λX dt + dW` killed at the origin.
///
/// The drift is odd, so the killed transition density follows from the
/// method of images and the sampler is exact: the endpoint is the free OU
/// transition and, given both endpoints, the path has crossed zero with
/// probability `exp(−2·e^{−λδ}·x·y/v)`, `v = (1 − e^{−2λδ})/(2λ)`.
///
/// Eigen-data: `h(x) = sqrt(4λ/π) x`, `ν(dy) = 2λ y e^{−λy²} dy`, `ν(h) = 1`, `p ≡ 1`.
pub fn killed_recurrent_ou<R: Real>(lam: R) -> Result<MotionModel<R>> {
    positive("lambda", lam)?;
    let h_norm = (lit::<R>(4.0) * lam / R::PI()).sqrt();
    let eigen = EigenData::new(
        lam,
        move |s: &ParticleState<R>| match s.coordinate() {
            Some(x) if x > R::zero() => h_norm * x,
            _ => R::zero(),
        },
        |_| R::one(),
        "h(x) = sqrt(4 lambda/pi) x; nu(dy) = 2 lambda y e^{-lambda y^2} dy is a probability with nu(h) = 1; p = 1",
    )
    .with_nu_cdf(move |x: R| if x <= R::zero() { R::zero() } else { -(-lam * x * x).exp_m1() });
    Ok(MotionModel::new("killed_recurrent_ou", KilledOu { lambda: lam }, true, true, eigen, StateKind::Real))
}

struct TransientOu<R> {
    lambda: R,
    sigma2: R,
}

impl<R: Real> TransientOu<R> {
    fn variance(&self, t: R) -> R {
        self.sigma2 * (lit::<R>(2.0) * self.lambda * t).exp_m1() / (self.lambda + self.lambda)
    }
}

impl<R: Real> Kernel<R> for TransientOu<R> {
    fn step(&self, state: ParticleState<R>, dt: R, rng: &mut RandomStream) -> ParticleState<R> {
        match state {
            ParticleState::Real(x) => {
                let z: R = rng.normal();
                ParticleState::Real(x * (self.lambda * dt).exp() + z * self.variance(dt).sqrt())
            }
            other => other,
        }
    }

    fn density(&self, x: R, y: R, t: R) -> Option<R> {
        if t <= R::zero() {
            return Some(R::zero());
        }
        Some(normal_pdf(y - x * (self.lambda * t).exp(), self.variance(t)))
    }

    fn window(&self, x: R, t: R) -> (R, R, R) {
        (R::neg_infinity(), x * (self.lambda * t).exp(), self.variance(t).sqrt().max(lit(1e-3)))
    }
}

/// Transient Ornstein–Uhlenbeck process with generator `½σ²f'' + λxf'`.
///
/// Eigen-data: `h(x) = sqrt(λ/(πσ²)) e^{−λx²/σ²}`, `ν` = Lebesgue measure
/// (infinite, so no cdf), `p ≡ 1`.
pub fn transient_ou<R: Real>(lam: R, sigma2: R) -> Result<MotionModel<R>> {
    positive("lambda", lam)?;
    positive("sigma2", sigma2)?;
    let h_norm = (lam / (R::PI() * sigma2)).sqrt();
    let eigen = EigenData::new(
        lam,
        move |s: &ParticleState<R>| match s.coordinate() {
            Some(x) => h_norm * (-lam * x * x / sigma2).exp(),
            None => R::zero(),
        },
        |_| R::one(),
        "h(x) = sqrt(lambda/(pi sigma2)) exp(-lambda x^2/sigma2); nu = Lebesgue measure; p = 1",
    )
    .with_nu_mass(|b| if b.is_bounded() { b.length() } else { R::infinity() });
    Ok(MotionModel::new("transient_ou", TransientOu { lambda: lam, sigma2 }, true, false, eigen, StateKind::Real))
}
