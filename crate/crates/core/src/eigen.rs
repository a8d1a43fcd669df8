//! Eigen-data of an absorbed motion: `λ`, `h`, `ν` and the factor `p(t)`.

use std::fmt;
use std::sync::Arc;

use crate::real::Real;
use crate::state::{Interval, ParticleState};

pub type StateFn<R> = Arc<dyn Fn(&ParticleState<R>) -> R + Send + Sync>;
pub type ScalarFn<R> = Arc<dyn Fn(R) -> R + Send + Sync>;
pub type MassFn<R> = Arc<dyn Fn(&Interval<R>) -> R + Send + Sync>;

/// Right eigenfunction `h`, left eigenmeasure `ν` and eigenvalue `−λ` of the
/// motion generator, plus the correction factor `p(t)` in
/// `P_x(X_t ∈ B) ~ h(x) p(t) e^{−λt} ν(B)`.
#[derive(Clone)]
pub struct EigenData<R> {
    pub lambda: R,
    h: StateFn<R>,
    nu_cdf: Option<ScalarFn<R>>,
    nu_mass: Option<MassFn<R>>,
    p: ScalarFn<R>,
    pub normalization_note: String,
}

impl<R: Real> EigenData<R> {
    pub fn new(
        lambda: R,
        h: impl Fn(&ParticleState<R>) -> R + Send + Sync + 'static,
        p: impl Fn(R) -> R + Send + Sync + 'static,
        normalization_note: impl Into<String>,
    ) -> Self {
        EigenData {
            lambda,
            h: Arc::new(h),
            nu_cdf: None,
            nu_mass: None,
            p: Arc::new(p),
            normalization_note: normalization_note.into(),
        }
    }

    /// Attaches a normalized eigenmeasure cdf; `ν(B)` is derived from it, which
    /// is only right for atomless measures (override with `with_nu_mass`).
    pub fn with_nu_cdf(mut self, cdf: impl Fn(R) -> R + Send + Sync + 'static) -> Self {
        let cdf: ScalarFn<R> = Arc::new(cdf);
        let inner = Arc::clone(&cdf);
        self.nu_mass = Some(Arc::new(move |b: &Interval<R>| interval_mass(&*inner, b)));
        self.nu_cdf = Some(cdf);
        self
    }

    pub fn with_nu_mass(mut self, mass: impl Fn(&Interval<R>) -> R + Send + Sync + 'static) -> Self {
        self.nu_mass = Some(Arc::new(mass));
        self
    }

    /// `h(state)`; zero exactly on terminal states.
    pub fn h(&self, state: &ParticleState<R>) -> R {
        if state.is_terminal() {
            return R::zero();
        }
        (self.h)(state)
    }

    pub fn p(&self, t: R) -> R {
        (self.p)(t)
    }

    pub fn nu_cdf(&self, x: R) -> Option<R> {
        self.nu_cdf.as_ref().map(|f| f(x))
    }

    pub fn has_nu_cdf(&self) -> bool {
        self.nu_cdf.is_some()
    }

    pub fn nu_mass(&self, b: &Interval<R>) -> Option<R> {
        self.nu_mass.as_ref().map(|f| f(b))
    }

    pub fn p_fn(&self) -> ScalarFn<R> {
        Arc::clone(&self.p)
    }

    pub fn cdf_fn(&self) -> Option<ScalarFn<R>> {
        self.nu_cdf.clone()
    }
}

/// Increment of a cdf over `[lo, hi)`; infinite ends map to 0 and 1.
fn interval_mass<R: Real>(cdf: &dyn Fn(R) -> R, b: &Interval<R>) -> R {
    let upper = if b.hi == R::infinity() { R::one() } else { cdf(b.hi) };
    let lower = if b.lo == R::neg_infinity() { R::zero() } else { cdf(b.lo) };
    (upper - lower).max(R::zero())
}

impl<R: Real> fmt::Debug for EigenData<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EigenData")
            .field("lambda", &self.lambda)
            .field("nu_cdf", &self.nu_cdf.is_some())
            .field("nu_mass", &self.nu_mass.is_some())
            .field("normalization_note", &self.normalization_note)
            .finish()
    }
}
