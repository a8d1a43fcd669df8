//! Particle states, Ulam–Harris labels and interval test sets.

use std::fmt;

use crate::error::{Error, Result};
use crate::real::{to_f64, Real};

/// Whether a motion lives on the real line or on the nonnegative integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    Real,
    Integer,
}

/// Position of a single particle.
///
/// `Absorbed` marks a state in the absorbing boundary of the motion and
/// `Dead` the graveyard reached by a particle with zero offspring. Both are
/// terminal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParticleState<R> {
    Real(R),
    Count(u64),
    Absorbed,
    Dead,
}

impl<R: Real> ParticleState<R> {
    pub fn is_live(&self) -> bool {
        matches!(self, ParticleState::Real(_) | ParticleState::Count(_))
    }

    pub fn is_terminal(&self) -> bool {
        !self.is_live()
    }

    /// Scalar coordinate of a live state; `None` for terminal markers.
    pub fn coordinate(&self) -> Option<R> {
        match *self {
            ParticleState::Real(x) => Some(x),
            ParticleState::Count(n) => R::from_u64(n),
            ParticleState::Absorbed | ParticleState::Dead => None,
        }
    }
}

impl<R: Real> fmt::Display for ParticleState<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParticleState::Real(x) => write!(f, "{x}"),
            ParticleState::Count(n) => write!(f, "{n}"),
            ParticleState::Absorbed => f.write_str("absorbed"),
            ParticleState::Dead => f.write_str("dead"),
        }
    }
}

/// Ulam–Harris label: the sequence of child indices from the root.
///
/// The derived ordering is lexicographic, which coincides with depth-first
/// preorder of the genealogical tree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ParticleId(Vec<u32>);

impl ParticleId {
    pub fn root() -> Self {
        ParticleId(Vec::new())
    }

    pub fn from_path(path: Vec<u32>) -> Self {
        ParticleId(path)
    }

    pub fn child(&self, index: u32) -> Self {
        let mut path = Vec::with_capacity(self.0.len() + 1);
        path.extend_from_slice(&self.0);
        path.push(index);
        ParticleId(path)
    }

    pub fn path(&self) -> &[u32] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parent(&self) -> Option<ParticleId> {
        let (_, head) = self.0.split_last()?;
        Some(ParticleId(head.to_vec()))
    }
}

impl fmt::Display for ParticleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("root");
        }
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{k}")?;
        }
        Ok(())
    }
}

/// Half-open interval `[lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<R> {
    pub lo: R,
    pub hi: R,
}

impl<R: Real> Interval<R> {
    pub fn new(lo: R, hi: R) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidParameter(format!(
                "interval requires lo < hi, got [{}, {})",
                to_f64(lo),
                to_f64(hi)
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn whole() -> Self {
        Interval { lo: R::neg_infinity(), hi: R::infinity() }
    }

    pub fn above(lo: R) -> Self {
        Interval { lo, hi: R::infinity() }
    }

    pub fn contains_value(&self, x: R) -> bool {
        x >= self.lo && x < self.hi
    }

    /// Terminal states are never contained.
    pub fn contains(&self, state: &ParticleState<R>) -> bool {
        state.coordinate().is_some_and(|x| self.contains_value(x))
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn length(&self) -> R {
        self.hi - self.lo
    }
}

impl<R: Real> fmt::Display for Interval<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}
