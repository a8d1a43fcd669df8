//! Configuration of one branching simulation.

use crate::error::{Error, Result};
use crate::motions::MotionModel;
use crate::offspring::OffspringLaw;
use crate::real::{lit, to_f64, Real};
use crate::state::{ParticleState, StateKind};

pub const DEFAULT_MAX_POPULATION: usize = 1_000_000;

/// Motion, offspring law, branching rate and observation schedule.
#[derive(Debug, Clone)]
pub struct BranchConfig<R: Real> {
    pub motion: MotionModel<R>,
    pub offspring: OffspringLaw<R>,
    /// Branching rate: events per unit time per particle.
    pub r: R,
    pub x0: ParticleState<R>,
    pub t_end: R,
    /// Sorted observation times, each in `[0, t_end]`.
    pub snapshot_times: Vec<R>,
    /// Longest motion substep for models that use substeps.
    pub step_dt: R,
    pub max_population: usize,
    pub seed: u64,
}

impl<R: Real> BranchConfig<R> {
    /// Config observed only at `t_end`.
    pub fn new(motion: MotionModel<R>, offspring: OffspringLaw<R>, r: R, x0: ParticleState<R>, t_end: R) -> Self {
        BranchConfig {
            motion,
            offspring,
            r,
            x0,
            t_end,
            snapshot_times: vec![t_end],
            step_dt: lit(0.05),
            max_population: DEFAULT_MAX_POPULATION,
            seed: 0,
        }
    }

    pub fn with_snapshots(mut self, times: Vec<R>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_step_dt(mut self, step_dt: R) -> Self {
        self.step_dt = step_dt;
        self
    }

    pub fn with_max_population(mut self, max_population: usize) -> Self {
        self.max_population = max_population;
        self
    }

    /// Exponential growth rate `r(m1 − 1)` of the mean population.
    pub fn growth_rate(&self) -> R {
        self.r * (self.offspring.m1() - R::one())
    }

    /// Structural checks needed before any simulation.
    pub fn validate(&self) -> Result<()> {
        if !(self.r > R::zero()) || !self.r.is_finite() {
            return Err(Error::InvalidConfig(format!("branching rate r must be positive, got {}", to_f64(self.r))));
        }
        if !(self.t_end >= R::zero()) || !self.t_end.is_finite() {
            return Err(Error::InvalidConfig(format!("t_end must be finite and nonnegative, got {}", to_f64(self.t_end))));
        }
        if !(self.step_dt > R::zero()) || !self.step_dt.is_finite() {
            return Err(Error::InvalidConfig(format!("step_dt must be positive, got {}", to_f64(self.step_dt))));
        }
        if self.max_population == 0 {
            return Err(Error::InvalidConfig("max_population must be at least 1".into()));
        }
        let mut prev = R::neg_infinity();
        for &t in &self.snapshot_times {
            if !(t >= R::zero()) || t > self.t_end {
                return Err(Error::InvalidConfig(format!(
                    "snapshot time {} outside [0, t_end = {}]",
                    to_f64(t),
                    to_f64(self.t_end)
                )));
            }
            if t <= prev {
                return Err(Error::InvalidConfig("snapshot_times must be strictly increasing".into()));
            }
            prev = t;
        }
        let kind_ok = match (self.motion.state_kind, self.x0) {
            (StateKind::Real, ParticleState::Real(x)) => x.is_finite(),
            (StateKind::Integer, ParticleState::Count(_)) => true,
            _ => false,
        };
        if !kind_ok {
            return Err(Error::InvalidConfig(format!("x0 = {} does not match the state space of {}", self.x0, self.motion.name)));
        }
        Ok(())
    }

    /// Assumption I2: `r(m1 − 1) > λ`.
    pub fn check_supercritical(&self) -> Result<()> {
        let growth = self.growth_rate();
        let lambda = self.motion.lambda();
        if growth > lambda {
            Ok(())
        } else {
            Err(Error::NotSupercritical { growth: to_f64(growth), lambda: to_f64(lambda) })
        }
    }
}
