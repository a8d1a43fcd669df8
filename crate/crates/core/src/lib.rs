//! Supercritical branching Markov processes with absorption: simulation,
//! many-to-few oracles and Monte Carlo checks of L² laws of large numbers.
//!
//! Every numeric type is generic over the scalar `R: Real` (`f32` or `f64`);
//! the aliases at the crate root fix `R = f64`.

pub mod analysis;
pub mod config;
pub mod eigen;
pub mod engine;
pub mod error;
pub mod estimate;
pub mod motions;
pub mod offspring;
pub mod quadrature;
pub mod real;
pub mod rng;
pub mod spine;
pub mod state;
pub mod stats;

pub use config::{BranchConfig, DEFAULT_MAX_POPULATION};
pub use engine::{run_replicas, simulate, simulate_replica, ReplicaRun};
pub use error::{Error, Result};
pub use estimate::{EstimatorResult, QuadratureResult, Welford};
pub use motions::{
    ergodic_ctmc, killed_drifted_bm, killed_recurrent_ou, regular_variation_check, stationary_distribution,
    subcritical_gw, transient_ou, Kernel,
};
pub use offspring::{make_offspring, OffspringLaw};
pub use real::Real;
pub use rng::{replica_seed, stream_for, RandomStream, StreamKey};
pub use state::{Interval, ParticleId, ParticleState, StateKind};

/// Double-precision aliases.
pub type State = ParticleState<f64>;
pub type Motion = motions::MotionModel<f64>;
pub type Offspring = OffspringLaw<f64>;
pub type Config = BranchConfig<f64>;
pub type Eigen = eigen::EigenData<f64>;
pub type Population = engine::Population<f64>;
pub type Trajectory = engine::Trajectory<f64>;
pub type Estimate = EstimatorResult<f64>;
pub type Quadrature = QuadratureResult<f64>;
pub type Range = Interval<f64>;
