use thiserror::Error;

/// Errors raised by model construction, simulation and analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid offspring pmf: {0}")]
    InvalidPmf(String),

    #[error("offspring mean m1 = {m1} must exceed 1 (assumption I1: m1 := E(m) > 1)")]
    SubcriticalOffspring { m1: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "growth rate r(m1-1) = {growth} must exceed the motion eigenvalue lambda = {lambda} \
         (assumption I2: r(m1-1) > lambda)"
    )]
    NotSupercritical { growth: f64, lambda: f64 },

    #[error("live population exceeded max_population = {limit}")]
    PopulationOverflow { limit: usize },

    #[error("eigenfunction h vanishes at the starting state (absorbing start)")]
    ZeroEigenfunction,

    #[error("model provides no eigenmeasure mass for {0}")]
    MissingNuMass(String),

    #[error("denominator set B' contains no particles")]
    EmptyDenominator,

    #[error("no replica satisfied the conditioning event")]
    NoSurvivors,

    #[error("state grid too small: {fraction:.4} of one-unit offspring positions fell outside it")]
    TruncationTooSmall { fraction: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
