use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] branchlln::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for violated preconditions, 3 for failures during the run.
    pub fn exit_code(&self) -> i32 {
        use branchlln::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(
                E::InvalidPmf(_)
                | E::SubcriticalOffspring { .. }
                | E::InvalidParameter(_)
                | E::InvalidGenerator(_)
                | E::InvalidConfig(_)
                | E::NotSupercritical { .. }
                | E::ZeroEigenfunction
                | E::MissingNuMass(_),
            ) => 2,
            CliError::Core(_) | CliError::Io { .. } => 3,
        }
    }
}
