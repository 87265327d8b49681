use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] skycomp::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub const EXIT_CONFIG: i32 = 2;
    pub const EXIT_NUMERICAL: i32 = 3;
    pub const EXIT_IO: i32 = 4;

    pub fn exit_code(&self) -> i32 {
        use skycomp::Error as E;
        match self {
            CliError::Config(_) => Self::EXIT_CONFIG,
            CliError::Io(_) => Self::EXIT_IO,
            CliError::Core(e) => match e {
                E::Config(_) | E::Domain(_) | E::Json(_) => Self::EXIT_CONFIG,
                E::Io(_) => Self::EXIT_IO,
                E::SingularChannel { .. }
                | E::NumericalDegeneracy { .. }
                | E::Infeasible(_)
                | E::NonConvergence { .. }
                | E::Internal(_) => Self::EXIT_NUMERICAL,
            },
        }
    }
}
