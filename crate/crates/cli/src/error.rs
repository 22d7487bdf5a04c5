use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Physics(#[from] mixion::Error),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 0 success, 1 I/O, 2 configuration, 3 zigzag, 4 solver failure.
    pub fn exit_code(&self) -> i32 {
        use mixion::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Physics(E::InvalidInput(_) | E::OutOfRange { .. } | E::DegenerateInput(..)) => 2,
            CliError::Physics(E::ZigzagInstability { .. }) => 3,
            CliError::Physics(_) | CliError::Solver(_) => 4,
            CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}
