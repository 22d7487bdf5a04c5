use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: ions {0} and {1} are coincident")]
    DegenerateInput(usize, usize),

    #[error("equilibrium solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("zigzag instability: mode {mode} has squared frequency {omega_sq:.6e} rad^2/s^2")]
    ZigzagInstability { mode: usize, omega_sq: f64 },

    #[error("value {value} outside allowed range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("quadrature reached only {achieved:.3e} (requested {requested:.3e})")]
    Accuracy { achieved: f64, requested: f64 },

    #[error("infeasible gate: {0}")]
    Infeasible(String),

    #[error("Fock-space truncation leakage {leakage:.3e} exceeds limit at n_max = {n_max}")]
    Truncation { leakage: f64, n_max: usize },
}
