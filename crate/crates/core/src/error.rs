use thiserror::Error;

#[derive(Debug, Error)]
pub enum VortexError {
    #[error("grid mismatch: expected {expected}, found {found}")]
    GridMismatch { expected: String, found: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("potential has zero integral; the operator is not invertible on constants")]
    SingularPotential,

    #[error("conjugate gradients did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("Newton stagnated after {iterations} iterations; residual history {history:?}")]
    Stagnation { iterations: usize, history: Vec<f64> },

    #[error("solvability constraint violated: c = -K0*volume/2 - 2*pi*m = {c:.6e} must be positive (m = {m}, volume = {volume}, K0 = {k0})")]
    Solvability { c: f64, m: usize, volume: f64, k0: f64 },

    #[error("section is identically zero")]
    ZeroSection,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration invalid:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("checksum mismatch for {path}: header {expected}, data {found}")]
    Checksum { path: String, expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, VortexError>;
