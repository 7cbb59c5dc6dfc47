use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unknown or malformed potential id `{0}`")]
    BadPotential(String),
    #[error("singular factorization at pivot {index} (pivot ratio {pivot_ratio:.3e})")]
    Singular { index: usize, pivot_ratio: f64 },
    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: String, iterations: usize },
    #[error("{what} is not positive definite (lambda_min = {lambda_min:.6e})")]
    NotPositive { what: String, lambda_min: f64 },
    #[error("residual {residual:.3e} above tolerance {tol:.1e} in {what}")]
    Residual { what: String, residual: f64, tol: f64 },
    #[error("hypothesis gate refused: {0}")]
    GateRefused(String),
    #[error("mu = {mu:.6e} below the level-spacing floor {floor:.6e} (spacing {spacing:.6e})")]
    BelowFloor { mu: f64, floor: f64, spacing: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error("reproduction mismatch: {0}")]
    Reproduction(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    /// CLI exit code: 2 for usage problems, 1 for scientific refusals, 3 for numerics.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::InvalidInput(_) | LabError::BadPotential(_) | LabError::Config(_) => 2,
            LabError::GateRefused(_) | LabError::BelowFloor { .. } | LabError::Reproduction(_) => 1,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
