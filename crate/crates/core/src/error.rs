use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh integrity violated: {0}")]
    MeshIntegrity(String),

    #[error("unsupported element RT_{r} in {dim}D (supported: RT_0, RT_1, RT_2 in 2D; RT_0, RT_1 in 3D)")]
    Unsupported { dim: usize, r: usize },

    #[error("singular local system on cell {cell}")]
    NumericalDegeneracy { cell: usize },

    #[error("step matrix is singular: {0}")]
    Singular(String),

    #[error("solve residual {residual:.3e} exceeds tolerance {tolerance:.1e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("non-finite coefficients after time step {step}")]
    Divergence { step: usize },

    #[error("ratio undefined: {0}")]
    UndefinedRatio(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalDegeneracy { .. }
                | Error::Singular(_)
                | Error::Residual { .. }
                | Error::Divergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
