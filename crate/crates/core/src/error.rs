use thiserror::Error;

/// Errors produced by the tomography library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("wavelength {lambda_um} um outside dispersion-fit validity window [{min_um}, {max_um}] um")]
    WavelengthOutOfRange {
        lambda_um: f64,
        min_um: f64,
        max_um: f64,
    },

    #[error("rank {requested} is smaller than the numerical rank {required} of the density matrix")]
    RankTooSmall { required: usize, requested: usize },

    #[error("inconsistent angle pair: cos^2+sin^2 = {norm} deviates from 1 beyond 1e-9")]
    InconsistentAngles { norm: f64 },

    #[error("invalid spectral grid: {0}")]
    InvalidGrid(String),

    #[error("invalid experiment record: {0}")]
    InvalidRecord(String),

    #[error("degenerate measurement model: {0}")]
    DegenerateModel(String),

    #[error("information-matrix eigenstructure violated: {0}")]
    EigenstructureViolation(String),

    #[error("chi-squared degrees of freedom {nu} <= 0: model over-parameterized for this protocol")]
    InvalidDof { nu: i64 },
}
