use thiserror::Error;

/// Errors raised by the geometry pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("chart point {point:?} lies outside the domain of `{name}`")]
    OutOfDomain { name: String, point: Vec<f64> },
    #[error("jet order {0} is not supported (expected 1, 2 or 3)")]
    InvalidOrder(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("not an immersion at the given point (Jacobian rank {rank} < {expected})")]
    NotAnImmersion { rank: usize, expected: usize },
    #[error("non-unit normal (norm {0})")]
    NonUnitNormal(f64),
    #[error("bilinear form is not flat (residual {residual:.3e} > threshold {threshold:.1e})")]
    NonFlat { residual: f64, threshold: f64 },
    #[error("subspace containment failed (residual {0:.3e})")]
    Containment(f64),
    #[error("diagonalization did not reach tolerance (residual {0:.3e})")]
    Diagonalization(f64),
    #[error("frame gauge inconsistent across stencil: {0}")]
    GaugeInconsistent(String),
    #[error("too many samples dropped while building the extension ({dropped}/{total})")]
    ExtensionImmersion { dropped: usize, total: usize },
    #[error("unknown immersion `{0}`")]
    UnknownImmersion(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
