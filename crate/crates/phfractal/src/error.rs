use crate::invariants::SeqStep;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A family structure the closed form does not cover (e.g. mixed scale
    /// ratios within one degree); the sequence method still applies.
    #[error("unsupported family structure: {0}")]
    UnsupportedStructure(String),

    /// Sequence method ran out of steps. Carries the full trace so the caller
    /// can inspect how far it got.
    #[error("no convergence within {j_max} steps (last extrapolated value: {last:?})")]
    NonConvergence {
        j_max: u32,
        last: Option<f64>,
        trace: Vec<SeqStep>,
    },

    #[error("count exceeds representable range: {0}")]
    Range(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// The requested estimator does not apply to this input (e.g. the
    /// single-exponent Euler comparison on a fractal with positive births).
    #[error("not applicable: {0}")]
    Inapplicable(String),

    #[error("malformed barcode data: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
