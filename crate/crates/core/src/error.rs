use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The query point lies inside the singular near-field region of a source.
    #[error("distance {distance} m to the source is below the {floor} m floor")]
    DistanceTooSmall { distance: f64, floor: f64 },

    #[error("analytic gradient is only defined for the pure path-loss field (walls and fading disabled)")]
    NotSmoothlyDifferentiable,

    #[error("degenerate line fit: all probe offsets coincide")]
    DegenerateFit,

    #[error("SNR is undefined for zero measurement noise")]
    ZeroNoise,

    #[error("rate fit needs at least {needed} usable records, got {got}")]
    InsufficientEnsemble { needed: usize, got: usize },

    #[error("probe or target out of domain at iteration {k}: {source}")]
    ProbeOutOfDomain {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid position: {0}")]
    InvalidPosition(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
