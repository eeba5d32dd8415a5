use thiserror::Error;

/// Errors raised by the tracking pipeline.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pixel ({x}, {y}) is outside the {width}x{height} lattice")]
    OutOfRange {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },

    #[error("marker detection found {found} blobs, expected {expected}")]
    DetectionFailure { found: usize, expected: usize },

    #[error("marker layout is not grid-sortable: {0}")]
    Layout(String),

    #[error("no reference point with id {0}")]
    NotFound(u64),

    #[error("contact mask is empty")]
    NoContact,

    #[error("only {found} shared ids between frames, need at least 3")]
    InsufficientOverlap { found: usize },

    #[error("need at least 3 correspondences, got {0}")]
    InsufficientPoints(usize),

    #[error("degenerate point geometry (cross-covariance rank < 2)")]
    DegenerateGeometry,

    #[error("yaw unobservable: eigenvalue ratio {ratio:.4} below threshold {threshold}")]
    YawUnobservable { ratio: f64, threshold: f64 },

    #[error("principal axis unavailable for pre-alignment")]
    PrealignUnavailable,

    #[error("return gate not satisfied: similarity {similarity:.4} < {gate}")]
    GateFailure { similarity: f64, gate: f64 },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
