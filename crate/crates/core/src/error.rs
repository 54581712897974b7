use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A CSG construct outside the supported decomposition patterns.
    UnsupportedConstruct { path: String },
    /// An enclosed body touches or crosses the boundary of its host.
    ContainmentViolation { body: usize },
    /// The mesh is not a closed 2-manifold; lists offending undirected edges.
    Topology { boundary_edges: Vec<(u32, u32)> },
    /// Rejection sampling could not place all requested pores.
    PackingFailure { achieved: usize, requested: usize },
    /// A ray produced an inconsistent entry/exit sequence even after jitter.
    DegenerateHit,
    /// Dimension or length mismatch between inputs.
    Shape(String),
    /// Projection angles do not cover a half turn.
    InsufficientCoverage { span_deg: f64 },
    /// Training data cannot support the requested fit (e.g. a single class).
    DegenerateData(String),
    /// Not enough pixels of a class to draw the requested number of samples.
    Sampling {
        class: &'static str,
        requested: usize,
        available: usize,
    },
    /// Ellipse fit on collinear or duplicate points.
    DegenerateFit,
    /// A parameter violates its documented range.
    InvalidParameter(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UnsupportedConstruct { path } => {
                write!(f, "unsupported CSG construct at {path}")
            }
            Error::ContainmentViolation { body } => {
                write!(f, "enclosed body {body} is not strictly inside its host")
            }
            Error::Topology { boundary_edges } => write!(
                f,
                "mesh is not watertight: {} bad edge(s), first {:?}",
                boundary_edges.len(),
                boundary_edges.iter().take(8).collect::<Vec<_>>()
            ),
            Error::PackingFailure {
                achieved,
                requested,
            } => write!(
                f,
                "pore packing failed: placed {achieved} of {requested} pores"
            ),
            Error::DegenerateHit => write!(f, "degenerate ray/mesh intersection"),
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::InsufficientCoverage { span_deg } => write!(
                f,
                "projection angles span {span_deg:.3} deg, at least 180 deg required"
            ),
            Error::DegenerateData(msg) => write!(f, "degenerate training data: {msg}"),
            Error::Sampling {
                class,
                requested,
                available,
            } => write!(
                f,
                "cannot sample {requested} {class} segments, only {available} candidate pixels"
            ),
            Error::DegenerateFit => write!(f, "degenerate point set for ellipse fit"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

macro_rules! ensure {
    ($cond:expr, $err:expr) => {
        if !$cond {
            return Err($err);
        }
    };
}
pub(crate) use ensure;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
