use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Point lies behind or on the camera plane.
    #[error("point has non-positive depth {depth:e} m in the camera frame")]
    NonPositiveDepth { depth: f64 },

    #[error("insufficient views: {available} usable, at least 2 required")]
    InsufficientViews { available: usize },

    /// Rays are (near-)parallel, cameras coincide, or the homogeneous
    /// solution lies at infinity.
    #[error("degenerate triangulation geometry: {0}")]
    DegenerateGeometry(String),

    #[error("bounding box has non-positive extent ({width} x {height})")]
    EmptyBBox { width: f64, height: f64 },

    #[error("joint count mismatch: prediction has {pred}, ground truth has {gt}")]
    JointCountMismatch { pred: usize, gt: usize },

    #[error("degenerate pose: {0}")]
    DegeneratePose(String),

    /// The two smallest singular values of the DLT system are too close
    /// for the smallest singular vector to be differentiable.
    #[error("triangulation gradient is degenerate (singular gap {gap:e})")]
    GradientDegenerate { gap: f64 },

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
}
