use thiserror::Error;

use crate::geom::Model;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Reasons a raw corner list is rejected as a billiard table.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("loop {loop_index} has {count} corners, at least 3 are required")]
    TooFewCorners { loop_index: usize, count: usize },
    #[error("loop {loop_index} repeats vertex {vertex}")]
    RepeatedVertex { loop_index: usize, vertex: usize },
    #[error("loop {loop_index} intersects itself (sides {side_a} and {side_b})")]
    SelfIntersection {
        loop_index: usize,
        side_a: usize,
        side_b: usize,
    },
    #[error("loops {loop_a} and {loop_b} intersect")]
    LoopsIntersect { loop_a: usize, loop_b: usize },
    #[error("obstacle loop {loop_index} is not inside the outer boundary")]
    ObstacleOutside { loop_index: usize },
    #[error("obstacle loop {inner} lies inside obstacle loop {outer}")]
    NestedObstacle { inner: usize, outer: usize },
    #[error("corner {vertex} of loop {loop_index} has degenerate angle {angle}")]
    ZeroAngle {
        loop_index: usize,
        vertex: usize,
        angle: f64,
    },
    #[error("side {side} of loop {loop_index} has length {length} >= pi")]
    OverlongSphericalSide {
        loop_index: usize,
        side: usize,
        length: f64,
    },
    #[error("outer loop bounds a region of area {area} which is not below 4*pi")]
    OversizedRegion { area: f64 },
    #[error("polygon has no loops")]
    Empty,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geodesic: {0}")]
    InvalidGeodesic(String),
    #[error("model mismatch: expected {expected:?}, found {found:?}")]
    ModelMismatch { expected: Model, found: Model },
    #[error("directions are based at different points")]
    BasePointMismatch,
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid polygon: {0}")]
    Validation(#[from] ValidationError),
    #[error("angle/area identity violated: residual {residual:e}")]
    InconsistentPolygon { residual: f64 },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("unfolded orbit deviates from a geodesic by {residual:e}")]
    UnfoldingIntegrity { residual: f64 },
    #[error("beam budget of {limit} tiles exceeded")]
    BudgetExceeded { limit: usize },
    #[error("exceptional base point: a corner image of corner {corner} focuses on the beam apex")]
    ExceptionalBasepoint { corner: usize },
    #[error("exceptional direction: parallel to side {side}")]
    ExceptionalDirection { side: usize },
    #[error("invalid base: {0}")]
    InvalidBase(String),
    #[error("degenerate view: viewpoint lies on the curve")]
    DegenerateView,
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("sample {sample} is not nondecreasing")]
    NonMonotone { sample: usize },
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exceptional parameters form a null set; Monte Carlo drivers resample on them.
    pub fn is_exceptional(&self) -> bool {
        matches!(
            self,
            Error::ExceptionalBasepoint { .. } | Error::ExceptionalDirection { .. }
        )
    }
}
