use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point lies on the camera plane (projective scale {scale:e})")]
    PointAtCameraPlane { scale: f64 },

    #[error("ray is parallel to the constraint plane")]
    DegenerateRay,

    #[error("horizon is degenerate for this camera orientation")]
    DegenerateHorizon,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported latitude {0}° (must satisfy |lat| < 89.9°)")]
    UnsupportedLatitude(f64),

    #[error("point is {0:.0} m from the anchor, beyond the 100 km local-frame limit")]
    OutOfRange(f64),
}
