//! Camera geometry for single-image photogrammetry.
//!
//! World points are mapped to pixels through a 3×4 pinhole camera matrix
//! assembled from an intrinsic part (focal length, sensor and image size) and
//! an extrinsic part (height, tilt, roll, heading and ground offset). Pixels
//! are mapped back to the world by fixing one world coordinate, which makes
//! the otherwise rank-deficient projection invertible.
//!
//! On top of that the crate provides:
//!
//! - [`fit`]: Levenberg–Marquardt estimation of unknown extrinsic parameters
//!   from objects of known height, a visible horizon, or map correspondences.
//! - [`scene`]: synthetic scenes, simulated annotations and the parameter
//!   perturbation study.
//! - [`geo`]: a local equirectangular anchor between the metric world frame
//!   and latitude/longitude.
//! - [`topview`]: ground-plane resampling of an image into a top view.
//!
//! Angles are degrees at every public boundary.

pub mod camera;
pub mod error;
pub mod fit;
pub mod geo;
pub mod scene;
pub mod topview;

pub use camera::{
    BackProjection, CameraMatrix, FixedAxis, ImageLine, ImagePoint, Intrinsics, Pose, Projection,
    WorldPoint,
};
pub use error::{Error, Result};
