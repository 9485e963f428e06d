use serde::{Deserialize, Serialize};

use crate::camera::{CameraMatrix, FixedAxis, ImagePoint, Intrinsics, Pose, WorldPoint};
use crate::error::{Error, Result};
use crate::scene::ObjectAnnotation;

/// Image point paired with its ground position on a map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub image: ImagePoint,
    pub world: WorldPoint,
}

/// Residual components of one family together with exclusion bookkeeping.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Residuals {
    pub values: Vec<f64>,
    /// Indices of the input records that produced residuals.
    pub used: Vec<usize>,
    /// Records that could not be evaluated at this pose.
    pub excluded: usize,
}

impl Residuals {
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean_square(&self) -> Option<f64> {
        mean_square(&self.values)
    }

    pub fn rms(&self) -> Option<f64> {
        self.mean_square().map(f64::sqrt)
    }
}

pub(crate) fn mean_square(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64)
}

/// Predicted minus observed head pixel, two components per annotation.
///
/// The prediction back-projects the foot onto the ground, lifts it by the
/// known height and projects it again. Annotations whose foot does not hit
/// the ground in front of the camera are excluded.
pub fn object_residuals(intr: &Intrinsics, pose: &Pose, annotations: &[ObjectAnnotation]) -> Result<Residuals> {
    let cam = CameraMatrix::new(intr, pose)?;
    let mut out = Residuals::default();
    for (i, a) in annotations.iter().enumerate() {
        let predicted = cam
            .backproject(&a.foot, FixedAxis::Z, 0.0)
            .ok()
            .filter(|b| b.in_front)
            .and_then(|b| {
                let top = WorldPoint::new(b.point.x, b.point.y, a.known_height);
                cam.project_full(&top).ok()
            })
            .filter(|p| p.in_front());
        match predicted {
            Some(p) => {
                out.values.push(p.point.x - a.head.x);
                out.values.push(p.point.y - a.head.y);
                out.used.push(i);
            }
            None => out.excluded += 1,
        }
    }
    Ok(out)
}

/// Signed perpendicular pixel distance of each point to the camera's horizon,
/// positive on the ground side.
pub fn horizon_residuals(intr: &Intrinsics, pose: &Pose, horizon_points: &[ImagePoint]) -> Result<Residuals> {
    if horizon_points.is_empty() {
        return Err(Error::InvalidInput("at least one horizon point is required".into()));
    }
    let line = CameraMatrix::new(intr, pose)?.horizon_line()?;
    Ok(Residuals {
        values: horizon_points.iter().map(|p| line.signed_distance(p)).collect(),
        used: (0..horizon_points.len()).collect(),
        excluded: 0,
    })
}

/// Ground back-projection of each image point minus its map position, in
/// metres.
pub fn map_residuals(intr: &Intrinsics, pose: &Pose, correspondences: &[Correspondence]) -> Result<Residuals> {
    let cam = CameraMatrix::new(intr, pose)?;
    let mut out = Residuals::default();
    for (i, c) in correspondences.iter().enumerate() {
        match cam.backproject(&c.image, FixedAxis::Z, 0.0) {
            Ok(b) if b.in_front => {
                out.values.push(b.point.x - c.world.x);
                out.values.push(b.point.y - c.world.y);
                out.used.push(i);
            }
            _ => out.excluded += 1,
        }
    }
    Ok(out)
}

/// `(1 − w)·mean(object²) + w·mean(horizon²)`; an empty family hands its
/// weight to the other one.
pub fn combined_cost(object_res: &[f64], horizon_res: &[f64], weight_horizon: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&weight_horizon) {
        return Err(Error::InvalidParameter(format!(
            "horizon weight must lie in [0, 1], got {weight_horizon}"
        )));
    }
    match (mean_square(object_res), mean_square(horizon_res)) {
        (Some(o), Some(h)) => Ok((1.0 - weight_horizon) * o + weight_horizon * h),
        (Some(o), None) => Ok(o),
        (None, Some(h)) => Ok(h),
        (None, None) => Err(Error::InvalidInput("no residuals to combine".into())),
    }
}
