//! Synthetic ground scenes, simulated click annotations and the
//! camera-parameter perturbation study.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraMatrix, FixedAxis, ImagePoint, PoseParam, WorldPoint};
use crate::error::{Error, Result};

/// Upright object standing on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub base: WorldPoint,
    pub height: f64,
    pub width: f64,
}

impl SceneObject {
    pub fn top(&self) -> WorldPoint {
        WorldPoint::new(self.base.x, self.base.y, self.base.z + self.height)
    }
}

/// Foot and head pixels of an object with a known real height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectAnnotation {
    pub foot: ImagePoint,
    pub head: ImagePoint,
    pub known_height: f64,
}

/// Objects on the y axis, one per distance.
pub fn place_objects(distances: &[f64], width: f64, height: f64) -> Result<Vec<SceneObject>> {
    let positions: Vec<(f64, f64)> = distances.iter().map(|&d| (0.0, d)).collect();
    if let Some(d) = distances.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(Error::InvalidParameter(format!("distance must be positive, got {d}")));
    }
    place_objects_at(&positions, width, height)
}

/// Objects at explicit ground positions `(x, y)`.
pub fn place_objects_at(positions: &[(f64, f64)], width: f64, height: f64) -> Result<Vec<SceneObject>> {
    if !(height.is_finite() && height > 0.0) {
        return Err(Error::InvalidParameter(format!("object height must be positive, got {height}")));
    }
    if !(width.is_finite() && width >= 0.0) {
        return Err(Error::InvalidParameter(format!("object width must be non-negative, got {width}")));
    }
    positions
        .iter()
        .map(|&(x, y)| {
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite position ({x}, {y})")));
            }
            Ok(SceneObject {
                base: WorldPoint::new(x, y, 0.0),
                height,
                width,
            })
        })
        .collect()
}

/// `count` distances evenly spaced over `[start, end]`.
pub fn linspace(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotated {
    pub annotations: Vec<ObjectAnnotation>,
    /// Objects dropped because foot or head is not in front of the camera.
    pub excluded: usize,
}

/// Simulated clicks: exact projections of foot and head plus isotropic
/// Gaussian pixel noise.
pub fn annotate(cam: &CameraMatrix, scene: &[SceneObject], noise_sigma: f64, seed: u64) -> Result<Annotated> {
    let noise = Normal::new(0.0, noise_sigma)
        .map_err(|_| Error::InvalidParameter(format!("noise sigma must be non-negative, got {noise_sigma}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Annotated {
        annotations: Vec::with_capacity(scene.len()),
        excluded: 0,
    };
    for obj in scene {
        let (Ok(foot), Ok(head)) = (cam.project_full(&obj.base), cam.project_full(&obj.top())) else {
            out.excluded += 1;
            continue;
        };
        if !(foot.in_front() && head.in_front()) {
            out.excluded += 1;
            continue;
        }
        let mut jitter = |p: ImagePoint| {
            if noise_sigma == 0.0 {
                p
            } else {
                ImagePoint::new(p.x + noise.sample(&mut rng), p.y + noise.sample(&mut rng))
            }
        };
        out.annotations.push(ObjectAnnotation {
            foot: jitter(foot.point),
            head: jitter(head.point),
            known_height: obj.height,
        });
    }
    Ok(out)
}

/// Height of an annotated object reconstructed with `cam`: the foot is
/// back-projected onto the ground, the head onto the vertical plane through
/// the foot at constant `y`.
pub fn reconstruct_height(cam: &CameraMatrix, foot: &ImagePoint, head: &ImagePoint) -> Result<f64> {
    let base = cam.backproject(foot, FixedAxis::Z, 0.0)?;
    let top = cam.backproject(head, FixedAxis::Y, base.point.y)?;
    if !(base.in_front && top.in_front) {
        return Err(Error::InvalidInput("object back-projects behind the camera".into()));
    }
    Ok(top.point.z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApparentHeight {
    pub distance: f64,
    /// Reconstructed height; NaN when the back-projection was degenerate.
    pub height: f64,
    /// False when the foot or head could not be back-projected in front of
    /// the perturbed camera. `height` is still reported when finite.
    pub valid: bool,
}

/// Projects 1-object-per-distance scenes with `true_cam` and reconstructs the
/// object heights with a camera using `perturbed_pose`.
pub fn apparent_heights(
    true_cam: &CameraMatrix,
    perturbed_pose: &crate::camera::Pose,
    distances: &[f64],
    object_height: f64,
) -> Result<Vec<ApparentHeight>> {
    let perturbed = CameraMatrix::new(true_cam.intrinsics(), perturbed_pose)?;
    distances
        .iter()
        .map(|&d| {
            let foot = true_cam.project(&WorldPoint::new(0.0, d, 0.0))?;
            let head = true_cam.project(&WorldPoint::new(0.0, d, object_height))?;
            let base = perturbed.backproject(&foot, FixedAxis::Z, 0.0);
            let top = base
                .as_ref()
                .ok()
                .map(|b| perturbed.backproject(&head, FixedAxis::Y, b.point.y));
            Ok(match (base, top) {
                (Ok(b), Some(Ok(t))) => ApparentHeight {
                    distance: d,
                    height: t.point.z,
                    valid: b.in_front && t.in_front,
                },
                _ => ApparentHeight {
                    distance: d,
                    height: f64::NAN,
                    valid: false,
                },
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: PoseParam,
    pub value: f64,
    pub distance: f64,
    pub apparent_height: f64,
    pub valid: bool,
}

/// Varies one parameter of the true pose over `value · (1 ± relative_range)`
/// in `steps` evenly spaced values and tabulates apparent heights.
pub fn perturbation_sweep(
    true_cam: &CameraMatrix,
    parameter: PoseParam,
    relative_range: f64,
    steps: usize,
    distances: &[f64],
    object_height: f64,
) -> Result<Vec<SweepRow>> {
    if steps < 2 {
        return Err(Error::InvalidParameter(format!("sweep needs at least 2 steps, got {steps}")));
    }
    if !relative_range.is_finite() {
        return Err(Error::InvalidParameter("relative range must be finite".into()));
    }
    let base = true_cam.pose().get(parameter);
    let factors = linspace(1.0 - relative_range, 1.0 + relative_range, steps);
    let mut rows = Vec::with_capacity(steps * distances.len());
    for factor in factors {
        let value = base * factor;
        let pose = true_cam.pose().with(parameter, value);
        for h in apparent_heights(true_cam, &pose, distances, object_height)? {
            rows.push(SweepRow {
                parameter,
                value,
                distance: h.distance,
                apparent_height: h.height,
                valid: h.valid,
            });
        }
    }
    Ok(rows)
}

/// Simulated horizon clicks: `count` points on the camera's horizon line,
/// evenly spread across the image width, plus isotropic Gaussian noise.
pub fn horizon_clicks(cam: &CameraMatrix, count: usize, noise_sigma: f64, seed: u64) -> Result<Vec<ImagePoint>> {
    let noise = Normal::new(0.0, noise_sigma)
        .map_err(|_| Error::InvalidParameter(format!("noise sigma must be non-negative, got {noise_sigma}")))?;
    let line = cam.horizon_line()?;
    let width = f64::from(cam.intrinsics().image_width);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let x = width * (i as f64 + 0.5) / count as f64;
            let y = line.y_at(x).ok_or(Error::DegenerateHorizon)?;
            Ok(if noise_sigma == 0.0 {
                ImagePoint::new(x, y)
            } else {
                ImagePoint::new(x + noise.sample(&mut rng), y + noise.sample(&mut rng))
            })
        })
        .collect()
}
