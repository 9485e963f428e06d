use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{fit, FreeMask, ResidualSpec, DEFAULT_HORIZON_WEIGHT};
use crate::camera::{CameraMatrix, ImagePoint, Intrinsics, Pose, PoseParam};
use crate::error::{Error, Result};
use crate::scene::{reconstruct_height, ObjectAnnotation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyConfig {
    pub repeats: usize,
    pub seed: u64,
    pub free: FreeMask,
    pub initial: Pose,
    pub horizon_weight: f64,
}

impl StudyConfig {
    /// Height and tilt free, starting from 10 m / 80°.
    pub fn new(repeats: usize, seed: u64) -> Self {
        Self {
            repeats,
            seed,
            free: FreeMask::new(&[PoseParam::Height, PoseParam::Tilt]).expect("non-empty"),
            initial: Pose::looking(10.0, 80.0),
            horizon_weight: DEFAULT_HORIZON_WEIGHT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudyRow {
    pub n: usize,
    pub repeat: usize,
    pub height: f64,
    pub tilt: f64,
    pub converged: bool,
    /// Mean of reconstructed minus known height over all annotations.
    pub height_err_mean: f64,
    /// Population standard deviation of the same errors.
    pub height_err_std: f64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-draw seed, independent of evaluation order.
pub fn derive_seed(seed: u64, n: usize, repeat: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ n as u64) ^ repeat as u64)
}

/// For every subset size `n = 1..=N` and repeat, fits on `n` annotations drawn
/// without replacement and records the fitted height and tilt together with
/// the reconstruction error of every annotation under that fit.
///
/// Fits that fail or do not converge are kept with `converged = false`.
pub fn subset_study(
    intrinsics: &Intrinsics,
    annotations: &[ObjectAnnotation],
    horizon: &[ImagePoint],
    config: &StudyConfig,
) -> Result<Vec<StudyRow>> {
    if config.repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    if annotations.is_empty() {
        return Err(Error::InvalidInput("subset study needs at least one annotation".into()));
    }
    intrinsics.validate()?;
    let total = annotations.len();
    let mut rows = Vec::with_capacity(total * config.repeats);
    for n in 1..=total {
        for repeat in 0..config.repeats {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, n, repeat));
            let mut picked = index::sample(&mut rng, total, n).into_vec();
            picked.sort_unstable();
            let subset: Vec<ObjectAnnotation> = picked.iter().map(|&i| annotations[i]).collect();
            let spec = ResidualSpec::Objects {
                annotations: &subset,
                horizon,
                horizon_weight: config.horizon_weight,
            };
            let row = match fit(intrinsics, &config.initial, config.free, spec) {
                Ok(result) => {
                    let (mean, std) = height_errors(intrinsics, &result.pose, annotations);
                    StudyRow {
                        n,
                        repeat,
                        height: result.pose.height(),
                        tilt: result.pose.tilt(),
                        converged: result.converged,
                        height_err_mean: mean,
                        height_err_std: std,
                    }
                }
                Err(_) => StudyRow {
                    n,
                    repeat,
                    height: f64::NAN,
                    tilt: f64::NAN,
                    converged: false,
                    height_err_mean: f64::NAN,
                    height_err_std: f64::NAN,
                },
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

fn height_errors(intrinsics: &Intrinsics, pose: &Pose, annotations: &[ObjectAnnotation]) -> (f64, f64) {
    let Ok(cam) = CameraMatrix::new(intrinsics, pose) else {
        return (f64::NAN, f64::NAN);
    };
    let errors: Vec<f64> = annotations
        .iter()
        .filter_map(|a| reconstruct_height(&cam, &a.foot, &a.head).ok().map(|h| h - a.known_height))
        .collect();
    if errors.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / errors.len() as f64;
    (mean, var.sqrt())
}
