//! Extrinsic parameter estimation.
//!
//! Three residual families are available: objects of known height (pixels),
//! horizon points (pixels) and map correspondences (metres). Object and
//! horizon residuals combine per [`combined_cost`]; map residuals are never
//! mixed with the pixel families.
//!
//! Parameters are optimised in their public units (metres and degrees), so a
//! degree and a metre are treated as the same step size.

mod lm;
mod residuals;
mod study;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::Serialize;

use crate::camera::{ImagePoint, Intrinsics, Pose, PoseParam};
use crate::error::{Error, Result};
use crate::scene::ObjectAnnotation;

pub use lm::{forward_jacobian, minimize, LmConfig, LmOutcome};
pub use residuals::{combined_cost, horizon_residuals, map_residuals, object_residuals, Correspondence, Residuals};
pub use study::{derive_seed, subset_study, StudyConfig, StudyRow};

pub const DEFAULT_HORIZON_WEIGHT: f64 = 0.5;
pub const MULTISTART_TILTS: [f64; 4] = [45.0, 60.0, 75.0, 85.0];

/// Which pose parameters the fit may change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FreeMask([bool; 6]);

impl FreeMask {
    pub fn new(params: &[PoseParam]) -> Result<Self> {
        let mut mask = [false; 6];
        for p in params {
            mask[p.index()] = true;
        }
        if !mask.iter().any(|&b| b) {
            return Err(Error::InvalidParameter("at least one parameter must be free".into()));
        }
        Ok(Self(mask))
    }

    pub fn is_free(&self, p: PoseParam) -> bool {
        self.0[p.index()]
    }

    pub fn params(&self) -> Vec<PoseParam> {
        PoseParam::ALL.into_iter().filter(|p| self.is_free(*p)).collect()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl FromStr for FreeMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let params = s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<PoseParam>>>()?;
        Self::new(&params)
    }
}

impl fmt::Display for FreeMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.params().iter().map(|p| p.name()).collect();
        f.write_str(&names.join(","))
    }
}

/// The data a fit is driven by.
#[derive(Debug, Clone, Copy)]
pub enum ResidualSpec<'a> {
    Objects {
        annotations: &'a [ObjectAnnotation],
        /// May be empty.
        horizon: &'a [ImagePoint],
        horizon_weight: f64,
    },
    Map {
        correspondences: &'a [Correspondence],
    },
}

impl<'a> ResidualSpec<'a> {
    pub fn objects(annotations: &'a [ObjectAnnotation]) -> Self {
        ResidualSpec::Objects {
            annotations,
            horizon: &[],
            horizon_weight: DEFAULT_HORIZON_WEIGHT,
        }
    }

    pub fn objects_with_horizon(annotations: &'a [ObjectAnnotation], horizon: &'a [ImagePoint]) -> Self {
        ResidualSpec::Objects {
            annotations,
            horizon,
            horizon_weight: DEFAULT_HORIZON_WEIGHT,
        }
    }

    pub fn map(correspondences: &'a [Correspondence]) -> Self {
        ResidualSpec::Map { correspondences }
    }
}

#[derive(Debug, Clone, Default)]
struct FamilyResiduals {
    objects: Option<Residuals>,
    horizon: Option<Residuals>,
    map: Option<Residuals>,
}

impl FamilyResiduals {
    fn same_support(&self, other: &FamilyResiduals) -> bool {
        let used = |r: &Option<Residuals>| r.as_ref().map(|r| r.used.clone());
        used(&self.objects) == used(&other.objects)
            && used(&self.horizon) == used(&other.horizon)
            && used(&self.map) == used(&other.map)
    }
}

/// Residual function over the free parameters of a pose.
#[derive(Debug, Clone)]
pub struct FitProblem<'a> {
    intrinsics: Intrinsics,
    base: Pose,
    free: Vec<PoseParam>,
    spec: ResidualSpec<'a>,
    support: FamilyResiduals,
}

impl<'a> FitProblem<'a> {
    pub fn new(intrinsics: &Intrinsics, initial: &Pose, free: FreeMask, spec: ResidualSpec<'a>) -> Result<Self> {
        intrinsics.validate()?;
        if !initial.is_finite() {
            return Err(Error::InvalidParameter("initial pose must be finite".into()));
        }
        if !(initial.height() > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "initial camera height must be positive, got {}",
                initial.height()
            )));
        }
        if let ResidualSpec::Objects { horizon_weight, .. } = spec {
            if !(0.0..=1.0).contains(&horizon_weight) {
                return Err(Error::InvalidParameter(format!(
                    "horizon weight must lie in [0, 1], got {horizon_weight}"
                )));
            }
        }
        let free_params = free.params();
        if free_params.is_empty() {
            return Err(Error::InvalidParameter("at least one parameter must be free".into()));
        }
        let mut problem = Self {
            intrinsics: *intrinsics,
            base: *initial,
            free: free_params,
            spec,
            support: FamilyResiduals::default(),
        };
        let support = problem.families(initial)?;
        let count = [&support.objects, &support.horizon, &support.map]
            .iter()
            .filter_map(|r| r.as_ref())
            .map(|r| r.values.len())
            .sum::<usize>();
        if count == 0 {
            return Err(Error::InvalidInput("all residuals are excluded at the initial pose".into()));
        }
        if problem.free.len() > count {
            return Err(Error::InvalidInput(format!(
                "{} free parameters but only {count} residuals",
                problem.free.len()
            )));
        }
        problem.support = support;
        Ok(problem)
    }

    pub fn free_params(&self) -> &[PoseParam] {
        &self.free
    }

    pub fn initial_params(&self) -> DVector<f64> {
        DVector::from_iterator(self.free.len(), self.free.iter().map(|&p| self.base.get(p)))
    }

    pub fn pose_at(&self, x: &DVector<f64>) -> Pose {
        let mut pose = self.base;
        for (&p, &v) in self.free.iter().zip(x.iter()) {
            pose.set(p, v);
        }
        pose
    }

    fn families(&self, pose: &Pose) -> Result<FamilyResiduals> {
        Ok(match self.spec {
            ResidualSpec::Objects {
                annotations,
                horizon,
                ..
            } => FamilyResiduals {
                objects: (!annotations.is_empty())
                    .then(|| object_residuals(&self.intrinsics, pose, annotations))
                    .transpose()?,
                horizon: (!horizon.is_empty())
                    .then(|| horizon_residuals(&self.intrinsics, pose, horizon))
                    .transpose()?,
                map: None,
            },
            ResidualSpec::Map { correspondences } => FamilyResiduals {
                map: Some(map_residuals(&self.intrinsics, pose, correspondences)?),
                ..Default::default()
            },
        })
    }

    fn weighted(&self, fam: &FamilyResiduals) -> DVector<f64> {
        let mut out = Vec::new();
        let scaled = |out: &mut Vec<f64>, r: &Residuals, weight: f64| {
            let s = (weight / r.values.len() as f64).sqrt();
            out.extend(r.values.iter().map(|v| v * s));
        };
        let non_empty = |r: &Option<Residuals>| r.as_ref().filter(|r| !r.is_empty()).cloned();
        match (non_empty(&fam.objects), non_empty(&fam.horizon), non_empty(&fam.map)) {
            (Some(o), Some(h), _) => {
                let w = match self.spec {
                    ResidualSpec::Objects { horizon_weight, .. } => horizon_weight,
                    ResidualSpec::Map { .. } => unreachable!(),
                };
                scaled(&mut out, &o, 1.0 - w);
                scaled(&mut out, &h, w);
            }
            (Some(r), None, _) | (None, Some(r), _) | (None, None, Some(r)) => scaled(&mut out, &r, 1.0),
            (None, None, None) => {}
        }
        DVector::from_vec(out)
    }

    /// Weighted residual vector whose squared norm equals the combined cost.
    /// `None` outside the fit domain: non-positive height, a degenerate
    /// horizon, or a change in which records can be evaluated.
    pub fn residuals(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let pose = self.pose_at(x);
        if !(pose.height() > 0.0) {
            return None;
        }
        let fam = self.families(&pose).ok()?;
        fam.same_support(&self.support).then(|| self.weighted(&fam))
    }
}

/// Root-mean-square residual per family at the fitted pose.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FamilyRms {
    /// Pixels.
    pub objects: Option<f64>,
    /// Pixels.
    pub horizon: Option<f64>,
    /// Metres.
    pub map: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamEstimate {
    pub param: PoseParam,
    pub value: f64,
    /// `None` when there are no spare degrees of freedom.
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    /// Best pose found, also when the fit did not converge.
    pub pose: Pose,
    /// Combined cost at `pose`.
    pub cost: f64,
    pub rms: FamilyRms,
    pub iterations: usize,
    pub converged: bool,
    pub rank_deficient: bool,
    pub estimates: Vec<ParamEstimate>,
    /// Records (annotations, horizon points or correspondences) used.
    pub used: usize,
    /// Records excluded because they could not be evaluated.
    pub excluded: usize,
}

impl FitResult {
    pub fn std_error(&self, param: PoseParam) -> Option<f64> {
        self.estimates.iter().find(|e| e.param == param).and_then(|e| e.std_error)
    }
}

pub fn fit(intrinsics: &Intrinsics, initial: &Pose, free: FreeMask, spec: ResidualSpec<'_>) -> Result<FitResult> {
    fit_with_config(intrinsics, initial, free, spec, &LmConfig::default())
}

pub fn fit_with_config(
    intrinsics: &Intrinsics,
    initial: &Pose,
    free: FreeMask,
    spec: ResidualSpec<'_>,
    config: &LmConfig,
) -> Result<FitResult> {
    let problem = FitProblem::new(intrinsics, initial, free, spec)?;
    let outcome = minimize(|x| problem.residuals(x), problem.initial_params(), config)?;
    let pose = problem.pose_at(&outcome.params);
    let fam = problem.families(&pose)?;

    let m = outcome.residuals.len();
    let p = outcome.params.len();
    let covariance = (m > p)
        .then(|| outcome.damped_curvature_inverse())
        .flatten()
        .map(|inv| inv * (outcome.cost / (m - p) as f64));
    let estimates = problem
        .free
        .iter()
        .enumerate()
        .map(|(i, &param)| ParamEstimate {
            param,
            value: pose.get(param),
            std_error: covariance.as_ref().map(|c| c[(i, i)].max(0.0).sqrt()),
        })
        .collect();

    let families = [&fam.objects, &fam.horizon, &fam.map];
    Ok(FitResult {
        pose,
        cost: outcome.cost,
        rms: FamilyRms {
            objects: fam.objects.as_ref().and_then(Residuals::rms),
            horizon: fam.horizon.as_ref().and_then(Residuals::rms),
            map: fam.map.as_ref().and_then(Residuals::rms),
        },
        iterations: outcome.iterations,
        converged: outcome.converged,
        rank_deficient: outcome.rank_deficient,
        estimates,
        used: families.iter().filter_map(|r| r.as_ref()).map(|r| r.used.len()).sum(),
        excluded: families.iter().filter_map(|r| r.as_ref()).map(|r| r.excluded).sum(),
    })
}

/// Runs the fit from `initial` and from each start tilt, keeping the lowest
/// cost among converged fits (or overall, if none converged). Starts that
/// cannot be evaluated are skipped.
pub fn fit_multistart(
    intrinsics: &Intrinsics,
    initial: &Pose,
    free: FreeMask,
    spec: ResidualSpec<'_>,
    start_tilts: &[f64],
) -> Result<FitResult> {
    let mut starts = vec![*initial];
    if free.is_free(PoseParam::Tilt) {
        starts.extend(start_tilts.iter().map(|&t| initial.with(PoseParam::Tilt, t)));
    }
    let mut best: Option<FitResult> = None;
    let mut first_error = None;
    for start in starts {
        match fit(intrinsics, &start, free, spec) {
            Ok(r) => {
                let better = match &best {
                    None => true,
                    Some(b) => (r.converged, -r.cost) > (b.converged, -b.cost),
                };
                if better {
                    best = Some(r);
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_error.expect("at least one start"))
}
