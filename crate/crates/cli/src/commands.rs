use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use camtransform::camera::PoseParam;
use camtransform::fit::{
    fit, fit_multistart, subset_study, Correspondence, FamilyRms, FitResult, FreeMask, ParamEstimate, ResidualSpec,
    StudyConfig, DEFAULT_HORIZON_WEIGHT, MULTISTART_TILTS,
};
use camtransform::scene::{annotate, horizon_clicks, linspace, perturbation_sweep, place_objects, ObjectAnnotation};
use camtransform::topview::{resample_topview, topview_map, GroundRect};
use camtransform::{CameraMatrix, FixedAxis, ImagePoint, Pose, WorldPoint};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{CameraConfig, PoseSection};
use crate::raster::{read_pnm, write_pnm};
use crate::tables::{self, fmt_f64, NamedAnnotation, NamedCorrespondence};

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Output written, but some rows are degenerate or invalid.
    Degenerate,
    /// Report written, but the fit did not converge.
    NotConverged,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Degenerate => 2,
            Outcome::NotConverged => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "camtf", version, about = "Camera geometry: projection, back-projection, pose fitting and top views")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Project world points to pixels.
    Project(ProjectArgs),
    /// Back-project pixels with one world coordinate fixed.
    Backproject(BackprojectArgs),
    /// Two points on the horizon line.
    Horizon(CameraOut),
    /// Fit the camera pose to annotated objects and optional horizon points.
    FitObjects(FitObjectsArgs),
    /// Fit the camera pose to image/map correspondences.
    FitMap(FitMapArgs),
    /// Simulate object annotations (and horizon clicks) with the config camera.
    Synth(SynthArgs),
    /// Apparent heights under relative height and tilt perturbations.
    Sweep(SweepArgs),
    /// Fits on random annotation subsets of every size.
    Study(StudyArgs),
    /// Ground grid to image lookup, optionally warping a PPM/PGM raster.
    Topview(TopviewArgs),
}

#[derive(Debug, Args)]
pub struct CameraOut {
    /// Camera config (TOML).
    #[arg(short, long)]
    pub camera: PathBuf,
    /// Output file, stdout when absent.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub io: CameraOut,
    /// CSV with columns x1,x2,x3.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Inline world point "x1,x2,x3" (repeatable).
    #[arg(long = "point", allow_hyphen_values = true, value_parser = parse_list::<3>)]
    pub inline: Vec<[f64; 3]>,
}

#[derive(Debug, Args)]
pub struct BackprojectArgs {
    #[command(flatten)]
    pub io: CameraOut,
    /// CSV with columns y1,y2.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Inline pixel "y1,y2" (repeatable).
    #[arg(long = "pixel", allow_hyphen_values = true, value_parser = parse_list::<2>)]
    pub inline: Vec<[f64; 2]>,
    /// World coordinate held fixed: x1, x2 or x3.
    #[arg(long)]
    pub fix: FixedAxis,
    /// Value of the fixed coordinate, metres.
    #[arg(long, allow_hyphen_values = true)]
    pub value: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Free parameters, e.g. "height,tilt,roll".
    #[arg(long)]
    pub free: Option<FreeMask>,
    /// Start values "name=value,...", on top of 10 m height and 80° tilt.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_initial)]
    pub initial: Option<StartValues>,
    /// Also start from tilts 45°, 60°, 75° and 85° and keep the best fit.
    #[arg(long)]
    pub multistart: bool,
}

#[derive(Debug, Args)]
pub struct FitObjectsArgs {
    #[command(flatten)]
    pub io: CameraOut,
    /// CSV with columns object_id,foot_x,foot_y,head_x,head_y,height_m.
    #[arg(long)]
    pub annotations: PathBuf,
    /// CSV with columns image_x,image_y.
    #[arg(long)]
    pub horizon: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_HORIZON_WEIGHT)]
    pub horizon_weight: f64,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct FitMapArgs {
    #[command(flatten)]
    pub io: CameraOut,
    /// CSV with columns id,image_x,image_y and world_x,world_y or lat,lon.
    #[arg(long)]
    pub correspondences: PathBuf,
    /// Per-point residual table as CSV.
    #[arg(long)]
    pub residuals: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub io: CameraOut,
    /// Object distances along the ground axis, metres [default: 15 evenly spaced from 50 to 150].
    #[arg(long, value_delimiter = ',', default_values_t = linspace(50.0, 150.0, 15), hide_default_value = true)]
    pub distances: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub object_height: f64,
    #[arg(long, default_value_t = 0.3)]
    pub object_width: f64,
    /// Click noise standard deviation, pixels.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write simulated horizon clicks to this CSV.
    #[arg(long)]
    pub horizon_out: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub horizon_points: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub io: CameraOut,
    /// Relative perturbation range, 0.1 for ±10 %.
    #[arg(long, default_value_t = 0.1)]
    pub range: f64,
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [50.0, 100.0, 150.0, 200.0, 250.0, 300.0])]
    pub distances: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub object_height: f64,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub io: CameraOut,
    /// CSV with columns object_id,foot_x,foot_y,head_x,head_y,height_m.
    #[arg(long)]
    pub annotations: PathBuf,
    /// CSV with columns image_x,image_y, used in every fit.
    #[arg(long)]
    pub horizon: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_HORIZON_WEIGHT)]
    pub horizon_weight: f64,
    /// Random subsets drawn per subset size.
    #[arg(long)]
    pub repeats: usize,
    #[arg(long)]
    pub seed: u64,
    /// Free parameters [default: height,tilt].
    #[arg(long)]
    pub free: Option<FreeMask>,
    /// Start values "name=value,...", on top of 10 m height and 80° tilt.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_initial)]
    pub initial: Option<StartValues>,
}

#[derive(Debug, Args)]
pub struct TopviewArgs {
    #[command(flatten)]
    pub io: CameraOut,
    /// Ground rectangle "x_min,x_max,y_min,y_max", metres.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_list::<4>)]
    pub extent: [f64; 4],
    /// Cell size, metres.
    #[arg(long)]
    pub resolution: f64,
    /// Camera image (PPM/PGM) matching the configured image size.
    #[arg(long)]
    pub raster: Option<PathBuf>,
    /// Warped top view output (PPM/PGM); requires --raster.
    #[arg(long, requires = "raster")]
    pub warped: Option<PathBuf>,
}

fn parse_list<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got {}", parts.len()));
    }
    let mut out = [0.0; N];
    for (slot, p) in out.iter_mut().zip(parts) {
        let v: f64 = p.parse().map_err(|_| format!("'{p}' is not a number"))?;
        if !v.is_finite() {
            return Err(format!("'{p}' is not finite"));
        }
        *slot = v;
    }
    Ok(out)
}

/// Parsed `--initial` list.
#[derive(Debug, Clone, PartialEq)]
pub struct StartValues(pub Vec<(PoseParam, f64)>);

fn parse_initial(s: &str) -> std::result::Result<StartValues, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|item| {
            let (k, v) = item.split_once('=').ok_or_else(|| format!("expected name=value, got '{item}'"))?;
            let param: PoseParam = k.parse().map_err(|e| format!("{e}"))?;
            let value: f64 = v.trim().parse().map_err(|_| format!("'{}' is not a number", v.trim()))?;
            if !value.is_finite() {
                return Err(format!("{param} start value must be finite"));
            }
            Ok((param, value))
        })
        .collect::<std::result::Result<_, _>>()
        .map(StartValues)
}

fn initial_pose(values: Option<&StartValues>) -> Pose {
    let mut pose = Pose::looking(10.0, 80.0);
    for &(p, v) in values.map_or(&[][..], |s| &s.0) {
        pose.set(p, v);
    }
    pose
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) if p != Path::new("-") => {
            Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?))
        }
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn axis_name(axis: FixedAxis) -> &'static str {
    match axis {
        FixedAxis::X => "x1",
        FixedAxis::Y => "x2",
        FixedAxis::Z => "x3",
    }
}

pub fn execute(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Project(a) => project(a),
        Command::Backproject(a) => backproject(a),
        Command::Horizon(a) => horizon(a),
        Command::FitObjects(a) => fit_objects(a),
        Command::FitMap(a) => fit_map(a),
        Command::Synth(a) => synth(a),
        Command::Sweep(a) => sweep(a),
        Command::Study(a) => study(a),
        Command::Topview(a) => topview(a),
    }
}

fn project(args: ProjectArgs) -> Result<Outcome> {
    let cam = CameraConfig::load(&args.io.camera)?.camera()?;
    let mut points = match &args.points {
        Some(p) => tables::read_world_points(p)?,
        None => Vec::new(),
    };
    points.extend(args.inline.iter().map(|&[x, y, z]| WorldPoint::new(x, y, z)));
    if points.is_empty() {
        bail!("no points given, use --points or --point");
    }
    let mut w = tables::writer(output(args.io.out.as_deref())?);
    w.write_record(["x1", "x2", "x3", "y1", "y2", "status"])?;
    let mut all_ok = true;
    for p in &points {
        let (y1, y2, status) = match cam.project_full(p) {
            Ok(proj) if proj.in_front() => (fmt_f64(proj.point.x), fmt_f64(proj.point.y), "ok"),
            Ok(proj) => (fmt_f64(proj.point.x), fmt_f64(proj.point.y), "behind"),
            Err(_) => (String::new(), String::new(), "degenerate"),
        };
        all_ok &= status == "ok";
        w.write_record([fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z), y1, y2, status.to_string()])?;
    }
    w.flush()?;
    Ok(if all_ok { Outcome::Success } else { Outcome::Degenerate })
}

fn backproject(args: BackprojectArgs) -> Result<Outcome> {
    let cam = CameraConfig::load(&args.io.camera)?.camera()?;
    if !args.value.is_finite() {
        bail!("--value must be finite");
    }
    let mut pixels = match &args.points {
        Some(p) => tables::read_image_points(p)?,
        None => Vec::new(),
    };
    pixels.extend(args.inline.iter().map(|&[x, y]| ImagePoint::new(x, y)));
    if pixels.is_empty() {
        bail!("no pixels given, use --points or --pixel");
    }
    let mut w = tables::writer(output(args.io.out.as_deref())?);
    w.write_record(["y1", "y2", "fixed", "x1", "x2", "x3", "status"])?;
    let mut all_ok = true;
    for px in &pixels {
        let (coords, status) = match cam.backproject(px, args.fix, args.value) {
            Ok(b) => {
                let p = b.point;
                ([fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z)], if b.in_front { "ok" } else { "behind" })
            }
            Err(_) => (Default::default(), "degenerate"),
        };
        all_ok &= status == "ok";
        let [x1, x2, x3] = coords;
        w.write_record([
            fmt_f64(px.x),
            fmt_f64(px.y),
            axis_name(args.fix).to_string(),
            x1,
            x2,
            x3,
            status.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(if all_ok { Outcome::Success } else { Outcome::Degenerate })
}

fn horizon(args: CameraOut) -> Result<Outcome> {
    let cam = CameraConfig::load(&args.camera)?.camera()?;
    let line = cam.horizon_line()?;
    let (a, b) = line.points();
    let mut w = tables::writer(output(args.out.as_deref())?);
    w.write_record(["y1", "y2"])?;
    for p in [a, b] {
        w.write_record([fmt_f64(p.x), fmt_f64(p.y)])?;
    }
    w.flush()?;
    Ok(Outcome::Success)
}

/// JSON fit report.
#[derive(Debug, Serialize)]
pub struct FitReport {
    pub converged: bool,
    pub rank_deficient: bool,
    pub iterations: usize,
    pub cost: f64,
    pub free: String,
    pub initial: PoseSection,
    pub pose: PoseSection,
    pub rms: FamilyRms,
    pub estimates: Vec<ParamEstimate>,
    pub used: usize,
    pub excluded: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub camera_position: Option<CameraPosition>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<PointResidual>,
}

#[derive(Debug, Serialize)]
pub struct CameraPosition {
    pub x: f64,
    pub y: f64,
    pub lat_deg: Option<f64>,
    pub lon_deg: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct PointResidual {
    pub id: String,
    pub image_x: f64,
    pub image_y: f64,
    pub world_x: f64,
    pub world_y: f64,
    /// Ground back-projection of the image point under the fitted pose.
    pub fitted_x: Option<f64>,
    pub fitted_y: Option<f64>,
    pub residual_x: Option<f64>,
    pub residual_y: Option<f64>,
    pub residual_m: Option<f64>,
}

fn pose_section(p: &Pose) -> PoseSection {
    PoseSection {
        height_m: p.height(),
        tilt_deg: p.tilt(),
        roll_deg: p.roll(),
        heading_deg: p.heading(),
        offset_x_m: p.offset_x(),
        offset_y_m: p.offset_y(),
    }
}

fn report(result: &FitResult, initial: &Pose, free: FreeMask) -> FitReport {
    FitReport {
        converged: result.converged,
        rank_deficient: result.rank_deficient,
        iterations: result.iterations,
        cost: result.cost,
        free: free.to_string(),
        initial: pose_section(initial),
        pose: pose_section(&result.pose),
        rms: result.rms,
        estimates: result.estimates.clone(),
        used: result.used,
        excluded: result.excluded,
        camera_position: None,
        points: Vec::new(),
    }
}

fn write_report(path: Option<&Path>, report: &FitReport) -> Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn run_fit(
    intr: &camtransform::Intrinsics,
    initial: &Pose,
    free: FreeMask,
    spec: ResidualSpec<'_>,
    multistart: bool,
) -> Result<FitResult> {
    let result = if multistart {
        fit_multistart(intr, initial, free, spec, &MULTISTART_TILTS)
    } else {
        fit(intr, initial, free, spec)
    };
    Ok(result?)
}

fn fit_objects(args: FitObjectsArgs) -> Result<Outcome> {
    let config = CameraConfig::load(&args.io.camera)?;
    let intr = config.intrinsics()?;
    let named = tables::read_annotations(&args.annotations)?;
    if named.is_empty() {
        bail!("{}: no annotations", args.annotations.display());
    }
    let annotations: Vec<ObjectAnnotation> = named.iter().map(|n| n.annotation).collect();
    let horizon = match &args.horizon {
        Some(p) => {
            let h = tables::read_horizon(p)?;
            if h.is_empty() {
                bail!("{}: no horizon points", p.display());
            }
            h
        }
        None => Vec::new(),
    };
    let free = args.fit.free.unwrap_or(FreeMask::new(&[PoseParam::Height, PoseParam::Tilt, PoseParam::Roll])?);
    let initial = initial_pose(args.fit.initial.as_ref());
    let spec = ResidualSpec::Objects {
        annotations: &annotations,
        horizon: &horizon,
        horizon_weight: args.horizon_weight,
    };
    let result = run_fit(&intr, &initial, free, spec, args.fit.multistart)?;
    write_report(args.io.out.as_deref(), &report(&result, &initial, free))?;
    Ok(if result.converged { Outcome::Success } else { Outcome::NotConverged })
}

fn point_residuals(cam: &CameraMatrix, named: &[NamedCorrespondence]) -> Vec<PointResidual> {
    named
        .iter()
        .map(|n| {
            let c = &n.correspondence;
            let fitted = cam.backproject(&c.image, FixedAxis::Z, 0.0).ok().filter(|b| b.in_front).map(|b| b.point);
            let dx = fitted.map(|f| f.x - c.world.x);
            let dy = fitted.map(|f| f.y - c.world.y);
            PointResidual {
                id: n.id.clone(),
                image_x: c.image.x,
                image_y: c.image.y,
                world_x: c.world.x,
                world_y: c.world.y,
                fitted_x: fitted.map(|f| f.x),
                fitted_y: fitted.map(|f| f.y),
                residual_x: dx,
                residual_y: dy,
                residual_m: dx.zip(dy).map(|(x, y)| x.hypot(y)),
            }
        })
        .collect()
}

fn fit_map(args: FitMapArgs) -> Result<Outcome> {
    let config = CameraConfig::load(&args.io.camera)?;
    let intr = config.intrinsics()?;
    let anchor = config.anchor()?;
    let named = tables::read_correspondences(&args.correspondences, anchor.as_ref())?;
    let free = args.fit.free.unwrap_or(FreeMask::new(&[
        PoseParam::Height,
        PoseParam::Tilt,
        PoseParam::Heading,
        PoseParam::OffsetX,
        PoseParam::OffsetY,
    ])?);
    let minimum = free.count().div_ceil(2).max(1);
    if named.len() < minimum {
        bail!(
            "under-determined: {} free parameters need at least {minimum} correspondences, got {}",
            free.count(),
            named.len()
        );
    }
    let correspondences: Vec<Correspondence> = named.iter().map(|n| n.correspondence).collect();
    let initial = initial_pose(args.fit.initial.as_ref());
    let result = run_fit(&intr, &initial, free, ResidualSpec::map(&correspondences), args.fit.multistart)?;

    let cam = CameraMatrix::new(&intr, &result.pose)?;
    let center = cam.center();
    let gps = anchor.as_ref().and_then(|a| a.world_to_gps(&center).ok());
    let mut rep = report(&result, &initial, free);
    rep.camera_position = Some(CameraPosition {
        x: center.x,
        y: center.y,
        lat_deg: gps.map(|g| g.0),
        lon_deg: gps.map(|g| g.1),
    });
    rep.points = point_residuals(&cam, &named);

    if let Some(path) = &args.residuals {
        let mut w = tables::writer(output(Some(path))?);
        w.write_record(["id", "image_x", "image_y", "world_x", "world_y", "fitted_x", "fitted_y", "residual_x", "residual_y", "residual_m"])?;
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for p in &rep.points {
            w.write_record([
                p.id.clone(),
                fmt_f64(p.image_x),
                fmt_f64(p.image_y),
                fmt_f64(p.world_x),
                fmt_f64(p.world_y),
                opt(p.fitted_x),
                opt(p.fitted_y),
                opt(p.residual_x),
                opt(p.residual_y),
                opt(p.residual_m),
            ])?;
        }
        w.flush()?;
    }
    write_report(args.io.out.as_deref(), &rep)?;
    Ok(if result.converged { Outcome::Success } else { Outcome::NotConverged })
}

fn synth(args: SynthArgs) -> Result<Outcome> {
    let cam = CameraConfig::load(&args.io.camera)?.camera()?;
    let scene = place_objects(&args.distances, args.object_width, args.object_height)?;
    let annotated = annotate(&cam, &scene, args.noise, args.seed)?;
    let mut w = tables::writer(output(args.io.out.as_deref())?);
    w.write_record(["object_id", "foot_x", "foot_y", "head_x", "head_y", "height_m"])?;
    for (i, a) in annotated.annotations.iter().enumerate() {
        w.write_record([
            format!("o{:02}", i + 1),
            fmt_f64(a.foot.x),
            fmt_f64(a.foot.y),
            fmt_f64(a.head.x),
            fmt_f64(a.head.y),
            fmt_f64(a.known_height),
        ])?;
    }
    w.flush()?;
    if let Some(path) = &args.horizon_out {
        // separate stream so the object clicks do not depend on the horizon count
        let clicks = horizon_clicks(&cam, args.horizon_points, args.noise, args.seed ^ 0x9e37_79b9_7f4a_7c15)?;
        let mut w = tables::writer(output(Some(path))?);
        w.write_record(["image_x", "image_y"])?;
        for p in clicks {
            w.write_record([fmt_f64(p.x), fmt_f64(p.y)])?;
        }
        w.flush()?;
    }
    Ok(if annotated.excluded == 0 { Outcome::Success } else { Outcome::Degenerate })
}

fn sweep(args: SweepArgs) -> Result<Outcome> {
    let cam = CameraConfig::load(&args.io.camera)?.camera()?;
    if args.distances.is_empty() {
        bail!("--distances must not be empty");
    }
    let mut w = tables::writer(output(args.io.out.as_deref())?);
    w.write_record(["parameter", "value", "distance", "apparent_height", "valid"])?;
    let mut all_valid = true;
    for param in [PoseParam::Height, PoseParam::Tilt] {
        for row in perturbation_sweep(&cam, param, args.range, args.steps, &args.distances, args.object_height)? {
            all_valid &= row.valid;
            w.write_record([
                param.name().to_string(),
                fmt_f64(row.value),
                fmt_f64(row.distance),
                fmt_f64(row.apparent_height),
                row.valid.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(if all_valid { Outcome::Success } else { Outcome::Degenerate })
}

fn study(args: StudyArgs) -> Result<Outcome> {
    let config = CameraConfig::load(&args.io.camera)?;
    let intr = config.intrinsics()?;
    let named: Vec<NamedAnnotation> = tables::read_annotations(&args.annotations)?;
    if named.is_empty() {
        bail!("{}: no annotations", args.annotations.display());
    }
    let annotations: Vec<ObjectAnnotation> = named.iter().map(|n| n.annotation).collect();
    let horizon = match &args.horizon {
        Some(p) => tables::read_horizon(p)?,
        None => Vec::new(),
    };
    let mut study = StudyConfig::new(args.repeats, args.seed);
    if let Some(free) = args.free {
        study.free = free;
    }
    study.initial = initial_pose(args.initial.as_ref());
    study.horizon_weight = args.horizon_weight;
    let rows = subset_study(&intr, &annotations, &horizon, &study)?;
    let mut w = tables::writer(output(args.io.out.as_deref())?);
    w.write_record(["n", "repeat", "height", "tilt", "converged", "height_err_mean", "height_err_std"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.repeat.to_string(),
            fmt_f64(r.height),
            fmt_f64(r.tilt),
            r.converged.to_string(),
            fmt_f64(r.height_err_mean),
            fmt_f64(r.height_err_std),
        ])?;
    }
    w.flush()?;
    Ok(Outcome::Success)
}

fn topview(args: TopviewArgs) -> Result<Outcome> {
    let cam = CameraConfig::load(&args.io.camera)?.camera()?;
    let [x_min, x_max, y_min, y_max] = args.extent;
    let grid = topview_map(&cam, GroundRect::new(x_min, x_max, y_min, y_max)?, args.resolution)?;
    let warped = match &args.raster {
        Some(path) => {
            let image = read_pnm(path)?;
            let intr = cam.intrinsics();
            if (image.width(), image.height()) != (intr.image_width, intr.image_height) {
                bail!(
                    "{}: raster is {}x{} but the camera image is {}x{}",
                    path.display(),
                    image.width(),
                    image.height(),
                    intr.image_width,
                    intr.image_height
                );
            }
            Some(resample_topview(&image, &grid)?)
        }
        None => None,
    };

    let mut w = tables::writer(output(args.io.out.as_deref())?);
    w.write_record(["row", "col", "x1", "x2", "y1", "y2"])?;
    for r in 0..grid.rows() {
        for c in 0..grid.cols() {
            let ground = grid.cell_center(r, c);
            let (y1, y2) = grid.cell(r, c).map(|p| (fmt_f64(p.x), fmt_f64(p.y))).unwrap_or_default();
            w.write_record([r.to_string(), c.to_string(), fmt_f64(ground.x), fmt_f64(ground.y), y1, y2])?;
        }
    }
    w.flush()?;
    if let (Some(out), Some(raster)) = (&args.warped, &warped) {
        write_pnm(out, raster)?;
    }
    Ok(Outcome::Success)
}

/// Exit code for an error: 2 for geometric degeneracy, 1 otherwise.
pub fn error_code(err: &anyhow::Error) -> i32 {
    use camtransform::Error as E;
    let degenerate = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<E>(),
            Some(E::DegenerateRay | E::DegenerateHorizon | E::PointAtCameraPlane { .. })
        )
    });
    if degenerate {
        2
    } else {
        1
    }
}
