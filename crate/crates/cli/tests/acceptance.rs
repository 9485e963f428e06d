//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the lines are always
//! printed.

use std::process::Command;
use std::time::{Duration, Instant};

use camtransform::camera::PoseParam;
use camtransform::fit::{fit, fit_multistart, subset_study, Correspondence, FreeMask, ResidualSpec, StudyConfig, MULTISTART_TILTS};
use camtransform::geo::GeoAnchor;
use camtransform::scene::{annotate, apparent_heights, horizon_clicks, linspace, place_objects};
use camtransform::{CameraMatrix, FixedAxis, ImagePoint, Intrinsics, Pose, WorldPoint};
use camtransform_cli::CameraConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

const SEED1: u64 = 1;
const SEED2: u64 = 2;
const DISTANCES: [f64; 6] = [50.0, 100.0, 150.0, 200.0, 250.0, 300.0];

fn paper_intrinsics() -> Intrinsics {
    Intrinsics::new(14.0, 17.3, 9.7, 4608, 2592).unwrap()
}

fn paper_camera() -> CameraMatrix {
    CameraMatrix::new(&paper_intrinsics(), &Pose::looking(20.0, 80.0)).unwrap()
}

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

mod oracle {
    //! Step-wise evaluation with plain arrays: heading, tilt and roll are
    //! applied one after another, then the pinhole division. Shares no code
    //! with the library.

    pub type V3 = [f64; 3];

    #[derive(Clone, Copy, Debug)]
    pub struct Cam {
        pub focal_mm: f64,
        pub sensor_w: f64,
        pub width: f64,
        pub height_px: f64,
        pub height: f64,
        pub tilt: f64,
        pub roll: f64,
        pub heading: f64,
        pub x: f64,
        pub y: f64,
    }

    fn rot_z(deg: f64, v: V3) -> V3 {
        let (s, c) = deg.to_radians().sin_cos();
        [c * v[0] + s * v[1], -s * v[0] + c * v[1], v[2]]
    }

    fn rot_z_inv(deg: f64, v: V3) -> V3 {
        rot_z(-deg, v)
    }

    fn rot_tilt(deg: f64, v: V3) -> V3 {
        let (s, c) = deg.to_radians().sin_cos();
        [v[0], c * v[1] + s * v[2], -s * v[1] + c * v[2]]
    }

    fn rot_tilt_inv(deg: f64, v: V3) -> V3 {
        rot_tilt(-deg, v)
    }

    impl Cam {
        pub fn focal_px(&self) -> f64 {
            self.focal_mm / self.sensor_w * self.width
        }

        fn translation(&self) -> V3 {
            rot_tilt(self.tilt, rot_z(self.heading, [self.x, self.y, -self.height]))
        }

        /// Camera-frame coordinates: roll·tilt·heading·p + tilt·heading·t.
        pub fn to_camera(&self, p: V3) -> V3 {
            let r = rot_z(self.roll, rot_tilt(self.tilt, rot_z(self.heading, p)));
            let t = self.translation();
            [r[0] + t[0], r[1] + t[1], r[2] + t[2]]
        }

        pub fn to_world(&self, c: V3) -> V3 {
            let t = self.translation();
            let r = [c[0] - t[0], c[1] - t[1], c[2] - t[2]];
            rot_z_inv(self.heading, rot_tilt_inv(self.tilt, rot_z_inv(self.roll, r)))
        }

        /// Pixel and projective scale.
        pub fn project(&self, p: V3) -> (f64, f64, f64) {
            let c = self.to_camera(p);
            let f = self.focal_px();
            (f * c[0] / c[2] + self.width / 2.0, f * c[1] / c[2] + self.height_px / 2.0, c[2])
        }

        /// World point seen at pixel (u, v) at viewing depth `depth`.
        pub fn point_at(&self, u: f64, v: f64, depth: f64) -> V3 {
            let f = self.focal_px();
            let c = [-(u - self.width / 2.0) / f * depth, -(v - self.height_px / 2.0) / f * depth, -depth];
            self.to_world(c)
        }

        /// Unit-free viewing ray direction in world coordinates for a pixel.
        pub fn ray(&self, u: f64, v: f64) -> V3 {
            let a = self.point_at(u, v, 1.0);
            let b = self.point_at(u, v, 2.0);
            [b[0] - a[0], b[1] - a[1], b[2] - a[2]]
        }
    }

    /// Apparent height by explicit ray/plane intersection for a camera at
    /// height `h` with tilt only: the foot ray meets the ground, the head ray
    /// meets the vertical plane x2 = const through the foot.
    pub fn apparent_height(f: f64, cy: f64, h: f64, true_tilt: f64, assumed_tilt: f64, d: f64, object: f64) -> f64 {
        let pixel_y = |y: f64, z: f64| {
            let (s, c) = true_tilt.to_radians().sin_cos();
            let (py, pz) = (c * y + s * (z - h), -s * y + c * (z - h));
            f * py / pz + cy
        };
        let (foot, head) = (pixel_y(d, 0.0), pixel_y(d, object));
        let (s, c) = assumed_tilt.to_radians().sin_cos();
        // world direction of the ray through image row v (centre column)
        let dir = |v: f64| {
            let dy = -(v - cy) / f;
            (c * dy + s, s * dy - c)
        };
        let (fy, fz) = dir(foot);
        let ground_y = fy * (h / -fz);
        let (hy, hz) = dir(head);
        h + hz * (ground_y / hy)
    }
}

fn random_cam(rng: &mut ChaCha8Rng) -> (oracle::Cam, Intrinsics, Pose) {
    // lenses from fisheye-ish to ~11° horizontal field of view
    let sensor_w = rng.random_range(4.0..40.0);
    let cam = oracle::Cam {
        focal_mm: sensor_w * rng.random_range(0.3..5.0),
        sensor_w,
        width: f64::from(rng.random_range(64u32..8000)),
        height_px: f64::from(rng.random_range(64u32..6000)),
        height: rng.random_range(1.0..500.0),
        tilt: rng.random_range(5.0..175.0),
        roll: rng.random_range(-45.0..45.0),
        heading: rng.random_range(-180.0..180.0),
        x: rng.random_range(-100.0..100.0),
        y: rng.random_range(-100.0..100.0),
    };
    let sensor_h = cam.sensor_w * cam.height_px / cam.width;
    let intr = Intrinsics::new(cam.focal_mm, cam.sensor_w, sensor_h, cam.width as u32, cam.height_px as u32).unwrap();
    let pose = Pose::new(cam.height, cam.tilt, cam.roll, cam.heading, cam.x, cam.y);
    (cam, intr, pose)
}

fn criterion_1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED1);
    let mut worst: f64 = 0.0;
    let mut behind = 0;
    for _ in 0..1000 {
        let (oc, intr, pose) = random_cam(&mut rng);
        let u = rng.random_range(0.0..oc.width);
        let v = rng.random_range(0.0..oc.height_px);
        let p = oc.point_at(u, v, rng.random_range(10.0..1000.0));
        let (ou, ov, s) = oc.project(p);
        behind += usize::from(s >= 0.0);
        let got = CameraMatrix::new(&intr, &pose).unwrap().project(&WorldPoint::new(p[0], p[1], p[2])).unwrap();
        worst = worst.max((got.x - ou).abs()).max((got.y - ov).abs());
    }
    Verdict::new(
        worst < 1e-9 && behind == 0,
        format!("max pixel deviation {worst:.2e} px over 1000 triples (tolerance 1e-9)"),
    )
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED2);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let mut details = Vec::new();
    for axis in [FixedAxis::X, FixedAxis::Y, FixedAxis::Z] {
        let mut count = 0;
        let mut axis_worst: f64 = 0.0;
        while count < 1000 {
            let (oc, intr, pose) = random_cam(&mut rng);
            let u = rng.random_range(0.0..oc.width);
            let v = rng.random_range(0.0..oc.height_px);
            let ray = oc.ray(u, v);
            let norm = (ray[0] * ray[0] + ray[1] * ray[1] + ray[2] * ray[2]).sqrt();
            // rays parallel to the constraint plane have no solution
            if (ray[axis.index()] / norm).abs() < 0.01 {
                continue;
            }
            let p = oc.point_at(u, v, rng.random_range(1.0..500.0));
            let cam = CameraMatrix::new(&intr, &pose).unwrap();
            let point = WorldPoint::new(p[0], p[1], p[2]);
            let pixel = cam.project(&point).unwrap();
            match cam.backproject(&pixel, axis, p[axis.index()]) {
                Ok(b) if b.in_front => axis_worst = axis_worst.max(b.point.distance(&point)),
                _ => failures += 1,
            }
            count += 1;
        }
        worst = worst.max(axis_worst);
        details.push(format!("{axis:?} {axis_worst:.1e}"));
    }
    Verdict::new(
        worst < 1e-9 && failures == 0,
        format!("max round-trip error per axis [{}] m, {failures} failures (tolerance 1e-9 m)", details.join(", ")),
    )
}

fn criterion_3() -> Verdict {
    let cam = paper_camera();
    let heights = apparent_heights(&cam, &Pose::looking(22.0, 80.0), &DISTANCES, 1.0).unwrap();
    let worst = heights.iter().map(|h| (h.height - 1.1).abs()).fold(0.0, f64::max);
    let all_valid = heights.iter().all(|h| h.valid);
    Verdict::new(
        all_valid && worst < 1e-6,
        format!("max |apparent - 1.100| = {worst:.1e} m at 50..300 m (tolerance 1e-6)"),
    )
}

/// Tilt-perturbation fixture from the oracle, checked against the library,
/// then evaluated against the criterion shape.
fn tilt_errors(assumed: f64) -> (Vec<f64>, Vec<bool>, f64) {
    let intr = paper_intrinsics();
    let f = intr.focal_px();
    let fixture: Vec<f64> = DISTANCES
        .iter()
        .map(|&d| oracle::apparent_height(f, 1296.0, 20.0, 80.0, assumed, d, 1.0))
        .collect();
    let lib = apparent_heights(&paper_camera(), &Pose::looking(20.0, assumed), &DISTANCES, 1.0).unwrap();
    let mismatch = lib
        .iter()
        .zip(&fixture)
        .map(|(l, o)| (l.height - o).abs() / o.abs().max(1.0))
        .fold(0.0, f64::max);
    (lib.iter().map(|l| l.height - 1.0).collect(), lib.iter().map(|l| l.valid).collect(), mismatch)
}

fn tilt_shape(errors: &[f64], valid: &[bool]) -> (bool, String) {
    let abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    let increasing = abs.windows(2).all(|w| w[1] > w[0]);
    let ratio = abs[5] / abs[0];
    let all_valid = valid.iter().all(|&v| v);
    let list: Vec<String> = abs
        .iter()
        .zip(valid)
        .map(|(e, v)| if *v { format!("{e:.3}") } else { format!("{e:.3}*") })
        .collect();
    (
        all_valid && increasing && ratio > 3.0,
        format!(
            "|error| [{}] m (* = foot not on the ground in front of the camera), increasing {increasing}, ratio {ratio:.2}",
            list.join(", ")
        ),
    )
}

fn criterion_4() -> Verdict {
    let (errors, valid, mismatch) = tilt_errors(88.0);
    let (shape, detail) = tilt_shape(&errors, &valid);
    Verdict::new(shape && mismatch < 1e-9, format!("80° -> 88°: {detail}; library vs oracle {mismatch:.1e}"))
}

fn criterion_5() -> Verdict {
    let intr = paper_intrinsics();
    let objects = place_objects(&linspace(50.0, 150.0, 15), 0.3, 1.0).unwrap();
    let ann = annotate(&paper_camera(), &objects, 0.0, 0).unwrap().annotations;
    let free = FreeMask::new(&[PoseParam::Height, PoseParam::Tilt]).unwrap();
    let r = fit(&intr, &Pose::looking(10.0, 70.0), free, ResidualSpec::objects(&ann)).unwrap();
    let (dh, dt) = ((r.pose.height() - 20.0).abs(), (r.pose.tilt() - 80.0).abs());
    Verdict::new(
        r.converged && ann.len() == 15 && dh < 0.01 && dt < 0.01,
        format!(
            "recovered {:.6} m / {:.6}°, converged {} in {} iterations (tolerance 0.01 m, 0.01°)",
            r.pose.height(),
            r.pose.tilt(),
            r.converged,
            r.iterations
        ),
    )
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with a two-sided p-value from the
/// t-approximation.
fn spearman(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    let rho = cov / (vx * vy).sqrt();
    let t = rho * ((n - 2.0) / (1.0 - rho * rho).max(1e-300)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 2.0).unwrap();
    (rho, 2.0 * dist.cdf(-t.abs()))
}

fn std_by_n(rows: &[camtransform::fit::StudyRow], n: usize, value: impl Fn(&camtransform::fit::StudyRow) -> f64) -> f64 {
    let v: Vec<f64> = rows.iter().filter(|r| r.n == n && r.converged).map(value).collect();
    // identical subsets (n = N) give identical fits; keep that an exact tie
    if v.iter().all(|x| *x == v[0]) {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

fn criterion_6() -> Verdict {
    let intr = paper_intrinsics();
    let cam = paper_camera();
    let objects = place_objects(&linspace(50.0, 150.0, 15), 0.3, 1.0).unwrap();
    let ann = annotate(&cam, &objects, 1.0, 2024).unwrap().annotations;
    let horizon = horizon_clicks(&cam, 2, 1.0, 2025).unwrap();
    let config = StudyConfig::new(20, 6);
    let plain = subset_study(&intr, &ann, &[], &config).unwrap();
    let with_h = subset_study(&intr, &ann, &horizon, &config).unwrap();
    let failed = plain.iter().chain(&with_h).filter(|r| r.n >= 2 && !r.converged).count();

    let ns: Vec<usize> = (2..=15).collect();
    let nf: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let mut pass = failed == 0;
    let mut parts = Vec::new();
    for (name, value) in [("height", (|r: &camtransform::fit::StudyRow| r.height) as fn(&_) -> f64), ("tilt", |r| r.tilt)] {
        let sp: Vec<f64> = ns.iter().map(|&n| std_by_n(&plain, n, value)).collect();
        let sh: Vec<f64> = ns.iter().map(|&n| std_by_n(&with_h, n, value)).collect();
        let (rho_p, p_p) = spearman(&nf, &sp);
        let (rho_h, p_h) = spearman(&nf, &sh);
        let smaller = sp.iter().zip(&sh).filter(|(p, h)| h < p).count();
        let share = smaller as f64 / ns.len() as f64;
        pass &= rho_p < 0.0 && p_p < 0.05 && rho_h < 0.0 && p_h < 0.05 && share >= 0.8;
        parts.push(format!(
            "{name}: rho {rho_p:.3} (p {p_p:.1e}) without horizon, {rho_h:.3} (p {p_h:.1e}) with, horizon smaller for {smaller}/{}",
            ns.len()
        ));
    }
    Verdict::new(pass, format!("{}; {failed} non-converged fits", parts.join("; ")))
}

fn criterion_7() -> Verdict {
    let intr = paper_intrinsics();
    let truth = Pose::new(300.0, 35.0, 0.0, 20.0, -40.0, 25.0);
    let cam = CameraMatrix::new(&intr, &truth).unwrap();
    let pixels = [
        (400.0, 1500.0),
        (2300.0, 1400.0),
        (4200.0, 1600.0),
        (800.0, 2500.0),
        (2000.0, 2200.0),
        (3900.0, 2450.0),
        (1500.0, 1800.0),
        (3100.0, 1900.0),
    ];
    let corr: Vec<Correspondence> = pixels
        .iter()
        .map(|&(x, y)| {
            let image = ImagePoint::new(x, y);
            let world = cam.backproject(&image, FixedAxis::Z, 0.0).unwrap().point;
            Correspondence { image, world }
        })
        .collect();
    let free: FreeMask = "height,tilt,heading,x,y".parse().unwrap();
    // default start of the tool (10 m, 80°) with the tilt multi-start grid
    let r = fit_multistart(&intr, &Pose::looking(10.0, 80.0), free, ResidualSpec::map(&corr), &MULTISTART_TILTS).unwrap();
    let p = r.pose;
    let dh = (p.height() - 300.0).abs() / 300.0;
    let dt = (p.tilt() - 35.0).abs();
    let dhd = (p.heading() - 20.0).abs();
    let (dx, dy) = ((p.offset_x() + 40.0).abs(), (p.offset_y() - 25.0).abs());
    Verdict::new(
        r.converged && dh < 0.01 && dt < 0.1 && dhd < 0.1 && dx < 1.0 && dy < 1.0,
        format!(
            "height {:.4} m ({:.1e} rel), tilt err {dt:.1e}°, heading err {dhd:.1e}°, offset err {dx:.1e} / {dy:.1e} m",
            p.height(),
            dh
        ),
    )
}

fn criterion_8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let lat = rng.random_range(25.0..65.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let anchor = GeoAnchor::new(lat, rng.random_range(-180.0..180.0), rng.random_range(0.0..360.0)).unwrap();
        let r = 10_000.0 * rng.random::<f64>().sqrt();
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let p = WorldPoint::new(r * phi.cos(), r * phi.sin(), 0.0);
        let (la, lo) = anchor.world_to_gps(&p).unwrap();
        worst = worst.max(anchor.gps_to_world(la, lo).unwrap().distance(&p));
    }
    Verdict::new(worst < 1e-6, format!("max round-trip error {worst:.1e} m over 1000 points (tolerance 1e-6)"))
}

fn criterion_9() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cam = dir.path().join("cam.toml");
    let text = CameraConfig::from_parts(&paper_intrinsics(), &Pose::looking(20.0, 80.0), None).to_toml().unwrap();
    std::fs::write(&cam, text).unwrap();
    let ann = dir.path().join("ann.csv");
    let bin = env!("CARGO_BIN_EXE_camtf");
    let status = Command::new(bin)
        .args(["synth", "--noise", "1", "--seed", "3", "-c"])
        .arg(&cam)
        .arg("-o")
        .arg(&ann)
        .status()
        .unwrap();
    assert!(status.success());
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(bin)
            .args(["study", "--repeats", "5", "--seed", "42", "-c"])
            .arg(&cam)
            .arg("--annotations")
            .arg(&ann)
            .arg("-o")
            .arg(&out)
            .status()
            .unwrap();
        (status.success(), std::fs::read(out).unwrap_or_default())
    };
    let (ok_a, a) = run("a.csv");
    let (ok_b, b) = run("b.csv");
    Verdict::new(
        ok_a && ok_b && !a.is_empty() && a == b,
        format!("two study runs with seed 42: {} and {} bytes, identical {}", a.len(), b.len(), a == b),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict, Option<Duration>); 9] = [
        (1, "oracle equivalence", criterion_1, Some(Duration::from_secs(1))),
        (2, "round-trip inversion", criterion_2, Some(Duration::from_secs(1))),
        (3, "height robustness", criterion_3, None),
        (4, "tilt sensitivity", criterion_4, Some(Duration::from_secs(1))),
        (5, "fit recovery", criterion_5, Some(Duration::from_secs(1))),
        (6, "subset-size trends", criterion_6, Some(Duration::from_secs(120))),
        (7, "map registration", criterion_7, None),
        (8, "geo round trip", criterion_8, None),
        (9, "study determinism", criterion_9, None),
    ];
    let mut failed = Vec::new();
    for (id, name, check, limit) in criteria {
        let start = Instant::now();
        let verdict = check();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed < l);
        let pass = verdict.pass && in_time;
        let timing = match limit {
            Some(l) => format!("{:.3} s, limit {} s", elapsed.as_secs_f64(), l.as_secs()),
            None => format!("{:.3} s", elapsed.as_secs_f64()),
        };
        println!(
            "acceptance criterion {id} ({name}): {} | {} | {timing}",
            if pass { "PASS" } else { "FAIL" },
            verdict.detail
        );
        if !pass {
            failed.push(id);
        }
    }

    // not a criterion: the opposite perturbation direction of criterion 4
    let (errors, valid, _) = tilt_errors(72.0);
    let (shape, detail) = tilt_shape(&errors, &valid);
    println!("supplementary (not counted) tilt 80° -> 72°: {} | {detail}", if shape { "shape holds" } else { "shape fails" });

    if failed.is_empty() {
        println!("acceptance: all 9 criteria pass");
    } else {
        println!("acceptance: {} of 9 criteria fail: {failed:?}", failed.len());
        std::process::exit(1);
    }
}
