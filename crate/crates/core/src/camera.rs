//! Intrinsic, extrinsic and combined camera matrices with forward projection,
//! constrained back-projection and the horizon line.
//!
//! Conventions follow the matrices exactly as assembled here:
//!
//! * `R = R_roll · R_tilt · R_heading` and `T = R_tilt · R_heading · t` with
//!   `t = (offset_x, offset_y, -height)`. Roll does not enter `T`.
//! * Tilt 0° looks straight down, tilt 90° looks horizontally.
//! * Points in the viewing direction get a *negative* projective scale; the
//!   perspective division is sign-blind, so [`Projection::in_front`] is the
//!   only way to tell a visible point from its mirror behind the camera.
//! * The image origin is the top-left corner, `y` grows downwards.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Matrix3x4, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Projective scales below this magnitude are treated as the camera plane.
pub const SCALE_EPS: f64 = 1e-12;
/// Threshold on |det| over the product of column norms of the reduced
/// back-projection matrix (independent of column scaling).
pub const DET_EPS: f64 = 1e-12;

/// Maps an angle in degrees onto (−180, 180].
pub fn normalize_angle(deg: f64) -> f64 {
    let a = deg.rem_euclid(360.0);
    if a > 180.0 {
        a - 360.0
    } else {
        a
    }
}

fn to_rad(deg: f64) -> f64 {
    deg * PI / 180.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn homogeneous(self) -> Vector4<f64> {
        Vector4::new(self.x, self.y, self.z, 1.0)
    }

    pub fn distance(&self, other: &WorldPoint) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }
}

impl From<Vector3<f64>> for WorldPoint {
    fn from(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// Continuous pixel position, origin at the top-left image corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePoint {
    pub x: f64,
    pub y: f64,
}

impl ImagePoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &ImagePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Sensor and lens description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    /// Focal length in mm.
    pub focal_length: f64,
    /// Sensor width in mm.
    pub sensor_width: f64,
    /// Sensor height in mm. Not used by the intrinsic matrix, which scales by
    /// the width ratio only.
    pub sensor_height: f64,
    pub image_width: u32,
    pub image_height: u32,
}

impl Intrinsics {
    pub fn new(
        focal_length: f64,
        sensor_width: f64,
        sensor_height: f64,
        image_width: u32,
        image_height: u32,
    ) -> Result<Self> {
        let intr = Self {
            focal_length,
            sensor_width,
            sensor_height,
            image_width,
            image_height,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("focal_length", self.focal_length),
            ("sensor_width", self.sensor_width),
            ("sensor_height", self.sensor_height),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and positive, got {value}"
                )));
            }
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image size must be positive, got {}x{}",
                self.image_width, self.image_height
            )));
        }
        let f = self.focal_px();
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "effective focal length {f} px is not finite and positive"
            )));
        }
        Ok(())
    }

    /// Effective focal length in pixels: `focal / sensor_width · image_width`.
    pub fn focal_px(&self) -> f64 {
        self.focal_length / self.sensor_width * f64::from(self.image_width)
    }

    pub fn principal_point(&self) -> ImagePoint {
        ImagePoint::new(
            f64::from(self.image_width) / 2.0,
            f64::from(self.image_height) / 2.0,
        )
    }

    /// True when the pixel lies in `[0, width) × [0, height)`.
    pub fn contains(&self, p: &ImagePoint) -> bool {
        p.x >= 0.0
            && p.y >= 0.0
            && p.x < f64::from(self.image_width)
            && p.y < f64::from(self.image_height)
    }

    /// The 3×4 intrinsic matrix.
    pub fn matrix(&self) -> Result<Matrix3x4<f64>> {
        self.validate()?;
        let f = self.focal_px();
        let c = self.principal_point();
        #[rustfmt::skip]
        let m = Matrix3x4::new(
            f,   0.0, c.x, 0.0,
            0.0, f,   c.y, 0.0,
            0.0, 0.0, 1.0, 0.0,
        );
        Ok(m)
    }
}

/// Extrinsic parameter selector, used by fitting masks and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseParam {
    Height,
    Tilt,
    Roll,
    Heading,
    OffsetX,
    OffsetY,
}

impl PoseParam {
    pub const ALL: [PoseParam; 6] = [
        PoseParam::Height,
        PoseParam::Tilt,
        PoseParam::Roll,
        PoseParam::Heading,
        PoseParam::OffsetX,
        PoseParam::OffsetY,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PoseParam::Height => "height",
            PoseParam::Tilt => "tilt",
            PoseParam::Roll => "roll",
            PoseParam::Heading => "heading",
            PoseParam::OffsetX => "offset_x",
            PoseParam::OffsetY => "offset_y",
        }
    }

    pub fn is_angle(self) -> bool {
        matches!(self, PoseParam::Tilt | PoseParam::Roll | PoseParam::Heading)
    }
}

impl fmt::Display for PoseParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PoseParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "height" => Ok(PoseParam::Height),
            "tilt" => Ok(PoseParam::Tilt),
            "roll" => Ok(PoseParam::Roll),
            "heading" => Ok(PoseParam::Heading),
            "x" | "offset_x" => Ok(PoseParam::OffsetX),
            "y" | "offset_y" => Ok(PoseParam::OffsetY),
            other => Err(Error::InvalidParameter(format!(
                "unknown pose parameter '{other}'"
            ))),
        }
    }
}

/// Extrinsic camera parameters. Angles in degrees, stored normalized to
/// (−180°, 180°]; lengths in metres.
///
/// `height > 0` is not enforced here so perturbation studies can use any
/// value; fitting checks it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    height: f64,
    tilt: f64,
    roll: f64,
    heading: f64,
    offset_x: f64,
    offset_y: f64,
}

impl Pose {
    pub fn new(height: f64, tilt: f64, roll: f64, heading: f64, offset_x: f64, offset_y: f64) -> Self {
        Self {
            height,
            tilt: normalize_angle(tilt),
            roll: normalize_angle(roll),
            heading: normalize_angle(heading),
            offset_x,
            offset_y,
        }
    }

    /// Height and tilt only; roll, heading and offsets zero.
    pub fn looking(height: f64, tilt: f64) -> Self {
        Self::new(height, tilt, 0.0, 0.0, 0.0, 0.0)
    }

    pub fn height(&self) -> f64 {
        self.height
    }
    pub fn tilt(&self) -> f64 {
        self.tilt
    }
    pub fn roll(&self) -> f64 {
        self.roll
    }
    pub fn heading(&self) -> f64 {
        self.heading
    }
    pub fn offset_x(&self) -> f64 {
        self.offset_x
    }
    pub fn offset_y(&self) -> f64 {
        self.offset_y
    }

    pub fn get(&self, param: PoseParam) -> f64 {
        match param {
            PoseParam::Height => self.height,
            PoseParam::Tilt => self.tilt,
            PoseParam::Roll => self.roll,
            PoseParam::Heading => self.heading,
            PoseParam::OffsetX => self.offset_x,
            PoseParam::OffsetY => self.offset_y,
        }
    }

    pub fn set(&mut self, param: PoseParam, value: f64) {
        match param {
            PoseParam::Height => self.height = value,
            PoseParam::Tilt => self.tilt = normalize_angle(value),
            PoseParam::Roll => self.roll = normalize_angle(value),
            PoseParam::Heading => self.heading = normalize_angle(value),
            PoseParam::OffsetX => self.offset_x = value,
            PoseParam::OffsetY => self.offset_y = value,
        }
    }

    pub fn with(mut self, param: PoseParam, value: f64) -> Self {
        self.set(param, value);
        self
    }

    pub fn is_finite(&self) -> bool {
        PoseParam::ALL.iter().all(|&p| self.get(p).is_finite())
    }
}

/// Rotation about the camera x axis by the tilt angle.
pub fn tilt_rotation(tilt_deg: f64) -> Matrix3<f64> {
    let (s, c) = to_rad(tilt_deg).sin_cos();
    #[rustfmt::skip]
    let m = Matrix3::new(
        1.0, 0.0, 0.0,
        0.0, c,   s,
        0.0, -s,  c,
    );
    m
}

/// Rotation about the z axis; used for both roll and heading.
pub fn z_rotation(angle_deg: f64) -> Matrix3<f64> {
    let (s, c) = to_rad(angle_deg).sin_cos();
    #[rustfmt::skip]
    let m = Matrix3::new(
        c,   s,   0.0,
        -s,  c,   0.0,
        0.0, 0.0, 1.0,
    );
    m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsic {
    pub matrix: Matrix4<f64>,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

pub fn extrinsic_matrix(pose: &Pose) -> Result<Extrinsic> {
    if !pose.is_finite() {
        return Err(Error::InvalidParameter(format!("pose has non-finite fields: {pose:?}")));
    }
    let r_tilt = tilt_rotation(pose.tilt);
    let r_roll = z_rotation(pose.roll);
    let r_heading = z_rotation(pose.heading);
    let t = Vector3::new(pose.offset_x, pose.offset_y, -pose.height);

    let rotation = r_roll * r_tilt * r_heading;
    let translation = r_tilt * r_heading * t;

    let mut matrix = Matrix4::identity();
    matrix.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation);
    matrix.fixed_view_mut::<3, 1>(0, 3).copy_from(&translation);
    Ok(Extrinsic {
        matrix,
        rotation,
        translation,
    })
}

/// A forward projection together with its projective scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub point: ImagePoint,
    /// Third entry of `C · p̃`, normalised to a unit homogeneous weight.
    pub scale: f64,
}

impl Projection {
    pub fn in_front(&self) -> bool {
        self.scale < 0.0
    }
}

/// Which world coordinate is held fixed during back-projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixedAxis {
    X,
    Y,
    Z,
}

impl FixedAxis {
    pub fn index(self) -> usize {
        match self {
            FixedAxis::X => 0,
            FixedAxis::Y => 1,
            FixedAxis::Z => 2,
        }
    }
}

impl FromStr for FixedAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x1" | "x" => Ok(FixedAxis::X),
            "x2" | "y" => Ok(FixedAxis::Y),
            "x3" | "z" => Ok(FixedAxis::Z),
            other => Err(Error::InvalidParameter(format!(
                "fixed axis must be one of x1, x2, x3; got '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackProjection {
    pub point: WorldPoint,
    /// False when the constraint plane is hit behind the camera.
    pub in_front: bool,
}

/// An infinite image line through two distinct generator points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImageLine {
    a: ImagePoint,
    b: ImagePoint,
}

impl ImageLine {
    pub fn new(a: ImagePoint, b: ImagePoint) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a.distance(&b) <= 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "line needs two distinct finite points, got {a:?} and {b:?}"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn points(&self) -> (ImagePoint, ImagePoint) {
        (self.a, self.b)
    }

    /// Signed perpendicular distance in pixels, positive to the right of the
    /// direction `a → b` (with `y` pointing down).
    pub fn signed_distance(&self, p: &ImagePoint) -> f64 {
        let dx = self.b.x - self.a.x;
        let dy = self.b.y - self.a.y;
        (dx * (p.y - self.a.y) - dy * (p.x - self.a.x)) / dx.hypot(dy)
    }

    /// `dy/dx` in image coordinates, `None` for a vertical line.
    pub fn slope(&self) -> Option<f64> {
        let dx = self.b.x - self.a.x;
        (dx.abs() > 1e-12).then(|| (self.b.y - self.a.y) / dx)
    }

    /// Row of the line at column `x`, `None` for a vertical line.
    pub fn y_at(&self, x: f64) -> Option<f64> {
        self.slope().map(|m| self.a.y + m * (x - self.a.x))
    }
}

/// Assembled 3×4 projection matrix with its factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraMatrix {
    intrinsics: Intrinsics,
    pose: Pose,
    intrinsic: Matrix3x4<f64>,
    extrinsic: Matrix4<f64>,
    combined: Matrix3x4<f64>,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl CameraMatrix {
    pub fn new(intrinsics: &Intrinsics, pose: &Pose) -> Result<Self> {
        let intrinsic = intrinsics.matrix()?;
        let ext = extrinsic_matrix(pose)?;
        Ok(Self {
            intrinsics: *intrinsics,
            pose: *pose,
            intrinsic,
            extrinsic: ext.matrix,
            combined: intrinsic * ext.matrix,
            rotation: ext.rotation,
            translation: ext.translation,
        })
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }
    pub fn pose(&self) -> &Pose {
        &self.pose
    }
    pub fn intrinsic(&self) -> &Matrix3x4<f64> {
        &self.intrinsic
    }
    pub fn extrinsic(&self) -> &Matrix4<f64> {
        &self.extrinsic
    }
    pub fn combined(&self) -> &Matrix3x4<f64> {
        &self.combined
    }
    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }
    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// World position of the projection centre, `−Rᵀ·T`.
    pub fn center(&self) -> WorldPoint {
        (-(self.rotation.transpose() * self.translation)).into()
    }

    pub fn project(&self, p: &WorldPoint) -> Result<ImagePoint> {
        self.project_full(p).map(|proj| proj.point)
    }

    pub fn project_full(&self, p: &WorldPoint) -> Result<Projection> {
        if !p.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite world point {p:?}")));
        }
        self.project_homogeneous(&p.homogeneous())
    }

    /// Projects a homogeneous world vector. A zero last entry denotes a
    /// direction at infinity.
    pub fn project_homogeneous(&self, p: &Vector4<f64>) -> Result<Projection> {
        let q = self.combined * p;
        let s = q[2];
        if !(s.abs() >= SCALE_EPS) {
            return Err(Error::PointAtCameraPlane { scale: s });
        }
        let weight = if p[3] == 0.0 { 1.0 } else { p[3] };
        Ok(Projection {
            point: ImagePoint::new(q[0] / s, q[1] / s),
            scale: s / weight,
        })
    }

    /// Recovers the world point seen at `pixel` whose `axis` coordinate equals
    /// `value`, by inverting the 3×3 matrix obtained from folding the fixed
    /// coordinate into the camera matrix.
    pub fn backproject(&self, pixel: &ImagePoint, axis: FixedAxis, value: f64) -> Result<BackProjection> {
        if !(pixel.is_finite() && value.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite back-projection input {pixel:?}, {value}"
            )));
        }
        let k = axis.index();
        let c = &self.combined;
        let mut reduced = Matrix3::<f64>::zeros();
        for j in 0..3 {
            if j == k {
                reduced.set_column(j, &(c.column(j) * value + c.column(3)));
            } else {
                reduced.set_column(j, &c.column(j));
            }
        }
        // a vanishing folded column means the constraint plane contains the
        // camera centre
        let folded = reduced.column(k).norm();
        let det = reduced.determinant();
        let column_norms: f64 = reduced.column_iter().map(|c| c.norm()).product();
        if !(folded >= DET_EPS * c.norm() * value.hypot(1.0)) || !(det.abs() >= DET_EPS * column_norms) {
            return Err(Error::DegenerateRay);
        }
        let inverse = reduced.try_inverse().ok_or(Error::DegenerateRay)?;
        // (s·a, s·b, s) with s in the fixed slot
        let solution = inverse * Vector3::new(pixel.x, pixel.y, 1.0);
        let s = solution[k];
        if !(s.abs() >= SCALE_EPS * solution.norm()) {
            return Err(Error::DegenerateRay);
        }
        let mut coords = [0.0; 3];
        for (j, slot) in coords.iter_mut().enumerate() {
            *slot = if j == k { value } else { solution[j] / s };
        }
        Ok(BackProjection {
            point: WorldPoint::new(coords[0], coords[1], coords[2]),
            // the world point's projective scale is 1/s
            in_front: s < 0.0,
        })
    }

    /// Image of the horizontal directions at infinity.
    ///
    /// The line is oriented so that [`ImageLine::signed_distance`] is positive
    /// on the ground side.
    pub fn horizon_line(&self) -> Result<ImageLine> {
        let heading_t = z_rotation(self.pose.heading).transpose();
        let generator = |rel_deg: f64| -> Result<ImagePoint> {
            let (s, c) = to_rad(rel_deg).sin_cos();
            let w = heading_t * Vector3::new(s, c, 0.0);
            self.project_homogeneous(&Vector4::new(w.x, w.y, w.z, 0.0))
                .map(|p| p.point)
                .map_err(|_| Error::DegenerateHorizon)
        };
        let a = generator(30.0)?;
        let b = generator(-30.0)?;
        ImageLine::new(a, b).map_err(|_| Error::DegenerateHorizon)
    }
}
