//! Local equirectangular anchoring of the metric world frame to
//! latitude/longitude.
//!
//! The world y axis points along `bearing` (degrees clockwise from true
//! north) and the x axis 90° clockwise from it, so with bearing 0 the frame
//! is x = east, y = north.

use serde::{Deserialize, Serialize};

use crate::camera::WorldPoint;
use crate::error::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
/// Points farther than this from the anchor are rejected.
pub const MAX_LOCAL_RANGE_M: f64 = 100_000.0;
const MAX_LATITUDE: f64 = 89.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoAnchor {
    latitude: f64,
    longitude: f64,
    bearing: f64,
}

fn normalize_longitude(lon: f64) -> f64 {
    crate::camera::normalize_angle(lon)
}

impl GeoAnchor {
    pub fn new(latitude: f64, longitude: f64, bearing: f64) -> Result<Self> {
        if !(latitude.is_finite() && longitude.is_finite() && bearing.is_finite()) {
            return Err(Error::InvalidParameter("geo anchor fields must be finite".into()));
        }
        if latitude.abs() >= 90.0 {
            return Err(Error::InvalidParameter(format!("latitude {latitude} outside (-90, 90)")));
        }
        Ok(Self {
            latitude,
            longitude: normalize_longitude(longitude),
            bearing,
        })
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }
    pub fn longitude(&self) -> f64 {
        self.longitude
    }
    pub fn bearing(&self) -> f64 {
        self.bearing
    }

    fn check_latitude(&self) -> Result<()> {
        if self.latitude.abs() >= MAX_LATITUDE {
            return Err(Error::UnsupportedLatitude(self.latitude));
        }
        Ok(())
    }

    /// Latitude and longitude in degrees of a world point (z is ignored).
    pub fn world_to_gps(&self, p: &WorldPoint) -> Result<(f64, f64)> {
        self.check_latitude()?;
        let range = p.x.hypot(p.y);
        if !(range <= MAX_LOCAL_RANGE_M) {
            return Err(Error::OutOfRange(range));
        }
        let (s, c) = self.bearing.to_radians().sin_cos();
        let east = p.x * c + p.y * s;
        let north = -p.x * s + p.y * c;
        let lat = self.latitude + (north / EARTH_RADIUS_M).to_degrees();
        let lon = self.longitude + (east / (EARTH_RADIUS_M * self.latitude.to_radians().cos())).to_degrees();
        Ok((lat, normalize_longitude(lon)))
    }

    /// Inverse of [`world_to_gps`](Self::world_to_gps); the result lies on the
    /// ground (z = 0).
    pub fn gps_to_world(&self, latitude: f64, longitude: f64) -> Result<WorldPoint> {
        self.check_latitude()?;
        if !(latitude.is_finite() && longitude.is_finite()) {
            return Err(Error::InvalidParameter("non-finite latitude/longitude".into()));
        }
        let north = (latitude - self.latitude).to_radians() * EARTH_RADIUS_M;
        let dlon = normalize_longitude(longitude - self.longitude);
        let east = dlon.to_radians() * EARTH_RADIUS_M * self.latitude.to_radians().cos();
        let (s, c) = self.bearing.to_radians().sin_cos();
        let p = WorldPoint::new(east * c - north * s, east * s + north * c, 0.0);
        let range = p.x.hypot(p.y);
        if !(range <= MAX_LOCAL_RANGE_M) {
            return Err(Error::OutOfRange(range));
        }
        Ok(p)
    }
}
