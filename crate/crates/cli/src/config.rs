//! Camera configuration file (TOML).

use std::path::Path;

use anyhow::{bail, Context, Result};
use camtransform::geo::GeoAnchor;
use camtransform::{CameraMatrix, Intrinsics, Pose};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsSection {
    pub focal_mm: f64,
    pub sensor_width_mm: f64,
    pub sensor_height_mm: f64,
    pub image_width_px: u32,
    pub image_height_px: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSection {
    pub height_m: f64,
    pub tilt_deg: f64,
    pub roll_deg: f64,
    pub heading_deg: f64,
    pub offset_x_m: f64,
    pub offset_y_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoAnchorSection {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub bearing_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub intrinsics: IntrinsicsSection,
    pub pose: PoseSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geo_anchor: Option<GeoAnchorSection>,
}

fn positive(key: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        bail!("{key} must be a positive finite number, got {v}");
    }
    Ok(())
}

fn finite(key: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        bail!("{key} must be finite, got {v}");
    }
    Ok(())
}

impl CameraConfig {
    /// Parses and validates a configuration document.
    pub fn parse(text: &str) -> Result<Self> {
        let config: CameraConfig = toml::from_str(text).map_err(|e| {
            // quote the offending line so type errors name their key too
            let line = e.span().map(|s| {
                let start = text[..s.start].rfind('\n').map_or(0, |i| i + 1);
                let end = text[s.start..].find('\n').map_or(text.len(), |i| s.start + i);
                (text[..start].lines().count() + 1, text[start..end].trim())
            });
            match line {
                Some((n, l)) if !l.is_empty() => anyhow::anyhow!("invalid camera config at line {n} ({l}): {}", e.message()),
                _ => anyhow::anyhow!("invalid camera config: {}", e.message()),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read camera config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_parts(intrinsics: &Intrinsics, pose: &Pose, anchor: Option<&GeoAnchor>) -> Self {
        CameraConfig {
            intrinsics: IntrinsicsSection {
                focal_mm: intrinsics.focal_length,
                sensor_width_mm: intrinsics.sensor_width,
                sensor_height_mm: intrinsics.sensor_height,
                image_width_px: intrinsics.image_width,
                image_height_px: intrinsics.image_height,
            },
            pose: PoseSection {
                height_m: pose.height(),
                tilt_deg: pose.tilt(),
                roll_deg: pose.roll(),
                heading_deg: pose.heading(),
                offset_x_m: pose.offset_x(),
                offset_y_m: pose.offset_y(),
            },
            geo_anchor: anchor.map(|a| GeoAnchorSection {
                lat_deg: a.latitude(),
                lon_deg: a.longitude(),
                bearing_deg: a.bearing(),
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let i = &self.intrinsics;
        positive("intrinsics.focal_mm", i.focal_mm)?;
        positive("intrinsics.sensor_width_mm", i.sensor_width_mm)?;
        positive("intrinsics.sensor_height_mm", i.sensor_height_mm)?;
        if i.image_width_px == 0 {
            bail!("intrinsics.image_width_px must be at least 1");
        }
        if i.image_height_px == 0 {
            bail!("intrinsics.image_height_px must be at least 1");
        }
        let p = &self.pose;
        finite("pose.height_m", p.height_m)?;
        finite("pose.tilt_deg", p.tilt_deg)?;
        finite("pose.roll_deg", p.roll_deg)?;
        finite("pose.heading_deg", p.heading_deg)?;
        finite("pose.offset_x_m", p.offset_x_m)?;
        finite("pose.offset_y_m", p.offset_y_m)?;
        if let Some(g) = &self.geo_anchor {
            finite("geo_anchor.lat_deg", g.lat_deg)?;
            finite("geo_anchor.lon_deg", g.lon_deg)?;
            finite("geo_anchor.bearing_deg", g.bearing_deg)?;
            if g.lat_deg.abs() >= 89.9 {
                bail!("geo_anchor.lat_deg must lie within ±89.9°, got {}", g.lat_deg);
            }
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> Result<Intrinsics> {
        let i = &self.intrinsics;
        Ok(Intrinsics::new(
            i.focal_mm,
            i.sensor_width_mm,
            i.sensor_height_mm,
            i.image_width_px,
            i.image_height_px,
        )?)
    }

    pub fn pose(&self) -> Pose {
        let p = &self.pose;
        Pose::new(p.height_m, p.tilt_deg, p.roll_deg, p.heading_deg, p.offset_x_m, p.offset_y_m)
    }

    pub fn anchor(&self) -> Result<Option<GeoAnchor>> {
        self.geo_anchor
            .as_ref()
            .map(|g| GeoAnchor::new(g.lat_deg, g.lon_deg, g.bearing_deg).context("invalid geo_anchor"))
            .transpose()
    }

    pub fn camera(&self) -> Result<CameraMatrix> {
        Ok(CameraMatrix::new(&self.intrinsics()?, &self.pose())?)
    }
}
