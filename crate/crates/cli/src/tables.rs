//! Delimited input and output files.
//!
//! Input files must start with a header row; columns are matched by name, so
//! their order is free and extra columns are ignored.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use camtransform::fit::Correspondence;
use camtransform::geo::GeoAnchor;
use camtransform::scene::ObjectAnnotation;
use camtransform::{ImagePoint, WorldPoint};
use csv::StringRecord;

/// A parsed input table with named-column access.
#[derive(Debug, Clone)]
pub struct Table {
    name: String,
    headers: StringRecord,
    rows: Vec<(u64, StringRecord)>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn from_reader<R: std::io::Read>(reader: R, name: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().with_context(|| format!("{name}: cannot read header row"))?.clone();
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            bail!("{name}: header row is mandatory but the file is empty");
        }
        if headers.iter().any(|h| h.parse::<f64>().is_ok()) {
            bail!("{name}: header row is mandatory, found numeric first row");
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.with_context(|| format!("{name}: malformed record"))?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((line, record));
        }
        Ok(Table {
            name: name.to_string(),
            headers,
            rows,
        })
    }

    pub fn has(&self, column: &str) -> bool {
        self.headers.iter().any(|h| h == column)
    }

    pub fn column(&self, column: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| anyhow!("{}: missing column '{column}'", self.name))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn text(&self, row: usize, col: usize) -> &str {
        self.rows[row].1.get(col).unwrap_or("")
    }

    pub fn number(&self, row: usize, col: usize) -> Result<f64> {
        let (line, record) = &self.rows[row];
        let raw = record.get(col).unwrap_or("");
        let value: f64 = raw
            .parse()
            .map_err(|_| anyhow!("{}: line {line}: '{}' is not a number ({raw:?})", self.name, &self.headers[col]))?;
        if !value.is_finite() {
            bail!("{}: line {line}: '{}' must be finite, got {raw}", self.name, &self.headers[col]);
        }
        Ok(value)
    }

    /// Reads the named numeric columns of every row.
    pub fn numbers<const N: usize>(&self, columns: [&str; N]) -> Result<Vec<[f64; N]>> {
        let idx = columns.map(|c| self.column(c));
        let mut cols = [0; N];
        for (slot, i) in cols.iter_mut().zip(idx) {
            *slot = i?;
        }
        (0..self.len())
            .map(|r| {
                let mut out = [0.0; N];
                for (v, &c) in out.iter_mut().zip(&cols) {
                    *v = self.number(r, c)?;
                }
                Ok(out)
            })
            .collect()
    }

    /// Reads an id column and rejects duplicates and empty ids.
    pub fn ids(&self, column: &str) -> Result<Vec<String>> {
        let c = self.column(column)?;
        let mut seen = HashSet::new();
        (0..self.len())
            .map(|r| {
                let id = self.text(r, c).to_string();
                if id.is_empty() {
                    bail!("{}: line {}: empty {column}", self.name, self.rows[r].0);
                }
                if !seen.insert(id.clone()) {
                    bail!("{}: duplicate {column} '{id}'", self.name);
                }
                Ok(id)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedAnnotation {
    pub id: String,
    pub annotation: ObjectAnnotation,
}

pub fn read_annotations(path: &Path) -> Result<Vec<NamedAnnotation>> {
    let table = Table::read(path)?;
    let ids = table.ids("object_id")?;
    let values = table.numbers(["foot_x", "foot_y", "head_x", "head_y", "height_m"])?;
    Ok(ids
        .into_iter()
        .zip(values)
        .map(|(id, [fx, fy, hx, hy, h])| NamedAnnotation {
            id,
            annotation: ObjectAnnotation {
                foot: ImagePoint::new(fx, fy),
                head: ImagePoint::new(hx, hy),
                known_height: h,
            },
        })
        .collect())
}

pub fn read_horizon(path: &Path) -> Result<Vec<ImagePoint>> {
    let table = Table::read(path)?;
    Ok(table
        .numbers(["image_x", "image_y"])?
        .into_iter()
        .map(|[x, y]| ImagePoint::new(x, y))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedCorrespondence {
    pub id: String,
    pub correspondence: Correspondence,
}

/// Reads map correspondences. Metric `world_x, world_y` columns are used when
/// present; otherwise `lat, lon` columns are converted through `anchor`,
/// which must then be given.
pub fn read_correspondences(path: &Path, anchor: Option<&GeoAnchor>) -> Result<Vec<NamedCorrespondence>> {
    let table = Table::read(path)?;
    let ids = table.ids("id")?;
    let image = table.numbers(["image_x", "image_y"])?;
    let world: Vec<WorldPoint> = if table.has("world_x") || table.has("world_y") {
        table
            .numbers(["world_x", "world_y"])?
            .into_iter()
            .map(|[x, y]| WorldPoint::new(x, y, 0.0))
            .collect()
    } else if table.has("lat") || table.has("lon") {
        let anchor = anchor.ok_or_else(|| {
            anyhow!("{}: lat/lon correspondences need a [geo_anchor] section in the camera config", path.display())
        })?;
        table
            .numbers(["lat", "lon"])?
            .into_iter()
            .map(|[lat, lon]| anchor.gps_to_world(lat, lon))
            .collect::<camtransform::Result<_>>()
            .with_context(|| format!("{}: cannot convert lat/lon", path.display()))?
    } else {
        bail!("{}: expected world_x, world_y or lat, lon columns", path.display());
    };
    Ok(ids
        .into_iter()
        .zip(image)
        .zip(world)
        .map(|((id, [x, y]), world)| NamedCorrespondence {
            id,
            correspondence: Correspondence {
                image: ImagePoint::new(x, y),
                world,
            },
        })
        .collect())
}

pub fn read_world_points(path: &Path) -> Result<Vec<WorldPoint>> {
    Ok(Table::read(path)?
        .numbers(["x1", "x2", "x3"])?
        .into_iter()
        .map(|[x, y, z]| WorldPoint::new(x, y, z))
        .collect())
}

pub fn read_image_points(path: &Path) -> Result<Vec<ImagePoint>> {
    Ok(Table::read(path)?
        .numbers(["y1", "y2"])?
        .into_iter()
        .map(|[x, y]| ImagePoint::new(x, y))
        .collect())
}

/// CSV writer with ',' delimiter and LF line endings.
pub fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .delimiter(b',')
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Formats a value for CSV output: shortest round-trip decimal, empty for NaN,
/// no negative zero.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{:?}", v + 0.0)
    }
}
