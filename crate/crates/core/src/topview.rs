//! Ground-plane top view: a grid of ground cells, each mapped to the source
//! pixel that images it, and nearest-neighbour resampling of a raster.

use serde::Serialize;

use crate::camera::{CameraMatrix, ImagePoint, WorldPoint};
use crate::error::{Error, Result};

/// Axis-aligned ground rectangle in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroundRect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl GroundRect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let rect = Self {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !finite || !(x_max > x_min) || !(y_max > y_min) {
            return Err(Error::InvalidParameter(format!(
                "ground extent must have positive area, got {rect:?}"
            )));
        }
        Ok(rect)
    }
}

/// Row-major grid of source pixels. Row 0 is the far edge (`y_max`), so the
/// grid reads like a map with the +y axis pointing up.
#[derive(Debug, Clone, PartialEq)]
pub struct TopviewGrid {
    extent: GroundRect,
    resolution: f64,
    rows: usize,
    cols: usize,
    source_width: u32,
    source_height: u32,
    cells: Vec<Option<ImagePoint>>,
}

impl TopviewGrid {
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn extent(&self) -> &GroundRect {
        &self.extent
    }
    pub fn resolution(&self) -> f64 {
        self.resolution
    }
    pub fn source_size(&self) -> (u32, u32) {
        (self.source_width, self.source_height)
    }

    /// Source pixel for a cell; `None` is the sentinel for cells behind the
    /// camera or outside the image.
    pub fn cell(&self, row: usize, col: usize) -> Option<ImagePoint> {
        self.cells[row * self.cols + col]
    }

    pub fn cell_center(&self, row: usize, col: usize) -> WorldPoint {
        WorldPoint::new(
            self.extent.x_min + (col as f64 + 0.5) * self.resolution,
            self.extent.y_max - (row as f64 + 0.5) * self.resolution,
            0.0,
        )
    }

    /// Cell containing a ground position, if inside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let col = ((x - self.extent.x_min) / self.resolution).floor();
        let row = ((self.extent.y_max - y) / self.resolution).floor();
        (col >= 0.0 && row >= 0.0 && (col as usize) < self.cols && (row as usize) < self.rows)
            .then_some((row as usize, col as usize))
    }
}

pub fn topview_map(cam: &CameraMatrix, extent: GroundRect, resolution: f64) -> Result<TopviewGrid> {
    let extent = GroundRect::new(extent.x_min, extent.x_max, extent.y_min, extent.y_max)?;
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let cols = ((extent.x_max - extent.x_min) / resolution).ceil() as usize;
    let rows = ((extent.y_max - extent.y_min) / resolution).ceil() as usize;
    let intr = cam.intrinsics();
    let mut grid = TopviewGrid {
        extent,
        resolution,
        rows,
        cols,
        source_width: intr.image_width,
        source_height: intr.image_height,
        cells: Vec::with_capacity(rows * cols),
    };
    for row in 0..rows {
        for col in 0..cols {
            let center = grid.cell_center(row, col);
            let cell = cam
                .project_full(&center)
                .ok()
                .filter(|p| p.in_front() && intr.contains(&p.point))
                .map(|p| p.point);
            grid.cells.push(cell);
        }
    }
    Ok(grid)
}

/// 8-bit interleaved raster with 1 (grey) or 3 (RGB) channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl Raster {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParameter(format!(
                "raster must have 1 or 3 channels, got {channels}"
            )));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "raster data has {} bytes, expected {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            vec![value; width as usize * height as usize * channels as usize],
        )
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn channels(&self) -> u8 {
        self.channels
    }
    pub fn data(&self) -> &[u8] {
        &self.data
    }
    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.data[i..i + c]
    }

    pub fn pixel_mut(&mut self, x: u32, y: u32) -> &mut [u8] {
        let c = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * c;
        &mut self.data[i..i + c]
    }
}

/// Nearest-neighbour warp of `image` into the grid; sentinel cells are 0.
pub fn resample_topview(image: &Raster, grid: &TopviewGrid) -> Result<Raster> {
    let (w, h) = grid.source_size();
    if image.width != w || image.height != h {
        return Err(Error::InvalidParameter(format!(
            "raster is {}x{}, camera image is {w}x{h}",
            image.width, image.height
        )));
    }
    let mut out = Raster::filled(grid.cols as u32, grid.rows as u32, image.channels, 0)?;
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            if let Some(p) = grid.cell(row, col) {
                let x = (p.x.floor() as u32).min(w - 1);
                let y = (p.y.floor() as u32).min(h - 1);
                out.pixel_mut(col as u32, row as u32)
                    .copy_from_slice(image.pixel(x, y));
            }
        }
    }
    Ok(out)
}
