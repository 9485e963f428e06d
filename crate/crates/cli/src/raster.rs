//! PPM/PGM reading and writing.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use camtransform::topview::Raster;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};

/// Reads a plain or binary PGM/PPM file. Grey images keep one channel, all
/// others are converted to 8-bit RGB.
pub fn read_pnm(path: &Path) -> Result<Raster> {
    let reader = ImageReader::open(path).with_context(|| format!("cannot open raster {}", path.display()))?;
    let reader = reader.with_guessed_format()?;
    if reader.format() != Some(ImageFormat::Pnm) {
        bail!("{}: only PPM/PGM rasters are supported", path.display());
    }
    let image = reader.decode().with_context(|| format!("cannot decode {}", path.display()))?;
    let (w, h) = (image.width(), image.height());
    let raster = match image {
        DynamicImage::ImageLuma8(g) => Raster::new(w, h, 1, g.into_raw())?,
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => {
            Raster::new(w, h, 1, image.to_luma8().into_raw())?
        }
        other => Raster::new(w, h, 3, other.to_rgb8().into_raw())?,
    };
    Ok(raster)
}

/// Writes a binary PGM (one channel) or PPM (three channels).
pub fn write_pnm(path: &Path, raster: &Raster) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let (subtype, color) = match raster.channels() {
        1 => (PnmSubtype::Graymap(SampleEncoding::Binary), ExtendedColorType::L8),
        _ => (PnmSubtype::Pixmap(SampleEncoding::Binary), ExtendedColorType::Rgb8),
    };
    PnmEncoder::new(BufWriter::new(file))
        .with_subtype(subtype)
        .write_image(raster.data(), raster.width(), raster.height(), color)
        .with_context(|| format!("cannot write {}", path.display()))
}
