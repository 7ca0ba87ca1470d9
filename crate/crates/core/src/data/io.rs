use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};

use super::ImageGrid;
use crate::error::{Error, Result};

/// Reads a PNG or PGM/PPM file, 8 or 16 bits per sample, mapping codes to
/// `[0, 1]` by dividing by the largest code. Alpha channels are dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let reader = ImageReader::open(path)?.with_guessed_format()?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        other => return Err(Error::Image(format!("{}: unsupported format {other:?}", path.display()))),
    }
    let img = reader.decode().map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, samples): (usize, Vec<f64>) = match img {
        DynamicImage::ImageLuma8(b) => (1, scale8(b.as_raw())),
        DynamicImage::ImageLumaA8(_) => (1, scale8(img.to_luma8().as_raw())),
        DynamicImage::ImageRgb8(b) => (3, scale8(b.as_raw())),
        DynamicImage::ImageRgba8(_) => (3, scale8(img.to_rgb8().as_raw())),
        DynamicImage::ImageLuma16(b) => (1, scale16(b.as_raw())),
        DynamicImage::ImageLumaA16(_) => (1, scale16(img.to_luma16().as_raw())),
        DynamicImage::ImageRgb16(b) => (3, scale16(b.as_raw())),
        DynamicImage::ImageRgba16(_) => (3, scale16(img.to_rgb16().as_raw())),
        other => return Err(Error::Image(format!("{}: unsupported pixel type {:?}", path.display(), other.color()))),
    };
    ImageGrid::new(w, h, channels, samples)
}

fn scale8(raw: &[u8]) -> Vec<f64> {
    raw.iter().map(|&v| v as f64 / 255.0).collect()
}

fn scale16(raw: &[u16]) -> Vec<f64> {
    raw.iter().map(|&v| v as f64 / 65535.0).collect()
}

/// Writes an 8-bit image. The format follows the extension: `.png`, or
/// binary `.pgm` / `.ppm` / `.pnm`.
pub fn save_image(grid: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let codes: Vec<u8> = grid.samples().iter().map(|v| (v * 255.0).round() as u8).collect();
    let color = if grid.channels() == 1 { ExtendedColorType::L8 } else { ExtendedColorType::Rgb8 };
    let (w, h) = (grid.width() as u32, grid.height() as u32);
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let encode_err = |e: image::ImageError| Error::Image(format!("{}: {e}", path.display()));
    match ext.as_str() {
        "png" => {
            let out = BufWriter::new(File::create(path)?);
            image::codecs::png::PngEncoder::new(out)
                .write_image(&codes, w, h, color)
                .map_err(encode_err)
        }
        "pgm" | "ppm" | "pnm" => {
            let subtype = if grid.channels() == 1 {
                PnmSubtype::Graymap(SampleEncoding::Binary)
            } else {
                PnmSubtype::Pixmap(SampleEncoding::Binary)
            };
            let out = BufWriter::new(File::create(path)?);
            PnmEncoder::new(out)
                .with_subtype(subtype)
                .write_image(&codes, w, h, color)
                .map_err(encode_err)
        }
        _ => Err(Error::Image(format!("{}: unsupported output extension", path.display()))),
    }
}
