//! PNG and binary PGM/PPM reading and writing.
//!
//! Decoded samples are scaled to `[0, 1]` (8-bit by 255, 16-bit by 65535).
//! Grayscale files give 1-channel images, everything else 3 channels; alpha
//! is dropped. On export values are clipped to `[0, 1]` and rounded to 8 bits.

use std::io::Cursor;
use std::path::Path;

use ::image::codecs::png::PngEncoder;
use ::image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use ::image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader, Limits};

use crate::error::{Error, Result};
use crate::image::Image;

/// Upper bound on decoder allocations; inputs are small test images.
const MAX_DECODE_BYTES: u64 = 1 << 30;

/// Output encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Png,
    /// Binary PGM (1 channel) or PPM (3 channels), chosen by channel count.
    Pnm,
}

impl FileFormat {
    /// From the file extension: `png`, or `pgm` / `ppm` / `pnm`.
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "png" => Ok(Self::Png),
            "pgm" | "ppm" | "pnm" => Ok(Self::Pnm),
            _ => Err(Error::InvalidParams(format!(
                "unsupported output extension '{ext}' (png, pgm, ppm)"
            ))),
        }
    }
}

/// Decodes a PNG, PGM or PPM file held in memory.
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    let mut reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| Error::Decode(e.to_string()))?;
    match reader.format() {
        Some(::image::ImageFormat::Png | ::image::ImageFormat::Pnm) => {}
        other => return Err(Error::Decode(format!("unsupported format {other:?}"))),
    }
    let mut limits = Limits::default();
    limits.max_alloc = Some(MAX_DECODE_BYTES);
    reader.limits(limits);
    let dynamic = reader.decode().map_err(|e| Error::Decode(e.to_string()))?;
    from_dynamic(&dynamic)
}

fn from_dynamic(img: &DynamicImage) -> Result<Image> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let color = img.color();
    let deep = color.bits_per_pixel() / color.channel_count() as u16 > 8;
    let (channels, data): (usize, Vec<f64>) = match (color.has_color(), deep) {
        (false, false) => (1, scale8(img.to_luma8().as_raw())),
        (false, true) => (1, scale16(img.to_luma16().as_raw())),
        (true, false) => (3, scale8(img.to_rgb8().as_raw())),
        (true, true) => (3, scale16(img.to_rgb16().as_raw())),
    };
    Image::new(w, h, channels, data)
}

fn scale8(raw: &[u8]) -> Vec<f64> {
    raw.iter().map(|&v| v as f64 / 255.0).collect()
}

fn scale16(raw: &[u16]) -> Vec<f64> {
    raw.iter().map(|&v| v as f64 / 65535.0).collect()
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    decode_image(&std::fs::read(path)?)
}

/// Clips to `[0, 1]` and rounds to 8 bits.
pub fn quantize(img: &Image) -> Vec<u8> {
    img.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
}

pub fn encode_image(img: &Image, format: FileFormat) -> Result<Vec<u8>> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let gray = img.channels() == 1;
    let color = if gray { ExtendedColorType::L8 } else { ExtendedColorType::Rgb8 };
    let raw = quantize(img);
    let mut buf = Vec::new();
    match format {
        FileFormat::Png => PngEncoder::new(&mut buf).write_image(&raw, w, h, color)?,
        FileFormat::Pnm => {
            let subtype = if gray {
                PnmSubtype::Graymap(SampleEncoding::Binary)
            } else {
                PnmSubtype::Pixmap(SampleEncoding::Binary)
            };
            PnmEncoder::new(&mut buf).with_subtype(subtype).write_image(&raw, w, h, color)?
        }
    }
    Ok(buf)
}

/// Encodes in memory, then writes, so a failed encode leaves no file behind.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_image(img, FileFormat::from_path(path)?)?;
    std::fs::write(path, bytes)?;
    Ok(())
}
