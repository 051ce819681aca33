//! 8-bit PNG reading and writing.

use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};

use super::ImageChip;
use crate::error::{Error, Result};

/// Nearest 8-bit level of an intensity.
#[inline]
pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Rounds every intensity to the nearest 8-bit level, as a PNG round trip would.
pub fn quantize_u8(img: &ImageChip) -> ImageChip {
    img.map(|v| to_u8(v) as f64 / 255.0)
}

pub fn encode_bytes(img: &ImageChip) -> Vec<u8> {
    img.data().iter().map(|&v| to_u8(v)).collect()
}

pub fn save_png(img: &ImageChip, path: &Path) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let bytes = encode_bytes(img);
    let result = match img.channels() {
        1 => GrayImage::from_raw(w, h, bytes).map(|b| b.save(path)),
        _ => RgbImage::from_raw(w, h, bytes).map(|b| b.save(path)),
    };
    match result {
        Some(Ok(())) => Ok(()),
        Some(Err(source)) => Err(Error::Image {
            path: path.to_path_buf(),
            source,
        }),
        None => Err(Error::invalid("buffer size mismatch while encoding PNG")),
    }
}

/// Loads an 8-bit PNG as a 1- or 3-channel chip (alpha is dropped, other
/// layouts are converted to RGB).
pub fn load_png(path: &Path) -> Result<ImageChip> {
    let decoded = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (channels, w, h, raw) = match decoded {
        DynamicImage::ImageLuma8(g) => (1, g.width(), g.height(), g.into_raw()),
        DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_) => {
            let g = decoded.to_luma8();
            (1, g.width(), g.height(), g.into_raw())
        }
        other => {
            let rgb = other.to_rgb8();
            (3, rgb.width(), rgb.height(), rgb.into_raw())
        }
    };
    let data = raw.into_iter().map(|b| b as f64 / 255.0).collect();
    ImageChip::new(w as usize, h as usize, channels, data)
}
