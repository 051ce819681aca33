use std::f64::consts::{FRAC_PI_2, PI};

use super::ImageChip;
use crate::error::{Error, Result};

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Bilinear sample where reads outside the raster return 0.
fn sample_zero(img: &ImageChip, sx: f64, sy: f64, c: usize) -> f64 {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let x0 = sx.floor();
    let y0 = sy.floor();
    let (fx, fy) = (sx - x0, sy - y0);
    let (x0, y0) = (x0 as isize, y0 as isize);
    let read = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w || y >= h {
            0.0
        } else {
            img.get(x as usize, y as usize, c)
        }
    };
    let top = lerp(read(x0, y0), read(x0 + 1, y0), fx);
    let bottom = lerp(read(x0, y0 + 1), read(x0 + 1, y0 + 1), fx);
    lerp(top, bottom, fy)
}

/// Bilinear sample with coordinates clamped to the raster.
pub(crate) fn sample_clamped(img: &ImageChip, sx: f64, sy: f64, c: usize) -> f64 {
    let sx = sx.clamp(0.0, (img.width() - 1) as f64);
    let sy = sy.clamp(0.0, (img.height() - 1) as f64);
    let x0 = sx.floor() as usize;
    let y0 = sy.floor() as usize;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
    let top = lerp(img.get(x0, y0, c), img.get(x1, y0, c), fx);
    let bottom = lerp(img.get(x0, y1, c), img.get(x1, y1, c), fx);
    lerp(top, bottom, fy)
}

/// Rotates about the image center by `angle` radians (x right, y down).
/// A structure at orientation `t` ends up at orientation `t + angle`.
pub fn rotate_bilinear(img: &ImageChip, angle: f64) -> ImageChip {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let (sin, cos) = angle.sin_cos();
    let mut data = Vec::with_capacity(w * h * ch);
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let sx = cos * dx + sin * dy + cx;
            let sy = -sin * dx + cos * dy + cy;
            for c in 0..ch {
                data.push(sample_zero(img, sx, sy, c).clamp(0.0, 1.0));
            }
        }
    }
    ImageChip::from_raw(w, h, ch, data)
}

/// Align-corners bilinear resize with edge clamping.
pub fn resize_bilinear(img: &ImageChip, width: usize, height: usize) -> Result<ImageChip> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("resize target dimensions must be positive"));
    }
    if width == img.width() && height == img.height() {
        return Ok(img.clone());
    }
    let scale = |dst: usize, src: usize| {
        if dst > 1 {
            (src as f64 - 1.0) / (dst as f64 - 1.0)
        } else {
            0.0
        }
    };
    let offset = |dst: usize, src: usize| {
        if dst > 1 {
            0.0
        } else {
            (src as f64 - 1.0) / 2.0
        }
    };
    let (sxs, sys) = (scale(width, img.width()), scale(height, img.height()));
    let (sxo, syo) = (offset(width, img.width()), offset(height, img.height()));
    let ch = img.channels();
    let mut data = Vec::with_capacity(width * height * ch);
    for y in 0..height {
        let sy = y as f64 * sys + syo;
        for x in 0..width {
            let sx = x as f64 * sxs + sxo;
            for c in 0..ch {
                data.push(sample_clamped(img, sx, sy, c).clamp(0.0, 1.0));
            }
        }
    }
    Ok(ImageChip::from_raw(width, height, ch, data))
}

pub fn crop(img: &ImageChip, x: usize, y: usize, width: usize, height: usize) -> Result<ImageChip> {
    if width == 0 || height == 0 || x + width > img.width() || y + height > img.height() {
        return Err(Error::invalid(format!(
            "crop rectangle ({x}, {y}, {width}x{height}) outside {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let ch = img.channels();
    let mut data = Vec::with_capacity(width * height * ch);
    for row in y..y + height {
        let start = (row * img.width() + x) * ch;
        data.extend_from_slice(&img.data()[start..start + width * ch]);
    }
    Ok(ImageChip::from_raw(width, height, ch, data))
}

/// Writes `patch` into a copy of `img` with its top-left corner at `(x, y)`.
pub fn paste(img: &ImageChip, patch: &ImageChip, x: usize, y: usize) -> Result<ImageChip> {
    if patch.channels() != img.channels()
        || x + patch.width() > img.width()
        || y + patch.height() > img.height()
    {
        return Err(Error::invalid("patch does not fit inside the image"));
    }
    let ch = img.channels();
    let mut data = img.data().to_vec();
    for row in 0..patch.height() {
        let dst = ((y + row) * img.width() + x) * ch;
        let src = row * patch.width() * ch;
        data[dst..dst + patch.width() * ch]
            .copy_from_slice(&patch.data()[src..src + patch.width() * ch]);
    }
    Ok(ImageChip::from_raw(img.width(), img.height(), ch, data))
}

/// Principal-axis angle from intensity-weighted second central moments,
/// in `(-pi/2, pi/2]`.
pub fn estimate_orientation(img: &ImageChip) -> Result<f64> {
    img.require_gray("orientation estimation")?;
    let data = img.data();
    let first = data[0];
    if data.iter().all(|&v| v == first) {
        return Err(Error::DegenerateOrientation);
    }
    let w = img.width();
    let mut mass = 0.0;
    let (mut sx, mut sy) = (0.0, 0.0);
    for (i, &v) in data.iter().enumerate() {
        mass += v;
        sx += v * (i % w) as f64;
        sy += v * (i / w) as f64;
    }
    let (mx, my) = (sx / mass, sy / mass);
    let (mut m20, mut m02, mut m11) = (0.0, 0.0, 0.0);
    for (i, &v) in data.iter().enumerate() {
        let dx = (i % w) as f64 - mx;
        let dy = (i / w) as f64 - my;
        m20 += v * dx * dx;
        m02 += v * dy * dy;
        m11 += v * dx * dy;
    }
    if m11 == 0.0 && m20 == m02 {
        return Err(Error::DegenerateOrientation);
    }
    let mut theta = 0.5 * (2.0 * m11).atan2(m20 - m02);
    if theta <= -FRAC_PI_2 {
        theta += PI;
    }
    Ok(theta)
}

/// Rotates the chip so its principal axis is horizontal, then resizes.
/// Orientation is measured on the channel mean for RGB chips.
pub fn align_chip(img: &ImageChip, width: usize, height: usize) -> Result<ImageChip> {
    let luma = if img.channels() == 3 {
        super::to_grayscale(img, [1.0 / 3.0, 1.0 / 3.0, 1.0 - 2.0 / 3.0])?
    } else {
        img.clone()
    };
    let rotated = match estimate_orientation(&luma) {
        Ok(theta) => rotate_bilinear(img, -theta),
        Err(Error::DegenerateOrientation) => img.clone(),
        Err(e) => return Err(e),
    };
    resize_bilinear(&rotated, width, height)
}
