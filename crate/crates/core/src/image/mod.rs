//! Raster chips, geometric normalization and the pseudo-panchromatic pipeline.
//!
//! Intensities are normalized reals in `[0, 1]`, stored row-major with
//! interleaved channels. Pixel centers sit at integer coordinates.

mod geometry;
mod histogram;
pub mod io;
mod panchro;

pub(crate) use geometry::sample_clamped;
pub use geometry::{
    align_chip, crop, estimate_orientation, paste, resize_bilinear, rotate_bilinear,
};
pub use histogram::{
    compute_histogram, histogram_specification, quantize, Histogram, DEFAULT_BINS,
};
pub use io::{load_png, quantize_u8, save_png};
pub use panchro::{panchromatic_simulate, to_grayscale, PanchroParams, DEFAULT_LUMA};

use crate::error::{Error, Result};

/// A single- or three-channel raster of intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageChip {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageChip {
    /// Builds a chip, validating dimensions and the intensity range.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds a chip, clamping every value into `[0, 1]` (NaN maps to 0).
    pub fn from_clamped(
        width: usize,
        height: usize,
        channels: usize,
        mut data: Vec<f64>,
    ) -> Result<Self> {
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(width, height, channels, data)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            vec![value; width * height * channels],
        )
    }

    /// Single-channel chip from a function of pixel coordinates; output is clamped.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_clamped(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Copies one channel out as a single-channel chip.
    pub fn channel(&self, c: usize) -> Result<ImageChip> {
        if c >= self.channels {
            return Err(Error::invalid(format!(
                "channel {c} out of range for {}-channel image",
                self.channels
            )));
        }
        let data = self
            .data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect();
        Ok(ImageChip {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        })
    }

    /// Interleaves single-channel planes of identical size.
    pub fn from_planes(planes: &[ImageChip]) -> Result<ImageChip> {
        let first = planes.first().ok_or_else(|| Error::invalid("no planes"))?;
        if planes
            .iter()
            .any(|p| p.channels != 1 || p.width != first.width || p.height != first.height)
        {
            return Err(Error::invalid(
                "planes must be single-channel and equally sized",
            ));
        }
        let n = first.pixel_count();
        let mut data = Vec::with_capacity(n * planes.len());
        for i in 0..n {
            data.extend(planes.iter().map(|p| p.data[i]));
        }
        ImageChip::new(first.width, first.height, planes.len(), data)
    }

    /// Applies a per-value map, clamping the result.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageChip {
        let data = self
            .data
            .iter()
            .map(|&v| {
                let m = f(v);
                if m.is_nan() {
                    0.0
                } else {
                    m.clamp(0.0, 1.0)
                }
            })
            .collect();
        ImageChip { data, ..*self }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Ensures the chip is single-channel, naming `op` in the error.
    pub(crate) fn require_gray(&self, op: &str) -> Result<()> {
        if self.channels != 1 {
            return Err(Error::invalid(format!(
                "{op} requires a single-channel image, got {} channels",
                self.channels
            )));
        }
        Ok(())
    }
}

impl ImageChip {
    // Crate-internal constructor for values already known to be in range.
    pub(crate) fn from_raw(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> ImageChip {
        debug_assert_eq!(data.len(), width * height * channels);
        ImageChip {
            width,
            height,
            channels,
            data,
        }
    }
}
