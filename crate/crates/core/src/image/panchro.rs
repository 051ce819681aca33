use serde::{Deserialize, Serialize};

use super::ImageChip;
use crate::error::{Error, Result};

/// ITU-R BT.601 luma weights.
pub const DEFAULT_LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Constants of the RGB to pseudo-panchromatic conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanchroParams {
    /// Multiplier applied to the blue channel, in `[0, 1]`.
    pub blue_gain: f64,
    /// Power-law exponent for the red channel.
    pub red_gamma: f64,
    /// Power-law exponent for the green channel.
    pub green_gamma: f64,
    pub luma_weights: [f64; 3],
}

impl Default for PanchroParams {
    fn default() -> Self {
        Self {
            blue_gain: 0.6,
            red_gamma: 0.9,
            green_gamma: 1.1,
            luma_weights: DEFAULT_LUMA,
        }
    }
}

impl PanchroParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.blue_gain) {
            return Err(Error::invalid(format!(
                "blue_gain {} outside [0, 1]",
                self.blue_gain
            )));
        }
        if !(self.red_gamma > 0.0 && self.red_gamma.is_finite())
            || !(self.green_gamma > 0.0 && self.green_gamma.is_finite())
        {
            return Err(Error::invalid("gammas must be positive and finite"));
        }
        validate_weights(&self.luma_weights)
    }
}

fn validate_weights(w: &[f64; 3]) -> Result<()> {
    if w.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::invalid("luma weights must be non-negative"));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "luma weights sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

pub fn to_grayscale(img: &ImageChip, weights: [f64; 3]) -> Result<ImageChip> {
    if img.channels() != 3 {
        return Err(Error::invalid(format!(
            "grayscale conversion needs 3 channels, got {}",
            img.channels()
        )));
    }
    validate_weights(&weights)?;
    let data = img
        .data()
        .chunks_exact(3)
        .map(|p| (weights[0] * p[0] + weights[1] * p[1] + weights[2] * p[2]).clamp(0.0, 1.0))
        .collect();
    Ok(ImageChip::from_raw(img.width(), img.height(), 1, data))
}

/// Blue attenuation, red/green power-law stretch, weighted sum, clamp.
pub fn panchromatic_simulate(img: &ImageChip, params: &PanchroParams) -> Result<ImageChip> {
    if img.channels() != 3 {
        return Err(Error::invalid(format!(
            "panchromatic simulation needs 3 channels, got {}",
            img.channels()
        )));
    }
    params.validate()?;
    let w = params.luma_weights;
    let data = img
        .data()
        .chunks_exact(3)
        .map(|p| {
            let b = p[2] * params.blue_gain;
            let r = p[0].powf(params.red_gamma);
            let g = p[1].powf(params.green_gamma);
            (w[0] * r + w[1] * g + w[2] * b).clamp(0.0, 1.0)
        })
        .collect();
    Ok(ImageChip::from_raw(img.width(), img.height(), 1, data))
}
