//! Hierarchical multi-scale local binary patterns.
//!
//! Each pixel is first coded at the largest radius. Uniform codes (at most two
//! circular bit transitions) are binned at that scale and the pixel retires;
//! non-uniform pixels descend to the next smaller radius. Pixels that are
//! still non-uniform after the smallest radius land in one catch-all bin.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ExtractorKind, FeatureVector};
use crate::error::{Error, Result};
use crate::image::{sample_clamped, ImageChip};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbpScale {
    pub radius: f64,
    pub samples: usize,
}

impl LbpScale {
    pub fn new(radius: f64, samples: usize) -> Result<Self> {
        let s = Self { radius, samples };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid(format!(
                "radius {} must be positive",
                self.radius
            )));
        }
        if self.samples < 4 || self.samples > 31 {
            return Err(Error::invalid(format!(
                "samples {} outside [4, 31]",
                self.samples
            )));
        }
        Ok(())
    }

    /// Neighbor offsets `(dx, dy)`: sample `k` sits at angle `2 pi k / P`,
    /// starting on the +x axis and running counter-clockwise on screen
    /// (y grows downward, so dy is `-r sin`).
    pub fn offsets(&self) -> Vec<(f64, f64)> {
        (0..self.samples)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / self.samples as f64;
                (snap(self.radius * a.cos()), snap(-self.radius * a.sin()))
            })
            .collect()
    }

    /// Pixels closer than this to a border cannot host the sampling circle.
    pub fn margin(&self) -> usize {
        self.radius.ceil() as usize
    }
}

// Removes trig noise such as cos(pi/2) = 6e-17 so axis samples hit pixels exactly.
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmlbpParams {
    /// Ordered from largest to smallest radius.
    pub scales: Vec<LbpScale>,
    pub normalize: bool,
}

impl Default for HmlbpParams {
    fn default() -> Self {
        Self {
            scales: [3.0, 2.0, 1.0]
                .iter()
                .map(|&radius| LbpScale { radius, samples: 8 })
                .collect(),
            normalize: true,
        }
    }
}

impl HmlbpParams {
    pub fn validate(&self) -> Result<()> {
        let first = self
            .scales
            .first()
            .ok_or_else(|| Error::invalid("at least one scale required"))?;
        for s in &self.scales {
            s.validate()?;
            if s.samples != first.samples {
                return Err(Error::invalid(
                    "all scales must share the same sample count",
                ));
            }
        }
        if self.scales.windows(2).any(|w| w[1].radius >= w[0].radius) {
            return Err(Error::invalid("radii must be strictly decreasing"));
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        self.scales[0].samples
    }

    pub fn descriptor_dim(&self) -> usize {
        uniform_bin_count(self.samples()) * self.scales.len() + 1
    }
}

/// Circular 0/1 changes in the low `samples` bits of `code`.
pub fn transitions(code: u32, samples: usize) -> u32 {
    let mask = if samples >= 32 {
        u32::MAX
    } else {
        (1u32 << samples) - 1
    };
    let code = code & mask;
    let rotated = ((code >> 1) | ((code & 1) << (samples - 1))) & mask;
    (code ^ rotated).count_ones()
}

pub fn is_uniform(code: u32, samples: usize) -> bool {
    transitions(code, samples) <= 2
}

/// `P (P - 1) + 2` uniform patterns exist for `P` samples.
pub fn uniform_bin_count(samples: usize) -> usize {
    samples * (samples - 1) + 2
}

/// Maps every code to its uniform-bin index (ascending code order), or `None`.
fn uniform_table(samples: usize) -> Vec<Option<u16>> {
    let mut next = 0u16;
    (0..1u32 << samples)
        .map(|code| {
            is_uniform(code, samples).then(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

fn code_at(img: &ImageChip, x: usize, y: usize, offsets: &[(f64, f64)]) -> u32 {
    let center = img.get(x, y, 0);
    let mut code = 0u32;
    for (k, &(dx, dy)) in offsets.iter().enumerate() {
        if sample_clamped(img, x as f64 + dx, y as f64 + dy, 0) >= center {
            code |= 1 << k;
        }
    }
    code
}

fn check_circle(img: &ImageChip, x: usize, y: usize, radius: f64) -> Result<()> {
    let (xf, yf) = (x as f64, y as f64);
    let inside = xf - radius >= 0.0
        && yf - radius >= 0.0
        && xf + radius <= (img.width() - 1) as f64
        && yf + radius <= (img.height() - 1) as f64;
    if !inside {
        return Err(Error::invalid(format!(
            "sampling circle of radius {radius} at ({x}, {y}) leaves the {}x{} image",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

/// LBP code of one pixel. Bit `k` is set when neighbor `k` is at least the
/// center value; neighbors are bilinearly interpolated.
pub fn lbp_code(img: &ImageChip, x: usize, y: usize, scale: &LbpScale) -> Result<u32> {
    img.require_gray("lbp")?;
    scale.validate()?;
    check_circle(img, x, y, scale.radius)?;
    Ok(code_at(img, x, y, &scale.offsets()))
}

/// Unnormalized hierarchy outcome for one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HmlbpCounts {
    /// Concatenated per-scale uniform histograms followed by the catch-all bin.
    pub counts: Vec<u64>,
    /// Pixels retired at each scale.
    pub retired: Vec<u64>,
    /// Pixels that stayed non-uniform at every scale.
    pub catch_all: u64,
    /// Pixels evaluated (those valid at the largest radius).
    pub evaluated: u64,
}

pub fn hmlbp_counts(img: &ImageChip, params: &HmlbpParams) -> Result<HmlbpCounts> {
    img.require_gray("hmlbp")?;
    params.validate()?;
    let margin = params.scales[0].margin();
    if img.width() <= 2 * margin || img.height() <= 2 * margin {
        return Err(Error::invalid(format!(
            "{}x{} image too small for radius {}",
            img.width(),
            img.height(),
            params.scales[0].radius
        )));
    }
    let samples = params.samples();
    let table = uniform_table(samples);
    let per_scale = uniform_bin_count(samples);
    let offsets: Vec<Vec<(f64, f64)>> = params.scales.iter().map(|s| s.offsets()).collect();
    let mut counts = vec![0u64; params.descriptor_dim()];
    let mut retired = vec![0u64; params.scales.len()];
    let mut catch_all = 0u64;
    let mut evaluated = 0u64;
    for y in margin..img.height() - margin {
        for x in margin..img.width() - margin {
            evaluated += 1;
            let mut placed = false;
            for (level, offs) in offsets.iter().enumerate() {
                if let Some(bin) = table[code_at(img, x, y, offs) as usize] {
                    counts[level * per_scale + bin as usize] += 1;
                    retired[level] += 1;
                    placed = true;
                    break;
                }
            }
            if !placed {
                catch_all += 1;
                *counts.last_mut().unwrap() += 1;
            }
        }
    }
    Ok(HmlbpCounts {
        counts,
        retired,
        catch_all,
        evaluated,
    })
}

pub fn hmlbp_descriptor(img: &ImageChip, params: &HmlbpParams) -> Result<FeatureVector> {
    let counts = hmlbp_counts(img, params)?;
    let total = counts.evaluated as f64;
    let values = counts
        .counts
        .iter()
        .map(|&c| {
            if params.normalize {
                c as f64 / total
            } else {
                c as f64
            }
        })
        .collect();
    Ok(FeatureVector::new(ExtractorKind::Hmlbp, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(w: usize, h: usize, seed: u64) -> ImageChip {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageChip::new(w, h, 1, (0..w * h).map(|_| rng.gen::<f64>()).collect()).unwrap()
    }

    #[test]
    fn code_examples() {
        let s = LbpScale::new(1.0, 8).unwrap();
        let flat = ImageChip::filled(5, 5, 1, 0.37).unwrap();
        assert_eq!(lbp_code(&flat, 2, 2, &s).unwrap(), 255);

        let spot =
            ImageChip::from_fn(7, 7, |x, y| if x == 3 && y == 3 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(
            lbp_code(&spot, 3, 3, &LbpScale::new(2.0, 8).unwrap()).unwrap(),
            0
        );

        // Only the +x neighbor is brighter: bit 0.
        let right =
            ImageChip::from_fn(3, 3, |x, y| if x == 2 && y == 1 { 1.0 } else { 0.5 }).unwrap();
        let four = LbpScale::new(1.0, 4).unwrap();
        let dark = right.map(|v| if v == 0.5 { 0.25 } else { v });
        let center_high = ImageChip::from_fn(3, 3, |x, y| match (x, y) {
            (1, 1) => 0.5,
            (2, 1) => 0.9,
            _ => 0.1,
        })
        .unwrap();
        assert_eq!(lbp_code(&center_high, 1, 1, &four).unwrap(), 0b0001);
        // Bit 1 is the neighbor above (counter-clockwise on screen).
        let above = ImageChip::from_fn(3, 3, |x, y| match (x, y) {
            (1, 1) => 0.5,
            (1, 0) => 0.9,
            _ => 0.1,
        })
        .unwrap();
        assert_eq!(lbp_code(&above, 1, 1, &four).unwrap(), 0b0010);
        assert_eq!(lbp_code(&dark, 1, 1, &four).unwrap(), 0b1111);
    }

    #[test]
    fn code_rejects_circle_outside() {
        let img = ImageChip::filled(5, 5, 1, 0.0).unwrap();
        let s = LbpScale::new(1.5, 8).unwrap();
        assert!(matches!(
            lbp_code(&img, 1, 2, &s),
            Err(Error::InvalidArgument(_))
        ));
        assert!(lbp_code(&img, 2, 2, &s).is_ok());
    }

    #[test]
    fn transition_examples() {
        assert_eq!(transitions(0b0000_0000, 8), 0);
        assert_eq!(transitions(0b0000_1111, 8), 2);
        assert_eq!(transitions(0b0101_0101, 8), 8);
        assert_eq!(transitions(0b1000_0001, 8), 2);
    }

    #[test]
    fn uniform_count_by_enumeration() {
        let n = (0u32..256).filter(|&c| is_uniform(c, 8)).count();
        assert_eq!(n, 58);
        assert_eq!(n, uniform_bin_count(8));
        for p in 4..=12 {
            let n = (0u32..1 << p).filter(|&c| is_uniform(c, p)).count();
            assert_eq!(n, p * (p - 1) + 2);
        }
    }

    #[test]
    fn constant_image_fills_first_scale_all_ones_bin() {
        let params = HmlbpParams::default();
        let img = ImageChip::filled(20, 20, 1, 0.5).unwrap();
        let c = hmlbp_counts(&img, &params).unwrap();
        let all_ones_bin = 57; // 255 is the largest uniform code
        assert_eq!(c.evaluated, 14 * 14);
        assert_eq!(c.counts[all_ones_bin], c.evaluated);
        assert_eq!(c.retired, vec![c.evaluated, 0, 0]);
        assert_eq!(c.catch_all, 0);
    }

    #[test]
    fn params_validation() {
        let mut p = HmlbpParams::default();
        p.scales.swap(0, 2);
        assert!(p.validate().is_err());
        let p = HmlbpParams {
            scales: vec![
                LbpScale {
                    radius: 2.0,
                    samples: 8,
                },
                LbpScale {
                    radius: 1.0,
                    samples: 4,
                },
            ],
            normalize: true,
        };
        assert!(p.validate().is_err());
        assert!(HmlbpParams {
            scales: vec![],
            normalize: true
        }
        .validate()
        .is_err());
    }

    #[test]
    fn dimension_formula() {
        for n in 1..=4 {
            let params = HmlbpParams {
                scales: (0..n)
                    .map(|i| LbpScale {
                        radius: (n - i) as f64,
                        samples: 8,
                    })
                    .collect(),
                normalize: true,
            };
            let d = hmlbp_descriptor(&noise(24, 24, n as u64), &params).unwrap();
            assert_eq!(d.dim(), 58 * n + 1);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn normalized_sums_to_one_and_mass_conserved(seed in any::<u64>()) {
            let img = noise(20, 18, seed);
            let params = HmlbpParams::default();
            let d = hmlbp_descriptor(&img, &params).unwrap();
            prop_assert!((d.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let c = hmlbp_counts(&img, &params).unwrap();
            prop_assert_eq!(c.counts.iter().sum::<u64>(), c.evaluated);
            prop_assert_eq!(c.evaluated, (14 * 12) as u64);
            prop_assert_eq!(c.retired.iter().sum::<u64>() + c.catch_all, c.evaluated);
        }

        #[test]
        fn affine_maps_keep_codes(seed in any::<u64>(), x in 3usize..13, y in 3usize..13) {
            let img = noise(16, 16, seed);
            // Scale by a power of two and shift: exact in floating point for
            // values on the original grid, and interpolation commutes with it.
            let mapped = img.map(|v| 0.5 * v + 0.25);
            for r in [1.0, 1.5, 2.5, 3.0] {
                let s = LbpScale::new(r, 8).unwrap();
                prop_assert_eq!(lbp_code(&img, x, y, &s).unwrap(), lbp_code(&mapped, x, y, &s).unwrap());
            }
        }

        #[test]
        fn increasing_maps_keep_codes_on_grid_samples(seed in any::<u64>(), x in 3usize..13, y in 3usize..13) {
            let img = noise(16, 16, seed);
            let cubic = img.map(|v| 0.1 + 0.8 * v * v * v);
            for r in [1.0, 2.0, 3.0] {
                let s = LbpScale::new(r, 4).unwrap();
                prop_assert_eq!(lbp_code(&img, x, y, &s).unwrap(), lbp_code(&cubic, x, y, &s).unwrap());
            }
        }
    }
}
