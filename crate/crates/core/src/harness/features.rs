//! Per-chip descriptors as the harness consumes them.

use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::method::{FeatureKind, MethodSpec, Reduction};
use crate::error::{Error, Result};
use crate::features::hog::{hog_descriptor, HogParams};
use crate::features::lbp::{hmlbp_descriptor, HmlbpParams};
use crate::image::{resize_bilinear, to_grayscale, ImageChip, DEFAULT_LUMA};

/// Data-independent stage of a method: everything computed from one chip
/// alone. MPCA is fitted later, so its stage is just the resized pixels.
#[derive(Debug, Serialize)]
#[serde(tag = "stage", rename_all = "lowercase")]
pub enum Extractor {
    Hog {
        params: HogParams,
        reduction: Option<Reduction>,
        #[serde(skip)]
        projection: OnceLock<(usize, Vec<f64>)>,
    },
    Hmlbp {
        params: HmlbpParams,
    },
    Pixels {
        side: usize,
    },
}

impl Extractor {
    pub fn for_method(method: &MethodSpec) -> Self {
        match method.feature {
            FeatureKind::Hog => Extractor::Hog {
                params: method.hog,
                reduction: method.reduction,
                projection: OnceLock::new(),
            },
            FeatureKind::Hmlbp => Extractor::Hmlbp {
                params: method.hmlbp.clone(),
            },
            FeatureKind::Mpca => Extractor::Pixels {
                side: method.mpca_side,
            },
        }
    }

    /// Canonical description used as the cache key.
    pub fn key(&self) -> String {
        serde_json::to_string(self).expect("extractor parameters serialize")
    }

    pub fn extract(&self, chip: &ImageChip) -> Result<Vec<f64>> {
        let gray;
        let chip = if chip.channels() == 1 {
            chip
        } else {
            gray = to_grayscale(chip, DEFAULT_LUMA)?;
            &gray
        };
        match self {
            Extractor::Hog {
                params,
                reduction,
                projection,
            } => {
                let hog = hog_descriptor(chip, params)?.values;
                match reduction {
                    None => Ok(hog),
                    Some(r) => {
                        let (input, matrix) = projection
                            .get_or_init(|| (hog.len(), gaussian_projection(r, hog.len())));
                        if *input != hog.len() {
                            return Err(Error::invalid(format!(
                                "descriptor length {} differs from the projection input {input}",
                                hog.len()
                            )));
                        }
                        Ok(matrix
                            .chunks_exact(*input)
                            .map(|row| crate::linalg::dot(row, &hog))
                            .collect())
                    }
                }
            }
            Extractor::Hmlbp { params } => Ok(hmlbp_descriptor(chip, params)?.values),
            Extractor::Pixels { side } => {
                if chip.width() == *side && chip.height() == *side {
                    Ok(chip.data().to_vec())
                } else {
                    Ok(resize_bilinear(chip, *side, *side)?.into_data())
                }
            }
        }
    }
}

/// Row-major `dim x input` matrix with N(0, 1/dim) entries.
fn gaussian_projection(r: &Reduction, input: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    let normal = Normal::new(0.0, 1.0 / (r.dim as f64).sqrt()).expect("positive deviation");
    (0..r.dim * input)
        .map(|_| normal.sample(&mut rng))
        .collect()
}
