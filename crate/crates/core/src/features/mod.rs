//! Feature extractors: HOG, hierarchical multi-scale LBP and multilinear PCA.

pub mod hog;
pub mod lbp;
pub mod mpca;

use serde::{Deserialize, Serialize};

/// Which extractor produced a descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorKind {
    Hog,
    Hmlbp,
    Mpca,
    /// Output of a dimensionality reduction applied to another descriptor.
    Projected,
    /// Caller-supplied values.
    Raw,
}

impl std::fmt::Display for ExtractorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ExtractorKind::Hog => "hog",
            ExtractorKind::Hmlbp => "hmlbp",
            ExtractorKind::Mpca => "mpca",
            ExtractorKind::Projected => "projected",
            ExtractorKind::Raw => "raw",
        };
        f.write_str(s)
    }
}

/// Flat real-valued descriptor tagged with the extractor that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub extractor: ExtractorKind,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(extractor: ExtractorKind, values: Vec<f64>) -> Self {
        Self { extractor, values }
    }

    pub fn raw(values: Vec<f64>) -> Self {
        Self::new(ExtractorKind::Raw, values)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}
