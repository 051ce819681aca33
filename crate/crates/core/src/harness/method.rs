use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifiers::{SrcParams, SvmParams};
use crate::error::{Error, Result};
use crate::features::hog::HogParams;
use crate::features::lbp::HmlbpParams;
use crate::features::mpca::MpcaParams;

/// Largest descriptor length handed to the sparse classifier.
pub const MAX_SRC_DIM: usize = 512;
/// Projection size used for HOG+SRC by default.
pub const DEFAULT_SRC_DIM: usize = 128;
pub const DEFAULT_PROJECTION_SEED: u64 = 0x5eed_0f_7a11;
/// Chips are downsampled to this side before MPCA.
pub const DEFAULT_MPCA_SIDE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Hog,
    Hmlbp,
    Mpca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Svm,
    Src,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Hog => "HOG",
            FeatureKind::Hmlbp => "HMLBP",
            FeatureKind::Mpca => "MPCA",
        }
    }
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Svm => "SVM",
            ClassifierKind::Src => "SRC",
        }
    }
}

/// Seeded Gaussian random projection, fixed before any data is seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reduction {
    pub dim: usize,
    pub seed: u64,
}

fn default_c_grid() -> Vec<f64> {
    vec![1.0, 0.1, 10.0, 0.01]
}

fn default_true() -> bool {
    true
}

fn default_mpca_side() -> usize {
    DEFAULT_MPCA_SIDE
}

/// A feature extractor paired with a classifier, plus everything needed to
/// rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub feature: FeatureKind,
    pub classifier: ClassifierKind,
    #[serde(default)]
    pub hog: HogParams,
    #[serde(default)]
    pub hmlbp: HmlbpParams,
    #[serde(default)]
    pub mpca: MpcaParams,
    #[serde(default = "default_mpca_side")]
    pub mpca_side: usize,
    #[serde(default)]
    pub svm: SvmParams,
    /// Candidate C values in priority order; the first with the best
    /// validation accuracy wins.
    #[serde(default = "default_c_grid")]
    pub c_grid: Vec<f64>,
    #[serde(default)]
    pub src: SrcParams,
    #[serde(default)]
    pub reduction: Option<Reduction>,
    /// Subtract the training mean before sparse coding.
    #[serde(default = "default_true")]
    pub center: bool,
    /// After picking hyperparameters, refit on training plus validation.
    #[serde(default = "default_true")]
    pub refit_with_validation: bool,
}

impl MethodSpec {
    pub fn new(feature: FeatureKind, classifier: ClassifierKind) -> Self {
        let reduction = (feature == FeatureKind::Hog && classifier == ClassifierKind::Src)
            .then_some(Reduction {
                dim: DEFAULT_SRC_DIM,
                seed: DEFAULT_PROJECTION_SEED,
            });
        Self {
            feature,
            classifier,
            hog: HogParams::default(),
            hmlbp: HmlbpParams::default(),
            mpca: MpcaParams::default(),
            mpca_side: DEFAULT_MPCA_SIDE,
            svm: SvmParams::default(),
            c_grid: default_c_grid(),
            src: SrcParams::default(),
            reduction,
            center: true,
            refit_with_validation: true,
        }
    }

    /// `"HOG+SRC"` style name.
    pub fn name(&self) -> String {
        format!("{}+{}", self.feature.name(), self.classifier.name())
    }

    /// HMLBP+SVM, MPCA+SVM or HOG+SRC.
    pub fn is_baseline(&self) -> bool {
        matches!(
            (self.feature, self.classifier),
            (FeatureKind::Hmlbp, ClassifierKind::Svm)
                | (FeatureKind::Mpca, ClassifierKind::Svm)
                | (FeatureKind::Hog, ClassifierKind::Src)
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.hog.validate()?;
        self.hmlbp.validate()?;
        self.mpca.validate()?;
        if self.mpca_side < 2 {
            return Err(Error::invalid("mpca_side must be at least 2"));
        }
        if self.c_grid.is_empty() || self.c_grid.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::invalid("c_grid must hold positive finite values"));
        }
        if let Some(r) = self.reduction {
            if r.dim == 0 || (self.classifier == ClassifierKind::Src && r.dim > MAX_SRC_DIM) {
                return Err(Error::invalid(format!(
                    "reduction dim {} outside 1..={MAX_SRC_DIM}",
                    r.dim
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Parses `"hog+src"`, `"HMLBP+SVM"` and the like into default specs.
impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (f, c) = lower.split_once('+').ok_or_else(|| {
            Error::invalid(format!(
                "method {s:?} is not of the form feature+classifier"
            ))
        })?;
        let feature = match f {
            "hog" => FeatureKind::Hog,
            "hmlbp" => FeatureKind::Hmlbp,
            "mpca" => FeatureKind::Mpca,
            _ => return Err(Error::invalid(format!("unknown feature {f:?}"))),
        };
        let classifier = match c {
            "svm" => ClassifierKind::Svm,
            "src" => ClassifierKind::Src,
            _ => return Err(Error::invalid(format!("unknown classifier {c:?}"))),
        };
        Ok(MethodSpec::new(feature, classifier))
    }
}

/// HMLBP+SVM, MPCA+SVM and HOG+SRC, in report column order.
pub fn baseline_methods() -> Vec<MethodSpec> {
    vec![
        MethodSpec::new(FeatureKind::Hmlbp, ClassifierKind::Svm),
        MethodSpec::new(FeatureKind::Mpca, ClassifierKind::Svm),
        MethodSpec::new(FeatureKind::Hog, ClassifierKind::Src),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_parse_back() {
        for m in baseline_methods() {
            assert!(m.is_baseline());
            assert_eq!(m.name().parse::<MethodSpec>().unwrap(), m);
            m.validate().unwrap();
        }
        let hog_svm: MethodSpec = "hog+svm".parse().unwrap();
        assert!(!hog_svm.is_baseline());
        assert!(hog_svm.reduction.is_none());
        assert!("hog-svm".parse::<MethodSpec>().is_err());
        assert!("sift+svm".parse::<MethodSpec>().is_err());
    }

    #[test]
    fn json_defaults_fill_in() {
        let m: MethodSpec =
            serde_json::from_str(r#"{"feature":"hmlbp","classifier":"svm"}"#).unwrap();
        assert_eq!(m, MethodSpec::new(FeatureKind::Hmlbp, ClassifierKind::Svm));
    }

    #[test]
    fn oversized_src_projection_rejected() {
        let mut m = MethodSpec::new(FeatureKind::Hog, ClassifierKind::Src);
        m.reduction = Some(Reduction { dim: 1024, seed: 1 });
        assert!(m.validate().is_err());
    }
}
