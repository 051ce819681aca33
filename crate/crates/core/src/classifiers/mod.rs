//! Decision stages: one-vs-rest linear SVM and sparse representation
//! classification.

pub mod src;
pub mod svm;

use crate::error::{Error, Result};

pub use self::src::{
    sparse_solve, src_classify, src_fit, SparseSolution, SrcModel, SrcParams, SrcPrediction,
};
pub use self::svm::{
    svm_predict, svm_train, svm_train_warm, LinearSvmModel, SvmParams, TrainTrace,
};

/// Checks that every class in `0..class_count` occurs and dimensions agree.
pub(crate) fn check_training_set(
    features: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
) -> Result<usize> {
    if features.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if features.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} feature vectors but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let dim = features[0].len();
    if dim == 0 {
        return Err(Error::invalid("zero-dimensional features"));
    }
    if let Some(f) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::invalid(format!(
            "feature dimension {} differs from {dim}",
            f.len()
        )));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite feature value".into()));
    }
    let mut seen = vec![false; class_count];
    for &l in labels {
        if l >= class_count {
            return Err(Error::invalid(format!(
                "label {l} out of range for {class_count} classes"
            )));
        }
        seen[l] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::invalid(format!(
            "class {missing} has no training samples"
        )));
    }
    Ok(dim)
}

/// Index of the largest score; the lowest index wins ties.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Index of the smallest value; the lowest index wins ties.
pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}
