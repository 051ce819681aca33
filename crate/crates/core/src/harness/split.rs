use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five training fractions of the benchmark protocol.
pub const PROTOCOL_FRACTIONS: [f64; 5] = [0.80, 0.50, 0.20, 0.05, 0.01];
pub const DEFAULT_VALIDATION_HOLDOUT: f64 = 0.20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    #[serde(default = "default_holdout")]
    pub validation_holdout: f64,
    #[serde(default)]
    pub shuffle_seed: u64,
    /// Allows any fraction in (0, 1) instead of the five protocol ratios.
    #[serde(default)]
    pub custom: bool,
}

fn default_holdout() -> f64 {
    DEFAULT_VALIDATION_HOLDOUT
}

impl SplitSpec {
    pub fn new(train_fraction: f64, shuffle_seed: u64) -> Self {
        Self {
            train_fraction,
            validation_holdout: DEFAULT_VALIDATION_HOLDOUT,
            shuffle_seed,
            custom: false,
        }
    }

    pub fn with_seed(self, shuffle_seed: u64) -> Self {
        Self {
            shuffle_seed,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.train_fraction;
        if self.custom {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::invalid(format!("train fraction {f} outside (0, 1)")));
            }
        } else if !PROTOCOL_FRACTIONS.contains(&f) {
            return Err(Error::invalid(format!(
                "train fraction {f} is not one of {PROTOCOL_FRACTIONS:?} (set custom for other values)"
            )));
        }
        if !(0.0..1.0).contains(&self.validation_holdout) {
            return Err(Error::invalid(format!(
                "validation holdout {} outside [0, 1)",
                self.validation_holdout
            )));
        }
        Ok(())
    }

    /// `"80/20"` style label in whole percent.
    pub fn label(&self) -> String {
        split_label(self.train_fraction)
    }
}

pub fn split_label(train_fraction: f64) -> String {
    let train = (train_fraction * 100.0).round() as i64;
    format!("{train}/{}", 100 - train)
}

/// Dataset indices of each part, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Fails if any test index also appears in training or validation.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut seen: std::collections::HashSet<usize> = std::collections::HashSet::new();
        seen.extend(self.train.iter().chain(&self.validation).copied());
        if self.train.len() + self.validation.len() != seen.len()
            || self.test.iter().any(|i| seen.contains(i))
        {
            return Err(Error::invalid("split parts overlap"));
        }
        Ok(())
    }
}

/// Per-class (training incl. validation, validation) counts for a class of
/// `class_size` samples.
pub fn split_counts(class_size: usize, spec: &SplitSpec) -> Result<(usize, usize)> {
    let train = (spec.train_fraction * class_size as f64 + 1e-9).floor() as usize;
    if train == 0 {
        return Err(Error::invalid(format!(
            "fraction {} leaves no training sample in a class of {class_size}",
            spec.train_fraction
        )));
    }
    let validation = if train == 2 {
        1
    } else {
        (spec.validation_holdout * train as f64 + 1e-9).floor() as usize
    };
    Ok((train, validation.min(train - 1)))
}

/// Stratified split: each class is shuffled with its own stream of the
/// shuffle seed; the first `floor(f * n)` go to training (the first share
/// of those to validation) and the rest to test.
pub fn make_split(labels: &[usize], class_count: usize, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut split = Split::default();
    for class in 0..class_count {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < 2 {
            return Err(Error::invalid(format!(
                "class {class} has {} samples; splitting needs at least 2",
                members.len()
            )));
        }
        let (train, validation) = split_counts(members.len(), spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.shuffle_seed);
        rng.set_stream(class as u64);
        members.shuffle(&mut rng);
        split.validation.extend_from_slice(&members[..validation]);
        split.train.extend_from_slice(&members[validation..train]);
        split.test.extend_from_slice(&members[train..]);
    }
    if labels.iter().any(|&l| l >= class_count) {
        return Err(Error::invalid("label outside class range"));
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    split.test.sort_unstable();
    split.check_disjoint()?;
    Ok(split)
}
