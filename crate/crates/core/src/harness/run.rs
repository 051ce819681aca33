//! Fitting and scoring one method on one split, alone or after synthetic
//! pretraining.

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cache::FeatureCache;
use super::features::Extractor;
use super::method::{ClassifierKind, FeatureKind, MethodSpec};
use super::report::{RunMode, RunRecord};
use super::split::{make_split, Split, SplitSpec};
use crate::classifiers::{
    src_classify, src_fit, svm_train, svm_train_warm, LinearSvmModel, SrcModel, SvmParams,
};
use crate::dataset::ChipSet;
use crate::error::{Error, Result};
use crate::features::mpca::{mpca_fit, MpcaModel};

/// Test accuracy and confusion counts (rows: true class, columns: predicted).
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
    /// C picked on validation, for SVM methods.
    pub chosen_c: Option<f64>,
}

impl Outcome {
    pub(super) fn from_predictions(
        truth: &[usize],
        predicted: &[usize],
        class_count: usize,
        chosen_c: Option<f64>,
    ) -> Self {
        let mut confusion = vec![vec![0; class_count]; class_count];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        let correct = (0..class_count).map(|c| confusion[c][c]).sum::<usize>();
        Outcome {
            accuracy: correct as f64 / truth.len() as f64,
            confusion,
            chosen_c,
        }
    }
}

/// Learned preprocessing: optional MPCA, then centering and, for SVM,
/// per-dimension scaling to unit variance.
#[derive(Debug, Clone)]
pub struct Transform {
    pub(super) mpca: Option<MpcaModel>,
    pub(super) side: usize,
    pub(super) mean: Vec<f64>,
    pub(super) inv_std: Option<Vec<f64>>,
}

impl Transform {
    pub fn fit(method: &MethodSpec, rows: &[&[f64]]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid(
                "cannot fit feature statistics on an empty set",
            ));
        }
        let side = method.mpca_side;
        let mpca = if method.feature == FeatureKind::Mpca {
            let mats: Vec<DMatrix<f64>> = rows
                .iter()
                .map(|r| as_matrix(r, side))
                .collect::<Result<_>>()?;
            Some(mpca_fit(&mats, &method.mpca)?.0)
        } else {
            None
        };
        let mut t = Transform {
            mpca,
            side,
            mean: Vec::new(),
            inv_std: None,
        };
        let base: Vec<Vec<f64>> = rows.iter().map(|r| t.reduce(r)).collect::<Result<_>>()?;
        let dim = base[0].len();
        let n = base.len() as f64;
        let center = method.classifier == ClassifierKind::Svm || method.center;
        let mut mean = vec![0.0; dim];
        if center {
            for b in &base {
                for (m, v) in mean.iter_mut().zip(b) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
        }
        if method.classifier == ClassifierKind::Svm {
            let mut var = vec![0.0; dim];
            for b in &base {
                for ((s, v), m) in var.iter_mut().zip(b).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            t.inv_std = Some(
                var.iter()
                    .map(|s| {
                        let sd = (s / n).sqrt();
                        if sd > 1e-12 {
                            1.0 / sd
                        } else {
                            1.0
                        }
                    })
                    .collect(),
            );
        }
        t.mean = mean;
        Ok(t)
    }

    fn reduce(&self, row: &[f64]) -> Result<Vec<f64>> {
        match &self.mpca {
            Some(model) => Ok(model.project(&as_matrix(row, self.side)?)?.values),
            None => Ok(row.to_vec()),
        }
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut v = self.reduce(row)?;
        if v.len() != self.mean.len() {
            return Err(Error::invalid(format!(
                "feature length {} does not match fitted length {}",
                v.len(),
                self.mean.len()
            )));
        }
        for (x, m) in v.iter_mut().zip(&self.mean) {
            *x -= m;
        }
        if let Some(s) = &self.inv_std {
            for (x, k) in v.iter_mut().zip(s) {
                *x *= k;
            }
        }
        Ok(v)
    }

    pub(super) fn apply_all(&self, features: &[Vec<f64>], idx: &[usize]) -> Result<Vec<Vec<f64>>> {
        idx.par_iter().map(|&i| self.apply(&features[i])).collect()
    }
}

fn as_matrix(row: &[f64], side: usize) -> Result<DMatrix<f64>> {
    if row.len() != side * side {
        return Err(Error::invalid(format!(
            "{} pixels do not form a {side}x{side} chip",
            row.len()
        )));
    }
    Ok(DMatrix::from_row_slice(side, side, row))
}

fn rows<'a>(features: &'a [Vec<f64>], idx: &[usize]) -> Vec<&'a [f64]> {
    idx.iter().map(|&i| features[i].as_slice()).collect()
}

fn pick(labels: &[usize], idx: &[usize]) -> Vec<usize> {
    idx.iter().map(|&i| labels[i]).collect()
}

fn src_predict(model: &SrcModel, xs: &[Vec<f64>]) -> Result<Vec<usize>> {
    xs.par_iter()
        .map(|x| src_classify(model, x).map(|p| p.class))
        .collect()
}

fn svm_predict_all(model: &LinearSvmModel, xs: &[Vec<f64>]) -> Result<Vec<usize>> {
    xs.iter().map(|x| model.predict(x)).collect()
}

fn accuracy(truth: &[usize], predicted: &[usize]) -> f64 {
    truth.iter().zip(predicted).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

/// Models fitted on the synthetic source domain.
#[derive(Debug, Clone)]
pub struct Pretrained {
    pub transform: Transform,
    pub svm: Option<LinearSvmModel>,
    /// Transformed synthetic descriptors and labels, for dictionary union.
    pub atoms: Vec<Vec<f64>>,
    pub atom_labels: Vec<usize>,
    /// Untransformed synthetic descriptors.
    pub raw: Vec<Vec<f64>>,
}

/// How the target-domain fit reuses the pretrained models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptOptions {
    /// Weight of synthetic atoms in the SRC dictionary, in (0, 1].
    pub synth_scale: f64,
    /// Refit feature statistics on target data instead of keeping the
    /// synthetic ones.
    pub refit_statistics: bool,
}

impl Default for AdaptOptions {
    fn default() -> Self {
        Self {
            synth_scale: 1.0,
            refit_statistics: false,
        }
    }
}

pub fn pretrain(
    method: &MethodSpec,
    features: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
) -> Result<Pretrained> {
    let all: Vec<usize> = (0..features.len()).collect();
    let transform = Transform::fit(method, &rows(features, &all))?;
    let atoms = transform.apply_all(features, &all)?;
    let svm = match method.classifier {
        ClassifierKind::Svm => Some(svm_train(&atoms, labels, class_count, &method.svm)?.0),
        ClassifierKind::Src => None,
    };
    Ok(Pretrained {
        transform,
        svm,
        atoms,
        atom_labels: labels.to_vec(),
        raw: features.to_vec(),
    })
}

#[derive(Clone, Copy)]
enum Prior<'a> {
    None,
    Synthetic(&'a Pretrained, AdaptOptions),
}

/// Fits on `split.train` (picking C on `split.validation`), optionally
/// refits on both, and scores `split.test`.
pub fn evaluate(
    method: &MethodSpec,
    features: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    split: &Split,
) -> Result<Outcome> {
    evaluate_with(method, features, labels, class_count, split, Prior::None)
}

/// As [`evaluate`], starting from models pretrained on synthetic data.
pub fn evaluate_adapted(
    method: &MethodSpec,
    features: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    split: &Split,
    pretrained: &Pretrained,
    options: AdaptOptions,
) -> Result<Outcome> {
    evaluate_with(
        method,
        features,
        labels,
        class_count,
        split,
        Prior::Synthetic(pretrained, options),
    )
}

/// Scores the pretrained models alone on `test`.
pub fn evaluate_synth_only(
    method: &MethodSpec,
    features: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    test: &[usize],
    pretrained: &Pretrained,
) -> Result<Outcome> {
    let xs = pretrained.transform.apply_all(features, test)?;
    let truth = pick(labels, test);
    let predicted = match (&pretrained.svm, method.classifier) {
        (Some(model), ClassifierKind::Svm) => svm_predict_all(model, &xs)?,
        (_, ClassifierKind::Src) => {
            let model = src_fit(
                &pretrained.atoms,
                &pretrained.atom_labels,
                class_count,
                method.src,
            )?;
            src_predict(&model, &xs)?
        }
        (None, ClassifierKind::Svm) => return Err(Error::invalid("pretrained models lack an SVM")),
    };
    Ok(Outcome::from_predictions(
        &truth,
        &predicted,
        class_count,
        None,
    ))
}

fn evaluate_with(
    method: &MethodSpec,
    features: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    split: &Split,
    prior: Prior<'_>,
) -> Result<Outcome> {
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::invalid("training and test sets must be non-empty"));
    }
    if features.len() != labels.len() {
        return Err(Error::invalid("features and labels differ in length"));
    }
    let final_idx: Vec<usize> = if method.refit_with_validation {
        let mut v: Vec<usize> = split
            .train
            .iter()
            .chain(&split.validation)
            .copied()
            .collect();
        v.sort_unstable();
        v
    } else {
        split.train.clone()
    };
    let fit_transform = |idx: &[usize]| -> Result<Transform> {
        match prior {
            Prior::Synthetic(p, o) if !o.refit_statistics => Ok(p.transform.clone()),
            _ => Transform::fit(method, &rows(features, idx)),
        }
    };
    let truth = pick(labels, &split.test);
    match method.classifier {
        ClassifierKind::Svm => {
            let warm = match prior {
                Prior::Synthetic(p, _) => Some(
                    p.svm
                        .as_ref()
                        .ok_or_else(|| Error::invalid("pretrained models lack an SVM"))?,
                ),
                Prior::None => None,
            };
            let train = |t: &Transform, idx: &[usize], c: f64| -> Result<LinearSvmModel> {
                let xs = t.apply_all(features, idx)?;
                let ys = pick(labels, idx);
                let params = SvmParams { c, ..method.svm };
                Ok(match warm {
                    Some(w) => svm_train_warm(&xs, &ys, class_count, &params, w)?.0,
                    None => svm_train(&xs, &ys, class_count, &params)?.0,
                })
            };
            let mut chosen = method.svm.c;
            if !split.validation.is_empty() && method.c_grid.len() > 1 {
                let t = fit_transform(&split.train)?;
                let val = t.apply_all(features, &split.validation)?;
                let val_truth = pick(labels, &split.validation);
                let mut best = f64::NEG_INFINITY;
                for &c in &method.c_grid {
                    let acc = accuracy(
                        &val_truth,
                        &svm_predict_all(&train(&t, &split.train, c)?, &val)?,
                    );
                    if acc > best {
                        best = acc;
                        chosen = c;
                    }
                }
            } else if let Some(&c) = method.c_grid.first() {
                chosen = c;
            }
            let t = fit_transform(&final_idx)?;
            let model = train(&t, &final_idx, chosen)?;
            let predicted = svm_predict_all(&model, &t.apply_all(features, &split.test)?)?;
            Ok(Outcome::from_predictions(
                &truth,
                &predicted,
                class_count,
                Some(chosen),
            ))
        }
        ClassifierKind::Src => {
            let t = fit_transform(&final_idx)?;
            let atoms = t.apply_all(features, &final_idx)?;
            let mut model = src_fit(&atoms, &pick(labels, &final_idx), class_count, method.src)?;
            if let Prior::Synthetic(p, o) = prior {
                let refit;
                let synth_atoms = if o.refit_statistics {
                    let all: Vec<usize> = (0..p.raw.len()).collect();
                    refit = t.apply_all(&p.raw, &all)?;
                    &refit
                } else {
                    &p.atoms
                };
                model = model.with_extra_atoms(synth_atoms, &p.atom_labels, o.synth_scale)?;
            }
            let predicted = src_predict(&model, &t.apply_all(features, &split.test)?)?;
            Ok(Outcome::from_predictions(
                &truth,
                &predicted,
                class_count,
                None,
            ))
        }
    }
}

/// Split seed of shuffle `index` under `master`.
pub fn shuffle_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64);
    rng.next_u64()
}

/// Extracts descriptors for every chip of `data` through the cache.
pub fn extract(method: &MethodSpec, data: &ChipSet, cache: &FeatureCache) -> Result<Vec<Vec<f64>>> {
    method.validate()?;
    cache
        .features(&Extractor::for_method(method), &data.chips)
        .map_err(|e| e.context(format!("extracting {} features", method.name())))
}

/// Leakage-checked split for shuffle `index`.
pub fn shuffle_split(
    labels: &[usize],
    class_count: usize,
    spec: &SplitSpec,
    master: u64,
    index: usize,
) -> Result<(Split, u64)> {
    let seed = shuffle_seed(master, index);
    let split = make_split(labels, class_count, &spec.with_seed(seed))?;
    split.check_disjoint()?;
    Ok((split, seed))
}

/// Extraction plus [`evaluate`] on one split.
pub fn run_method(
    method: &MethodSpec,
    data: &ChipSet,
    split: &Split,
    cache: &FeatureCache,
) -> Result<Outcome> {
    split.check_disjoint()?;
    let features = extract(method, data, cache)?;
    evaluate(
        method,
        &features,
        &data.labels,
        crate::dataset::VesselClass::COUNT,
        split,
    )
    .map_err(|e| e.context(format!("running {}", method.name())))
}

/// Mean of per-shuffle accuracies with the runs behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct ShuffleSummary {
    pub mean: f64,
    pub runs: Vec<RunRecord>,
}

pub fn mean_accuracy(runs: &[RunRecord]) -> f64 {
    runs.iter().map(|r| r.accuracy).sum::<f64>() / runs.len() as f64
}

/// `n` independent stratified re-splits at the spec's fraction; split seeds
/// derive from `(master, shuffle index)`.
pub fn run_shuffles(
    method: &MethodSpec,
    data: &ChipSet,
    spec: &SplitSpec,
    n: usize,
    master: u64,
    cache: &FeatureCache,
) -> Result<ShuffleSummary> {
    let features = extract(method, data, cache)?;
    shuffles_on_features(
        method,
        &features,
        &data.labels,
        spec,
        n,
        master,
        "benchmark",
    )
}

/// [`run_shuffles`] on precomputed descriptors.
pub fn shuffles_on_features(
    method: &MethodSpec,
    features: &[Vec<f64>],
    labels: &[usize],
    spec: &SplitSpec,
    n: usize,
    master: u64,
    experiment: &str,
) -> Result<ShuffleSummary> {
    if n == 0 {
        return Err(Error::invalid("at least one shuffle required"));
    }
    let class_count = crate::dataset::VesselClass::COUNT;
    let runs: Vec<RunRecord> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (split, seed) = shuffle_split(labels, class_count, spec, master, i)?;
            let out = evaluate(method, features, labels, class_count, &split).map_err(|e| {
                e.context(format!("{} at {} shuffle {i}", method.name(), spec.label()))
            })?;
            Ok(RunRecord::new(
                experiment,
                method,
                RunMode::Baseline,
                spec,
                i,
                seed,
                out,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(ShuffleSummary {
        mean: mean_accuracy(&runs),
        runs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationSummary {
    pub baseline: f64,
    pub adapted: f64,
    /// Pretrained models alone on the same test splits.
    pub synth_only: f64,
    pub delta: f64,
    pub runs: Vec<RunRecord>,
}

fn check_label_sets(a: &ChipSet, b: &ChipSet) -> Result<()> {
    let present = |d: &ChipSet| d.class_counts().map(|c| c > 0);
    if present(a) != present(b) {
        return Err(Error::invalid(
            "synthetic and target datasets do not share class labels",
        ));
    }
    Ok(())
}

/// Baseline on target data alone versus the same splits after synthetic
/// pretraining.
#[allow(clippy::too_many_arguments)]
pub fn run_adaptation(
    method: &MethodSpec,
    synth: &ChipSet,
    real: &ChipSet,
    spec: &SplitSpec,
    n: usize,
    master: u64,
    options: AdaptOptions,
    cache: &FeatureCache,
) -> Result<AdaptationSummary> {
    check_label_sets(synth, real)?;
    let synth_features = extract(method, synth, cache)?;
    let real_features = extract(method, real, cache)?;
    let pretrained = pretrain(
        method,
        &synth_features,
        &synth.labels,
        crate::dataset::VesselClass::COUNT,
    )
    .map_err(|e| e.context(format!("pretraining {}", method.name())))?;
    adaptation_on_features(
        method,
        &pretrained,
        &real_features,
        &real.labels,
        spec,
        n,
        master,
        options,
    )
}

/// [`run_adaptation`] after extraction and pretraining.
#[allow(clippy::too_many_arguments)]
pub fn adaptation_on_features(
    method: &MethodSpec,
    pretrained: &Pretrained,
    features: &[Vec<f64>],
    labels: &[usize],
    spec: &SplitSpec,
    n: usize,
    master: u64,
    options: AdaptOptions,
) -> Result<AdaptationSummary> {
    if !(options.synth_scale > 0.0 && options.synth_scale <= 1.0) {
        return Err(Error::invalid(format!(
            "synth_scale {} outside (0, 1]",
            options.synth_scale
        )));
    }
    if n == 0 {
        return Err(Error::invalid("at least one shuffle required"));
    }
    let class_count = crate::dataset::VesselClass::COUNT;
    let per_shuffle: Vec<[RunRecord; 3]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (split, seed) = shuffle_split(labels, class_count, spec, master, i)?;
            let ctx = |e: Error| {
                e.context(format!(
                    "{} adaptation at {} shuffle {i}",
                    method.name(),
                    spec.label()
                ))
            };
            let base = evaluate(method, features, labels, class_count, &split).map_err(ctx)?;
            let adapted = evaluate_adapted(
                method,
                features,
                labels,
                class_count,
                &split,
                pretrained,
                options,
            )
            .map_err(ctx)?;
            let synth = evaluate_synth_only(
                method,
                features,
                labels,
                class_count,
                &split.test,
                pretrained,
            )
            .map_err(ctx)?;
            let rec = |mode, out| RunRecord::new("adaptation", method, mode, spec, i, seed, out);
            Ok([
                rec(RunMode::Baseline, base),
                rec(RunMode::Adapted, adapted),
                rec(RunMode::SynthOnly, synth),
            ])
        })
        .collect::<Result<_>>()?;
    let of = |mode: RunMode| -> Vec<RunRecord> {
        per_shuffle
            .iter()
            .flatten()
            .filter(|r| r.mode == mode)
            .cloned()
            .collect()
    };
    let baseline = mean_accuracy(&of(RunMode::Baseline));
    let adapted = mean_accuracy(&of(RunMode::Adapted));
    Ok(AdaptationSummary {
        baseline,
        adapted,
        synth_only: mean_accuracy(&of(RunMode::SynthOnly)),
        delta: adapted - baseline,
        runs: per_shuffle.into_iter().flatten().collect(),
    })
}
