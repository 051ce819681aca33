//! One-vs-rest linear SVM trained by dual coordinate descent on the
//! L2-regularized hinge loss. The bias is learned as the weight of a constant
//! feature and is regularized with the rest.
//!
//! Each binary problem solves
//!
//! ```text
//! min_w  1/2 |w - w0|^2 + C sum_i max(0, 1 - y_i w.x_i)
//! ```
//!
//! where `w0` is zero for a cold start and the weights of a previously
//! trained model for a warm start.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, check_training_set};
use crate::error::{Error, Result};
use crate::linalg::dot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// Relative duality gap at which a binary problem stops.
    pub tol: f64,
    pub max_epochs: usize,
    /// Seeds the per-epoch visiting order.
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-4,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub class_count: usize,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub c_param: f64,
}

/// Objective values per epoch of one binary problem.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BinaryTrace {
    /// Primal objective of the iterate after each epoch.
    pub primal: Vec<f64>,
    /// Primal objective of the best iterate so far (the one returned).
    pub primal_best: Vec<f64>,
    pub dual: Vec<f64>,
    pub converged: bool,
}

/// One trace per class, in class order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub per_class: Vec<BinaryTrace>,
}

struct BinaryProblem<'a> {
    xs: &'a [Vec<f64>],
    /// `+1` / `-1`.
    ys: Vec<f64>,
    /// Squared norms of the bias-augmented samples.
    q_diag: Vec<f64>,
}

impl BinaryProblem<'_> {
    #[inline]
    fn margin(&self, w: &[f64], bias: f64, i: usize) -> f64 {
        dot(w, &self.xs[i]) + bias
    }

    fn primal(&self, w: &[f64], bias: f64, prior: (&[f64], f64), c: f64) -> f64 {
        let reg: f64 = w
            .iter()
            .zip(prior.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            + (bias - prior.1) * (bias - prior.1);
        let loss: f64 = (0..self.xs.len())
            .map(|i| (1.0 - self.ys[i] * self.margin(w, bias, i)).max(0.0))
            .sum();
        0.5 * reg + c * loss
    }

    fn dual(&self, w: &[f64], bias: f64, alpha: &[f64], prior: (&[f64], f64)) -> f64 {
        // v = w - w0; D = sum(alpha) - |v|^2 / 2 - w0.v
        let mut vv = (bias - prior.1) * (bias - prior.1);
        let mut w0v = prior.1 * (bias - prior.1);
        for (a, b) in w.iter().zip(prior.0) {
            vv += (a - b) * (a - b);
            w0v += b * (a - b);
        }
        alpha.iter().sum::<f64>() - 0.5 * vv - w0v
    }

    fn solve(
        &self,
        params: &SvmParams,
        prior: (&[f64], f64),
        seed: u64,
    ) -> (Vec<f64>, f64, BinaryTrace) {
        let n = self.xs.len();
        let mut w = prior.0.to_vec();
        let mut bias = prior.1;
        let mut alpha = vec![0.0; n];
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trace = BinaryTrace::default();
        let mut best = (w.clone(), bias, self.primal(&w, bias, prior, params.c));

        for _ in 0..params.max_epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let qii = self.q_diag[i];
                if qii <= 0.0 {
                    continue;
                }
                let y = self.ys[i];
                let grad = y * self.margin(&w, bias, i) - 1.0;
                let old = alpha[i];
                let new = (old - grad / qii).clamp(0.0, params.c);
                let delta = new - old;
                if delta != 0.0 {
                    alpha[i] = new;
                    let step = delta * y;
                    for (wj, xj) in w.iter_mut().zip(&self.xs[i]) {
                        *wj += step * xj;
                    }
                    bias += step;
                }
            }
            let primal = self.primal(&w, bias, prior, params.c);
            let dual = self.dual(&w, bias, &alpha, prior);
            if primal < best.2 {
                best = (w.clone(), bias, primal);
            }
            trace.primal.push(primal);
            trace.primal_best.push(best.2);
            trace.dual.push(dual);
            if best.2 - dual <= params.tol * best.2.abs().max(1.0) {
                trace.converged = true;
                break;
            }
        }
        (best.0, best.1, trace)
    }
}

fn train_impl(
    features: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    params: &SvmParams,
    prior: Option<&LinearSvmModel>,
) -> Result<(LinearSvmModel, TrainTrace)> {
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::invalid(format!(
            "C must be positive, got {}",
            params.c
        )));
    }
    if class_count < 2 {
        return Err(Error::invalid("need at least 2 classes"));
    }
    let dim = check_training_set(features, labels, class_count)?;
    if let Some(p) = prior {
        if p.class_count != class_count || p.weights.iter().any(|w| w.len() != dim) {
            return Err(Error::invalid(
                "warm-start model does not match the training set shape",
            ));
        }
    }
    let q_diag: Vec<f64> = features.iter().map(|x| dot(x, x) + 1.0).collect();
    let zero = vec![0.0; dim];
    let mut weights = Vec::with_capacity(class_count);
    let mut biases = Vec::with_capacity(class_count);
    let mut trace = TrainTrace::default();
    for k in 0..class_count {
        let problem = BinaryProblem {
            xs: features,
            ys: labels
                .iter()
                .map(|&l| if l == k { 1.0 } else { -1.0 })
                .collect(),
            q_diag: q_diag.clone(),
        };
        let prior_k = match prior {
            Some(p) => (p.weights[k].as_slice(), p.biases[k]),
            None => (zero.as_slice(), 0.0),
        };
        let seed = params
            .seed
            .wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let (w, b, t) = problem.solve(params, prior_k, seed);
        weights.push(w);
        biases.push(b);
        trace.per_class.push(t);
    }
    Ok((
        LinearSvmModel {
            class_count,
            weights,
            biases,
            c_param: params.c,
        },
        trace,
    ))
}

/// Trains `class_count` one-vs-rest problems from scratch.
pub fn svm_train(
    features: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    params: &SvmParams,
) -> Result<(LinearSvmModel, TrainTrace)> {
    train_impl(features, labels, class_count, params, None)
}

/// Continues from `prior`: the regularizer pulls toward the prior weights
/// instead of toward zero.
pub fn svm_train_warm(
    features: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    params: &SvmParams,
    prior: &LinearSvmModel,
) -> Result<(LinearSvmModel, TrainTrace)> {
    train_impl(features, labels, class_count, params, Some(prior))
}

impl LinearSvmModel {
    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "feature dimension {} does not match model dimension {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, x) + b)
            .collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        })
        .expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "svm model".into(),
            source,
        })?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format {} v{}",
                file.format, file.version
            )));
        }
        let m = file.model;
        if m.weights.len() != m.class_count || m.biases.len() != m.class_count {
            return Err(Error::invalid("svm model class count mismatch"));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }
}

const MODEL_FORMAT: &str = "vessel-bench/linear-svm";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: LinearSvmModel,
}

pub fn svm_predict(model: &LinearSvmModel, x: &[f64]) -> Result<usize> {
    model.predict(x)
}
