//! Sparse representation classification.
//!
//! The dictionary holds L2-normalized training descriptors as atoms. A test
//! descriptor `y` (normalized to unit length) is coded by
//!
//! ```text
//! min |x|_1  subject to  |D x - y|_2 <= eps
//! ```
//!
//! solved by following the lasso regularization path (homotopy) from
//! `lambda = max |D^T y|` downward until the residual reaches `eps`. The class
//! whose atoms alone reconstruct `y` best wins.
//!
//! Atoms may carry a scale `s_j` in `(0, 1]`: the solver then works with the
//! shortened atom `s_j d_j`, which makes it proportionally more expensive in
//! the l1 budget. Coefficients are reported against the unit atoms.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{argmin, check_training_set};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrcParams {
    /// Residual tolerance relative to the (unit) sample norm.
    pub epsilon: f64,
    /// Stop once this many atoms are active.
    pub max_sparsity: Option<usize>,
    /// Path steps allowed per dictionary atom.
    pub iteration_factor: usize,
    /// Refit the support by least squares and prune it while the result
    /// stays feasible and within 1% of the optimal l1 norm.
    #[serde(default = "default_polish")]
    pub polish: bool,
}

fn default_polish() -> bool {
    true
}

impl Default for SrcParams {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            max_sparsity: None,
            iteration_factor: 10,
            polish: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SrcModel {
    /// Unit-norm atoms.
    atoms: Vec<Vec<f64>>,
    atom_labels: Vec<usize>,
    atom_scales: Vec<f64>,
    class_count: usize,
    params: SrcParams,
    /// Scaled Gram matrix `s_i s_j d_i.d_j`, row-major.
    gram: Vec<f64>,
}

impl PartialEq for SrcModel {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms
            && self.atom_labels == other.atom_labels
            && self.atom_scales == other.atom_scales
            && self.class_count == other.class_count
            && self.params == other.params
    }
}

fn normalized(x: &[f64]) -> Result<Vec<f64>> {
    let n = norm(x);
    if !(n > 0.0) {
        return Err(Error::invalid(
            "zero-norm sample cannot be a dictionary atom",
        ));
    }
    Ok(x.iter().map(|v| v / n).collect())
}

impl SrcModel {
    fn build(
        atoms: Vec<Vec<f64>>,
        atom_labels: Vec<usize>,
        atom_scales: Vec<f64>,
        class_count: usize,
        params: SrcParams,
    ) -> Result<Self> {
        if !(params.epsilon >= 0.0) {
            return Err(Error::invalid("epsilon must be non-negative"));
        }
        if atom_scales.iter().any(|s| !(*s > 0.0 && *s <= 1.0)) {
            return Err(Error::invalid("atom scales must lie in (0, 1]"));
        }
        let n = atoms.len();
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let g = atom_scales[i] * atom_scales[j] * dot(&atoms[i], &atoms[j]);
                gram[i * n + j] = g;
                gram[j * n + i] = g;
            }
        }
        Ok(Self {
            atoms,
            atom_labels,
            atom_scales,
            class_count,
            params,
            gram,
        })
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn atom_labels(&self) -> &[usize] {
        &self.atom_labels
    }

    pub fn atom_scales(&self) -> &[f64] {
        &self.atom_scales
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn dim(&self) -> usize {
        self.atoms.first().map_or(0, Vec::len)
    }

    pub fn params(&self) -> &SrcParams {
        &self.params
    }

    pub fn with_params(mut self, params: SrcParams) -> Self {
        self.params = params;
        self
    }

    /// Dictionary union: appends normalized atoms with the given scale.
    pub fn with_extra_atoms(
        &self,
        features: &[Vec<f64>],
        labels: &[usize],
        scale: f64,
    ) -> Result<SrcModel> {
        if features.len() != labels.len() {
            return Err(Error::invalid("features and labels differ in length"));
        }
        let mut atoms = self.atoms.clone();
        let mut atom_labels = self.atom_labels.clone();
        let mut atom_scales = self.atom_scales.clone();
        for (f, &l) in features.iter().zip(labels) {
            if f.len() != self.dim() {
                return Err(Error::invalid("extra atom dimension mismatch"));
            }
            if l >= self.class_count {
                return Err(Error::invalid(format!("label {l} out of range")));
            }
            atoms.push(normalized(f)?);
            atom_labels.push(l);
            atom_scales.push(scale);
        }
        SrcModel::build(
            atoms,
            atom_labels,
            atom_scales,
            self.class_count,
            self.params,
        )
    }

    #[inline]
    fn g(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.atoms.len() + j]
    }
}

/// Builds the dictionary from training descriptors, preserving their order.
pub fn src_fit(
    features: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    params: SrcParams,
) -> Result<SrcModel> {
    check_training_set(features, labels, class_count)?;
    let atoms = features
        .iter()
        .map(|f| normalized(f))
        .collect::<Result<Vec<_>>>()?;
    let n = atoms.len();
    SrcModel::build(atoms, labels.to_vec(), vec![1.0; n], class_count, params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    /// One coefficient per atom, against the unit-norm atoms.
    pub coefficients: Vec<f64>,
    /// `|D x - y|` for the normalized sample.
    pub residual: f64,
    pub iterations: usize,
}

/// Incrementally maintained Cholesky factor of the active Gram block.
struct ActiveFactor {
    /// Lower-triangular rows.
    rows: Vec<Vec<f64>>,
}

impl ActiveFactor {
    fn new() -> Self {
        Self { rows: Vec::new() }
    }

    /// Adds a row/column; returns false if the block would lose definiteness.
    fn push(&mut self, cross: &[f64], diag: f64) -> bool {
        let mut l = Vec::with_capacity(self.rows.len() + 1);
        for (i, row) in self.rows.iter().enumerate() {
            let s = cross[i] - dot(&row[..i], &l[..i]);
            l.push(s / row[i]);
        }
        let d = diag - dot(&l, &l);
        if !(d > 1e-10 * diag.max(1e-300)) {
            return false;
        }
        l.push(d.sqrt());
        self.rows.push(l);
        true
    }

    /// Drops row/column `k`: the trailing rows lose their column `k`, whose
    /// entries come back as a rank-one update of the trailing block.
    fn remove(&mut self, k: usize) {
        self.rows.remove(k);
        let mut v: Vec<f64> = self.rows[k..].iter_mut().map(|row| row.remove(k)).collect();
        let n = self.rows.len();
        for p in k..n {
            let lpp = self.rows[p][p];
            let r = lpp.hypot(v[p - k]);
            let (c, s) = (r / lpp, v[p - k] / lpp);
            self.rows[p][p] = r;
            for q in p + 1..n {
                let l = (self.rows[q][p] + s * v[q - k]) / c;
                self.rows[q][p] = l;
                v[q - k] = c * v[q - k] - s * l;
            }
        }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.rows.len();
        let mut z = vec![0.0; n];
        for i in 0..n {
            z[i] = (rhs[i] - dot(&self.rows[i][..i], &z[..i])) / self.rows[i][i];
        }
        // Back substitution with L^T, sweeping rows of L so access stays
        // contiguous.
        for i in (0..n).rev() {
            let row = &self.rows[i];
            z[i] /= row[i];
            let xi = z[i];
            for (zj, l) in z[..i].iter_mut().zip(&row[..i]) {
                *zj -= l * xi;
            }
        }
        z
    }
}

const SQUARED_SLACK: f64 = 1e-12;
/// Path steps between exact recomputations of the residual and correlations.
const CORRELATION_REFRESH: usize = 32;

/// Smallest step `g >= 0` with `|r - g u|^2 <= eps2`, if any.
fn residual_crossing(r: &[f64], u: &[f64], eps2: f64) -> Option<f64> {
    let r0 = dot(r, r);
    if r0 <= eps2 {
        return Some(0.0);
    }
    let a = dot(u, u);
    let b = dot(r, u);
    if a <= 0.0 || b <= 0.0 {
        return None;
    }
    let mut disc = b * b - a * (r0 - eps2);
    if disc < 0.0 && disc > -SQUARED_SLACK * a {
        disc = 0.0;
    }
    (disc >= 0.0).then(|| (r0 - eps2) / (b + disc.sqrt()))
}

/// Least-squares refit on the support of `z`, then greedy removal of the
/// smallest coefficients. Candidates must keep the residual within `eps2`
/// and the (weighted) l1 norm within 1% of that of `z`.
fn polish(model: &SrcModel, y: &[f64], b: &[f64], z: &[f64], eps2: f64) -> Option<(Vec<f64>, f64)> {
    let budget = 1.01 * z.iter().map(|v| v.abs()).sum::<f64>();
    let residual_sq = |x: &[f64]| {
        let mut r = y.to_vec();
        for (i, &v) in x.iter().enumerate() {
            if v != 0.0 {
                let w = v * model.atom_scales[i];
                for (rv, av) in r.iter_mut().zip(&model.atoms[i]) {
                    *rv -= w * av;
                }
            }
        }
        dot(&r, &r)
    };
    let refit = |support: &[usize]| -> Option<(Vec<f64>, f64)> {
        let k = support.len();
        let g = DMatrix::from_fn(k, k, |r, c| model.g(support[r], support[c]));
        let rhs = DVector::from_iterator(k, support.iter().map(|&i| b[i]));
        let sol = g.cholesky()?.solve(&rhs);
        let mut x = vec![0.0; z.len()];
        for (idx, &i) in support.iter().enumerate() {
            x[i] = sol[idx];
        }
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        let r2 = residual_sq(&x);
        (l1 <= budget && r2 <= eps2 && x.iter().all(|v| v.is_finite())).then_some((x, r2))
    };
    let mut support: Vec<usize> = (0..z.len()).filter(|&i| z[i] != 0.0).collect();
    let mut best = refit(&support)?;
    while support.len() > 1 {
        let weakest = (0..support.len())
            .min_by(|&p, &q| {
                best.0[support[p]]
                    .abs()
                    .total_cmp(&best.0[support[q]].abs())
            })
            .unwrap();
        let mut trial = support.clone();
        trial.remove(weakest);
        match refit(&trial) {
            Some(next) => {
                support = trial;
                best = next;
            }
            None => break,
        }
    }
    Some(best)
}

/// Solves the l1 problem for one (normalized inside) sample.
pub fn sparse_solve(model: &SrcModel, sample: &[f64]) -> Result<SparseSolution> {
    let n = model.atom_count();
    if sample.len() != model.dim() {
        return Err(Error::invalid(format!(
            "sample dimension {} does not match dictionary dimension {}",
            sample.len(),
            model.dim()
        )));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite sample value".into()));
    }
    let y_norm = norm(sample);
    if y_norm == 0.0 {
        return Ok(SparseSolution {
            coefficients: vec![0.0; n],
            residual: 0.0,
            iterations: 0,
        });
    }
    let y: Vec<f64> = sample.iter().map(|v| v / y_norm).collect();
    let eps = model.params.epsilon;
    let eps2 = eps * eps;
    let cap = model.params.iteration_factor.max(1) * n.max(1);

    // Scaled correlations with the sample.
    let b: Vec<f64> = (0..n)
        .map(|j| model.atom_scales[j] * dot(&model.atoms[j], &y))
        .collect();

    let mut z = vec![0.0; n];
    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let mut is_active = vec![false; n];
    let mut excluded = vec![false; n];
    let mut factor = ActiveFactor::new();
    let mut corr = b.clone();

    // Explicit residuals: the Gram expansion 1 - 2 z.b + z'Gz cancels badly
    // once the residual approaches a small tolerance.
    let combine =
        |coef: &mut dyn FnMut(usize, usize) -> f64, active: &[usize], base: Vec<f64>| -> Vec<f64> {
            let mut r = base;
            for (k, &i) in active.iter().enumerate() {
                let w = coef(k, i) * model.atom_scales[i];
                for (rv, av) in r.iter_mut().zip(&model.atoms[i]) {
                    *rv -= w * av;
                }
            }
            r
        };
    let residual = |z: &[f64], active: &[usize]| combine(&mut |_, i| z[i], active, y.clone());
    let update =
        |d: &[f64], active: &[usize]| combine(&mut |k, _| -d[k], active, vec![0.0; y.len()]);
    let residual_sq = |z: &[f64], active: &[usize]| {
        let r = residual(z, active);
        dot(&r, &r)
    };

    let mut lambda = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let finish = |z: &[f64], iterations: usize, r2: f64| -> SparseSolution {
        SparseSolution {
            coefficients: z
                .iter()
                .zip(&model.atom_scales)
                .map(|(v, s)| v * s)
                .collect(),
            residual: r2.sqrt(),
            iterations,
        }
    };

    let polished = |z: Vec<f64>, iterations: usize, r2: f64| -> SparseSolution {
        if model.params.polish {
            if let Some((z, r2)) = polish(model, &y, &b, &z, eps2) {
                return finish(&z, iterations, r2);
            }
        }
        finish(&z, iterations, r2)
    };

    if 1.0 <= eps2 || lambda <= 0.0 {
        let r2 = 1.0;
        if r2 <= eps2 {
            return Ok(finish(&z, 0, r2));
        }
        return Err(Error::NotConverged {
            iterations: 0,
            residual: 1.0,
            tolerance: eps,
            best: vec![0.0; n],
        });
    }

    // Enter the atom with the largest correlation.
    let first = argmax_abs(&corr, &is_active, &excluded);
    let mut entering = Some((first, corr[first].signum()));
    let mut iterations = 0;
    let mut just_dropped: Option<usize> = None;
    // Residual of the current iterate and correlations of inactive atoms
    // with it, both advanced along the path and refreshed now and then.
    let mut r = y.clone();
    let refresh = |corr: &mut [f64], r: &[f64], is_active: &[bool]| {
        for j in 0..n {
            if !is_active[j] {
                corr[j] = model.atom_scales[j] * dot(&model.atoms[j], r);
            }
        }
    };
    loop {
        if let Some((j, sign)) = entering.take() {
            let cross: Vec<f64> = active.iter().map(|&i| model.g(i, j)).collect();
            if factor.push(&cross, model.g(j, j)) {
                active.push(j);
                signs.push(sign);
                is_active[j] = true;
            } else {
                excluded[j] = true;
            }
        }
        if let Some(limit) = model.params.max_sparsity {
            if active.len() > limit {
                let r2 = residual_sq(&z, &active);
                return Err(Error::NotConverged {
                    iterations,
                    residual: r2.sqrt(),
                    tolerance: eps,
                    best: finish(&z, iterations, r2).coefficients,
                });
            }
        }
        if iterations >= cap || active.is_empty() {
            let r2 = residual_sq(&z, &active);
            return Err(Error::NotConverged {
                iterations,
                residual: r2.sqrt(),
                tolerance: eps,
                best: finish(&z, iterations, r2).coefficients,
            });
        }
        iterations += 1;

        let direction = factor.solve(&signs);
        let u = update(&direction, &active);
        if iterations % CORRELATION_REFRESH == 0 {
            r = residual(&z, &active);
            refresh(&mut corr, &r, &is_active);
        }
        // Rate at which each inactive correlation falls as lambda does.
        let mut rate = vec![0.0; n];
        for j in 0..n {
            if !is_active[j] {
                rate[j] = model.atom_scales[j] * dot(&model.atoms[j], &u);
            }
        }

        let mut step = lambda;
        let mut event: Option<(bool, usize, f64)> = None;
        for j in 0..n {
            if is_active[j] || excluded[j] || just_dropped == Some(j) {
                continue;
            }
            let (c, a) = (corr[j], rate[j]);
            for (num, den, sign) in [(lambda - c, 1.0 - a, 1.0), (lambda + c, 1.0 + a, -1.0)] {
                if den > 1e-12 {
                    // Atoms already tied with the active set join at step 0.
                    let g = (num / den).max(0.0);
                    if g < step {
                        step = g;
                        event = Some((true, j, sign));
                    }
                }
            }
        }
        for (k, &i) in active.iter().enumerate() {
            if direction[k] != 0.0 {
                let g = -z[i] / direction[k];
                if g > 1e-14 && g < step {
                    step = g;
                    event = Some((false, k, 0.0));
                }
            }
        }

        if let Some(g) = residual_crossing(&r, &u, eps2) {
            if g <= step {
                for (k, &i) in active.iter().enumerate() {
                    z[i] += g * direction[k];
                }
                let r2 = residual_sq(&z, &active);
                return Ok(polished(z, iterations, r2.min(eps2)));
            }
        }

        for (k, &i) in active.iter().enumerate() {
            z[i] += step * direction[k];
        }
        for (rv, uv) in r.iter_mut().zip(&u) {
            *rv -= step * uv;
        }
        for j in 0..n {
            if !is_active[j] {
                corr[j] -= step * rate[j];
            }
        }
        lambda -= step;
        just_dropped = None;
        match event {
            Some((true, j, sign)) => entering = Some((j, sign)),
            Some((false, k, _)) => {
                let i = active.remove(k);
                just_dropped = Some(i);
                signs.remove(k);
                z[i] = 0.0;
                is_active[i] = false;
                factor.remove(k);
                r = residual(&z, &active);
                refresh(&mut corr, &r, &is_active);
            }
            None => {
                // lambda reached zero without meeting the tolerance.
                let r2 = residual_sq(&z, &active);
                if r2 <= eps2 + SQUARED_SLACK {
                    return Ok(polished(z, iterations, r2));
                }
                return Err(Error::NotConverged {
                    iterations,
                    residual: r2.sqrt(),
                    tolerance: eps,
                    best: finish(&z, iterations, r2).coefficients,
                });
            }
        }
        if lambda <= 1e-14 {
            let r2 = residual_sq(&z, &active);
            if r2 <= eps2 + SQUARED_SLACK {
                return Ok(polished(z, iterations, r2));
            }
            return Err(Error::NotConverged {
                iterations,
                residual: r2.sqrt(),
                tolerance: eps,
                best: finish(&z, iterations, r2).coefficients,
            });
        }
    }
}

fn argmax_abs(v: &[f64], skip_a: &[bool], skip_b: &[bool]) -> usize {
    let mut best = None;
    for (i, x) in v.iter().enumerate() {
        if skip_a[i] || skip_b[i] {
            continue;
        }
        match best {
            Some((_, m)) if x.abs() <= m => {}
            _ => best = Some((i, x.abs())),
        }
    }
    best.map_or(0, |(i, _)| i)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrcPrediction {
    pub class: usize,
    /// `|y - D delta_c(x)|` per class, for the normalized sample.
    pub residuals: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// False when the solver stopped short of the tolerance and the best
    /// iterate was used instead.
    pub converged: bool,
}

/// Classifies by minimal class-restricted residual. When the residual
/// tolerance is unreachable (for example with fewer atoms than needed to
/// span the sample) the solver's best iterate is used.
pub fn src_classify(model: &SrcModel, sample: &[f64]) -> Result<SrcPrediction> {
    let (coefficients, converged) = match sparse_solve(model, sample) {
        Ok(s) => (s.coefficients, true),
        Err(Error::NotConverged { best, .. }) => (best, false),
        Err(e) => return Err(e),
    };
    let y_norm = norm(sample);
    let y: Vec<f64> = if y_norm > 0.0 {
        sample.iter().map(|v| v / y_norm).collect()
    } else {
        sample.to_vec()
    };
    let mut recon = vec![vec![0.0; y.len()]; model.class_count];
    for (j, &x) in coefficients.iter().enumerate() {
        if x != 0.0 {
            let r = &mut recon[model.atom_labels[j]];
            for (rv, av) in r.iter_mut().zip(&model.atoms[j]) {
                *rv += x * av;
            }
        }
    }
    let residuals: Vec<f64> = recon
        .iter()
        .map(|r| {
            y.iter()
                .zip(r)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(SrcPrediction {
        class: argmin(&residuals),
        residuals,
        coefficients,
        converged,
    })
}

const MODEL_FORMAT: &str = "vessel-bench/src";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    class_count: usize,
    params: SrcParams,
    atom_labels: Vec<usize>,
    atom_scales: Vec<f64>,
    atoms: Vec<Vec<f64>>,
}

impl SrcModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            class_count: self.class_count,
            params: self.params,
            atom_labels: self.atom_labels.clone(),
            atom_scales: self.atom_scales.clone(),
            atoms: self.atoms.clone(),
        })
        .expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "src model".into(),
            source,
        })?;
        if f.format != MODEL_FORMAT || f.version != MODEL_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format {} v{}",
                f.format, f.version
            )));
        }
        if f.atoms.len() != f.atom_labels.len() || f.atoms.len() != f.atom_scales.len() {
            return Err(Error::invalid("src model atom metadata length mismatch"));
        }
        SrcModel::build(
            f.atoms,
            f.atom_labels,
            f.atom_scales,
            f.class_count,
            f.params,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        v.into_iter().map(|x| x / n).collect()
    }

    fn exact(epsilon: f64) -> SrcParams {
        SrcParams {
            epsilon,
            ..Default::default()
        }
    }

    #[test]
    fn factor_removal_matches_refactorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let vs: Vec<Vec<f64>> = (0..7).map(|_| random_unit(&mut rng, 12)).collect();
        let build = |idx: &[usize]| {
            let mut f = ActiveFactor::new();
            for (p, &i) in idx.iter().enumerate() {
                let cross: Vec<f64> = idx[..p].iter().map(|&j| dot(&vs[j], &vs[i])).collect();
                assert!(f.push(&cross, 1.0));
            }
            f
        };
        for k in 0..7 {
            let mut f = build(&[0, 1, 2, 3, 4, 5, 6]);
            f.remove(k);
            let kept: Vec<usize> = (0..7).filter(|&i| i != k).collect();
            let fresh = build(&kept);
            for (a, b) in f.rows.iter().zip(&fresh.rows) {
                for (x, y) in a.iter().zip(b) {
                    assert!((x - y).abs() < 1e-12, "row mismatch after removing {k}");
                }
            }
        }
    }

    #[test]
    fn fit_normalizes_and_keeps_order() {
        let xs = vec![vec![3.0, 4.0], vec![0.0, 2.0], vec![-1.0, 0.0]];
        let model = src_fit(&xs, &[2, 0, 1], 3, SrcParams::default()).unwrap();
        assert_eq!(model.atoms()[0], vec![0.6, 0.8]);
        assert_eq!(model.atom_labels(), &[2, 0, 1]);
        for a in model.atoms() {
            assert!((norm(a) - 1.0).abs() < 1e-9);
        }
        let scaled: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| x.iter().map(|v| v * 7.5).collect())
            .collect();
        assert_eq!(
            src_fit(&scaled, &[2, 0, 1], 3, SrcParams::default())
                .unwrap()
                .atoms(),
            model.atoms()
        );
        assert!(matches!(
            src_fit(
                &[vec![0.0, 0.0], vec![1.0, 0.0]],
                &[0, 1],
                2,
                SrcParams::default()
            ),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn atom_target_gives_indicator() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let atoms: Vec<Vec<f64>> = (0..8).map(|_| random_unit(&mut rng, 5)).collect();
        let model = src_fit(&atoms, &[0, 1, 2, 3, 0, 1, 2, 3], 4, exact(0.0)).unwrap();
        let sol = sparse_solve(&model, &atoms[5]).unwrap();
        for (j, c) in sol.coefficients.iter().enumerate() {
            let expected = if j == 5 { 1.0 } else { 0.0 };
            assert!((c - expected).abs() < 1e-9, "{:?}", sol.coefficients);
        }
        assert!(sol.residual < 1e-6);

        let pred = src_classify(&model, &atoms[6]).unwrap();
        assert_eq!(pred.class, 2);
        assert!(pred.residuals[2] < 1e-6);
    }

    #[test]
    fn zero_target_and_orthogonal_target() {
        let model = src_fit(
            &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
            &[0, 1],
            2,
            SrcParams::default(),
        )
        .unwrap();
        let sol = sparse_solve(&model, &[0.0, 0.0, 0.0]).unwrap();
        assert!(sol.coefficients.iter().all(|&c| c == 0.0));

        let pred = src_classify(&model, &[0.0, 0.0, 2.0]).unwrap();
        assert_eq!(pred.class, 0);
        assert!(!pred.converged);
        for r in &pred.residuals {
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn infeasible_exact_fit_reports_best_iterate() {
        let model = src_fit(
            &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
            &[0, 1],
            2,
            exact(0.0),
        )
        .unwrap();
        match sparse_solve(&model, &[1.0, 1.0, 1.0]) {
            Err(Error::NotConverged { best, residual, .. }) => {
                let s = 1.0 / 3f64.sqrt();
                assert!((best[0] - s).abs() < 1e-9 && (best[1] - s).abs() < 1e-9);
                assert!((residual - s).abs() < 1e-9);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let model = src_fit(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[0, 1],
            2,
            SrcParams::default(),
        )
        .unwrap();
        assert!(matches!(
            sparse_solve(&model, &[1.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn residual_meets_tolerance_when_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let atoms: Vec<Vec<f64>> = (0..40).map(|_| random_unit(&mut rng, 12)).collect();
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let model = src_fit(&atoms, &labels, 4, SrcParams::default()).unwrap();
        for _ in 0..20 {
            let y = random_unit(&mut rng, 12);
            let sol = sparse_solve(&model, &y).unwrap();
            let recon: Vec<f64> = (0..12)
                .map(|d| {
                    sol.coefficients
                        .iter()
                        .zip(&atoms)
                        .map(|(c, a)| c * a[d])
                        .sum()
                })
                .collect();
            let r = y
                .iter()
                .zip(&recon)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(r <= 0.05 + 1e-9, "residual {r}");
            assert!((r - sol.residual).abs() < 1e-6);
        }
    }

    #[test]
    fn one_sparse_targets_recover_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.gen_range(2..6);
            let dim = 2 * n + rng.gen_range(0..4);
            let atoms: Vec<Vec<f64>> = (0..n).map(|_| random_unit(&mut rng, dim)).collect();
            let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
            let model = src_fit(&atoms, &labels, 2, exact(1e-9)).unwrap();
            let j = rng.gen_range(0..n);
            let scale = rng.gen_range(0.5..3.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let y: Vec<f64> = atoms[j].iter().map(|v| v * scale).collect();
            let sol = sparse_solve(&model, &y).unwrap();
            for (k, c) in sol.coefficients.iter().enumerate() {
                if k == j {
                    assert!((c - scale.signum()).abs() < 1e-6);
                } else {
                    assert!(c.abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn down_weighted_atoms_are_avoided_when_equivalent() {
        // Two copies of the same direction: the cheaper (unscaled) one wins.
        let model = src_fit(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0, 1], 2, exact(1e-9))
            .unwrap()
            .with_extra_atoms(&[vec![1.0, 1e-3]], &[1], 0.5)
            .unwrap();
        let sol = sparse_solve(&model, &[1.0, 0.0]).unwrap();
        assert!(sol.coefficients[0] > 0.99);
        assert!(sol.coefficients[1].abs() < 1e-6);
    }

    #[test]
    fn model_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let atoms: Vec<Vec<f64>> = (0..6).map(|_| random_unit(&mut rng, 4)).collect();
        let model = src_fit(&atoms, &[0, 1, 0, 1, 0, 1], 2, SrcParams::default()).unwrap();
        assert_eq!(SrcModel::from_json(&model.to_json()).unwrap(), model);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn residual_partition_properties(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let atoms: Vec<Vec<f64>> = (0..24).map(|_| random_unit(&mut rng, 8)).collect();
            let labels: Vec<usize> = (0..24).map(|i| i % 4).collect();
            let model = src_fit(&atoms, &labels, 4, SrcParams::default()).unwrap();
            let y: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let pred = src_classify(&model, &y).unwrap();
            // Class-restricted coefficient vectors partition x.
            let mut sum = vec![0.0; 24];
            for c in 0..4 {
                for (j, &x) in pred.coefficients.iter().enumerate() {
                    if labels[j] == c {
                        sum[j] += x;
                    }
                }
            }
            prop_assert_eq!(&sum, &pred.coefficients);
            prop_assert!(pred.residuals[pred.class] <= 1.0 + 1e-12);
        }
    }
}
