//! Multilinear PCA on 2-mode (matrix) samples.
//!
//! Mode 1 indexes rows (image height) and mode 2 columns (image width). A
//! fitted model holds one projection per mode with orthonormal rows; the
//! feature of a chip is the projected core `U1 (X - mean) U2^T`.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ExtractorKind, FeatureVector};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpcaParams {
    /// Per-mode share of eigenvalue mass to retain, in percent.
    pub energy_q: f64,
    pub max_iterations: usize,
    /// Stop when captured scatter improves by less than this fraction.
    pub tol: f64,
}

impl Default for MpcaParams {
    fn default() -> Self {
        Self {
            energy_q: 97.0,
            max_iterations: 10,
            tol: 1e-6,
        }
    }
}

impl MpcaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.energy_q > 0.0 && self.energy_q <= 100.0) {
            return Err(Error::invalid(format!(
                "energy_q {} outside (0, 100]",
                self.energy_q
            )));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid("tol must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcaModel {
    /// `[U1, U2]`, each `P_n x I_n` with orthonormal rows.
    pub mode_projections: [DMatrix<f64>; 2],
    pub mean: DMatrix<f64>,
    pub retained_dims: (usize, usize),
    pub energy_q: f64,
    /// Alternating-update sweeps actually run.
    pub iterations: usize,
}

/// Captured scatter before the first sweep and after each sweep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitTrace {
    pub captured: Vec<f64>,
    pub total_scatter: f64,
    /// Eigenvalues of each mode's total scatter (full-projection start).
    pub initial_eigenvalues: [Vec<f64>; 2],
}

/// Mode-n unfolding of a set of equally sized matrices viewed as an
/// `I1 x I2 x M` tensor. Columns enumerate the remaining indices with the
/// lower mode varying fastest, then the sample index.
pub fn mode_unfold(samples: &[DMatrix<f64>], mode: usize) -> Result<DMatrix<f64>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("empty sample set"))?;
    let (i1, i2) = first.shape();
    if samples.iter().any(|s| s.shape() != (i1, i2)) {
        return Err(Error::invalid("samples differ in shape"));
    }
    let m = samples.len();
    match mode {
        1 => Ok(DMatrix::from_fn(i1, i2 * m, |r, c| {
            samples[c / i2][(r, c % i2)]
        })),
        2 => Ok(DMatrix::from_fn(i2, i1 * m, |r, c| {
            samples[c / i1][(c % i1, r)]
        })),
        _ => Err(Error::invalid(format!("mode {mode} not in {{1, 2}}"))),
    }
}

/// Smallest count of leading eigenvalues holding `q` percent of the mass.
fn dims_for_energy(eigenvalues: &[f64], q: f64) -> usize {
    let clipped: Vec<f64> = eigenvalues.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return 1;
    }
    let target = q / 100.0 * total;
    let mut acc = 0.0;
    for (i, v) in clipped.iter().enumerate() {
        acc += v;
        if acc >= target * (1.0 - 1e-12) {
            return i + 1;
        }
    }
    clipped.len()
}

fn top_rows(vectors: &DMatrix<f64>, count: usize) -> DMatrix<f64> {
    vectors.columns(0, count).transpose()
}

fn captured(centered: &[DMatrix<f64>], u1: &DMatrix<f64>, u2: &DMatrix<f64>) -> f64 {
    centered
        .iter()
        .map(|x| (u1 * x * u2.transpose()).norm_squared())
        .sum()
}

pub fn mpca_fit(samples: &[DMatrix<f64>], params: &MpcaParams) -> Result<(MpcaModel, FitTrace)> {
    params.validate()?;
    if samples.len() < 2 {
        return Err(Error::invalid("MPCA needs at least 2 samples"));
    }
    let (i1, i2) = samples[0].shape();
    if samples.iter().any(|s| s.shape() != (i1, i2)) {
        return Err(Error::invalid("samples differ in shape"));
    }
    if samples.iter().any(|s| s.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numeric("non-finite sample value".into()));
    }
    let m = samples.len() as f64;
    let mut mean = DMatrix::zeros(i1, i2);
    for s in samples {
        mean += s;
    }
    mean /= m;
    let centered: Vec<DMatrix<f64>> = samples.iter().map(|s| s - &mean).collect();
    let total_scatter: f64 = centered.iter().map(|x| x.norm_squared()).sum();

    let mut s1 = DMatrix::zeros(i1, i1);
    let mut s2 = DMatrix::zeros(i2, i2);
    for x in &centered {
        s1 += x * x.transpose();
        s2 += x.transpose() * x;
    }
    let (ev1, vec1) = symmetric_eigen(&s1)?;
    let (ev2, vec2) = symmetric_eigen(&s2)?;
    let p1 = dims_for_energy(&ev1, params.energy_q);
    let p2 = dims_for_energy(&ev2, params.energy_q);
    let mut u1 = top_rows(&vec1, p1);
    let mut u2 = top_rows(&vec2, p2);

    let mut trace = FitTrace {
        captured: vec![captured(&centered, &u1, &u2)],
        total_scatter,
        initial_eigenvalues: [ev1, ev2],
    };
    let mut iterations = 0;
    while iterations < params.max_iterations {
        let before = *trace.captured.last().unwrap();
        if before <= 0.0 {
            break;
        }
        // Mode 1 conditioned on the current mode-2 projection.
        let mut cond1 = DMatrix::zeros(i1, i1);
        for x in &centered {
            let y = x * u2.transpose();
            cond1 += &y * y.transpose();
        }
        u1 = top_rows(&symmetric_eigen(&cond1)?.1, p1);
        let mut cond2 = DMatrix::zeros(i2, i2);
        for x in &centered {
            let y = &u1 * x;
            cond2 += y.transpose() * &y;
        }
        u2 = top_rows(&symmetric_eigen(&cond2)?.1, p2);
        iterations += 1;
        let after = captured(&centered, &u1, &u2);
        trace.captured.push(after);
        if after - before < params.tol * before {
            break;
        }
    }
    let model = MpcaModel {
        mode_projections: [u1, u2],
        mean,
        retained_dims: (p1, p2),
        energy_q: params.energy_q,
        iterations,
    };
    Ok((model, trace))
}

impl MpcaModel {
    pub fn input_dims(&self) -> (usize, usize) {
        self.mean.shape()
    }

    pub fn feature_dim(&self) -> usize {
        self.retained_dims.0 * self.retained_dims.1
    }

    pub fn project(&self, chip: &DMatrix<f64>) -> Result<FeatureVector> {
        if chip.shape() != self.mean.shape() {
            return Err(Error::invalid(format!(
                "chip shape {:?} does not match model input {:?}",
                chip.shape(),
                self.mean.shape()
            )));
        }
        let [u1, u2] = &self.mode_projections;
        let core = u1 * (chip - &self.mean) * u2.transpose();
        let mut values = Vec::with_capacity(core.len());
        for r in 0..core.nrows() {
            for c in 0..core.ncols() {
                values.push(core[(r, c)]);
            }
        }
        Ok(FeatureVector::new(ExtractorKind::Mpca, values))
    }

    pub fn reconstruct(&self, feature: &[f64]) -> Result<DMatrix<f64>> {
        let (p1, p2) = self.retained_dims;
        if feature.len() != p1 * p2 {
            return Err(Error::invalid(format!(
                "feature length {} does not match core {p1}x{p2}",
                feature.len()
            )));
        }
        let core = DMatrix::from_row_slice(p1, p2, feature);
        let [u1, u2] = &self.mode_projections;
        Ok(u1.transpose() * core * u2 + &self.mean)
    }
}

pub fn mpca_project(chip: &DMatrix<f64>, model: &MpcaModel) -> Result<FeatureVector> {
    model.project(chip)
}

pub fn mpca_reconstruct(feature: &[f64], model: &MpcaModel) -> Result<DMatrix<f64>> {
    model.reconstruct(feature)
}

const MODEL_FORMAT: &str = "vessel-bench/mpca";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MatrixDump {
    rows: usize,
    cols: usize,
    /// Row-major.
    data: Vec<f64>,
}

impl MatrixDump {
    fn from(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().iter().copied().collect(),
        }
    }

    fn into_matrix(self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::invalid("matrix dump length mismatch"));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    input_dims: (usize, usize),
    retained_dims: (usize, usize),
    energy_q: f64,
    iterations: usize,
    mean: MatrixDump,
    mode_1: MatrixDump,
    mode_2: MatrixDump,
}

impl MpcaModel {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            input_dims: self.input_dims(),
            retained_dims: self.retained_dims,
            energy_q: self.energy_q,
            iterations: self.iterations,
            mean: MatrixDump::from(&self.mean),
            mode_1: MatrixDump::from(&self.mode_projections[0]),
            mode_2: MatrixDump::from(&self.mode_projections[1]),
        };
        serde_json::to_string(&file).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "mpca model".into(),
            source,
        })?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format {} v{}",
                file.format, file.version
            )));
        }
        let model = MpcaModel {
            mean: file.mean.into_matrix()?,
            mode_projections: [file.mode_1.into_matrix()?, file.mode_2.into_matrix()?],
            retained_dims: file.retained_dims,
            energy_q: file.energy_q,
            iterations: file.iterations,
        };
        let (p1, p2) = model.retained_dims;
        if model.mode_projections[0].shape() != (p1, file.input_dims.0)
            || model.mode_projections[1].shape() != (p2, file.input_dims.1)
            || model.mean.shape() != file.input_dims
        {
            return Err(Error::invalid("mpca model dimensions are inconsistent"));
        }
        Ok(model)
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
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_samples(n: usize, rows: usize, cols: usize, seed: u64) -> Vec<DMatrix<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| DMatrix::from_fn(rows, cols, |_, _| rng.gen::<f64>()))
            .collect()
    }

    fn orthonormal_rows(u: &DMatrix<f64>) -> f64 {
        let g = u * u.transpose();
        (g - DMatrix::identity(u.nrows(), u.nrows())).amax()
    }

    fn training_error(model: &MpcaModel, samples: &[DMatrix<f64>]) -> f64 {
        samples
            .iter()
            .map(|s| {
                let f = model.project(s).unwrap();
                (model.reconstruct(&f.values).unwrap() - s).norm_squared()
            })
            .sum()
    }

    #[test]
    fn unfold_examples() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(mode_unfold(std::slice::from_ref(&x), 1).unwrap(), x);
        assert_eq!(mode_unfold(std::slice::from_ref(&x), 2).unwrap(), x.transpose());
        assert!(mode_unfold(&[], 1).is_err());
        assert!(mode_unfold(&[x], 3).is_err());
    }

    #[test]
    fn unfold_matches_index_arithmetic() {
        let samples = random_samples(2, 3, 4, 1);
        let u1 = mode_unfold(&samples, 1).unwrap();
        let u2 = mode_unfold(&samples, 2).unwrap();
        assert_eq!(u1.shape(), (3, 8));
        assert_eq!(u2.shape(), (4, 6));
        for m in 0..2 {
            for i in 0..3 {
                for j in 0..4 {
                    assert_eq!(u1[(i, j + 4 * m)], samples[m][(i, j)]);
                    assert_eq!(u2[(j, i + 3 * m)], samples[m][(i, j)]);
                }
            }
        }
    }

    #[test]
    fn full_energy_is_lossless() {
        let samples = random_samples(12, 6, 5, 2);
        let (model, trace) = mpca_fit(
            &samples,
            &MpcaParams {
                energy_q: 100.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(model.retained_dims, (6, 5));
        for s in &samples {
            let f = model.project(s).unwrap();
            let back = model.reconstruct(&f.values).unwrap();
            assert!((back - s).amax() < 1e-8);
        }
        assert!((trace.captured.last().unwrap() - trace.total_scatter).abs() < 1e-8);
    }

    #[test]
    fn known_multilinear_rank_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (rows, cols) = (8, 7);
        let basis_a: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..rows).map(|_| rng.gen::<f64>() - 0.5).collect())
            .collect();
        let basis_b: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..cols).map(|_| rng.gen::<f64>() - 0.5).collect())
            .collect();
        let samples: Vec<DMatrix<f64>> = (0..30)
            .map(|_| {
                let c: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
                let a: Vec<f64> = (0..rows)
                    .map(|i| c[0] * basis_a[0][i] + c[1] * basis_a[1][i])
                    .collect();
                let b: Vec<f64> = (0..cols)
                    .map(|j| c[2] * basis_b[0][j] + c[3] * basis_b[1][j])
                    .collect();
                DMatrix::from_fn(rows, cols, |i, j| a[i] * b[j])
            })
            .collect();
        let (model, _) = mpca_fit(
            &samples,
            &MpcaParams {
                energy_q: 99.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(model.retained_dims, (2, 2));
        assert!(training_error(&model, &samples) < 1e-8);
    }

    #[test]
    fn identical_samples_degenerate() {
        let x = DMatrix::from_fn(4, 3, |i, j| (i + j) as f64 / 10.0);
        let (model, trace) = mpca_fit(&[x.clone(), x.clone()], &MpcaParams::default()).unwrap();
        assert_eq!(model.retained_dims, (1, 1));
        assert!(trace.initial_eigenvalues[0].iter().all(|v| v.abs() < 1e-12));
        assert!(training_error(&model, &[x]) < 1e-20);
    }

    #[test]
    fn fit_errors() {
        let samples = random_samples(1, 3, 3, 4);
        assert!(matches!(
            mpca_fit(&samples, &MpcaParams::default()),
            Err(Error::InvalidArgument(_))
        ));
        let mut samples = random_samples(3, 3, 3, 4);
        samples[1][(0, 0)] = f64::INFINITY;
        assert!(matches!(
            mpca_fit(&samples, &MpcaParams::default()),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn captured_scatter_monotone_and_rows_orthonormal() {
        let samples = random_samples(40, 10, 9, 5);
        for q in [60.0, 80.0, 95.0] {
            let (model, trace) = mpca_fit(
                &samples,
                &MpcaParams {
                    energy_q: q,
                    max_iterations: 20,
                    tol: 0.0,
                },
            )
            .unwrap();
            for w in trace.captured.windows(2) {
                assert!(w[1] >= w[0] * (1.0 - 1e-12), "{:?}", trace.captured);
            }
            for u in &model.mode_projections {
                assert!(orthonormal_rows(u) < 1e-8);
            }
        }
    }

    #[test]
    fn error_non_increasing_with_energy() {
        let samples = random_samples(30, 8, 8, 6);
        let mut last = f64::INFINITY;
        for q in [80.0, 90.0, 95.0, 99.0, 100.0] {
            let (model, _) = mpca_fit(
                &samples,
                &MpcaParams {
                    energy_q: q,
                    ..Default::default()
                },
            )
            .unwrap();
            let err = training_error(&model, &samples);
            assert!(err <= last + 1e-9, "q={q}: {err} > {last}");
            last = err;
        }
        assert!(last < 1e-8);
    }

    #[test]
    fn projection_examples() {
        let samples = random_samples(15, 6, 6, 7);
        let (model, _) = mpca_fit(
            &samples,
            &MpcaParams {
                energy_q: 90.0,
                ..Default::default()
            },
        )
        .unwrap();
        let zero = model.project(&model.mean).unwrap();
        assert!(zero.values.iter().all(|v| v.abs() < 1e-12));
        let back = model.reconstruct(&vec![0.0; model.feature_dim()]).unwrap();
        assert_eq!(back, model.mean);
        assert!(model.project(&DMatrix::zeros(5, 6)).is_err());
        assert!(model.reconstruct(&[1.0]).is_err());

        // Affine in the chip: project(a X + (1 - a) mean) = a project(X).
        let x = &samples[3];
        let fx = model.project(x).unwrap();
        for a in [0.0, 0.3, 1.0] {
            let mixed = x * a + &model.mean * (1.0 - a);
            let f = model.project(&mixed).unwrap();
            for (p, q) in f.values.iter().zip(&fx.values) {
                assert!((p - a * q).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn discarded_mass_predicts_error() {
        // Mode 2 is exactly rank 3, mode 1 has a decaying spectrum; with the
        // mode-2 projection lossless the error is the discarded mode-1 mass.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (rows, cols) = (10, 8);
        let right: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..cols).map(|_| rng.gen::<f64>() - 0.5).collect())
            .collect();
        let samples: Vec<DMatrix<f64>> = (0..60)
            .map(|_| {
                let left = DMatrix::from_fn(rows, 3, |i, _| {
                    (rng.gen::<f64>() - 0.5) * 0.7f64.powi(i as i32)
                });
                let right = DMatrix::from_fn(3, cols, |k, j| right[k][j]);
                left * right
            })
            .collect();
        let (model, trace) = mpca_fit(
            &samples,
            &MpcaParams {
                energy_q: 90.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(model.retained_dims.1 <= 3);
        let err = training_error(&model, &samples);
        let p1 = model.retained_dims.0;
        let discarded: f64 = trace.initial_eigenvalues[0][p1..]
            .iter()
            .map(|v| v.max(0.0))
            .sum();
        assert!(discarded > 0.0);
        assert!(
            (err - discarded).abs() <= 0.05 * discarded,
            "err {err} vs discarded {discarded}"
        );
    }

    #[test]
    fn model_json_round_trip() {
        let samples = random_samples(10, 5, 4, 8);
        let (model, _) = mpca_fit(&samples, &MpcaParams::default()).unwrap();
        let back = MpcaModel::from_json(&model.to_json()).unwrap();
        assert_eq!(back, model);
        assert!(MpcaModel::from_json("{\"format\":\"x\"}").is_err());
    }
}
