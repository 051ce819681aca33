//! Small dense helpers shared by the MPCA fit and the classifiers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::image::ImageChip;

/// Eigen-decomposition of a symmetric matrix with a reproducible layout:
/// eigenvalues descending, each eigenvector (column) signed so that its
/// largest-magnitude component is positive (first index wins ties).
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite entry in scatter matrix".into()));
    }
    let n = m.nrows();
    // Symmetrize to remove accumulated rounding asymmetry.
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let mut col: DVector<f64> = eig.eigenvectors.column(src).into_owned();
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

/// Height x width matrix view of a single-channel chip.
pub fn chip_to_matrix(chip: &ImageChip) -> Result<DMatrix<f64>> {
    chip.require_gray("matrix conversion")?;
    Ok(DMatrix::from_row_slice(
        chip.height(),
        chip.width(),
        chip.data(),
    ))
}

/// Converts back to a chip, clamping into `[0, 1]`.
pub fn matrix_to_chip(m: &DMatrix<f64>) -> Result<ImageChip> {
    let mut data = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            data.push(m[(r, c)]);
        }
    }
    ImageChip::from_clamped(m.ncols(), m.nrows(), 1, data)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_layout_is_canonical() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 5.0, 1.0, 0.0, 1.0, 5.0]);
        let (vals, vecs) = symmetric_eigen(&m).unwrap();
        assert!((vals[0] - 6.0).abs() < 1e-12);
        assert!((vals[1] - 4.0).abs() < 1e-12);
        assert!((vals[2] - 2.0).abs() < 1e-12);
        for j in 0..3 {
            let col = vecs.column(j);
            let pivot = col.iamax();
            assert!(col[pivot] > 0.0);
            let back = &m * col;
            for i in 0..3 {
                assert!((back[i] - vals[j] * col[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_finite_rejected() {
        let m = DMatrix::from_element(2, 2, f64::NAN);
        assert!(matches!(symmetric_eigen(&m), Err(Error::Numeric(_))));
    }
}
