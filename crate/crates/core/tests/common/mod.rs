//! Independent reference implementations used by the integration suites.
//! Nothing here calls into the code paths it checks.

#![allow(dead_code)]

pub mod checks;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Minimum-l1 solution of `|D x - y| <= eps` by enumerating every support of
/// size up to `dim` and every sign pattern on it. For support `S` and signs
/// `s` the stationary point is `x = x_ls - t G^-1 s` with `t` chosen so the
/// residual equals `eps`; sign-consistent candidates are all feasible.
/// Returns `(coefficients, l1)`.
pub fn l1_by_enumeration(atoms: &[Vec<f64>], y: &[f64], eps: f64) -> Option<(Vec<f64>, f64)> {
    let n = atoms.len();
    let dim = y.len();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        if support.len() > dim {
            continue;
        }
        let d = DMatrix::from_fn(dim, support.len(), |r, c| atoms[support[c]][r]);
        let g = d.transpose() * &d;
        let Some(chol) = g.clone().cholesky() else {
            continue;
        };
        let yv = DVector::from_column_slice(y);
        let x_ls = chol.solve(&(d.transpose() * &yv));
        let r_ls = (&d * &x_ls - &yv).norm_squared();
        if r_ls > eps * eps + 1e-15 {
            continue;
        }
        let m = support.len();
        for pattern in 0u32..(1 << m) {
            let s = DVector::from_fn(m, |k, _| if pattern & (1 << k) != 0 { -1.0 } else { 1.0 });
            let gs = chol.solve(&s);
            let q = s.dot(&gs);
            let t = ((eps * eps - r_ls).max(0.0) / q).sqrt();
            let x = &x_ls - &gs * t;
            if x.iter().zip(s.iter()).any(|(v, sg)| v * sg <= 0.0) {
                continue;
            }
            let l1: f64 = x.iter().map(|v| v.abs()).sum();
            if best.as_ref().is_none_or(|b| l1 < b.1) {
                let mut full = vec![0.0; n];
                for (k, &j) in support.iter().enumerate() {
                    full[j] = x[k];
                }
                best = Some((full, l1));
            }
        }
    }
    best
}

/// Brute-force orientation voting: every pixel scans every bin and
/// contributes `1 - distance / width` when within one bin width of the
/// bin center (circular distance).
pub fn hog_cell_oracle(mag: &[f64], ori: &[f64], bins: usize, range: f64) -> Vec<f64> {
    let width = range / bins as f64;
    let mut hist = vec![0.0; bins];
    for (m, t) in mag.iter().zip(ori) {
        for (b, h) in hist.iter_mut().enumerate() {
            let center = (b as f64 + 0.5) * width;
            let raw = (t - center).abs();
            let dist = raw.min(range - raw);
            if dist < width {
                *h += m * (1.0 - dist / width);
            }
        }
    }
    hist
}

/// Nested-loop projection `(U2 kron U1) vec(X - mean)` returned in the
/// row-major order of the core `U1 (X - mean) U2^T`.
pub fn kron_projection(
    u1: &DMatrix<f64>,
    u2: &DMatrix<f64>,
    x: &DMatrix<f64>,
    mean: &DMatrix<f64>,
) -> Vec<f64> {
    let (p1, i1) = u1.shape();
    let (p2, i2) = u2.shape();
    // Column-major vec of the centered chip.
    let mut v = vec![0.0; i1 * i2];
    for c in 0..i2 {
        for r in 0..i1 {
            v[c * i1 + r] = x[(r, c)] - mean[(r, c)];
        }
    }
    // Explicit Kronecker product K = U2 (x) U1, of shape (p1 p2) x (i1 i2).
    let mut k = vec![vec![0.0; i1 * i2]; p1 * p2];
    for a in 0..p2 {
        for b in 0..i2 {
            for c in 0..p1 {
                for d in 0..i1 {
                    k[a * p1 + c][b * i1 + d] = u2[(a, b)] * u1[(c, d)];
                }
            }
        }
    }
    let col_major: Vec<f64> = k
        .iter()
        .map(|row| row.iter().zip(&v).map(|(p, q)| p * q).sum())
        .collect();
    // Column-major p1 x p2 core back to row-major.
    let mut out = vec![0.0; p1 * p2];
    for r in 0..p1 {
        for c in 0..p2 {
            out[r * p2 + c] = col_major[c * p1 + r];
        }
    }
    out
}

/// Bilinear read used by the LBP oracle, written without the library's lerp.
fn bilinear(img: &[f64], w: usize, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as usize, y0 as usize);
    let at = |xx: usize, yy: usize| img[yy * w + xx];
    let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
    let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
    at(x0, y0) * (1.0 - fx) * (1.0 - fy)
        + at(x1, y0) * fx * (1.0 - fy)
        + at(x0, y1) * (1.0 - fx) * fy
        + at(x1, y1) * fx * fy
}

/// LBP code by direct circular sampling.
pub fn lbp_oracle(img: &[f64], w: usize, x: usize, y: usize, radius: f64, p: usize) -> u32 {
    let center = img[y * w + x];
    let mut code = 0;
    for k in 0..p {
        let a = 2.0 * std::f64::consts::PI * k as f64 / p as f64;
        let mut sx = x as f64 + radius * a.cos();
        let mut sy = y as f64 - radius * a.sin();
        if (sx - sx.round()).abs() < 1e-9 {
            sx = sx.round();
        }
        if (sy - sy.round()).abs() < 1e-9 {
            sy = sy.round();
        }
        if bilinear(img, w, sx, sy) >= center {
            code |= 1 << k;
        }
    }
    code
}

fn is_uniform(code: u32, p: usize) -> bool {
    let mut changes = 0;
    for k in 0..p {
        let a = (code >> k) & 1;
        let b = (code >> ((k + 1) % p)) & 1;
        if a != b {
            changes += 1;
        }
    }
    changes <= 2
}

/// Per-pixel simulation of the descend-on-non-uniform hierarchy. Returns
/// retirement counts per scale followed by the catch-all count.
pub fn hmlbp_retirement_oracle(
    img: &[f64],
    w: usize,
    h: usize,
    radii: &[f64],
    p: usize,
) -> Vec<u64> {
    let margin = radii[0].ceil() as usize;
    let mut counts = vec![0u64; radii.len() + 1];
    for y in margin..h - margin {
        for x in margin..w - margin {
            let level = radii
                .iter()
                .position(|&r| is_uniform(lbp_oracle(img, w, x, y, r, p), p))
                .unwrap_or(radii.len());
            counts[level] += 1;
        }
    }
    counts
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Vec<f64> {
    (0..w * h).map(|_| rng.gen::<f64>()).collect()
}

/// Exhaustive search over supports of size at most `max_support`: the
/// sparsest support whose least-squares residual meets `eps`, ties broken by
/// residual. Returns full-length coefficients.
pub fn sparsest_support(
    atoms: &[Vec<f64>],
    y: &[f64],
    eps: f64,
    max_support: usize,
) -> Option<Vec<f64>> {
    let n = atoms.len();
    let dim = y.len();
    for size in 1..=max_support {
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let d = DMatrix::from_fn(dim, size, |r, c| atoms[idx[c]][r]);
            let yv = DVector::from_column_slice(y);
            if let Some(chol) = (d.transpose() * &d).cholesky() {
                let x = chol.solve(&(d.transpose() * &yv));
                let r = (&d * &x - &yv).norm();
                if r <= eps && best.as_ref().is_none_or(|b| r < b.0) {
                    let mut full = vec![0.0; n];
                    for (k, &j) in idx.iter().enumerate() {
                        full[j] = x[k];
                    }
                    best = Some((r, full));
                }
            }
            // Next combination in lexicographic order.
            let mut k = size;
            while k > 0 && idx[k - 1] == n - size + k - 1 {
                k -= 1;
            }
            if k == 0 {
                break;
            }
            idx[k - 1] += 1;
            for m in k..size {
                idx[m] = idx[m - 1] + 1;
            }
        }
        if let Some((_, x)) = best {
            return Some(x);
        }
    }
    None
}

/// Centered-difference gradients with edge replication, in degrees on
/// `[0, 180)`, computed from a row-major gray buffer.
pub fn gradient_oracle(img: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let px = |x: isize, y: isize| {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        img[y * w + x]
    };
    let mut mag = Vec::new();
    let mut ori = Vec::new();
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (px(x + 1, y) - px(x - 1, y)) / 2.0;
            let gy = (px(x, y + 1) - px(x, y - 1)) / 2.0;
            mag.push(gx.hypot(gy));
            let t = gy.atan2(gx).to_degrees();
            ori.push(t.rem_euclid(180.0) % 180.0);
        }
    }
    (mag, ori)
}

pub fn checkerboard(w: usize, h: usize, period: usize) -> Vec<f64> {
    (0..w * h)
        .map(|i| {
            if ((i % w) / period + (i / w) / period).is_multiple_of(2) {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}
