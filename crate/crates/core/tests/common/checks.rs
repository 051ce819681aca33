//! Checks shared by the oracle suite and the acceptance runner. Each
//! returns a short summary on success and a description of the first
//! mismatch otherwise.

use super::*;
use rand::Rng;
use vessel_bench::classifiers::{sparse_solve, src_fit, svm_train, SrcParams, SvmParams};
use vessel_bench::features::hog::{cell_histograms, gradients, hog_descriptor, HogParams};
use vessel_bench::features::lbp::{hmlbp_counts, is_uniform, HmlbpParams};
use vessel_bench::features::mpca::{mpca_fit, MpcaParams};
use vessel_bench::ImageChip;

pub type Check = Result<String, String>;

pub fn sparse_support_oracle(instances: usize) -> Check {
    let mut rng = rng(2024);
    let eps = 1e-6;
    for trial in 0..instances {
        let atoms: Vec<Vec<f64>> = (0..6).map(|_| random_unit(&mut rng, 4)).collect();
        let i = rng.gen_range(0..6);
        let j = (i + rng.gen_range(1..6)) % 6;
        let mut coef = || rng.gen_range(0.5..1.5) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let (a, b) = (coef(), coef());
        let y: Vec<f64> = (0..4).map(|d| a * atoms[i][d] + b * atoms[j][d]).collect();
        let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y_unit: Vec<f64> = y.iter().map(|v| v / n).collect();

        let model = src_fit(
            &atoms,
            &[0, 1, 2, 3, 0, 1],
            4,
            SrcParams {
                epsilon: eps,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let sol = sparse_solve(&model, &y).map_err(|e| format!("instance {trial}: {e}"))?;
        let oracle = sparsest_support(&atoms, &y_unit, eps, 2)
            .ok_or(format!("instance {trial}: oracle found no support"))?;
        for k in 0..6 {
            if (sol.coefficients[k] != 0.0) != (oracle[k] != 0.0)
                || (sol.coefficients[k] - oracle[k]).abs() > 1e-6
            {
                return Err(format!(
                    "instance {trial}: {:?} vs oracle {:?}",
                    sol.coefficients, oracle
                ));
            }
        }
    }
    Ok(format!("{instances} instances"))
}

pub fn mpca_kronecker_oracle(chips: usize) -> Check {
    let mut rng = rng(11);
    let (rows, cols) = (9, 7);
    let train: Vec<DMatrix<f64>> = (0..30)
        .map(|_| DMatrix::from_fn(rows, cols, |_, _| rng.gen::<f64>()))
        .collect();
    let (model, _) = mpca_fit(
        &train,
        &MpcaParams {
            energy_q: 90.0,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for _ in 0..chips {
        let x = DMatrix::from_fn(rows, cols, |_, _| rng.gen::<f64>());
        let got = model.project(&x).map_err(|e| e.to_string())?;
        let want = kron_projection(
            &model.mode_projections[0],
            &model.mode_projections[1],
            &x,
            &model.mean,
        );
        if got.values.len() != want.len() {
            return Err(format!("length {} vs {}", got.values.len(), want.len()));
        }
        for (g, w) in got.values.iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
    }
    if worst > 1e-8 {
        return Err(format!("max deviation {worst:e}"));
    }
    Ok(format!("{chips} chips, max deviation {worst:.1e}"))
}

pub fn hog_vote_oracle(cells: usize) -> Check {
    let mut rng = rng(5);
    let params = HogParams {
        cell_size: 8,
        ..Default::default()
    };
    for trial in 0..cells {
        let img = random_image(&mut rng, 8, 8);
        let chip = ImageChip::new(8, 8, 1, img.clone()).map_err(|e| e.to_string())?;
        let field = gradients(&chip, false).map_err(|e| e.to_string())?;
        let grid = cell_histograms(&field, &params).map_err(|e| e.to_string())?;
        let (mag, ori) = gradient_oracle(&img, 8, 8);
        let want = hog_cell_oracle(&mag, &ori, params.bin_count, 180.0);
        if grid.cell(0, 0) != want.as_slice() {
            return Err(format!(
                "cell {trial}: {:?} vs oracle {:?}",
                grid.cell(0, 0),
                want
            ));
        }
    }
    Ok(format!("{cells} cells"))
}

pub fn hmlbp_hierarchy_oracle(random_images: usize) -> Check {
    let params = HmlbpParams::default();
    let radii: Vec<f64> = params.scales.iter().map(|s| s.radius).collect();
    let p = params.samples();
    let mut rng = rng(9);
    let mut cases = vec![("checkerboard".to_string(), checkerboard(32, 32, 1))];
    for k in 0..random_images {
        cases.push((format!("random image {k}"), random_image(&mut rng, 24, 24)));
    }
    for (name, img) in &cases {
        let side = (img.len() as f64).sqrt() as usize;
        let chip = ImageChip::new(side, side, 1, img.clone()).map_err(|e| e.to_string())?;
        let counts = hmlbp_counts(&chip, &params).map_err(|e| e.to_string())?;
        let mut got = counts.retired.clone();
        got.push(counts.catch_all);
        let want = hmlbp_retirement_oracle(img, side, side, &radii, p);
        if got != want {
            return Err(format!("{name}: {got:?} vs oracle {want:?}"));
        }
    }
    Ok(format!("checkerboard + {random_images} random images"))
}

pub fn mpca_full_energy_reconstruction() -> Check {
    let mut rng = rng(3);
    let train: Vec<DMatrix<f64>> = (0..12)
        .map(|_| DMatrix::from_fn(8, 6, |_, _| rng.gen::<f64>()))
        .collect();
    let (model, _) = mpca_fit(
        &train,
        &MpcaParams {
            energy_q: 100.0,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for x in &train {
        let back = model
            .reconstruct(&model.project(x).map_err(|e| e.to_string())?.values)
            .map_err(|e| e.to_string())?;
        worst = worst.max((back - x).abs().max());
    }
    if worst > 1e-8 {
        return Err(format!("reconstruction error {worst:e}"));
    }
    Ok(format!("max error {worst:.1e}"))
}

pub fn mpca_scatter_monotone() -> Check {
    let mut rng = rng(4);
    let train: Vec<DMatrix<f64>> = (0..40)
        .map(|_| DMatrix::from_fn(10, 12, |_, _| rng.gen::<f64>()))
        .collect();
    let (_, trace) = mpca_fit(
        &train,
        &MpcaParams {
            energy_q: 80.0,
            max_iterations: 10,
            tol: 0.0,
        },
    )
    .map_err(|e| e.to_string())?;
    for w in trace.captured.windows(2) {
        if w[1] < w[0] * (1.0 - 1e-12) {
            return Err(format!("captured scatter fell: {:?}", trace.captured));
        }
    }
    Ok(format!("{} iterations", trace.captured.len()))
}

pub fn svm_objective_monotone() -> Check {
    let mut rng = rng(6);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..120 {
        let class = i % 4;
        xs.push(
            (0..6)
                .map(|d| if d == class { 1.0 } else { 0.0 } + rng.gen_range(-0.8..0.8))
                .collect::<Vec<f64>>(),
        );
        ys.push(class);
    }
    let (_, trace) = svm_train(&xs, &ys, 4, &SvmParams::default()).map_err(|e| e.to_string())?;
    let mut epochs = 0;
    for (k, t) in trace.per_class.iter().enumerate() {
        epochs += t.primal_best.len();
        for w in t.primal_best.windows(2) {
            if w[1] > w[0] {
                return Err(format!("class {k}: primal rose {} -> {}", w[0], w[1]));
            }
        }
        for w in t.dual.windows(2) {
            if w[1] < w[0] - 1e-12 * w[0].abs().max(1.0) {
                return Err(format!("class {k}: dual fell {} -> {}", w[0], w[1]));
            }
        }
    }
    Ok(format!("{epochs} epochs"))
}

pub fn hog_scale_invariance() -> Check {
    let mut rng = rng(8);
    let img = ImageChip::new(
        64,
        64,
        1,
        random_image(&mut rng, 64, 64)
            .iter()
            .map(|v| 0.1 + 0.5 * v)
            .collect(),
    )
    .map_err(|e| e.to_string())?;
    let scaled = img.map(|v| 1.6 * v);
    let params = HogParams::default();
    let a = hog_descriptor(&img, &params).map_err(|e| e.to_string())?;
    let b = hog_descriptor(&scaled, &params).map_err(|e| e.to_string())?;
    let worst = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    if worst > 1e-6 {
        return Err(format!("max deviation {worst:e}"));
    }
    Ok(format!("max deviation {worst:.1e}"))
}

pub fn hmlbp_mass_conservation() -> Check {
    let mut rng = rng(10);
    let params = HmlbpParams::default();
    for k in 0..5 {
        let img =
            ImageChip::new(40, 30, 1, random_image(&mut rng, 40, 30)).map_err(|e| e.to_string())?;
        let c = hmlbp_counts(&img, &params).map_err(|e| e.to_string())?;
        let total: u64 = c.counts.iter().sum();
        let margin = 3;
        let expected = ((40 - 2 * margin) * (30 - 2 * margin)) as u64;
        if total != expected
            || c.evaluated != expected
            || c.retired.iter().sum::<u64>() + c.catch_all != expected
        {
            return Err(format!(
                "image {k}: total {total}, evaluated {}, expected {expected}",
                c.evaluated
            ));
        }
    }
    Ok("5 images".into())
}

pub fn uniform_code_count() -> Check {
    let count = (0u32..256).filter(|&c| is_uniform(c, 8)).count();
    if count != 58 {
        return Err(format!("{count} uniform codes"));
    }
    Ok("58 uniform codes".into())
}
