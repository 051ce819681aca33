//! One-vs-rest linear SVM on four Gaussian blobs.
//!
//! cargo run --example svm_blobs

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use vessel_bench::classifiers::{svm_predict, svm_train, SvmParams};

fn main() -> vessel_bench::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 0.7).expect("valid sigma");
    let centers = [[2.0, 0.0], [0.0, 2.0], [-2.0, 0.0], [0.0, -2.0]];
    let mut sample = |n: usize| {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let c = i % 4;
            xs.push(vec![
                centers[c][0] + noise.sample(&mut rng),
                centers[c][1] + noise.sample(&mut rng),
            ]);
            ys.push(c);
        }
        (xs, ys)
    };
    let (train_x, train_y) = sample(200);
    let (test_x, test_y) = sample(400);

    for c in [0.01, 1.0, 100.0] {
        let (model, trace) = svm_train(
            &train_x,
            &train_y,
            4,
            &SvmParams {
                c,
                ..Default::default()
            },
        )?;
        let correct = test_x
            .iter()
            .zip(&test_y)
            .filter(|(x, y)| svm_predict(&model, x).map(|p| p == **y).unwrap_or(false))
            .count();
        let epochs: Vec<usize> = trace
            .per_class
            .iter()
            .map(|t| t.primal_best.len())
            .collect();
        println!(
            "C = {c:>6}: test accuracy {:.3}, epochs per class {epochs:?}",
            correct as f64 / test_x.len() as f64
        );
    }
    Ok(())
}
