//! Sparse-representation classification of noisy samples drawn from
//! class subspaces.
//!
//! cargo run --example src_classify

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use vessel_bench::classifiers::{src_classify, src_fit, SrcParams};

fn main() -> vessel_bench::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (dim, classes, rank) = (30, 4, 3);
    let mut gauss =
        |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
    // Each class spans a random 3-dimensional subspace.
    let bases: Vec<Vec<Vec<f64>>> = (0..classes)
        .map(|_| (0..rank).map(|_| gauss(dim)).collect())
        .collect();
    let draw = |class: usize, rng: &mut ChaCha8Rng, noise: f64| -> Vec<f64> {
        let mut v = vec![0.0; dim];
        for b in &bases[class] {
            let w: f64 = rng.gen_range(-1.0..1.0);
            v.iter_mut().zip(b).for_each(|(x, y)| *x += w * y);
        }
        v.iter()
            .map(|x| x + noise * rng.gen_range(-1.0..1.0))
            .collect()
    };

    let mut atoms = Vec::new();
    let mut labels = Vec::new();
    for c in 0..classes {
        for _ in 0..8 {
            atoms.push(draw(c, &mut rng, 0.0));
            labels.push(c);
        }
    }
    let model = src_fit(&atoms, &labels, classes, SrcParams::default())?;

    for noise in [0.0, 0.1, 0.3] {
        let mut correct = 0;
        let mut support = 0;
        for i in 0..100 {
            let y = draw(i % classes, &mut rng, noise);
            let p = src_classify(&model, &y)?;
            correct += usize::from(p.class == i % classes);
            support += p.coefficients.iter().filter(|c| **c != 0.0).count();
        }
        println!(
            "noise {noise}: accuracy {:.2}, mean support {:.1} of {} atoms",
            correct as f64 / 100.0,
            support as f64 / 100.0,
            atoms.len()
        );
    }
    Ok(())
}
