//! HOG descriptors of the four classes and their pairwise distances.
//!
//! cargo run --example hog

use vessel_bench::dataset::VesselClass;
use vessel_bench::features::hog::{hog_descriptor, HogParams};
use vessel_bench::synth::{render_gray_chip, sample_scene, RenderConstants};

fn main() -> vessel_bench::Result<()> {
    let params = HogParams::default();
    let constants = RenderConstants::default();
    let mut means = Vec::new();
    for class in VesselClass::ALL {
        let mut mean: Vec<f64> = Vec::new();
        let n = 20;
        for i in 0..n {
            let chip = render_gray_chip(&sample_scene(3, class, i), 128, &constants)?;
            let d = hog_descriptor(&chip, &params)?.values;
            mean.resize(d.len(), 0.0);
            mean.iter_mut()
                .zip(&d)
                .for_each(|(m, v)| *m += v / n as f64);
        }
        println!("{class:>9}: descriptor length {}", mean.len());
        means.push(mean);
    }
    println!("centroid distances:");
    for (i, a) in means.iter().enumerate() {
        let row: Vec<String> = means
            .iter()
            .map(|b| {
                format!(
                    "{:.3}",
                    a.iter()
                        .zip(b)
                        .map(|(p, q)| (p - q).powi(2))
                        .sum::<f64>()
                        .sqrt()
                )
            })
            .collect();
        println!("{:>9}: {}", VesselClass::ALL[i], row.join(" "));
    }
    Ok(())
}
