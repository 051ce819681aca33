//! Fits MPCA on downsized chips and reports retained dimensions and
//! reconstruction error at several energy levels.
//!
//! cargo run --example mpca

use nalgebra::DMatrix;
use vessel_bench::features::mpca::{mpca_fit, MpcaParams};
use vessel_bench::image::resize_bilinear;
use vessel_bench::synth::{render_dataset, GenerateOptions};

fn main() -> vessel_bench::Result<()> {
    let data = render_dataset(&GenerateOptions::new(1, 15, 64))?;
    let side = 32;
    let samples: Vec<DMatrix<f64>> = data
        .chips
        .iter()
        .map(|c| {
            resize_bilinear(c, side, side).map(|r| DMatrix::from_row_slice(side, side, r.data()))
        })
        .collect::<vessel_bench::Result<_>>()?;

    for q in [80.0, 90.0, 97.0, 100.0] {
        let (model, trace) = mpca_fit(
            &samples,
            &MpcaParams {
                energy_q: q,
                ..Default::default()
            },
        )?;
        let mut err = 0.0;
        for x in &samples {
            let back = model.reconstruct(&model.project(x)?.values)?;
            err += (back - x).norm() / x.norm();
        }
        println!(
            "energy {q:>5}: core {:?}, {} iterations, mean relative reconstruction error {:.4}",
            model.retained_dims,
            trace.captured.len(),
            err / samples.len() as f64
        );
    }
    Ok(())
}
