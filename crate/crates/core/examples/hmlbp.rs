//! Where pixels retire in the HMLBP hierarchy for a smooth ramp, a
//! checkerboard and a rendered chip.
//!
//! cargo run --example hmlbp

use vessel_bench::dataset::VesselClass;
use vessel_bench::features::lbp::{hmlbp_counts, hmlbp_descriptor, HmlbpParams};
use vessel_bench::synth::{render_gray_chip, sample_scene, RenderConstants};
use vessel_bench::ImageChip;

fn main() -> vessel_bench::Result<()> {
    let params = HmlbpParams::default();
    let images = [
        (
            "ramp",
            ImageChip::from_fn(64, 64, |x, y| (x + y) as f64 / 126.0)?,
        ),
        (
            "checkerboard",
            ImageChip::from_fn(64, 64, |x, y| ((x / 2 + y / 2) % 2) as f64)?,
        ),
        (
            "tanker chip",
            render_gray_chip(
                &sample_scene(5, VesselClass::Tanker, 0),
                128,
                &RenderConstants::default(),
            )?,
        ),
    ];
    for (name, img) in &images {
        let c = hmlbp_counts(img, &params)?;
        let d = hmlbp_descriptor(img, &params)?;
        println!(
            "{name:>12}: {} pixels, retired per scale {:?}, catch-all {}, descriptor length {}",
            c.evaluated,
            c.retired,
            c.catch_all,
            d.values.len()
        );
    }
    Ok(())
}
