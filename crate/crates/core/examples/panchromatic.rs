//! Renders one RGB chip, converts it to pseudo-panchromatic and matches its
//! histogram to a flat target.
//!
//! cargo run --example panchromatic -- [out_dir]

use std::path::PathBuf;

use vessel_bench::dataset::VesselClass;
use vessel_bench::image::{
    compute_histogram, histogram_specification, panchromatic_simulate, quantize_u8, save_png,
    Histogram, PanchroParams,
};
use vessel_bench::synth::{render_chip, sample_scene, RenderConstants};

fn main() -> vessel_bench::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&out).map_err(|e| vessel_bench::Error::Io {
        path: out.clone(),
        source: e,
    })?;

    let scene = sample_scene(7, VesselClass::Container, 0);
    let rgb = render_chip(&scene, 128, &RenderConstants::default())?;
    let pan = panchromatic_simulate(&rgb, &PanchroParams::default())?;
    let flat = histogram_specification(&quantize_u8(&pan), &Histogram::uniform(256)?)?;

    for (name, img) in [
        ("rgb.png", &rgb),
        ("panchromatic.png", &pan),
        ("equalized.png", &flat),
    ] {
        save_png(&quantize_u8(img), &out.join(name))?;
    }
    let before = compute_histogram(&pan, 0, 16)?;
    let after = compute_histogram(&flat, 0, 16)?;
    println!("16-bin histogram before: {:?}", before.counts);
    println!("16-bin histogram after:  {:?}", after.counts);
    println!("mean intensity {:.3} -> {:.3}", pan.mean(), flat.mean());
    Ok(())
}
