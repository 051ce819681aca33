//! Writes a small synthetic dataset to disk and reads it back.
//!
//! cargo run --example generate_dataset -- [out_dir] [seed] [per_class]

use std::path::PathBuf;

use vessel_bench::dataset::ChipSet;
use vessel_bench::synth::{generate_dataset, GenerateOptions};

fn main() -> vessel_bench::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "synthetic".into()));
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);
    let per_class: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);

    let manifest = generate_dataset(&GenerateOptions::new(seed, per_class, 128), &out)?;
    let data = ChipSet::load(&manifest)?;
    println!(
        "{}: {} chips, per class {:?}",
        manifest.display(),
        data.len(),
        data.class_counts()
    );
    Ok(())
}
