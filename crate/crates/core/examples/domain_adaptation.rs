//! Synthetic pretraining on domain A, adaptation to domain B.
//!
//! cargo run --example domain_adaptation -- [method] [seed] [per_class] [shuffles] [fractions,...]

use std::time::Instant;

use vessel_bench::harness::{
    format_percent, run_adaptation, AdaptOptions, DatasetSource, FeatureCache, MethodSpec,
    SplitSpec,
};
use vessel_bench::synth::ShiftId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let method: MethodSpec = arg(0, "hog+src").parse()?;
    let seed: u64 = arg(1, "42").parse()?;
    let per_class: usize = arg(2, "200").parse()?;
    let shuffles: usize = arg(3, "5").parse()?;
    let fractions: Vec<f64> = arg(4, "0.8,0.05")
        .split(',')
        .map(str::parse)
        .collect::<Result<_, _>>()?;

    let t = Instant::now();
    let here = std::path::Path::new(".");
    let synth = DatasetSource::synthetic(seed, per_class, 128, ShiftId::A).load(here)?;
    let real = DatasetSource::synthetic(seed + 1, per_class, 128, ShiftId::B).load(here)?;
    eprintln!("rendered both domains in {:.1?}", t.elapsed());

    let cache = FeatureCache::in_memory();
    println!("| Split | Baseline | Adapted | Synth only | Delta |");
    println!("| --- | --- | --- | --- | --- |");
    for f in fractions {
        let t = Instant::now();
        let spec = SplitSpec::new(f, 0);
        let s = run_adaptation(
            &method,
            &synth,
            &real,
            &spec,
            shuffles,
            seed,
            AdaptOptions::default(),
            &cache,
        )?;
        println!(
            "| {} | {:.4} | {:.4} | {:.4} | {} |",
            spec.label(),
            s.baseline,
            s.adapted,
            s.synth_only,
            format_percent(s.delta)
        );
        eprintln!("{} took {:.1?}", spec.label(), t.elapsed());
    }
    Ok(())
}
