//! Baseline methods on a rendered benchmark across split ratios.
//!
//! cargo run --example split_benchmark -- [seed] [per_class] [size] [shuffles] [fractions,...]

use std::time::Instant;

use vessel_bench::harness::{
    baseline_methods, run_shuffles, ExperimentReport, FeatureCache, SplitSpec,
};
use vessel_bench::synth::{render_dataset, GenerateOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let seed: u64 = arg(0, "42").parse()?;
    let per_class: usize = arg(1, "200").parse()?;
    let size: usize = arg(2, "128").parse()?;
    let shuffles: usize = arg(3, "5").parse()?;
    let fractions: Vec<f64> = arg(4, "0.8,0.01")
        .split(',')
        .map(str::parse)
        .collect::<Result<_, _>>()?;

    let t = Instant::now();
    let data = render_dataset(&GenerateOptions::new(seed, per_class, size))?;
    eprintln!("rendered {} chips in {:.1?}", data.len(), t.elapsed());

    let cache = FeatureCache::in_memory();
    let mut runs = Vec::new();
    for method in baseline_methods() {
        for &f in &fractions {
            let t = Instant::now();
            let summary = run_shuffles(
                &method,
                &data,
                &SplitSpec::new(f, 0),
                shuffles,
                seed,
                &cache,
            )?;
            let accs: Vec<String> = summary
                .runs
                .iter()
                .map(|r| format!("{:.3}", r.accuracy))
                .collect();
            eprintln!(
                "{method} {}: mean {:.4} [{}] in {:.1?}",
                SplitSpec::new(f, 0).label(),
                summary.mean,
                accs.join(" "),
                t.elapsed()
            );
            runs.extend(summary.runs);
        }
    }
    print!("{}", ExperimentReport::new(runs).averaged_table());
    Ok(())
}
