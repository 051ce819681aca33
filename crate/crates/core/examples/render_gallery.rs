//! Renders a contact sheet of synthetic chips, one row per class.
//!
//! cargo run --example render_gallery -- [out.png] [seed] [shift A|B]

use std::path::PathBuf;

use vessel_bench::dataset::VesselClass;
use vessel_bench::image::{io::save_png, paste, ImageChip};
use vessel_bench::synth::{
    domain_shift_config, render_gray_chip, sample_scene, RenderConstants, ShiftId,
};

fn main() -> vessel_bench::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "gallery.png".into()));
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);
    let constants = match args.next() {
        Some(id) => domain_shift_config(&RenderConstants::default(), id.parse::<ShiftId>()?)?,
        None => RenderConstants::default(),
    };

    let (size, cols) = (128, 8);
    let mut sheet = ImageChip::filled(size * cols, size * 4, 1, 0.0)?;
    for class in VesselClass::ALL {
        for i in 0..cols {
            let scene = sample_scene(seed, class, i as u64);
            let chip = render_gray_chip(&scene, size, &constants)?;
            sheet = paste(&sheet, &chip, i * size, class.index() * size)?;
        }
    }
    save_png(&sheet, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
