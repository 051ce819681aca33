//! Procedural source of labeled synthetic vessel chips.

mod constants;
mod noise;
mod render;
mod scene;

pub use constants::{
    domain_shift_config, DeckPattern, RenderConstants, ShiftId, VesselTemplate, CONSTANTS_FORMAT,
    CONSTANTS_VERSION,
};
pub use render::{render_chip, render_scene, Render, MIN_RENDER_SIZE};
pub use scene::{discrete_poses, sample_scene, sample_scene_with, SceneParams, SensorMode};

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dataset::{ChipSet, Manifest, ManifestEntry, VesselClass};
use crate::error::{Error, Result};
use crate::image::{panchromatic_simulate, quantize_u8, save_png, ImageChip};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const CONSTANTS_FILE: &str = "render_constants.json";

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateOptions {
    pub master_seed: u64,
    pub per_class: usize,
    pub size: usize,
    pub constants: RenderConstants,
}

impl GenerateOptions {
    pub fn new(master_seed: u64, per_class: usize, size: usize) -> Self {
        Self {
            master_seed,
            per_class,
            size,
            constants: RenderConstants::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.per_class == 0 {
            return Err(Error::invalid("per_class must be positive"));
        }
        if self.size < MIN_RENDER_SIZE {
            return Err(Error::invalid(format!(
                "chip size must be at least {MIN_RENDER_SIZE}, got {}",
                self.size
            )));
        }
        self.constants.validate()
    }

    /// (class, index) pairs in manifest order.
    fn keys(&self) -> Vec<(VesselClass, u64)> {
        VesselClass::ALL
            .into_iter()
            .flat_map(|c| (0..self.per_class as u64).map(move |i| (c, i)))
            .collect()
    }
}

/// Renders, panchromatizes and 8-bit quantizes one chip.
pub fn render_gray_chip(
    params: &SceneParams,
    size: usize,
    constants: &RenderConstants,
) -> Result<ImageChip> {
    let rgb = render_chip(params, size, constants)?;
    Ok(quantize_u8(&panchromatic_simulate(
        &rgb,
        &constants.panchro,
    )?))
}

fn chip_path(class: VesselClass, index: u64) -> String {
    format!("chips/{}_{index:04}.png", class.label())
}

fn render_all(opts: &GenerateOptions) -> Result<Vec<(VesselClass, u64, SceneParams, ImageChip)>> {
    opts.validate()?;
    opts.keys()
        .into_par_iter()
        .map(|(class, index)| {
            let params =
                sample_scene_with(opts.master_seed, class, index, opts.constants.sensor_mode);
            let chip = render_gray_chip(&params, opts.size, &opts.constants)?;
            Ok((class, index, params, chip))
        })
        .collect()
}

/// Renders the dataset in memory. Chips equal what [`generate_dataset`]
/// writes and a later load reads back.
pub fn render_dataset(opts: &GenerateOptions) -> Result<ChipSet> {
    let rendered = render_all(opts)?;
    Ok(ChipSet {
        ids: rendered
            .iter()
            .map(|(c, i, _, _)| chip_path(*c, *i))
            .collect(),
        labels: rendered.iter().map(|(c, _, _, _)| c.index()).collect(),
        chips: rendered.into_iter().map(|(_, _, _, chip)| chip).collect(),
        domain: opts.constants.domain,
    })
}

/// Writes PNG chips, the render constants and a manifest under `out_dir`.
/// Returns the manifest path.
pub fn generate_dataset(opts: &GenerateOptions, out_dir: &Path) -> Result<PathBuf> {
    let rendered = render_all(opts)?;
    let chips_dir = out_dir.join("chips");
    fs::create_dir_all(&chips_dir).map_err(|e| Error::io(&chips_dir, e))?;
    rendered
        .par_iter()
        .map(|(class, index, _, chip)| save_png(chip, &out_dir.join(chip_path(*class, *index))))
        .collect::<Result<Vec<_>>>()?;
    opts.constants.save(&out_dir.join(CONSTANTS_FILE))?;
    let manifest = Manifest {
        comments: vec![
            format!("render-constants sha256={}", opts.constants.sha256()),
            format!(
                "master-seed={} per-class={} size={}",
                opts.master_seed, opts.per_class, opts.size
            ),
        ],
        entries: rendered
            .iter()
            .map(|(class, index, params, _)| ManifestEntry {
                path: chip_path(*class, *index),
                label: *class,
                domain: opts.constants.domain,
                width: opts.size,
                height: opts.size,
                seed: Some(params.seed),
            })
            .collect(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    manifest.write(&path)?;
    Ok(path)
}
