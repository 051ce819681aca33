//! JSON experiment description and the driver that runs it.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::cache::FeatureCache;
use super::method::{baseline_methods, MethodSpec};
use super::report::{ExperimentReport, RunMode, RunRecord};
use super::run::{
    adaptation_on_features, evaluate, extract, pretrain, shuffle_split, AdaptOptions,
};
use super::split::{SplitSpec, PROTOCOL_FRACTIONS};
use crate::dataset::{ChipSet, VesselClass};
use crate::error::{Error, Result};
use crate::synth::{
    domain_shift_config, render_dataset, GenerateOptions, RenderConstants, SensorMode, ShiftId,
};

pub const CONFIG_FORMAT: &str = "vessel-bench/experiment";
pub const CONFIG_VERSION: u32 = 1;

/// Where a dataset comes from: rendered in memory or read from a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic {
        seed: u64,
        per_class: usize,
        size: usize,
        #[serde(default = "default_shift")]
        shift: ShiftId,
        #[serde(default)]
        sensor_mode: SensorMode,
        /// Render constants file; the built-in defaults when absent.
        #[serde(default)]
        constants: Option<PathBuf>,
    },
    Manifest {
        path: PathBuf,
    },
}

fn default_shift() -> ShiftId {
    ShiftId::A
}

impl DatasetSource {
    pub fn synthetic(seed: u64, per_class: usize, size: usize, shift: ShiftId) -> Self {
        DatasetSource::Synthetic {
            seed,
            per_class,
            size,
            shift,
            sensor_mode: SensorMode::default(),
            constants: None,
        }
    }

    /// Relative paths resolve against `base_dir`.
    pub fn generate_options(&self, base_dir: &Path) -> Result<Option<GenerateOptions>> {
        match self {
            DatasetSource::Synthetic {
                seed,
                per_class,
                size,
                shift,
                sensor_mode,
                constants,
            } => {
                let base = match constants {
                    Some(p) => RenderConstants::load(&base_dir.join(p))?,
                    None => RenderConstants::default(),
                };
                let mut constants = domain_shift_config(&base, *shift)?;
                constants.sensor_mode = *sensor_mode;
                Ok(Some(GenerateOptions {
                    constants,
                    ..GenerateOptions::new(*seed, *per_class, *size)
                }))
            }
            DatasetSource::Manifest { .. } => Ok(None),
        }
    }

    pub fn load(&self, base_dir: &Path) -> Result<ChipSet> {
        match self {
            DatasetSource::Manifest { path } => ChipSet::load(&base_dir.join(path)),
            _ => render_dataset(&self.generate_options(base_dir)?.expect("synthetic source")),
        }
    }
}

fn default_shuffles() -> usize {
    5
}

fn default_splits() -> Vec<f64> {
    PROTOCOL_FRACTIONS.to_vec()
}

fn default_methods() -> Vec<MethodSpec> {
    baseline_methods()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationConfig {
    /// Pretraining domain.
    pub source: DatasetSource,
    /// Domain the splits are drawn from.
    pub target: DatasetSource,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_splits")]
    pub splits: Vec<f64>,
    #[serde(default)]
    pub options: AdaptOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub format: String,
    pub version: u32,
    pub master_seed: u64,
    #[serde(default = "default_shuffles")]
    pub shuffles: usize,
    #[serde(default = "default_splits")]
    pub splits: Vec<f64>,
    /// Benchmark dataset; the benchmark grid is skipped when absent.
    #[serde(default)]
    pub dataset: Option<DatasetSource>,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub adaptation: Option<AdaptationConfig>,
}

impl ExperimentConfig {
    /// Baseline methods on a rendered benchmark, all five ratios, with an
    /// A to B adaptation study of HOG+SRC.
    pub fn default_grid(master_seed: u64) -> Self {
        Self {
            format: CONFIG_FORMAT.into(),
            version: CONFIG_VERSION,
            master_seed,
            shuffles: 5,
            splits: default_splits(),
            dataset: Some(DatasetSource::synthetic(master_seed, 200, 128, ShiftId::A)),
            methods: baseline_methods(),
            adaptation: Some(AdaptationConfig {
                source: DatasetSource::synthetic(master_seed, 200, 128, ShiftId::A),
                target: DatasetSource::synthetic(master_seed.wrapping_add(1), 200, 128, ShiftId::B),
                methods: vec![baseline_methods().remove(2)],
                splits: default_splits(),
                options: AdaptOptions::default(),
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != CONFIG_FORMAT || self.version != CONFIG_VERSION {
            return Err(Error::invalid(format!(
                "expected {CONFIG_FORMAT} v{CONFIG_VERSION}, found {} v{}",
                self.format, self.version
            )));
        }
        if self.shuffles == 0 {
            return Err(Error::invalid("shuffles must be positive"));
        }
        let methods = self
            .methods
            .iter()
            .chain(self.adaptation.iter().flat_map(|a| &a.methods));
        for m in methods {
            m.validate()?;
        }
        let splits = self
            .splits
            .iter()
            .chain(self.adaptation.iter().flat_map(|a| &a.splits));
        for &f in splits {
            SplitSpec::new(f, 0).validate()?;
        }
        Ok(())
    }

    fn synthetic_sources(&mut self) -> impl Iterator<Item = &mut DatasetSource> {
        let adapt = self
            .adaptation
            .iter_mut()
            .flat_map(|a| [&mut a.source, &mut a.target]);
        self.dataset
            .iter_mut()
            .chain(adapt)
            .filter(|s| matches!(s, DatasetSource::Synthetic { .. }))
    }

    /// Replaces the master seed. Synthetic dataset seeds move by the same
    /// offset, so their relation to the master seed is kept.
    pub fn reseed(&mut self, master_seed: u64) {
        let offset = master_seed.wrapping_sub(self.master_seed);
        self.master_seed = master_seed;
        for s in self.synthetic_sources() {
            if let DatasetSource::Synthetic { seed, .. } = s {
                *seed = seed.wrapping_add(offset);
            }
        }
    }

    /// Overrides the class size and chip side of every synthetic dataset.
    pub fn resize(&mut self, per_class: Option<usize>, size: Option<usize>) {
        for s in self.synthetic_sources() {
            if let DatasetSource::Synthetic {
                per_class: p,
                size: z,
                ..
            } = s
            {
                *p = per_class.unwrap_or(*p);
                *z = size.unwrap_or(*z);
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "experiment config".into(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(
            serde_json::to_string(self)
                .expect("config serializes")
                .as_bytes(),
        );
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Runs the benchmark grid and the adaptation study. Records come out in
/// (method, split, shuffle) order regardless of the worker count.
pub fn run_experiment(
    config: &ExperimentConfig,
    base_dir: &Path,
    cache: &FeatureCache,
) -> Result<ExperimentReport> {
    config.validate()?;
    let class_count = VesselClass::COUNT;
    let mut runs: Vec<RunRecord> = Vec::new();

    if let Some(source) = &config.dataset {
        let data = source
            .load(base_dir)
            .map_err(|e| e.context("loading benchmark dataset"))?;
        for method in &config.methods {
            let features = extract(method, &data, cache)?;
            let grid: Vec<(f64, usize)> = config
                .splits
                .iter()
                .flat_map(|&f| (0..config.shuffles).map(move |i| (f, i)))
                .collect();
            let records: Vec<RunRecord> = grid
                .par_iter()
                .map(|&(f, i)| {
                    let spec = SplitSpec::new(f, 0);
                    let (split, seed) =
                        shuffle_split(&data.labels, class_count, &spec, config.master_seed, i)?;
                    let out = evaluate(method, &features, &data.labels, class_count, &split)
                        .map_err(|e| {
                            e.context(format!("{method} at {} shuffle {i}", spec.label()))
                        })?;
                    Ok(RunRecord::new(
                        "benchmark",
                        method,
                        RunMode::Baseline,
                        &spec,
                        i,
                        seed,
                        out,
                    ))
                })
                .collect::<Result<_>>()?;
            runs.extend(records);
        }
    }

    if let Some(adapt) = &config.adaptation {
        let synth = adapt
            .source
            .load(base_dir)
            .map_err(|e| e.context("loading adaptation source"))?;
        let real = adapt
            .target
            .load(base_dir)
            .map_err(|e| e.context("loading adaptation target"))?;
        if synth.class_counts().map(|c| c > 0) != real.class_counts().map(|c| c > 0) {
            return Err(Error::invalid(
                "adaptation source and target do not share class labels",
            ));
        }
        for method in &adapt.methods {
            let synth_features = extract(method, &synth, cache)?;
            let real_features = extract(method, &real, cache)?;
            let pretrained = pretrain(method, &synth_features, &synth.labels, class_count)
                .map_err(|e| e.context(format!("pretraining {method}")))?;
            let per_split: Vec<Vec<RunRecord>> = adapt
                .splits
                .par_iter()
                .map(|&f| {
                    adaptation_on_features(
                        method,
                        &pretrained,
                        &real_features,
                        &real.labels,
                        &SplitSpec::new(f, 0),
                        config.shuffles,
                        config.master_seed,
                        adapt.options,
                    )
                    .map(|s| s.runs)
                })
                .collect::<Result<_>>()?;
            runs.extend(per_split.into_iter().flatten());
        }
    }
    Ok(ExperimentReport::new(runs))
}
