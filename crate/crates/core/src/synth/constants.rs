use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scene::SensorMode;
use crate::dataset::{Domain, VesselClass};
use crate::error::{Error, Result};
use crate::image::PanchroParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeckPattern {
    ContainerStacks,
    HatchRows,
    PipelineSpine,
    FlatDeck,
}

/// Per-class hull geometry and appearance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselTemplate {
    pub class: VesselClass,
    pub length_beam_ratio: f64,
    pub deck_pattern: DeckPattern,
    pub base_albedo: f64,
    /// Center of the superstructure, as a fraction of length from the stern.
    /// `None` for classes without one.
    pub superstructure_position: Option<f64>,
    /// Bow taper length in beams.
    pub bow_length: f64,
    /// Deck tint, multiplied by the albedo.
    pub tint: [f64; 3],
}

impl VesselTemplate {
    pub fn validate(&self) -> Result<()> {
        if !(self.length_beam_ratio > 1.0) {
            return Err(Error::invalid(format!(
                "{} template: length/beam ratio must exceed 1",
                self.class
            )));
        }
        if !(self.base_albedo > 0.0 && self.base_albedo <= 1.0) {
            return Err(Error::invalid(format!(
                "{} template: albedo outside (0, 1]",
                self.class
            )));
        }
        if let Some(p) = self.superstructure_position {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!(
                    "{} template: superstructure position outside [0, 1]",
                    self.class
                )));
            }
        }
        if !(self.bow_length >= 0.0) || self.tint.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::invalid(format!(
                "{} template: bad bow length or tint",
                self.class
            )));
        }
        Ok(())
    }
}

/// Which side of the synthetic/pseudo-real split a constant set renders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftId {
    A,
    B,
}

impl FromStr for ShiftId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(ShiftId::A),
            "B" | "b" => Ok(ShiftId::B),
            other => Err(Error::invalid(format!(
                "unknown domain shift '{other}' (expected A or B)"
            ))),
        }
    }
}

impl fmt::Display for ShiftId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShiftId::A => "A",
            ShiftId::B => "B",
        })
    }
}

pub const CONSTANTS_FORMAT: &str = "vessel-bench/render-constants";
pub const CONSTANTS_VERSION: u32 = 1;

/// Every free constant of the renderer. Serialized as versioned JSON and
/// hashed into dataset manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderConstants {
    pub format: String,
    pub version: u32,
    /// `None` for the base set, otherwise the applied shift.
    pub shift: Option<ShiftId>,
    pub domain: Domain,
    pub sensor_mode: SensorMode,
    pub templates: Vec<VesselTemplate>,
    /// Added to every template albedo.
    pub albedo_offset: f64,
    /// Hull length at `hull_scale` 1, as a fraction of the chip side.
    pub hull_length: f64,
    /// Freeboard and superstructure heights, in beams.
    pub freeboard_height: f64,
    pub superstructure_height: f64,
    pub hull_side_albedo: f64,
    pub superstructure_albedo: f64,
    /// Constant share of the illumination; the rest scales with sin(elevation).
    pub ambient: f64,
    /// Multiplier applied to sea pixels inside the cast shadow.
    pub shadow_factor: f64,
    pub sea_rgb: [f64; 3],
    /// Lattice cells across the chip at the first noise octave.
    pub sea_noise_frequency: f64,
    pub sea_noise_octaves: u32,
    pub sea_noise_persistence: f64,
    /// Noise amplitude is `base + per_state * sea_state`.
    pub sea_amplitude_base: f64,
    pub sea_amplitude_per_state: f64,
    pub wake_strength: f64,
    /// Half-width of the global contrast jitter around 1.
    pub contrast_jitter: f64,
    pub sensor_noise: f64,
    pub panchro: PanchroParams,
}

impl Default for RenderConstants {
    fn default() -> Self {
        let t = |class,
                 length_beam_ratio,
                 deck_pattern,
                 base_albedo,
                 superstructure_position,
                 bow_length,
                 tint| {
            VesselTemplate {
                class,
                length_beam_ratio,
                deck_pattern,
                base_albedo,
                superstructure_position,
                bow_length,
                tint,
            }
        };
        Self {
            format: CONSTANTS_FORMAT.into(),
            version: CONSTANTS_VERSION,
            shift: None,
            domain: Domain::Synthetic,
            sensor_mode: SensorMode::Continuous,
            templates: vec![
                t(
                    VesselClass::Barge,
                    3.4,
                    DeckPattern::FlatDeck,
                    0.55,
                    None,
                    0.25,
                    [0.85, 0.78, 0.62],
                ),
                t(
                    VesselClass::Cargo,
                    6.2,
                    DeckPattern::HatchRows,
                    0.6,
                    Some(0.12),
                    1.4,
                    [0.7, 0.82, 0.72],
                ),
                t(
                    VesselClass::Container,
                    7.0,
                    DeckPattern::ContainerStacks,
                    0.7,
                    Some(0.22),
                    1.6,
                    [1.0, 1.0, 1.0],
                ),
                t(
                    VesselClass::Tanker,
                    5.6,
                    DeckPattern::PipelineSpine,
                    0.5,
                    Some(0.1),
                    1.2,
                    [0.85, 0.55, 0.45],
                ),
            ],
            albedo_offset: 0.0,
            hull_length: 0.74,
            freeboard_height: 0.35,
            superstructure_height: 1.1,
            hull_side_albedo: 0.32,
            superstructure_albedo: 0.92,
            ambient: 0.45,
            shadow_factor: 0.45,
            sea_rgb: [0.08, 0.17, 0.22],
            sea_noise_frequency: 6.0,
            sea_noise_octaves: 4,
            sea_noise_persistence: 0.5,
            sea_amplitude_base: 0.015,
            sea_amplitude_per_state: 0.018,
            wake_strength: 0.45,
            contrast_jitter: 0.1,
            sensor_noise: 0.01,
            panchro: PanchroParams::default(),
        }
    }
}

impl RenderConstants {
    pub fn validate(&self) -> Result<()> {
        if self.format != CONSTANTS_FORMAT || self.version != CONSTANTS_VERSION {
            return Err(Error::invalid(format!(
                "unsupported render constants {} v{}",
                self.format, self.version
            )));
        }
        for class in VesselClass::ALL {
            let count = self.templates.iter().filter(|t| t.class == class).count();
            if count != 1 {
                return Err(Error::invalid(format!(
                    "expected one template for {class}, found {count}"
                )));
            }
        }
        for t in &self.templates {
            t.validate()?;
            let a = t.base_albedo + self.albedo_offset;
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::invalid(format!(
                    "{} albedo {a} outside (0, 1] after offset",
                    t.class
                )));
            }
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(self.hull_length > 0.0 && self.hull_length < 1.0)
            || !unit(self.ambient)
            || !unit(self.shadow_factor)
            || !unit(self.hull_side_albedo)
            || !unit(self.superstructure_albedo)
            || !unit(self.wake_strength)
            || !unit(self.contrast_jitter)
            || self.sea_rgb.iter().any(|v| !unit(*v))
            || !(self.sea_noise_frequency > 0.0)
            || self.sea_noise_octaves == 0
            || !(self.sea_noise_persistence > 0.0 && self.sea_noise_persistence <= 1.0)
            || !(self.sea_amplitude_base >= 0.0 && self.sea_amplitude_per_state >= 0.0)
            || !(self.sensor_noise >= 0.0)
            || !(self.freeboard_height >= 0.0 && self.superstructure_height >= 0.0)
        {
            return Err(Error::invalid("render constants out of range"));
        }
        self.panchro.validate()
    }

    pub fn template(&self, class: VesselClass) -> &VesselTemplate {
        self.templates
            .iter()
            .find(|t| t.class == class)
            .expect("validated constants carry every class")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("constants serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: RenderConstants = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "render constants".into(),
            source,
        })?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Hex SHA-256 of the canonical (compact) JSON.
    pub fn sha256(&self) -> String {
        let compact = serde_json::to_string(self).expect("constants serialize");
        hex(&Sha256::digest(compact.as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Derives the constant set for one side of the domain split. `A` keeps the
/// base appearance and tags it synthetic; `B` changes the sea spectrum and
/// colour, raises every albedo by 0.1, swaps the panchromatic constants and
/// adds sensor noise, tagged real-analog. Geometry is shared.
pub fn domain_shift_config(base: &RenderConstants, shift: ShiftId) -> Result<RenderConstants> {
    base.validate()?;
    let mut c = base.clone();
    c.shift = Some(shift);
    match shift {
        ShiftId::A => {
            c.domain = Domain::Synthetic;
        }
        ShiftId::B => {
            c.domain = Domain::RealAnalog;
            c.sea_noise_frequency = base.sea_noise_frequency * 1.75;
            c.sea_noise_persistence = (base.sea_noise_persistence + 0.15).min(1.0);
            c.albedo_offset = base.albedo_offset + 0.1;
            let max_albedo = c
                .templates
                .iter()
                .map(|t| t.base_albedo)
                .fold(0.0, f64::max);
            if max_albedo + c.albedo_offset > 1.0 {
                c.albedo_offset = 1.0 - max_albedo;
            }
            c.sea_rgb = [
                (base.sea_rgb[0] + 0.07).min(1.0),
                (base.sea_rgb[1] + 0.05).min(1.0),
                (base.sea_rgb[2] - 0.03).max(0.0),
            ];
            c.panchro = PanchroParams {
                blue_gain: 0.8,
                red_gamma: 0.8,
                green_gamma: 1.25,
                luma_weights: base.panchro.luma_weights,
            };
            c.sensor_noise = base.sensor_noise * 2.0;
        }
    }
    c.validate()?;
    Ok(c)
}
