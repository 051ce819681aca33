//! Analytic rasterizer for one vessel scene.
//!
//! World coordinates are pixels relative to the chip center with x toward
//! the bow and y across the beam. The observed image compresses world space
//! along the sensor azimuth by cos(off-nadir).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::constants::{DeckPattern, RenderConstants, VesselTemplate};
use super::noise::{fractal_noise, lattice, mix64, value_noise};
use super::scene::SceneParams;
use crate::dataset::VesselClass;
use crate::error::{Error, Result};
use crate::image::ImageChip;

pub const MIN_RENDER_SIZE: usize = 64;

const SUPERSAMPLE: [(f64, f64); 4] = [(-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)];
const SHADOW_STEPS: usize = 10;

/// A rendered chip together with per-pixel masks sampled at pixel centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Render {
    pub image: ImageChip,
    /// Main hull, superstructure included.
    pub hull_mask: Vec<bool>,
    /// Sea pixels darkened by the main vessel's cast shadow.
    pub shadow_mask: Vec<bool>,
}

/// Hull outline in its own frame: `a` along the length (bow at `+length/2`),
/// `v` across.
#[derive(Debug, Clone, Copy)]
struct Hull {
    center: (f64, f64),
    length: f64,
    half_beam: f64,
    bow: f64,
    stern: f64,
}

impl Hull {
    fn local(&self, p: (f64, f64)) -> (f64, f64) {
        (p.0 - self.center.0, p.1 - self.center.1)
    }

    /// Half-width of the outline at station `a`, or `None` beyond the ends.
    fn half_width(&self, a: f64) -> Option<f64> {
        let half = self.length / 2.0;
        if a > half || a < -half {
            return None;
        }
        let shape = if a > half - self.bow {
            let t = (a - (half - self.bow)) / self.bow;
            (1.0 - t * t).max(0.0).sqrt()
        } else if a < -half + self.stern {
            let t = (-half + self.stern - a) / self.stern;
            (1.0 - t * t).max(0.0).sqrt()
        } else {
            1.0
        };
        Some(self.half_beam * shape)
    }

    fn contains(&self, p: (f64, f64)) -> bool {
        let (a, v) = self.local(p);
        self.half_width(a).is_some_and(|hw| v.abs() <= hw)
    }
}

#[derive(Debug, Clone, Copy)]
struct Block {
    center: (f64, f64),
    half: (f64, f64),
}

impl Block {
    fn contains(&self, p: (f64, f64)) -> bool {
        (p.0 - self.center.0).abs() <= self.half.0 && (p.1 - self.center.1).abs() <= self.half.1
    }
}

struct Scene<'a> {
    params: &'a SceneParams,
    constants: &'a RenderConstants,
    template: &'a VesselTemplate,
    size: f64,
    center: f64,
    albedo: f64,
    shade: f64,
    hull: Hull,
    superstructure: Option<Block>,
    secondary: Option<(Hull, Block)>,
    /// Unit sensor-azimuth direction and the inverse compression factor minus one.
    squash: ((f64, f64), f64),
    /// Image-plane step toward the sun per pixel of height.
    sun_step: (f64, f64),
    freeboard: f64,
    tower: f64,
    noise_seed: u64,
}

fn direction(azimuth_deg: f64) -> (f64, f64) {
    let r = azimuth_deg.to_radians();
    (r.sin(), -r.cos())
}

impl<'a> Scene<'a> {
    fn new(
        params: &'a SceneParams,
        size: usize,
        constants: &'a RenderConstants,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let template = constants.template(params.vessel_class);
        let s = size as f64;
        let length = s * constants.hull_length * params.hull_scale;
        let beam = length / template.length_beam_ratio;
        let half_beam = beam / 2.0;
        let hull = Hull {
            center: (0.0, 0.0),
            length,
            half_beam,
            bow: (template.bow_length * beam).min(0.45 * length),
            stern: 0.3 * half_beam,
        };
        let superstructure = template.superstructure_position.map(|f| Block {
            center: (-length / 2.0 + f * length, 0.0),
            half: ((0.05 * length).max(1.5), 0.78 * half_beam),
        });

        // Placement draws happen whether or not the vessel is present so the
        // noise stream stays aligned across flag settings.
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let along = rng.gen_range(-0.25..0.25) * length;
        let secondary = params.secondary_vessel.then(|| {
            let len2 = 0.24 * s;
            let hb2 = len2 / 3.3 / 2.0;
            let gap = 0.05 * s;
            let cy = side * (half_beam + gap + hb2);
            let h2 = Hull {
                center: (along, cy),
                length: len2,
                half_beam: hb2,
                bow: 0.9 * hb2 * 2.0,
                stern: 0.3 * hb2,
            };
            let cabin = Block {
                center: (along - 0.25 * len2, cy),
                half: (0.1 * len2, 0.7 * hb2),
            };
            (h2, cabin)
        });

        let k = params.sensor_off_nadir.to_radians().cos();
        let cot = if params.sun_elevation >= 90.0 {
            0.0
        } else {
            let e = params.sun_elevation.to_radians();
            e.cos() / e.sin()
        };
        let sun = direction(params.sun_azimuth);
        Scene {
            params,
            constants,
            template,
            size: s,
            center: (s - 1.0) / 2.0,
            albedo: template.base_albedo + constants.albedo_offset,
            shade: constants.ambient
                + (1.0 - constants.ambient) * params.sun_elevation.to_radians().sin(),
            hull,
            superstructure,
            secondary,
            squash: (direction(params.sensor_azimuth), 1.0 / k - 1.0),
            sun_step: (sun.0 * cot, sun.1 * cot),
            freeboard: constants.freeboard_height * beam,
            tower: constants.superstructure_height * beam,
            noise_seed: mix64(params.seed ^ 0x5eed),
        }
    }

    /// Image-plane offset from the chip center to world coordinates.
    fn world(&self, p: (f64, f64)) -> (f64, f64) {
        let ((ux, uy), extra) = self.squash;
        let along = p.0 * ux + p.1 * uy;
        (p.0 + extra * along * ux, p.1 + extra * along * uy)
    }

    /// Whether the ray toward the sun from ground point `p` passes through a
    /// solid of the given height.
    fn shadowed_by(&self, p: (f64, f64), height: f64, inside: impl Fn((f64, f64)) -> bool) -> bool {
        if height <= 0.0 || (self.sun_step.0 == 0.0 && self.sun_step.1 == 0.0) {
            return false;
        }
        (1..=SHADOW_STEPS).any(|k| {
            let h = height * k as f64 / SHADOW_STEPS as f64;
            inside(self.world((p.0 + self.sun_step.0 * h, p.1 + self.sun_step.1 * h)))
        })
    }

    fn in_main_vessel(&self, w: (f64, f64)) -> bool {
        self.hull.contains(w)
    }

    fn main_shadow(&self, p: (f64, f64)) -> bool {
        self.shadowed_by(p, self.freeboard, |w| self.hull.contains(w))
            || self
                .superstructure
                .is_some_and(|b| self.shadowed_by(p, self.tower, |w| b.contains(w)))
    }

    fn secondary_shadow(&self, p: (f64, f64)) -> bool {
        self.secondary.is_some_and(|(h, c)| {
            self.shadowed_by(p, 0.5 * self.freeboard, |w| h.contains(w))
                || self.shadowed_by(p, 0.6 * self.tower, |w| c.contains(w))
        })
    }

    fn sea(&self, p: (f64, f64)) -> [f64; 3] {
        let c = self.constants;
        let f = c.sea_noise_frequency / self.size;
        let n = fractal_noise(
            self.noise_seed,
            (p.0 + self.center) * f,
            (p.1 + self.center) * f,
            c.sea_noise_octaves,
            c.sea_noise_persistence,
        );
        let amp = c.sea_amplitude_base + c.sea_amplitude_per_state * self.params.sea_state as f64;
        let mut rgb = [
            c.sea_rgb[0] + amp * n * 0.7,
            c.sea_rgb[1] + amp * n * 0.85,
            c.sea_rgb[2] + amp * n,
        ];
        if self.params.sea_state >= 3 {
            let caps = value_noise(
                self.noise_seed ^ 0xcab5,
                (p.0 + self.center) * 0.45,
                (p.1 + self.center) * 0.45,
            );
            let threshold = 1.0 - 0.012 * self.params.sea_state as f64;
            if caps > threshold {
                for v in &mut rgb {
                    *v += 0.2;
                }
            }
        }
        rgb
    }

    fn wake(&self, w: (f64, f64)) -> f64 {
        if !self.params.wake {
            return 0.0;
        }
        let d = -self.hull.length / 2.0 - w.0;
        if d <= 0.0 {
            return 0.0;
        }
        let width = 0.9 * self.hull.half_beam + 0.3 * d;
        let across = w.1.abs() / width;
        if across >= 1.0 {
            return 0.0;
        }
        let churn = 0.6 + 0.4 * value_noise(self.noise_seed ^ 0x3a4e, w.0 * 0.3, w.1 * 0.3);
        self.constants.wake_strength
            * (-d / (0.45 * self.hull.length)).exp()
            * (1.0 - across * across)
            * churn
    }

    fn fender(&self, w: (f64, f64)) -> bool {
        if !(self.params.fenders && self.params.vessel_class == VesselClass::Barge) {
            return false;
        }
        let n = 6;
        let r = (0.16 * self.hull.half_beam).max(1.0);
        (0..n).any(|k| {
            let a = -self.hull.length / 2.0 + (k as f64 + 0.5) * self.hull.length / n as f64;
            [-1.0, 1.0].iter().any(|s| {
                let (dx, dy) = (w.0 - a, w.1 - s * self.hull.half_beam);
                dx * dx + dy * dy <= r * r
            })
        })
    }

    /// Deck albedo at a hull-frame point inside the outline.
    fn deck(&self, a: f64, v: f64, half_width: f64) -> [f64; 3] {
        let c = self.constants;
        let rim = (0.14 * self.hull.half_beam).max(1.2);
        let grey = |x: f64| [x, x, x];
        if v.abs() > half_width - rim || a.abs() > self.hull.length / 2.0 - rim {
            return grey(c.hull_side_albedo);
        }
        if let Some(b) = self.superstructure {
            if b.contains((a, v)) {
                return grey(c.superstructure_albedo);
            }
        }
        let alb = self.albedo;
        let tint = self.template.tint;
        let base = [alb * tint[0], alb * tint[1], alb * tint[2]];
        let frac = (a + self.hull.length / 2.0) / self.hull.length;
        let hb = self.hull.half_beam;
        match self.template.deck_pattern {
            DeckPattern::FlatDeck => {
                let n =
                    0.04 * (2.0 * value_noise(self.noise_seed ^ 0xdec, a * 0.25, v * 0.25) - 1.0);
                base.map(|x| x * (1.0 + n))
            }
            DeckPattern::HatchRows => {
                let (start, end, hatches) = (0.22, 0.9, 5.0);
                if frac < start || frac > end {
                    return base;
                }
                let pitch = (end - start) / hatches;
                let local = ((frac - start) / pitch).fract();
                let cover_a = (local - 0.5).abs() * pitch * self.hull.length;
                let cover_half = 0.36 * pitch * self.hull.length;
                let cover_v = 0.62 * hb;
                if cover_a <= cover_half && v.abs() <= cover_v {
                    let edge = cover_half - cover_a < 1.0 || cover_v - v.abs() < 1.0;
                    let k = if edge { 1.3 } else { 0.55 };
                    base.map(|x| (x * k).min(1.0))
                } else {
                    base
                }
            }
            DeckPattern::ContainerStacks => {
                let (start, end) = (0.3, 0.93);
                if frac < start || frac > end || v.abs() > 0.86 * hb {
                    return base.map(|x| x * 0.6);
                }
                let region = (end - start) * self.hull.length;
                let bays = (region / (0.75 * 2.0 * hb)).round().max(1.0);
                let bay_len = region / bays;
                let pos = (a + self.hull.length / 2.0 - start * self.hull.length) / bay_len;
                let rows = 4.0;
                let row_pos = (v + 0.86 * hb) / (1.72 * hb) * rows;
                let in_gap = pos.fract() < 0.08 || row_pos.fract() < 0.1;
                if in_gap {
                    return grey(0.12);
                }
                let h = lattice(
                    self.noise_seed ^ 0xb0c5,
                    pos.floor() as i64,
                    row_pos.floor() as i64,
                );
                const PALETTE: [[f64; 3]; 6] = [
                    [0.85, 0.22, 0.16],
                    [0.16, 0.36, 0.82],
                    [0.92, 0.92, 0.9],
                    [0.95, 0.56, 0.12],
                    [0.22, 0.62, 0.32],
                    [0.62, 0.62, 0.62],
                ];
                if h < 0.08 {
                    return grey(0.2);
                }
                let color = PALETTE[((h - 0.08) / 0.92 * 6.0).min(5.0) as usize];
                color.map(|x| (x * alb / 0.7).min(1.0))
            }
            DeckPattern::PipelineSpine => {
                let pipe = (0.07 * hb).max(0.6);
                if v.abs() <= pipe && frac > 0.16 {
                    return grey(0.88);
                }
                if (frac - 0.54).abs() < 0.02 && v.abs() < 0.8 * hb {
                    return grey(0.8);
                }
                let spacing = 0.08 * self.hull.length;
                let r = (0.12 * hb).max(0.8);
                if frac > 0.2 && frac < 0.92 {
                    let nearest = (a / spacing).round() * spacing;
                    for side in [-1.0, 1.0] {
                        let (dx, dy) = (a - nearest, v - side * 0.45 * hb);
                        if dx * dx + dy * dy <= r * r {
                            return base.map(|x| (x * 1.5).min(1.0));
                        }
                    }
                }
                base
            }
        }
    }

    /// Unlit color of one subsample plus whether it belongs to the main
    /// hull and to its cast shadow.
    fn sample(&self, p: (f64, f64)) -> ([f64; 3], bool, bool) {
        let w = self.world(p);
        if self.fender(w) {
            return ([0.07; 3], false, false);
        }
        if self.in_main_vessel(w) {
            let (a, v) = self.hull.local(w);
            let hw = self.hull.half_width(a).unwrap_or(0.0);
            return (self.deck(a, v, hw), true, false);
        }
        if let Some((h2, cabin)) = self.secondary {
            if h2.contains(w) {
                let (a, v) = h2.local(w);
                let hw = h2.half_width(a).unwrap_or(0.0);
                let rim = hw - v.abs() < 1.0;
                let x = if cabin.contains(w) {
                    0.85
                } else if rim {
                    self.constants.hull_side_albedo
                } else {
                    0.5
                };
                return ([x; 3], false, false);
            }
        }
        let mut rgb = self.sea(p);
        let foam = self.wake(w);
        for v in &mut rgb {
            *v += foam;
        }
        let shadow = self.main_shadow(p);
        if shadow || self.secondary_shadow(p) {
            for v in &mut rgb {
                *v *= self.constants.shadow_factor;
            }
        }
        (rgb, false, shadow)
    }
}

/// Renders a scene with its hull and shadow masks.
pub fn render_scene(
    params: &SceneParams,
    size: usize,
    constants: &RenderConstants,
) -> Result<Render> {
    if size < MIN_RENDER_SIZE {
        return Err(Error::invalid(format!(
            "render size must be at least {MIN_RENDER_SIZE}, got {size}"
        )));
    }
    params.validate()?;
    constants.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let scene = Scene::new(params, size, constants, &mut rng);
    let gain = 1.0 + rng.gen_range(-constants.contrast_jitter..=constants.contrast_jitter);
    let noise =
        Normal::new(0.0, constants.sensor_noise).map_err(|e| Error::Numeric(e.to_string()))?;

    let n = size * size;
    let mut data = Vec::with_capacity(n * 3);
    let mut hull_mask = Vec::with_capacity(n);
    let mut shadow_mask = Vec::with_capacity(n);
    for y in 0..size {
        for x in 0..size {
            let p = (x as f64 - scene.center, y as f64 - scene.center);
            let (_, in_hull, in_shadow) = scene.sample(p);
            hull_mask.push(in_hull);
            shadow_mask.push(in_shadow);
            let mut acc = [0.0; 3];
            for (dx, dy) in SUPERSAMPLE {
                let (rgb, _, _) = scene.sample((p.0 + dx, p.1 + dy));
                for c in 0..3 {
                    acc[c] += rgb[c];
                }
            }
            for v in acc {
                let lit = v / SUPERSAMPLE.len() as f64 * scene.shade * gain;
                let jitter = if constants.sensor_noise > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                data.push((lit + jitter).clamp(0.0, 1.0));
            }
        }
    }
    Ok(Render {
        image: ImageChip::new(size, size, 3, data)?,
        hull_mask,
        shadow_mask,
    })
}

/// Renders the RGB chip for a scene.
pub fn render_chip(
    params: &SceneParams,
    size: usize,
    constants: &RenderConstants,
) -> Result<ImageChip> {
    render_scene(params, size, constants).map(|r| r.image)
}
