//! Histogram of oriented gradients.
//!
//! Centered-difference gradients with edge replication, orientation-only
//! linear vote interpolation (no spatial interpolation between cells) and
//! L2-Hys block normalization.

use serde::{Deserialize, Serialize};

use super::{ExtractorKind, FeatureVector};
use crate::error::{Error, Result};
use crate::image::ImageChip;

/// Regularizer inside the block norm: `v / sqrt(|v|^2 + eps^2)`.
pub const BLOCK_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HogParams {
    /// Cell side in pixels.
    pub cell_size: usize,
    /// Block side in cells.
    pub block_cells: usize,
    /// Block step in cells.
    pub block_stride: usize,
    pub bin_count: usize,
    /// `false` folds orientations into `[0, 180)`.
    pub signed: bool,
    /// L2-Hys clip value.
    pub clip: f64,
}

impl Default for HogParams {
    fn default() -> Self {
        Self {
            cell_size: 8,
            block_cells: 2,
            block_stride: 1,
            bin_count: 9,
            signed: false,
            clip: 0.2,
        }
    }
}

impl HogParams {
    pub fn validate(&self) -> Result<()> {
        if self.cell_size == 0 || self.block_cells == 0 || self.block_stride == 0 {
            return Err(Error::invalid(
                "cell_size, block_cells and block_stride must be positive",
            ));
        }
        if self.bin_count < 2 {
            return Err(Error::invalid("bin_count must be at least 2"));
        }
        if !(self.clip > 0.0 && self.clip <= 1.0) {
            return Err(Error::invalid(format!("clip {} outside (0, 1]", self.clip)));
        }
        Ok(())
    }

    /// Angular span covered by the bins, in degrees.
    pub fn range_degrees(&self) -> f64 {
        if self.signed {
            360.0
        } else {
            180.0
        }
    }

    /// Number of blocks along an axis holding `cells` cells.
    fn blocks_along(&self, cells: usize) -> Option<usize> {
        (cells >= self.block_cells).then(|| (cells - self.block_cells) / self.block_stride + 1)
    }

    /// Descriptor length for an image of the given size.
    pub fn descriptor_dim(&self, width: usize, height: usize) -> Result<usize> {
        self.validate()?;
        if !width.is_multiple_of(self.cell_size) || !height.is_multiple_of(self.cell_size) {
            return Err(Error::invalid(format!(
                "{width}x{height} image not divisible into {}-pixel cells",
                self.cell_size
            )));
        }
        let nbx = self.blocks_along(width / self.cell_size);
        let nby = self.blocks_along(height / self.cell_size);
        match (nbx, nby) {
            (Some(x), Some(y)) => Ok(x * y * self.block_cells * self.block_cells * self.bin_count),
            _ => Err(Error::invalid("image smaller than one block")),
        }
    }
}

/// Per-pixel gradient magnitude and orientation (degrees).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub magnitude: Vec<f64>,
    pub orientation: Vec<f64>,
}

pub fn gradients(img: &ImageChip, signed: bool) -> Result<GradientField> {
    img.require_gray("gradient computation")?;
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::invalid(format!(
            "gradients need at least 3x3 pixels, got {w}x{h}"
        )));
    }
    let mut magnitude = Vec::with_capacity(w * h);
    let mut orientation = Vec::with_capacity(w * h);
    let range = if signed { 360.0 } else { 180.0 };
    for y in 0..h {
        let (up, down) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (left, right) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let gx = 0.5 * (img.get(right, y, 0) - img.get(left, y, 0));
            let gy = 0.5 * (img.get(x, down, 0) - img.get(x, up, 0));
            magnitude.push(gx.hypot(gy));
            let mut theta = gy.atan2(gx).to_degrees();
            if theta < 0.0 {
                theta += range;
            }
            if theta >= range {
                theta -= range;
            }
            orientation.push(theta);
        }
    }
    Ok(GradientField {
        width: w,
        height: h,
        magnitude,
        orientation,
    })
}

/// Orientation histograms over a grid of cells, stored cell-row-major with
/// `bins` consecutive values per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    pub cells_x: usize,
    pub cells_y: usize,
    pub bins: usize,
    pub values: Vec<f64>,
}

impl CellGrid {
    pub fn cell(&self, cx: usize, cy: usize) -> &[f64] {
        let start = (cy * self.cells_x + cx) * self.bins;
        &self.values[start..start + self.bins]
    }
}

/// The two bins an orientation votes into. Each weight is one minus the
/// circular distance to the bin center, in bin widths.
#[inline]
pub(crate) fn vote_bins(theta: f64, bins: usize, range: f64) -> [(usize, f64); 2] {
    let width = range / bins as f64;
    let lo = ((theta / width - 0.5).floor() as isize).rem_euclid(bins as isize) as usize;
    let hi = (lo + 1) % bins;
    let weight = |b: usize| {
        let raw = (theta - (b as f64 + 0.5) * width).abs();
        1.0 - raw.min(range - raw) / width
    };
    [(lo, weight(lo)), (hi, weight(hi))]
}

pub fn cell_histograms(field: &GradientField, params: &HogParams) -> Result<CellGrid> {
    params.validate()?;
    let cs = params.cell_size;
    if !field.width.is_multiple_of(cs) || !field.height.is_multiple_of(cs) {
        return Err(Error::invalid(format!(
            "{}x{} field not divisible into {cs}-pixel cells",
            field.width, field.height
        )));
    }
    if field.magnitude.len() != field.width * field.height
        || field.orientation.len() != field.magnitude.len()
    {
        return Err(Error::invalid(
            "magnitude and orientation fields differ in size",
        ));
    }
    let (cells_x, cells_y) = (field.width / cs, field.height / cs);
    let bins = params.bin_count;
    let range = params.range_degrees();
    let mut values = vec![0.0; cells_x * cells_y * bins];
    for y in 0..field.height {
        for x in 0..field.width {
            let i = y * field.width + x;
            let mag = field.magnitude[i];
            let base = ((y / cs) * cells_x + x / cs) * bins;
            for (bin, weight) in vote_bins(field.orientation[i], bins, range) {
                values[base + bin] += mag * weight;
            }
        }
    }
    Ok(CellGrid {
        cells_x,
        cells_y,
        bins,
        values,
    })
}

fn l2_normalize(v: &mut [f64]) {
    let norm = (v.iter().map(|x| x * x).sum::<f64>() + BLOCK_EPSILON * BLOCK_EPSILON).sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
}

pub fn block_normalize(grid: &CellGrid, params: &HogParams) -> Result<FeatureVector> {
    params.validate()?;
    if grid.bins != params.bin_count {
        return Err(Error::invalid("cell grid bin count differs from params"));
    }
    let (nbx, nby) = match (
        params.blocks_along(grid.cells_x),
        params.blocks_along(grid.cells_y),
    ) {
        (Some(x), Some(y)) => (x, y),
        _ => {
            return Err(Error::invalid(format!(
                "{}x{} cell grid smaller than a {}-cell block",
                grid.cells_x, grid.cells_y, params.block_cells
            )))
        }
    };
    let bc = params.block_cells;
    let block_len = bc * bc * grid.bins;
    let mut out = Vec::with_capacity(nbx * nby * block_len);
    let mut block = Vec::with_capacity(block_len);
    for by in 0..nby {
        for bx in 0..nbx {
            block.clear();
            for cy in 0..bc {
                for cx in 0..bc {
                    block.extend_from_slice(
                        grid.cell(bx * params.block_stride + cx, by * params.block_stride + cy),
                    );
                }
            }
            l2_normalize(&mut block);
            for v in block.iter_mut() {
                *v = v.min(params.clip);
            }
            l2_normalize(&mut block);
            out.extend_from_slice(&block);
        }
    }
    Ok(FeatureVector::new(ExtractorKind::Hog, out))
}

pub fn hog_descriptor(img: &ImageChip, params: &HogParams) -> Result<FeatureVector> {
    params.descriptor_dim(img.width(), img.height())?;
    let field = gradients(img, params.signed)?;
    let grid = cell_histograms(&field, params)?;
    block_normalize(&grid, params)
}
