//! Histogram of oriented gradients.
//!
//! Centered `[-1, 0, 1]` gradients (clamped at the raster edge), votes spread
//! bilinearly over neighbouring orientation bins and neighbouring cells,
//! overlapping blocks with a stride of one cell, and L2-Hys block
//! normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayImage;

const L2HYS_CLIP: f64 = 0.2;
const NORM_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HogConfig {
    pub cell_size: usize,
    pub block_size: usize,
    pub n_bins: usize,
    pub signed: bool,
}

impl Default for HogConfig {
    fn default() -> Self {
        HogConfig {
            cell_size: 10,
            block_size: 2,
            n_bins: 9,
            signed: false,
        }
    }
}

impl HogConfig {
    pub fn with_cell_size(cell_size: usize) -> Self {
        HogConfig {
            cell_size,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cell_size < 2 || self.block_size < 1 || self.n_bins < 2 {
            return Err(Error::InvalidConfig(format!(
                "HOG needs cell_size >= 2, block_size >= 1, n_bins >= 2 (got {self:?})"
            )));
        }
        Ok(())
    }

    fn grid(&self, width: usize, height: usize) -> Result<(usize, usize)> {
        self.validate()?;
        if !width.is_multiple_of(self.cell_size) || !height.is_multiple_of(self.cell_size) {
            return Err(Error::InvalidInput(format!(
                "image {width}x{height} is not a multiple of the HOG cell size {}",
                self.cell_size
            )));
        }
        let (cx, cy) = (width / self.cell_size, height / self.cell_size);
        if cx < self.block_size || cy < self.block_size {
            return Err(Error::InvalidInput(format!(
                "image {width}x{height} is smaller than one HOG block"
            )));
        }
        Ok((cx, cy))
    }

    /// Descriptor length for a `width × height` input.
    pub fn descriptor_len(&self, width: usize, height: usize) -> Result<usize> {
        let (cx, cy) = self.grid(width, height)?;
        let blocks = (cx - self.block_size + 1) * (cy - self.block_size + 1);
        Ok(blocks * self.block_size * self.block_size * self.n_bins)
    }

    fn angle_range(&self) -> f64 {
        if self.signed {
            360.0
        } else {
            180.0
        }
    }
}

/// Un-normalized per-cell orientation histograms, row-major over cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CellHistograms {
    pub cells_x: usize,
    pub cells_y: usize,
    pub n_bins: usize,
    pub data: Vec<f64>,
}

impl CellHistograms {
    pub fn cell(&self, cx: usize, cy: usize) -> &[f64] {
        let start = (cy * self.cells_x + cx) * self.n_bins;
        &self.data[start..start + self.n_bins]
    }
}

/// Gradient magnitude and orientation (degrees, within the config's range).
pub(crate) fn gradient(image: &GrayImage, x: usize, y: usize, signed: bool) -> (f64, f64) {
    let (w, h) = (image.width(), image.height());
    let gx = image.get((x + 1).min(w - 1), y) - image.get(x.saturating_sub(1), y);
    let gy = image.get(x, (y + 1).min(h - 1)) - image.get(x, y.saturating_sub(1));
    let mag = (gx * gx + gy * gy).sqrt();
    let mut angle = gy.atan2(gx).to_degrees();
    let range = if signed { 360.0 } else { 180.0 };
    angle = angle.rem_euclid(range);
    if angle >= range {
        angle = 0.0;
    }
    (mag, angle)
}

pub fn cell_histograms(image: &GrayImage, cfg: &HogConfig) -> Result<CellHistograms> {
    let (cells_x, cells_y) = cfg.grid(image.width(), image.height())?;
    let n_bins = cfg.n_bins;
    let bin_width = cfg.angle_range() / n_bins as f64;
    let cs = cfg.cell_size as f64;
    let mut data = vec![0.0; cells_x * cells_y * n_bins];

    for y in 0..image.height() {
        let py = (y as f64 + 0.5) / cs - 0.5;
        let cy0 = py.floor();
        let wy1 = py - cy0;
        let cy0 = cy0 as isize;
        for x in 0..image.width() {
            let (mag, angle) = gradient(image, x, y, cfg.signed);
            if mag == 0.0 {
                continue;
            }
            let pos = angle / bin_width - 0.5;
            let b0f = pos.floor();
            let wb1 = pos - b0f;
            let b0 = (b0f as isize).rem_euclid(n_bins as isize) as usize;
            let b1 = (b0 + 1) % n_bins;

            let px = (x as f64 + 0.5) / cs - 0.5;
            let cx0 = px.floor();
            let wx1 = px - cx0;
            let cx0 = cx0 as isize;

            for (dy, wy) in [(0, 1.0 - wy1), (1, wy1)] {
                let cy = cy0 + dy;
                if cy < 0 || cy >= cells_y as isize || wy == 0.0 {
                    continue;
                }
                for (dx, wx) in [(0, 1.0 - wx1), (1, wx1)] {
                    let cx = cx0 + dx;
                    if cx < 0 || cx >= cells_x as isize || wx == 0.0 {
                        continue;
                    }
                    let base = (cy as usize * cells_x + cx as usize) * n_bins;
                    let v = mag * wx * wy;
                    data[base + b0] += v * (1.0 - wb1);
                    data[base + b1] += v * wb1;
                }
            }
        }
    }

    Ok(CellHistograms {
        cells_x,
        cells_y,
        n_bins,
        data,
    })
}

fn l2_hys(block: &mut [f64]) {
    let normalize = |v: &mut [f64]| {
        let norm = (v.iter().map(|a| a * a).sum::<f64>() + NORM_EPS * NORM_EPS).sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
    };
    normalize(block);
    block.iter_mut().for_each(|a| *a = a.min(L2HYS_CLIP));
    normalize(block);
}

pub fn hog(image: &GrayImage, cfg: &HogConfig) -> Result<Vec<f64>> {
    let cells = cell_histograms(image, cfg)?;
    let bs = cfg.block_size;
    let block_len = bs * bs * cfg.n_bins;
    let mut out = Vec::with_capacity(cfg.descriptor_len(image.width(), image.height())?);
    for by in 0..=(cells.cells_y - bs) {
        for bx in 0..=(cells.cells_x - bs) {
            let start = out.len();
            for cy in by..by + bs {
                for cx in bx..bx + bs {
                    out.extend_from_slice(cells.cell(cx, cy));
                }
            }
            l2_hys(&mut out[start..start + block_len]);
        }
    }
    Ok(out)
}
