use std::f64::consts::PI;
use std::sync::Arc;

use super::color_names::COLOR_NAME_CHANNELS;
use super::{ColorNames, FeatureMap, Image};
use crate::error::{Error, Result};

/// Unsigned orientation bins of the gradient histogram.
pub const HOG_BINS: usize = 9;

fn check_cells(patch: &Image, cell_size: usize) -> Result<(usize, usize)> {
    if cell_size == 0 {
        return Err(Error::invalid("cell size must be positive"));
    }
    if patch.width() < cell_size || patch.height() < cell_size {
        return Err(Error::invalid(format!(
            "patch {}x{} smaller than cell size {cell_size}",
            patch.width(),
            patch.height()
        )));
    }
    Ok((patch.height() / cell_size, patch.width() / cell_size))
}

/// Per-cell histograms of unsigned gradient orientation, magnitude weighted.
///
/// Gradients are central differences of the channel-mean intensity with edge
/// replication. Bin `b` is centered on `b·π/9`; each pixel votes into the two
/// nearest bins with linear weights. Cell sums are divided by the pixel count.
/// No mean subtraction is applied here.
pub fn gradient_histograms(patch: &Image, cell_size: usize) -> Result<FeatureMap> {
    let (rows, cols) = check_cells(patch, cell_size)?;
    let (w, h) = (patch.width(), patch.height());
    let gray = patch.to_gray();
    let at = |x: usize, y: usize| gray.get(x, y, 0);
    let mut map = FeatureMap::zeros(rows, cols, HOG_BINS, cell_size);
    let bin_width = PI / HOG_BINS as f64;
    let norm = 1.0 / (cell_size * cell_size) as f64;

    for y in 0..rows * cell_size {
        let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..cols * cell_size {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let dx = at(xr, y) - at(xl, y);
            let dy = at(x, yd) - at(x, yu);
            let mag = (dx * dx + dy * dy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut theta = dy.atan2(dx);
            if theta < 0.0 {
                theta += PI;
            }
            let pos = theta / bin_width;
            let lo = pos.floor();
            let frac = pos - lo;
            let b0 = (lo as usize) % HOG_BINS;
            let b1 = (b0 + 1) % HOG_BINS;
            let (r, c) = (y / cell_size, x / cell_size);
            let i0 = (b0 * rows + r) * cols + c;
            let i1 = (b1 * rows + r) * cols + c;
            let data = map.data_mut();
            data[i0] += mag * (1.0 - frac) * norm;
            data[i1] += mag * frac * norm;
        }
    }
    Ok(map)
}

fn color_channels(
    patch: &Image,
    cell_size: usize,
    table: Option<&ColorNames>,
) -> Result<FeatureMap> {
    let (rows, cols) = check_cells(patch, cell_size)?;
    let table = table.filter(|_| patch.is_color());
    let depth = match table {
        Some(_) => COLOR_NAME_CHANNELS,
        None => patch.channels(),
    };
    let mut map = FeatureMap::zeros(rows, cols, depth, cell_size);
    let norm = 1.0 / (cell_size * cell_size) as f64;
    let plane = rows * cols;
    for y in 0..rows * cell_size {
        for x in 0..cols * cell_size {
            let cell = (y / cell_size) * cols + x / cell_size;
            let px = patch.pixel(x, y);
            let data = map.data_mut();
            match table {
                Some(t) => {
                    for (d, p) in t.lookup(px).iter().enumerate() {
                        data[d * plane + cell] += p * norm;
                    }
                }
                None => {
                    for (d, v) in px.iter().enumerate() {
                        data[d * plane + cell] += v * norm;
                    }
                }
            }
        }
    }
    Ok(map)
}

/// Gradient histograms followed by color channels, each channel mean-subtracted.
///
/// Color channels are the 11 color-name probabilities when a table is given and
/// the patch is RGB, otherwise cell-averaged RGB (3) or intensity (1).
pub fn compute_features(
    patch: &Image,
    cell_size: usize,
    table: Option<&ColorNames>,
) -> Result<FeatureMap> {
    let mut map = gradient_histograms(patch, cell_size)?.concat(&color_channels(
        patch, cell_size, table,
    )?)?;
    map.subtract_channel_means();
    Ok(map)
}

/// Feature configuration shared by training and detection.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    pub cell_size: usize,
    pub color_names: Option<Arc<ColorNames>>,
}

impl FeatureExtractor {
    pub fn new(cell_size: usize, color_names: Option<Arc<ColorNames>>) -> Self {
        FeatureExtractor {
            cell_size,
            color_names,
        }
    }

    pub fn compute(&self, patch: &Image) -> Result<FeatureMap> {
        compute_features(patch, self.cell_size, self.color_names.as_deref())
    }
}
