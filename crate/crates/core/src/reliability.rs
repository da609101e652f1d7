//! Foreground/background color models, posterior back-projection and the
//! binary reliability mask.

use crate::error::{Error, Result};
use crate::imaging::{BoundingBox, Image, Plane};

/// Bins per HSV channel.
pub const HSV_BINS: usize = 16;
const HIST_LEN: usize = HSV_BINS * HSV_BINS * HSV_BINS;
const POSTERIOR_EPS: f64 = 1e-9;
/// Fraction of the target box used for the foreground histogram.
pub const FOREGROUND_SHRINK: f64 = 0.8;
const OTSU_LEVELS: usize = 256;
const THRESHOLD_RANGE: (f64, f64) = (0.35, 0.65);

/// Per-pixel target probability.
pub type PosteriorMap = Plane;

/// HSV histogram index of an RGB pixel in `[0, 1]`.
pub fn hsv_bin(rgb: &[f64]) -> usize {
    let (r, g, b) = (rgb[0], rgb[1], rgb[2]);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue = if delta <= 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let sat = if max > 0.0 { delta / max } else { 0.0 };
    let q = |v: f64| ((v * HSV_BINS as f64) as usize).min(HSV_BINS - 1);
    (q(hue / 360.0) * HSV_BINS + q(sat)) * HSV_BINS + q(max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorModel {
    fg: Vec<f64>,
    bg: Vec<f64>,
    valid: bool,
}

impl ColorModel {
    pub fn invalid() -> Self {
        ColorModel {
            fg: vec![0.0; HIST_LEN],
            bg: vec![0.0; HIST_LEN],
            valid: false,
        }
    }

    /// Builds a model from raw (unnormalized) counts.
    pub fn from_counts(fg: Vec<f64>, bg: Vec<f64>) -> Result<Self> {
        if fg.len() != HIST_LEN || bg.len() != HIST_LEN {
            return Err(Error::shape(HIST_LEN, (fg.len(), bg.len())));
        }
        let (sf, sb) = (fg.iter().sum::<f64>(), bg.iter().sum::<f64>());
        if !(sf > 0.0 && sb > 0.0) {
            return Ok(ColorModel::invalid());
        }
        Ok(ColorModel {
            fg: fg.into_iter().map(|v| v / sf).collect(),
            bg: bg.into_iter().map(|v| v / sb).collect(),
            valid: true,
        })
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }

    pub fn foreground(&self) -> &[f64] {
        &self.fg
    }

    pub fn background(&self) -> &[f64] {
        &self.bg
    }
}

fn pixel_range(boxes: &[BoundingBox], img: &Image) -> (usize, usize, usize, usize) {
    let clamp = |v: f64, hi: usize| v.floor().clamp(0.0, hi as f64) as usize;
    let x0 = boxes.iter().map(|b| b.x).fold(f64::INFINITY, f64::min);
    let y0 = boxes.iter().map(|b| b.y).fold(f64::INFINITY, f64::min);
    let x1 = boxes.iter().map(|b| b.x + b.w).fold(f64::NEG_INFINITY, f64::max);
    let y1 = boxes.iter().map(|b| b.y + b.h).fold(f64::NEG_INFINITY, f64::max);
    (
        clamp(x0, img.width()),
        clamp(y0, img.height()),
        clamp(x1 + 1.0, img.width()),
        clamp(y1 + 1.0, img.height()),
    )
}

/// Histograms of the inner target region and of the context boxes minus the target.
///
/// Grayscale frames or an empty foreground/background pixel set give an
/// invalid model.
pub fn build_model(frame: &Image, target: &BoundingBox, context: &[BoundingBox]) -> ColorModel {
    if !frame.is_color() || frame.is_empty() || context.is_empty() {
        return ColorModel::invalid();
    }
    let mut fg = vec![0.0; HIST_LEN];
    let mut bg = vec![0.0; HIST_LEN];

    let inner = target.scaled_about_center(FOREGROUND_SHRINK);
    let (x0, y0, x1, y1) = pixel_range(std::slice::from_ref(&inner), frame);
    for y in y0..y1 {
        for x in x0..x1 {
            if inner.contains_pixel(x, y) {
                fg[hsv_bin(frame.pixel(x, y))] += 1.0;
            }
        }
    }

    let (x0, y0, x1, y1) = pixel_range(context, frame);
    for y in y0..y1 {
        for x in x0..x1 {
            if !target.contains_pixel(x, y) && context.iter().any(|b| b.contains_pixel(x, y)) {
                bg[hsv_bin(frame.pixel(x, y))] += 1.0;
            }
        }
    }
    ColorModel::from_counts(fg, bg).unwrap_or_else(|_| ColorModel::invalid())
}

/// Per-pixel posterior `fg / (fg + bg + ε)` under a uniform prior.
pub fn back_project(patch: &Image, model: &ColorModel) -> Result<PosteriorMap> {
    if !model.valid || !patch.is_color() {
        return Err(Error::InvalidColorModel);
    }
    Ok(Plane::from_fn(patch.height(), patch.width(), |y, x| {
        let b = hsv_bin(patch.pixel(x, y));
        model.fg[b] / (model.fg[b] + model.bg[b] + POSTERIOR_EPS)
    }))
}

/// Average-pools a pixel posterior onto the `cell_size` grid.
pub fn pool_to_cells(post: &PosteriorMap, cell_size: usize) -> Plane {
    let rows = post.rows / cell_size;
    let cols = post.cols / cell_size;
    let norm = 1.0 / (cell_size * cell_size) as f64;
    Plane::from_fn(rows, cols, |r, c| {
        let mut s = 0.0;
        for y in r * cell_size..(r + 1) * cell_size {
            for x in c * cell_size..(c + 1) * cell_size {
                s += post.get(y, x);
            }
        }
        s * norm
    })
}

/// Otsu threshold of values in `[0, 1]`, clamped to `[0.35, 0.65]`.
pub fn otsu_threshold(values: &[f64]) -> f64 {
    let mut hist = [0.0f64; OTSU_LEVELS];
    for &v in values {
        let b = ((v.clamp(0.0, 1.0) * OTSU_LEVELS as f64) as usize).min(OTSU_LEVELS - 1);
        hist[b] += 1.0;
    }
    let total: f64 = hist.iter().sum();
    let level = |i: usize| (i as f64 + 0.5) / OTSU_LEVELS as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, h)| h * level(i)).sum();

    let (mut w0, mut sum0) = (0.0, 0.0);
    let mut best = (0.0f64, None);
    for (i, &h) in hist.iter().enumerate().take(OTSU_LEVELS - 1) {
        w0 += h;
        sum0 += h * level(i);
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best.0 {
            best = (between, Some(i));
        }
    }
    let t = best.1.map_or(0.5, |i| (i + 1) as f64 / OTSU_LEVELS as f64);
    t.clamp(THRESHOLD_RANGE.0, THRESHOLD_RANGE.1)
}

/// Binary cell mask plus the outcome of the informativeness test.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityMask {
    rows: usize,
    cols: usize,
    values: Vec<u8>,
    informative: bool,
    foreground_ratio: f64,
}

impl ReliabilityMask {
    pub fn all_ones(rows: usize, cols: usize) -> Self {
        ReliabilityMask {
            rows,
            cols,
            values: vec![1; rows * cols],
            informative: false,
            foreground_ratio: f64::NAN,
        }
    }

    /// Mask with explicit cell values; treated as informative.
    pub fn from_cells(rows: usize, cols: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::shape(rows * cols, values.len()));
        }
        if values.iter().any(|&v| v > 1) {
            return Err(Error::invalid("mask values must be 0 or 1"));
        }
        Ok(ReliabilityMask {
            rows,
            cols,
            values,
            informative: true,
            foreground_ratio: f64::NAN,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn is_informative(&self) -> bool {
        self.informative
    }

    /// Foreground cells over the previous target area; NaN when not measured.
    pub fn foreground_ratio(&self) -> f64 {
        self.foreground_ratio
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.values[r * self.cols + c]
    }

    pub fn to_plane(&self) -> Plane {
        Plane {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f64::from(v)).collect(),
        }
    }
}

/// Thresholds a cell-resolution posterior and runs the informativeness test.
///
/// The test passes when `τ_l ≤ #fg / prev_target_area ≤ τ_u`; on failure the
/// mask becomes all ones.
pub fn binarize(
    post: &PosteriorMap,
    prev_target_area: f64,
    tau_l: f64,
    tau_u: f64,
) -> Result<ReliabilityMask> {
    if !(prev_target_area > 0.0) {
        return Err(Error::invalid("previous target area must be positive"));
    }
    let t = otsu_threshold(&post.values);
    let values: Vec<u8> = post.values.iter().map(|&p| u8::from(p > t)).collect();
    let count = values.iter().filter(|&&v| v == 1).count();
    let ratio = count as f64 / prev_target_area;
    let informative = count > 0 && (tau_l..=tau_u).contains(&ratio);
    let mut mask = if informative {
        ReliabilityMask {
            rows: post.rows,
            cols: post.cols,
            values,
            informative: true,
            foreground_ratio: ratio,
        }
    } else {
        ReliabilityMask::all_ones(post.rows, post.cols)
    };
    mask.foreground_ratio = ratio;
    Ok(mask)
}

/// Bin-wise `(1 - η) old + η new` for both histograms.
pub fn update_model(old: &ColorModel, new: &ColorModel, eta: f64) -> Result<ColorModel> {
    if !old.valid || !new.valid {
        return Err(Error::InvalidColorModel);
    }
    if old.fg.len() != new.fg.len() || old.bg.len() != new.bg.len() {
        return Err(Error::shape(old.fg.len(), new.fg.len()));
    }
    let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| (1.0 - eta) * x + eta * y).collect()
    };
    Ok(ColorModel {
        fg: mix(&old.fg, &new.fg),
        bg: mix(&old.bg, &new.bg),
        valid: true,
    })
}
