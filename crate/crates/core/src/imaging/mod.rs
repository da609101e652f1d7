//! Images, patches, feature maps and label construction.

mod color_names;
mod features;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use color_names::ColorNames;
pub use features::{
    compute_features, gradient_histograms, FeatureExtractor, HOG_BINS,
};

/// Pixel grid with interleaved channels and intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::shape(width * height * channels, data.len()));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        assert!(channels == 1 || channels == 3);
        Image {
            width,
            height,
            channels,
            data: vec![value.clamp(0.0, 1.0); width * height * channels],
        }
    }

    /// Builds an image from 8-bit samples, dividing by 255.
    pub fn from_u8(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        Image::new(
            width,
            height,
            channels,
            bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let color = img.color();
        if color.has_color() {
            let rgb = img.to_rgb8();
            let (w, h) = rgb.dimensions();
            Image::from_u8(w as usize, h as usize, 3, rgb.as_raw())
        } else {
            let gray = img.to_luma8();
            let (w, h) = gray.dimensions();
            Image::from_u8(w as usize, h as usize, 1, gray.as_raw())
        }
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let color = if self.channels == 3 {
            image::ExtendedColorType::Rgb8
        } else {
            image::ExtendedColorType::L8
        };
        image::save_buffer_with_format(
            path,
            &self.to_u8(),
            self.width as u32,
            self.height as u32,
            color,
            image::ImageFormat::Png,
        )
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn is_color(&self) -> bool {
        self.channels == 3
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Writes one pixel; values are clamped into `[0, 1]`.
    pub fn put(&mut self, x: usize, y: usize, px: &[f64]) {
        let i = (y * self.width + x) * self.channels;
        for (dst, &v) in self.data[i..i + self.channels].iter_mut().zip(px) {
            *dst = v.clamp(0.0, 1.0);
        }
    }

    /// Mean over channels at one pixel.
    #[inline]
    pub fn intensity(&self, x: usize, y: usize) -> f64 {
        let px = self.pixel(x, y);
        px.iter().sum::<f64>() / px.len() as f64
    }

    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .map(|(x, y)| self.intensity(x, y))
            .collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Size {
    pub w: f64,
    pub h: f64,
}

impl Size {
    pub fn new(w: f64, h: f64) -> Self {
        Size { w, h }
    }

    pub fn scaled(self, s: f64) -> Size {
        Size::new(self.w * s, self.h * s)
    }
}

/// Axis-aligned box, top-left corner plus extent. May extend past the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BoundingBox { x, y, w, h }
    }

    pub fn from_center(center: Point, size: Size) -> Self {
        BoundingBox {
            x: center.x - size.w / 2.0,
            y: center.y - size.h / 2.0,
            w: size.w,
            h: size.h,
        }
    }

    pub fn center(&self) -> Point {
        Point::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn size(&self) -> Size {
        Size::new(self.w, self.h)
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && self.x.is_finite() && self.y.is_finite()
    }

    pub fn intersection(&self, other: &BoundingBox) -> f64 {
        let iw = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let ih = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        iw.max(0.0) * ih.max(0.0)
    }

    /// Shrinks (or grows) about the center.
    pub fn scaled_about_center(&self, s: f64) -> BoundingBox {
        BoundingBox::from_center(self.center(), self.size().scaled(s))
    }

    /// Whether the pixel `(px, py)`, taken at its center, lies inside.
    pub fn contains_pixel(&self, px: usize, py: usize) -> bool {
        let cx = px as f64 + 0.5;
        let cy = py as f64 + 0.5;
        cx >= self.x && cx < self.x + self.w && cy >= self.y && cy < self.y + self.h
    }
}

/// Crops `size` pixels around `center` and resamples to `out_w × out_h`.
///
/// Sampling is bilinear; coordinates that leave the image are clamped to the
/// nearest edge pixel.
pub fn extract_patch(
    img: &Image,
    center: Point,
    size: Size,
    out_w: usize,
    out_h: usize,
) -> Result<Image> {
    if img.is_empty() {
        return Err(Error::EmptyImage);
    }
    if !(size.w > 0.0 && size.h > 0.0) || out_w == 0 || out_h == 0 {
        return Err(Error::invalid("patch size must be positive"));
    }
    let ch = img.channels;
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;
    let sx = size.w / out_w as f64;
    let sy = size.h / out_h as f64;
    let left = center.x - size.w / 2.0;
    let top = center.y - size.h / 2.0;

    let cols: Vec<(usize, usize, f64)> = (0..out_w)
        .map(|j| {
            let x = (left + (j as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
            let x0 = x.floor();
            let x1 = (x0 + 1.0).min(max_x);
            (x0 as usize, x1 as usize, x - x0)
        })
        .collect();

    let mut data = Vec::with_capacity(out_w * out_h * ch);
    for i in 0..out_h {
        let y = (top + (i as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        let y0 = y.floor();
        let fy = y - y0;
        let y1 = (y0 + 1.0).min(max_y) as usize;
        let y0 = y0 as usize;
        for &(x0, x1, fx) in &cols {
            for c in 0..ch {
                let top_row = if fx == 0.0 {
                    img.get(x0, y0, c)
                } else {
                    img.get(x0, y0, c) * (1.0 - fx) + img.get(x1, y0, c) * fx
                };
                let v = if fy == 0.0 {
                    top_row
                } else {
                    let bottom = if fx == 0.0 {
                        img.get(x0, y1, c)
                    } else {
                        img.get(x0, y1, c) * (1.0 - fx) + img.get(x1, y1, c) * fx
                    };
                    top_row * (1.0 - fy) + bottom * fy
                };
                data.push(v.clamp(0.0, 1.0));
            }
        }
    }
    Ok(Image {
        width: out_w,
        height: out_h,
        channels: ch,
        data,
    })
}

/// Multi-channel feature tensor on the cell grid, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    rows: usize,
    cols: usize,
    depth: usize,
    cell_size: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(rows: usize, cols: usize, depth: usize, cell_size: usize) -> Self {
        FeatureMap {
            rows,
            cols,
            depth,
            cell_size,
            data: vec![0.0; rows * cols * depth],
        }
    }

    pub fn from_vec(
        rows: usize,
        cols: usize,
        depth: usize,
        cell_size: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 || depth == 0 {
            return Err(Error::invalid("feature map dimensions must be positive"));
        }
        if data.len() != rows * cols * depth {
            return Err(Error::shape(rows * cols * depth, data.len()));
        }
        Ok(FeatureMap {
            rows,
            cols,
            depth,
            cell_size,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn cell_size(&self) -> usize {
        self.cell_size
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.depth)
    }

    pub fn plane_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn channel(&self, d: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[d * n..(d + 1) * n]
    }

    pub fn channel_mut(&mut self, d: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[d * n..(d + 1) * n]
    }

    #[inline]
    pub fn get(&self, d: usize, r: usize, c: usize) -> f64 {
        self.data[(d * self.rows + r) * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, d: usize, r: usize, c: usize, v: f64) {
        self.data[(d * self.rows + r) * self.cols + c] = v;
    }

    /// Multiplies every channel by a `rows × cols` plane.
    pub fn apply_window(&mut self, window: &Plane) {
        assert_eq!((window.rows, window.cols), (self.rows, self.cols));
        let n = self.plane_len();
        for chunk in self.data.chunks_mut(n) {
            for (v, w) in chunk.iter_mut().zip(&window.values) {
                *v *= w;
            }
        }
    }

    /// Subtracts each channel's mean over the map.
    pub fn subtract_channel_means(&mut self) {
        let n = self.plane_len();
        for chunk in self.data.chunks_mut(n) {
            let mean = chunk.iter().sum::<f64>() / n as f64;
            chunk.iter_mut().for_each(|v| *v -= mean);
        }
    }

    /// Stacks the channels of `other` after those of `self`.
    pub fn concat(mut self, other: &FeatureMap) -> Result<FeatureMap> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::shape(
                (self.rows, self.cols),
                (other.rows, other.cols),
            ));
        }
        self.data.extend_from_slice(&other.data);
        self.depth += other.depth;
        Ok(self)
    }
}

/// Real `rows × cols` grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

/// Regression target; peak 1 at the zero-shift cell.
pub type LabelMap = Plane;

impl Plane {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Plane {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let values = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .collect();
        Plane { rows, cols, values }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    /// First maximum in row-major order: `(value, row, col)`.
    pub fn argmax(&self) -> (f64, usize, usize) {
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (i, &v) in self.values.iter().enumerate() {
            if v > best.0 {
                best = (v, i);
            }
        }
        (best.0, best.1 / self.cols, best.1 % self.cols)
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// Grayscale image of the values clamped into `[0, 1]`.
    pub fn to_image(&self) -> Image {
        Image {
            width: self.cols,
            height: self.rows,
            channels: 1,
            data: self.values.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / denom).cos()))
        .collect()
}

/// Separable Hann taper.
pub fn cosine_window(rows: usize, cols: usize) -> Plane {
    let hr = hann(rows);
    let hc = hann(cols);
    Plane::from_fn(rows, cols, |r, c| hr[r] * hc[c])
}

/// Gaussian regression target centered on the zero-shift cell, wrapped periodically.
pub fn gaussian_label(rows: usize, cols: usize, sigma: f64) -> Result<LabelMap> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("label sigma must be positive, got {sigma}")));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("label dimensions must be positive"));
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    Ok(Plane::from_fn(rows, cols, |r, c| {
        let dr = r.min(rows - r) as f64;
        let dc = c.min(cols - c) as f64;
        (-(dr * dr + dc * dc) * inv).exp()
    }))
}

/// Label standard deviation in cells for a target of the given aspect.
pub fn label_sigma(target: Size, rows: usize, cols: usize) -> f64 {
    let aspect = target.w.max(target.h) / target.w.min(target.h);
    let factor = if aspect <= 2.0 { 1.0 } else { 0.25 };
    factor * ((rows * cols) as f64).sqrt() / 10.0
}
