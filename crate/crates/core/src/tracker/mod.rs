//! Per-frame tracking loop.
//!
//! Each frame: detect over the scale set with the current filter, score the
//! response by its peak and excess kurtosis, and only when both clear their
//! running thresholds rebuild the color model and mask, retrain the filter at
//! the new location and blend it in. Rejected frames still move the box but
//! leave every learned quantity untouched.

mod config;
mod monitor;

use std::sync::Arc;

use crate::admm::{self, JointFilter};
use crate::error::{Error, Result};
use crate::imaging::{
    cosine_window, extract_patch, gaussian_label, label_sigma, BoundingBox, ColorNames,
    FeatureExtractor, FeatureMap, Image, Plane, Point, Size,
};
use crate::reliability::{
    back_project, binarize, build_model, pool_to_cells, update_model, ColorModel, PosteriorMap,
    ReliabilityMask,
};
use crate::spectral::{correlate, fft2, fft2_plane, ResponseMap, Spectrum};

pub use config::{TrackerConfig, COLOR_TABLE_ENV};
pub use monitor::{kurtosis, kurtosis_of, MonitorReport, RunningMean, UpdateGate};

/// Offsets of context patches in units of the target size.
const CONTEXT_OFFSETS: [(f64, f64); 4] = [(-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0)];

fn round_even(v: f64) -> f64 {
    (2.0 * (v / 2.0).round()).max(2.0)
}

/// Context patch centers for a target at `center` with size `size`.
pub fn context_centers(center: Point, size: Size, count: usize) -> Vec<Point> {
    CONTEXT_OFFSETS
        .iter()
        .cycle()
        .take(count)
        .enumerate()
        .map(|(i, (dx, dy))| {
            // beyond four, repeat the ring at growing distance
            let ring = (i / CONTEXT_OFFSETS.len() + 1) as f64;
            Point::new(center.x + dx * ring * size.w, center.y + dy * ring * size.h)
        })
        .collect()
}

/// Peak of one detection pass.
#[derive(Debug, Clone)]
pub struct Detection {
    pub position: Point,
    pub scale_index: usize,
    pub scale_factor: f64,
    /// Peak displacement in cells, `(rows, cols)`, after optional refinement.
    pub displacement: (f64, f64),
    pub response: ResponseMap,
}

/// Inputs and outputs of the last mask computation, for debugging dumps.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub window: Image,
    pub posterior: PosteriorMap,
    pub mask: ReliabilityMask,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    features: FeatureExtractor,
    cos_window: Plane,
    label_spec: Spectrum,
    template: (usize, usize),
    base_window: Size,
    base_target: Size,
    position: Point,
    scale: f64,
    filter: JointFilter,
    color_model: ColorModel,
    gate: UpdateGate,
    frame_index: usize,
    last_segmentation: Option<Segmentation>,
}

fn parabolic_offset(left: f64, center: f64, right: f64) -> f64 {
    let denom = left - 2.0 * center + right;
    if denom < 0.0 {
        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

fn wrap(i: usize, n: usize) -> f64 {
    if i > n / 2 {
        i as f64 - n as f64
    } else {
        i as f64
    }
}

impl Tracker {
    /// Trains on the first frame.
    pub fn init(frame: &Image, bbox: BoundingBox, cfg: TrackerConfig) -> Result<(Tracker, MonitorReport)> {
        let table = match cfg.color_table_path() {
            Some(p) => Some(Arc::new(ColorNames::load(p)?)),
            None => None,
        };
        Self::init_with_table(frame, bbox, cfg, table)
    }

    /// As [`Tracker::init`], with an already-loaded color-name table.
    pub fn init_with_table(
        frame: &Image,
        bbox: BoundingBox,
        cfg: TrackerConfig,
        table: Option<Arc<ColorNames>>,
    ) -> Result<(Tracker, MonitorReport)> {
        cfg.validate()?;
        if frame.is_empty() {
            return Err(Error::EmptyImage);
        }
        if !bbox.is_valid() {
            return Err(Error::invalid(format!("degenerate bounding box {bbox:?}")));
        }
        let frame_box = BoundingBox::new(0.0, 0.0, frame.width() as f64, frame.height() as f64);
        if bbox.intersection(&frame_box) < 1.0 {
            return Err(Error::invalid("bounding box does not overlap the frame"));
        }

        let cell = cfg.cell_size;
        let base_target = bbox.size();
        let base_window = Size::new(
            round_even(base_target.w * cfg.padding),
            round_even(base_target.h * cfg.padding),
        );
        let mut cols = (base_window.w / cell as f64).floor().max(2.0);
        let mut rows = (base_window.h / cell as f64).floor().max(2.0);
        let longest = rows.max(cols);
        if longest > cfg.max_template_cells as f64 {
            let shrink = cfg.max_template_cells as f64 / longest;
            cols = (cols * shrink).floor().max(2.0);
            rows = (rows * shrink).floor().max(2.0);
        }
        let (rows, cols) = (rows as usize, cols as usize);
        let sigma = label_sigma(base_target, rows, cols);
        let label_spec = fft2_plane(&gaussian_label(rows, cols, sigma)?);

        let mut tracker = Tracker {
            features: FeatureExtractor::new(cell, table),
            cos_window: cosine_window(rows, cols),
            label_spec,
            template: (cols * cell, rows * cell),
            base_window,
            base_target,
            position: bbox.center(),
            scale: 1.0,
            filter: JointFilter {
                w: FeatureMap::zeros(rows, cols, 1, cell),
                w_r: FeatureMap::zeros(rows, cols, 1, cell),
                wr_hat: Spectrum::zeros(rows, cols, 1, cell),
                wc_hat: Spectrum::zeros(rows, cols, 1, cell),
                i_hat: Spectrum::zeros(rows, cols, 1, cell),
                rho: cfg.admm.rho0,
                penalties: Vec::new(),
                relative_residuals: Vec::new(),
            },
            color_model: ColorModel::invalid(),
            gate: UpdateGate::new(cfg.theta1, cfg.theta2),
            frame_index: 0,
            last_segmentation: None,
            cfg,
        };

        tracker.color_model = tracker.fresh_color_model(frame, tracker.position, 1.0);
        let (a0, filter, mask) = tracker.train(frame, tracker.position, 1.0)?;
        tracker.filter = filter;

        let resp = correlate(&a0, &tracker.filter.wr_hat)?;
        let s_max = resp.argmax().0;
        let bk = kurtosis(&resp).unwrap_or(0.0);
        tracker.gate.record(s_max, bk);
        tracker.frame_index = 1;
        Ok((
            tracker,
            MonitorReport {
                s_max,
                bk,
                updated: true,
                informative: mask.is_informative(),
            },
        ))
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn position(&self) -> Point {
        self.position
    }

    pub fn size(&self) -> Size {
        self.base_target.scaled(self.scale)
    }

    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::from_center(self.position, self.size())
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn filter(&self) -> &JointFilter {
        &self.filter
    }

    pub fn color_model(&self) -> &ColorModel {
        &self.color_model
    }

    pub fn gate(&self) -> &UpdateGate {
        &self.gate
    }

    pub fn thresholds(&self) -> Option<(f64, f64)> {
        self.gate.thresholds()
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    /// Feature grid `(rows, cols)`.
    pub fn grid(&self) -> (usize, usize) {
        (self.cos_window.rows, self.cos_window.cols)
    }

    pub fn last_segmentation(&self) -> Option<&Segmentation> {
        self.last_segmentation.as_ref()
    }

    fn window_size(&self, scale: f64) -> Size {
        self.base_window.scaled(scale)
    }

    fn window_patch(&self, frame: &Image, center: Point, scale: f64) -> Result<Image> {
        let (tw, th) = self.template;
        extract_patch(frame, center, self.window_size(scale), tw, th)
    }

    fn features_of(&self, patch: &Image) -> Result<Spectrum> {
        let mut f = self.features.compute(patch)?;
        f.apply_window(&self.cos_window);
        Ok(fft2(&f))
    }

    fn target_box(&self, center: Point, scale: f64) -> BoundingBox {
        BoundingBox::from_center(center, self.base_target.scaled(scale))
    }

    fn fresh_color_model(&self, frame: &Image, center: Point, scale: f64) -> ColorModel {
        let target = self.target_box(center, scale);
        let size = target.size();
        let context: Vec<BoundingBox> = context_centers(center, size, self.cfg.context_count.max(1))
            .into_iter()
            .map(|c| BoundingBox::from_center(c, size))
            .collect();
        build_model(frame, &target, &context)
    }

    /// Target area in feature cells; independent of the current scale.
    fn target_area_cells(&self) -> f64 {
        let (rows, cols) = self.grid();
        (self.base_target.w * cols as f64 / self.base_window.w)
            * (self.base_target.h * rows as f64 / self.base_window.h)
    }

    fn reliability_mask(&mut self, window: &Image) -> Result<ReliabilityMask> {
        let (rows, cols) = self.grid();
        if !self.color_model.is_valid() || !window.is_color() {
            self.last_segmentation = None;
            return Ok(ReliabilityMask::all_ones(rows, cols));
        }
        let posterior = back_project(window, &self.color_model)?;
        let cells = pool_to_cells(&posterior, self.cfg.cell_size);
        let mask = binarize(&cells, self.target_area_cells(), self.cfg.tau_l, self.cfg.tau_u)?;
        self.last_segmentation = Some(Segmentation {
            window: window.clone(),
            posterior,
            mask: mask.clone(),
        });
        Ok(mask)
    }

    /// Builds the mask, updates the color model if the mask is informative and
    /// solves for a new filter at `(center, scale)`. Returns the target
    /// spectrum alongside.
    fn train(
        &mut self,
        frame: &Image,
        center: Point,
        scale: f64,
    ) -> Result<(Spectrum, JointFilter, ReliabilityMask)> {
        let window = self.window_patch(frame, center, scale)?;
        let a0 = self.features_of(&window)?;
        let size = self.base_target.scaled(scale);
        let ctx = context_centers(center, size, self.cfg.context_count)
            .into_iter()
            .map(|c| self.window_patch(frame, c, scale).and_then(|p| self.features_of(&p)))
            .collect::<Result<Vec<_>>>()?;

        let mask = self.reliability_mask(&window)?;
        if mask.is_informative() && self.frame_index > 0 {
            let fresh = self.fresh_color_model(frame, center, scale);
            if fresh.is_valid() {
                self.color_model =
                    update_model(&self.color_model, &fresh, self.cfg.histogram_rate)?;
            }
        }
        let filter = admm::solve(&a0, &ctx, &self.label_spec, &mask, &self.cfg.admm)?;
        Ok((a0, filter, mask))
    }

    /// Scale-and-translation search with the current filter.
    pub fn detect(&self, frame: &Image) -> Result<Detection> {
        let mut order: Vec<usize> = (0..self.cfg.scales.len()).collect();
        order.sort_by(|&a, &b| {
            let da = (self.cfg.scales[a] - 1.0).abs();
            let db = (self.cfg.scales[b] - 1.0).abs();
            da.total_cmp(&db).then(a.cmp(&b))
        });

        let mut best: Option<(f64, usize, usize, usize, ResponseMap)> = None;
        for idx in order {
            let s = self.scale * self.cfg.scales[idx];
            let z = self.features_of(&self.window_patch(frame, self.position, s)?)?;
            let resp = correlate(&z, &self.filter.wr_hat)?;
            let (peak, r, c) = resp.argmax();
            if best.as_ref().is_none_or(|b| peak > b.0) {
                best = Some((peak, idx, r, c, resp));
            }
        }
        let (_, idx, r, c, response) = best.ok_or_else(|| Error::invalid("empty scale set"))?;
        let (rows, cols) = (response.rows, response.cols);

        let (mut dr, mut dc) = (wrap(r, rows), wrap(c, cols));
        if self.cfg.subcell_refine {
            let at = |rr: usize, cc: usize| response.get(rr % rows, cc % cols);
            let center = at(r, c);
            if rows >= 3 {
                dr += parabolic_offset(at(r + rows - 1, c), center, at(r + 1, c));
            }
            if cols >= 3 {
                dc += parabolic_offset(at(r, c + cols - 1), center, at(r, c + 1));
            }
        }

        let factor = self.cfg.scales[idx];
        let window = self.window_size(self.scale * factor);
        let position = Point::new(
            self.position.x + dc * window.w / cols as f64,
            self.position.y + dr * window.h / rows as f64,
        );
        Ok(Detection {
            position,
            scale_index: idx,
            scale_factor: factor,
            displacement: (dr, dc),
            response,
        })
    }

    /// Blends a freshly trained filter into the model and records this frame's
    /// statistics.
    pub fn update_filter(&mut self, new_filter: &JointFilter, s_max: f64, bk: f64) -> Result<()> {
        let blended = if self.filter.wr_hat.shape() == new_filter.wr_hat.shape() {
            self.filter.blend(new_filter, self.cfg.filter_rate)?
        } else {
            return Err(Error::shape(self.filter.wr_hat.shape(), new_filter.wr_hat.shape()));
        };
        self.filter = blended;
        self.gate.record(s_max, bk);
        Ok(())
    }

    /// Processes one frame and returns the reported box.
    pub fn step(&mut self, frame: &Image) -> Result<(BoundingBox, MonitorReport)> {
        let det = self.detect(frame)?;
        let s_max = det.response.argmax().0;
        let bk = kurtosis(&det.response).unwrap_or(0.0);
        let updated = self.gate.should_update(s_max, bk);
        self.position = det.position;

        let mut informative = false;
        if updated {
            let new_scale = self.scale * det.scale_factor;
            let (_, filter, mask) = self.train(frame, self.position, new_scale)?;
            informative = mask.is_informative();
            self.update_filter(&filter, s_max, bk)?;
            self.scale = new_scale;
        } else if self.cfg.history_includes_rejected {
            self.gate.record(s_max, bk);
        }
        self.frame_index += 1;
        Ok((
            self.bbox(),
            MonitorReport {
                s_max,
                bk,
                updated,
                informative,
            },
        ))
    }
}
