use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BoundingBox, ColorNames, Image};
use crate::tracker::{MonitorReport, Segmentation, Tracker, TrackerConfig};

use super::metrics::{compute_ope, OpeMetrics};
use super::sequence::{load_sequence_with, LoadOptions, SequenceSpec, GROUND_TRUTH_FILE};

pub const RESULTS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    /// 1-based frame number.
    pub frame: usize,
    /// Reported box, 0-based pixel coordinates.
    pub bbox: BoundingBox,
    pub s_max: f64,
    pub bk: f64,
    pub updated: bool,
    pub informative: bool,
    pub time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRun {
    pub version: u32,
    pub sequence: String,
    pub frames: Vec<FrameRecord>,
    pub total_time_ms: f64,
}

impl TrackRun {
    pub fn boxes(&self) -> Vec<BoundingBox> {
        self.frames.iter().map(|f| f.bbox).collect()
    }

    pub fn reports(&self) -> Vec<MonitorReport> {
        self.frames
            .iter()
            .map(|f| MonitorReport {
                s_max: f.s_max,
                bk: f.bk,
                updated: f.updated,
                informative: f.informative,
            })
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let run: TrackRun = serde_json::from_str(&text)?;
        if run.version != RESULTS_VERSION {
            return Err(Error::invalid(format!(
                "{}: results version {} is not supported",
                path.display(),
                run.version
            )));
        }
        Ok(run)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Removes `time_ms` and `total_time_ms` fields anywhere in a JSON document.
pub fn strip_timing(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            map.remove("time_ms");
            map.remove("total_time_ms");
            map.values_mut().for_each(strip_timing);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

/// Optional per-frame artifacts.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// One PNG per frame with the reported box drawn.
    pub render_dir: Option<PathBuf>,
    /// Window, posterior and mask panels for every frame that trained.
    pub mask_dir: Option<PathBuf>,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn to_rgb(img: &Image) -> Image {
    if img.is_color() {
        return img.clone();
    }
    let data = img.data().iter().flat_map(|&v| [v, v, v]).collect();
    Image::new(img.width(), img.height(), 3, data).expect("gray values are in range")
}

/// Draws a 1-pixel outline, clipped to the image.
pub fn draw_box(img: &Image, b: &BoundingBox, color: [f64; 3]) -> Image {
    let mut out = to_rgb(img);
    let (w, h) = (out.width() as i64, out.height() as i64);
    let x0 = b.x.round() as i64;
    let y0 = b.y.round() as i64;
    let x1 = (b.x + b.w).round() as i64 - 1;
    let y1 = (b.y + b.h).round() as i64 - 1;
    let mut plot = |x: i64, y: i64| {
        if (0..w).contains(&x) && (0..h).contains(&y) {
            out.put(x as usize, y as usize, &color);
        }
    };
    for x in x0..=x1 {
        plot(x, y0);
        plot(x, y1);
    }
    for y in y0..=y1 {
        plot(x0, y);
        plot(x1, y);
    }
    out
}

/// `window | posterior | mask`, all at window resolution.
pub fn segmentation_panel(seg: &Segmentation) -> Result<Image> {
    let window = to_rgb(&seg.window);
    let (w, h) = (window.width(), window.height());
    let post = &seg.posterior;
    let mask = &seg.mask;
    let mut data = Vec::with_capacity(3 * w * h * 3);
    for y in 0..h {
        data.extend_from_slice(&window.data()[y * w * 3..(y + 1) * w * 3]);
        for x in 0..w {
            let v = post.get(y.min(post.rows - 1), x.min(post.cols - 1)).clamp(0.0, 1.0);
            data.extend_from_slice(&[v, v, v]);
        }
        for x in 0..w {
            let r = (y * mask.rows() / h).min(mask.rows() - 1);
            let c = (x * mask.cols() / w).min(mask.cols() - 1);
            let v = f64::from(mask.get(r, c));
            data.extend_from_slice(&[v, v, v]);
        }
    }
    Image::new(3 * w, h, 3, data)
}

/// Tracks a whole sequence from its first ground-truth box.
pub fn run_sequence(
    spec: &SequenceSpec,
    cfg: &TrackerConfig,
    table: Option<Arc<ColorNames>>,
    opts: &RunOptions,
) -> Result<TrackRun> {
    spec.validate()?;
    for dir in opts.render_dir.iter().chain(&opts.mask_dir) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let total = Instant::now();
    let mut frames = Vec::with_capacity(spec.frames.len());
    let mut tracker: Option<Tracker> = None;
    for (k, path) in spec.frames.iter().enumerate() {
        let img = Image::load(path)?;
        let t = Instant::now();
        let (bbox, report) = match tracker.as_mut() {
            None => {
                let (tr, report) =
                    Tracker::init_with_table(&img, spec.initial_box(), cfg.clone(), table.clone())?;
                tracker = Some(tr);
                (spec.initial_box(), report)
            }
            Some(tr) => tr.step(&img)?,
        };
        let time_ms = ms_since(t);
        let frame = k + 1;
        if let Some(dir) = &opts.render_dir {
            draw_box(&img, &bbox, [1.0, 0.9, 0.0]).save_png(dir.join(format!("{frame:04}.png")))?;
        }
        if let (Some(dir), Some(seg)) = (&opts.mask_dir, tracker.as_ref().and_then(Tracker::last_segmentation)) {
            if report.updated {
                segmentation_panel(seg)?.save_png(dir.join(format!("mask_{frame:04}.png")))?;
            }
        }
        frames.push(FrameRecord {
            frame,
            bbox,
            s_max: report.s_max,
            bk: report.bk,
            updated: report.updated,
            informative: report.informative,
            time_ms,
        });
    }
    Ok(TrackRun {
        version: RESULTS_VERSION,
        sequence: spec.name.clone(),
        frames,
        total_time_ms: ms_since(total),
    })
}

/// Loads the color-name table named by the config or the environment.
pub fn load_color_table(cfg: &TrackerConfig) -> Result<Option<Arc<ColorNames>>> {
    cfg.color_table_path()
        .map(|p| ColorNames::load(p).map(Arc::new))
        .transpose()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub name: String,
    pub metrics: OpeMetrics,
    pub run: TrackRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub version: u32,
    pub mean_success_auc: f64,
    pub mean_precision_at_20: f64,
    pub sequences: Vec<BenchEntry>,
}

/// Subdirectories of `root` holding a ground-truth file, sorted by name.
pub fn discover_sequences(root: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let root = root.as_ref();
    let mut dirs = Vec::new();
    for entry in std::fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.join(GROUND_TRUTH_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Tracks and scores every sequence under `root`, one tracker per sequence,
/// sequences in parallel. Output order follows the directory names.
pub fn bench(root: impl AsRef<Path>, cfg: &TrackerConfig, load: LoadOptions) -> Result<BenchReport> {
    let dirs = discover_sequences(&root)?;
    if dirs.is_empty() {
        return Err(Error::invalid(format!(
            "no sequences with {GROUND_TRUTH_FILE} under {}",
            root.as_ref().display()
        )));
    }
    let table = load_color_table(cfg)?;
    let sequences = dirs
        .par_iter()
        .map(|dir| {
            let spec = load_sequence_with(dir, load)?;
            let run = run_sequence(&spec, cfg, table.clone(), &RunOptions::default())?;
            let metrics = compute_ope(&run.boxes(), &spec.ground_truth)?;
            Ok(BenchEntry {
                name: spec.name,
                metrics,
                run,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = sequences.len() as f64;
    Ok(BenchReport {
        version: RESULTS_VERSION,
        mean_success_auc: sequences.iter().map(|s| s.metrics.success_auc).sum::<f64>() / n,
        mean_precision_at_20: sequences.iter().map(|s| s.metrics.precision_at_20).sum::<f64>() / n,
        sequences,
    })
}

impl BenchReport {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }
}
