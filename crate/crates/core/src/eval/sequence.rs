use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imaging::BoundingBox;

pub const GROUND_TRUTH_FILE: &str = "groundtruth_rect.txt";
pub const FRAME_DIR: &str = "img";
const FRAME_EXTENSIONS: [&str; 5] = ["jpg", "jpeg", "png", "ppm", "pgm"];

/// A sequence on disk: ordered frame paths and per-frame ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub name: String,
    pub frames: Vec<PathBuf>,
    /// Corner boxes in 0-based pixel coordinates; may be shorter than `frames`.
    pub ground_truth: Vec<BoundingBox>,
}

/// How ground-truth coordinates are stored on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Subtract 1 from x and y (the usual OTB convention).
    pub one_based: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { one_based: true }
    }
}

impl SequenceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frames.len() < 2 {
            return Err(Error::invalid(format!(
                "sequence {} needs at least 2 frames, has {}",
                self.name,
                self.frames.len()
            )));
        }
        if self.ground_truth.is_empty() {
            return Err(Error::invalid(format!("sequence {} has no ground truth", self.name)));
        }
        if self.ground_truth.len() > self.frames.len() {
            return Err(Error::invalid(format!(
                "sequence {} has {} ground-truth rows for {} frames",
                self.name,
                self.ground_truth.len(),
                self.frames.len()
            )));
        }
        if !self.ground_truth[0].is_valid() {
            return Err(Error::invalid(format!("sequence {}: first ground-truth box is degenerate", self.name)));
        }
        Ok(())
    }

    pub fn initial_box(&self) -> BoundingBox {
        self.ground_truth[0]
    }
}

fn frame_number(path: &Path) -> Option<u64> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    if !FRAME_EXTENSIONS.contains(&ext.as_str()) {
        return None;
    }
    path.file_stem()?.to_str()?.parse().ok()
}

/// Parses ground-truth text. Fields are separated by commas, tabs or spaces.
pub fn parse_ground_truth(text: &str, origin: &Path, opts: LoadOptions) -> Result<Vec<BoundingBox>> {
    let shift = if opts.one_based { 1.0 } else { 0.0 };
    let mut boxes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            msg,
        };
        let fields: Vec<&str> = line
            .split([',', '\t', ' '])
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 fields x,y,w,h, got {line:?}")));
        }
        let mut v = [0.0; 4];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f
                .parse::<f64>()
                .map_err(|e| err(format!("{f:?}: {e}")))?;
        }
        boxes.push(BoundingBox::new(v[0] - shift, v[1] - shift, v[2], v[3]));
    }
    Ok(boxes)
}

/// A stored value `u` with `u - 1 == v` exactly, whenever one exists near
/// `v + 1`; `v + 1` alone can be off by an ulp after the round trip.
fn unshift(v: f64) -> f64 {
    let guess = v + 1.0;
    let (mut lo, mut hi) = (guess, guess);
    for _ in 0..4 {
        for u in [lo, hi] {
            if u - 1.0 == v {
                return u;
            }
        }
        lo = lo.next_down();
        hi = hi.next_up();
    }
    guess
}

/// Inverse of [`parse_ground_truth`]. Values are written in shortest
/// round-trip form, so re-parsing yields identical boxes.
pub fn format_ground_truth(boxes: &[BoundingBox], opts: LoadOptions) -> String {
    let shift = |v: f64| if opts.one_based { unshift(v) } else { v };
    boxes
        .iter()
        .map(|b| format!("{},{},{},{}\n", shift(b.x), shift(b.y), b.w, b.h))
        .collect()
}

pub fn load_sequence(dir: impl AsRef<Path>) -> Result<SequenceSpec> {
    load_sequence_with(dir, LoadOptions::default())
}

/// Loads an OTB-layout directory: `img/` with numbered frames and
/// `groundtruth_rect.txt`.
pub fn load_sequence_with(dir: impl AsRef<Path>, opts: LoadOptions) -> Result<SequenceSpec> {
    let dir = dir.as_ref();
    let img_dir = dir.join(FRAME_DIR);
    let entries = std::fs::read_dir(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    let mut numbered = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&img_dir, e))?.path();
        if let Some(n) = frame_number(&path) {
            numbered.push((n, path));
        }
    }
    numbered.sort();

    let gt_path = dir.join(GROUND_TRUTH_FILE);
    let text = std::fs::read_to_string(&gt_path).map_err(|e| Error::io(&gt_path, e))?;
    let ground_truth = parse_ground_truth(&text, &gt_path, opts)?;

    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let spec = SequenceSpec {
        name,
        frames: numbered.into_iter().map(|(_, p)| p).collect(),
        ground_truth,
    };
    spec.validate()?;
    Ok(spec)
}
