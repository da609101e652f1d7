//! Deterministic synthetic sequences with exact ground truth.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BoundingBox, Image, Point, Size};

use super::sequence::{format_ground_truth, LoadOptions, SequenceSpec, FRAME_DIR, GROUND_TRUTH_FILE};

pub const META_FILE: &str = "meta.json";
const TEXTURE_GRID: usize = 6;
const BACKGROUND_CELL: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Translate,
    Zoom,
    Occlude,
    Distractor,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Translate,
        Scenario::Zoom,
        Scenario::Occlude,
        Scenario::Distractor,
    ];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Translate => "translate",
            Scenario::Zoom => "zoom",
            Scenario::Occlude => "occlude",
            Scenario::Distractor => "distractor",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scenario {s:?} (translate, zoom, occlude, distractor)")))
    }
}

/// Scenario parameters. Frame numbers are 1-based, as in the file names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub scenario: Scenario,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub target_w: f64,
    pub target_h: f64,
    /// Target center in frame 1.
    pub start: (f64, f64),
    /// Center displacement per frame.
    pub velocity: (f64, f64),
    /// Per-frame size growth factor.
    pub zoom: f64,
    /// Inclusive frame interval over which the target is hidden.
    pub occlusion: Option<(usize, usize)>,
    /// Reflect the target off the frame borders instead of failing.
    pub bounce: bool,
    /// Vertical center distance of the distractor path, in target heights.
    pub distractor_gap: f64,
    pub seed: u64,
}

impl SynthParams {
    pub fn new(scenario: Scenario) -> Self {
        let mut p = SynthParams {
            scenario,
            frames: 100,
            width: 128,
            height: 128,
            target_w: 24.0,
            target_h: 24.0,
            start: (24.0, 36.0),
            velocity: (0.8, 0.5),
            zoom: 1.0,
            occlusion: None,
            bounce: false,
            distractor_gap: 1.25,
            seed: 7,
        };
        match scenario {
            Scenario::Translate => {}
            Scenario::Zoom => {
                p.start = (64.0, 64.0);
                p.velocity = (0.0, 0.0);
                p.zoom = 1.006;
            }
            Scenario::Occlude => p.occlusion = Some((40, 55)),
            Scenario::Distractor => {
                p.start = (16.0, 40.0);
                p.velocity = (0.9, 0.0);
            }
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames < 2 || self.width < 8 || self.height < 8 {
            return Err(Error::invalid("need at least 2 frames of at least 8x8 pixels"));
        }
        if !(self.target_w >= 2.0 && self.target_h >= 2.0) {
            return Err(Error::invalid("target must be at least 2x2 pixels"));
        }
        if !(self.zoom > 0.0) || !self.zoom.is_finite() {
            return Err(Error::invalid("zoom must be positive"));
        }
        if let Some((a, b)) = self.occlusion {
            if a == 0 || a > b {
                return Err(Error::invalid(format!("bad occlusion interval {a}-{b}")));
            }
        }
        Ok(())
    }

    pub fn is_occluded(&self, frame: usize) -> bool {
        self.occlusion.is_some_and(|(a, b)| (a..=b).contains(&frame))
    }
}

/// Rendered sequence held in memory.
#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub params: SynthParams,
    pub frames: Vec<Image>,
    pub ground_truth: Vec<BoundingBox>,
    pub distractor: Option<Vec<BoundingBox>>,
}

#[derive(Serialize)]
struct Meta<'a> {
    version: u32,
    params: &'a SynthParams,
    distractor_ground_truth: Option<&'a [BoundingBox]>,
}

/// Folds `v` into `[lo, hi]` by reflection.
fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return lo;
    }
    let t = (v - lo).rem_euclid(2.0 * span);
    lo + if t > span { 2.0 * span - t } else { t }
}

fn within(b: &BoundingBox, width: usize, height: usize) -> bool {
    b.x >= 0.0 && b.y >= 0.0 && b.x + b.w <= width as f64 && b.y + b.h <= height as f64
}

fn path(p: &SynthParams) -> Result<(Vec<BoundingBox>, Option<Vec<BoundingBox>>)> {
    let mut gt = Vec::with_capacity(p.frames);
    let mut other = Vec::new();
    for k in 0..p.frames {
        let growth = p.zoom.powi(k as i32);
        let size = Size::new(p.target_w * growth, p.target_h * growth);
        let mut c = Point::new(
            p.start.0 + k as f64 * p.velocity.0,
            p.start.1 + k as f64 * p.velocity.1,
        );
        if p.bounce {
            c.x = reflect(c.x, size.w / 2.0, p.width as f64 - size.w / 2.0);
            c.y = reflect(c.y, size.h / 2.0, p.height as f64 - size.h / 2.0);
        }
        let b = BoundingBox::from_center(c, size);
        if !within(&b, p.width, p.height) {
            return Err(Error::invalid(format!("target leaves the frame at frame {}: {b:?}", k + 1)));
        }
        gt.push(b);
        if p.scenario == Scenario::Distractor {
            // mirrored left-right, one gap below
            let d = BoundingBox::from_center(
                Point::new(p.width as f64 - c.x, c.y + p.distractor_gap * size.h),
                size,
            );
            if !within(&d, p.width, p.height) {
                return Err(Error::invalid(format!("distractor leaves the frame at frame {}", k + 1)));
            }
            other.push(d);
        }
    }
    Ok((gt, (p.scenario == Scenario::Distractor).then_some(other)))
}

fn random_color(rng: &mut ChaCha8Rng, lo: [f64; 3], hi: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| rng.random_range(lo[i]..hi[i]))
}

struct Textures {
    background: Vec<[f64; 3]>,
    target: Vec<[f64; 3]>,
}

impl Textures {
    fn new(p: &SynthParams, rng: &mut ChaCha8Rng) -> Self {
        let gw = p.width.div_ceil(BACKGROUND_CELL) + 1;
        let gh = p.height.div_ceil(BACKGROUND_CELL) + 1;
        let grid: Vec<[f64; 3]> = (0..gw * gh)
            .map(|_| random_color(rng, [0.05, 0.3, 0.25], [0.3, 0.65, 0.7]))
            .collect();
        let mut background = Vec::with_capacity(p.width * p.height);
        for y in 0..p.height {
            for x in 0..p.width {
                let fx = x as f64 / BACKGROUND_CELL as f64;
                let fy = y as f64 / BACKGROUND_CELL as f64;
                let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
                let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
                let at = |xx: usize, yy: usize| grid[yy.min(gh - 1) * gw + xx.min(gw - 1)];
                let (a, b, c, d) = (at(x0, y0), at(x0 + 1, y0), at(x0, y0 + 1), at(x0 + 1, y0 + 1));
                let noise = rng.random_range(-0.04..0.04);
                background.push(std::array::from_fn(|i| {
                    let top = a[i] + (b[i] - a[i]) * tx;
                    let bottom = c[i] + (d[i] - c[i]) * tx;
                    (top + (bottom - top) * ty + noise).clamp(0.0, 1.0)
                }));
            }
        }
        let target = (0..TEXTURE_GRID * TEXTURE_GRID)
            .map(|_| random_color(rng, [0.7, 0.1, 0.0], [1.0, 0.5, 0.2]))
            .collect();
        Textures { background, target }
    }

    /// Target color at normalized coordinates `(u, v)` in `[0, 1)`.
    fn target_at(&self, u: f64, v: f64) -> [f64; 3] {
        let edge = 0.08;
        if u < edge || v < edge || u > 1.0 - edge || v > 1.0 - edge {
            return [0.45, 0.05, 0.05];
        }
        let i = ((u * TEXTURE_GRID as f64) as usize).min(TEXTURE_GRID - 1);
        let j = ((v * TEXTURE_GRID as f64) as usize).min(TEXTURE_GRID - 1);
        self.target[j * TEXTURE_GRID + i]
    }
}

fn paint(img: &mut Image, tex: &Textures, b: &BoundingBox) {
    let x0 = b.x.floor().max(0.0) as usize;
    let y0 = b.y.floor().max(0.0) as usize;
    let x1 = ((b.x + b.w).ceil() as usize).min(img.width());
    let y1 = ((b.y + b.h).ceil() as usize).min(img.height());
    for y in y0..y1 {
        for x in x0..x1 {
            if b.contains_pixel(x, y) {
                let u = (x as f64 + 0.5 - b.x) / b.w;
                let v = (y as f64 + 0.5 - b.y) / b.h;
                img.put(x, y, &tex.target_at(u, v));
            }
        }
    }
}

/// Renders the sequence in memory.
pub fn generate(params: &SynthParams) -> Result<SyntheticSequence> {
    params.validate()?;
    let (ground_truth, distractor) = path(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let tex = Textures::new(params, &mut rng);
    let (w, h) = (params.width, params.height);

    let mut frames = Vec::with_capacity(params.frames);
    for k in 0..params.frames {
        // small per-frame sensor noise over the static background
        let data: Vec<f64> = tex
            .background
            .iter()
            .flat_map(|px| {
                let n = rng.random_range(-0.01..0.01);
                px.map(|c| (c + n).clamp(0.0, 1.0))
            })
            .collect();
        let mut img = Image::new(w, h, 3, data)?;
        if let Some(d) = &distractor {
            paint(&mut img, &tex, &d[k]);
        }
        if !params.is_occluded(k + 1) {
            paint(&mut img, &tex, &ground_truth[k]);
        }
        frames.push(img);
    }
    Ok(SyntheticSequence {
        params: params.clone(),
        frames,
        ground_truth,
        distractor,
    })
}

impl SyntheticSequence {
    /// Writes `img/0001.png…`, `groundtruth_rect.txt` (1-based) and
    /// `meta.json` under `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<SequenceSpec> {
        let dir = dir.as_ref();
        let img_dir = dir.join(FRAME_DIR);
        std::fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
        let mut paths = Vec::with_capacity(self.frames.len());
        for (k, frame) in self.frames.iter().enumerate() {
            let p = img_dir.join(format!("{:04}.png", k + 1));
            frame.save_png(&p)?;
            paths.push(p);
        }
        let gt_path = dir.join(GROUND_TRUTH_FILE);
        std::fs::write(&gt_path, format_ground_truth(&self.ground_truth, LoadOptions::default()))
            .map_err(|e| Error::io(&gt_path, e))?;
        let meta = Meta {
            version: 1,
            params: &self.params,
            distractor_ground_truth: self.distractor.as_deref(),
        };
        let meta_path = dir.join(META_FILE);
        std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)
            .map_err(|e| Error::io(&meta_path, e))?;
        Ok(SequenceSpec {
            name: dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| self.params.scenario.to_string()),
            frames: paths,
            ground_truth: self.ground_truth.clone(),
        })
    }
}

/// Renders and writes a scenario in one go.
pub fn synth_sequence(params: &SynthParams, dir: impl AsRef<Path>) -> Result<SequenceSpec> {
    generate(params)?.write(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn translate_moves_exactly() {
        let mut p = SynthParams::new(Scenario::Translate);
        p.velocity = (2.0, 0.0);
        p.frames = 50;
        p.start = (14.0, 40.0);
        let (gt, _) = path(&p).unwrap();
        for pair in gt.windows(2) {
            assert_eq!(pair[1].x - pair[0].x, 2.0);
            assert_eq!(pair[1].y, pair[0].y);
        }
    }

    #[test]
    fn zoom_grows_geometrically() {
        let mut p = SynthParams::new(Scenario::Zoom);
        p.zoom = 1.01;
        let (gt, _) = path(&p).unwrap();
        for (k, b) in gt.iter().enumerate() {
            let want = 24.0 * 1.01f64.powi(k as i32);
            assert!((b.w - want).abs() < 1e-9 && (b.h - want).abs() < 1e-9);
            let c = b.center();
            assert!((c.x - 64.0).abs() < 1e-9 && (c.y - 64.0).abs() < 1e-9);
        }
    }

    #[test]
    fn leaving_the_frame_is_an_error() {
        let mut p = SynthParams::new(Scenario::Translate);
        p.velocity = (5.0, 0.0);
        assert!(generate(&p).is_err());
        p.bounce = true;
        let s = generate(&p).unwrap();
        assert!(s.ground_truth.iter().all(|b| within(b, p.width, p.height)));
    }

    #[test]
    fn reflection() {
        assert_eq!(reflect(5.0, 0.0, 10.0), 5.0);
        assert_eq!(reflect(12.0, 0.0, 10.0), 8.0);
        assert_eq!(reflect(-3.0, 0.0, 10.0), 3.0);
        assert_eq!(reflect(23.0, 0.0, 10.0), 3.0);
    }

    #[test]
    fn occluded_frames_hold_no_target_pixels() {
        let mut p = SynthParams::new(Scenario::Occlude);
        p.frames = 32;
        p.occlusion = Some((20, 30));
        let s = generate(&p).unwrap();
        for (k, (img, b)) in s.frames.iter().zip(&s.ground_truth).enumerate() {
            let mut target_px = 0;
            for y in 0..p.height {
                for x in 0..p.width {
                    // background red stays below 0.35; target red never drops below 0.45
                    if b.contains_pixel(x, y) && img.get(x, y, 0) >= 0.4 {
                        target_px += 1;
                    }
                }
            }
            if p.is_occluded(k + 1) {
                assert_eq!(target_px, 0, "frame {}", k + 1);
            } else {
                assert!(target_px > 400, "frame {}", k + 1);
            }
        }
    }

    #[test]
    fn distractor_path_is_disjoint_and_close() {
        let p = SynthParams::new(Scenario::Distractor);
        let s = generate(&p).unwrap();
        let d = s.distractor.as_ref().unwrap();
        let mut closest = f64::INFINITY;
        for (a, b) in s.ground_truth.iter().zip(d) {
            assert_eq!(a.intersection(b), 0.0);
            let (ca, cb) = (a.center(), b.center());
            closest = closest.min((ca.x - cb.x).hypot(ca.y - cb.y));
        }
        assert!(closest <= 1.5 * p.target_w, "closest approach {closest}");
    }

    #[test]
    fn generation_is_deterministic() {
        let p = SynthParams::new(Scenario::Translate);
        let (a, b) = (generate(&p).unwrap(), generate(&p).unwrap());
        assert_eq!(a.frames, b.frames);
        let mut q = p.clone();
        q.seed += 1;
        assert_ne!(generate(&q).unwrap().frames[0], a.frames[0]);
    }

    #[test]
    fn scenario_names_roundtrip() {
        for s in Scenario::ALL {
            assert_eq!(s.to_string().parse::<Scenario>().unwrap(), s);
        }
        assert!("spin".parse::<Scenario>().is_err());
    }
}
