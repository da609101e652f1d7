use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::BoundingBox;

/// Center-error thresholds of the precision curve, in pixels.
pub const PRECISION_THRESHOLDS: usize = 51;
/// Overlap thresholds `0, 0.02, …, 0.98`; success counts `IoU > th`.
pub const SUCCESS_THRESHOLDS: usize = 50;
const SUCCESS_STEP: f64 = 0.02;
const RANKING_THRESHOLD_PX: usize = 20;

/// Intersection over union, in `[0, 1]`.
pub fn overlap(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Euclidean distance between box centers.
pub fn center_error(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ca, cb) = (a.center(), b.center());
    (ca.x - cb.x).hypot(ca.y - cb.y)
}

pub fn success_thresholds() -> Vec<f64> {
    (0..SUCCESS_THRESHOLDS).map(|i| i as f64 * SUCCESS_STEP).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpeMetrics {
    /// Fraction of frames with center error `<= t`, `t = 0..=50` px.
    pub precision_curve: Vec<f64>,
    /// Fraction of frames with overlap `> t`, `t = 0, 0.02, …, 0.98`.
    pub success_curve: Vec<f64>,
    pub precision_at_20: f64,
    pub success_auc: f64,
    pub frames_scored: usize,
    pub mean_overlap: f64,
    pub mean_center_error: f64,
}

/// Scores predicted boxes against ground truth.
///
/// Frames past the end of the ground truth, or whose ground-truth box is
/// degenerate, are not scored.
pub fn compute_ope(predicted: &[BoundingBox], ground_truth: &[BoundingBox]) -> Result<OpeMetrics> {
    if predicted.len() < ground_truth.len() {
        return Err(Error::invalid(format!(
            "run has {} boxes but ground truth has {}",
            predicted.len(),
            ground_truth.len()
        )));
    }
    let pairs: Vec<(f64, f64)> = predicted
        .iter()
        .zip(ground_truth)
        .filter(|(_, g)| g.is_valid())
        .map(|(p, g)| (overlap(p, g), center_error(p, g)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::invalid("no frames with valid ground truth"));
    }
    let n = pairs.len() as f64;
    let precision_curve: Vec<f64> = (0..PRECISION_THRESHOLDS)
        .map(|t| pairs.iter().filter(|(_, e)| *e <= t as f64).count() as f64 / n)
        .collect();
    let success_curve: Vec<f64> = success_thresholds()
        .into_iter()
        .map(|t| pairs.iter().filter(|(o, _)| *o > t).count() as f64 / n)
        .collect();
    let success_auc = success_curve.iter().sum::<f64>() / success_curve.len() as f64;
    Ok(OpeMetrics {
        precision_at_20: precision_curve[RANKING_THRESHOLD_PX],
        success_auc,
        frames_scored: pairs.len(),
        mean_overlap: pairs.iter().map(|p| p.0).sum::<f64>() / n,
        mean_center_error: pairs.iter().map(|p| p.1).sum::<f64>() / n,
        precision_curve,
        success_curve,
    })
}

impl OpeMetrics {
    /// Curve points as CSV: `curve,threshold,value`.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("# sat-curves v1\ncurve,threshold,value\n");
        for (t, v) in self.precision_curve.iter().enumerate() {
            out.push_str(&format!("precision,{t},{v}\n"));
        }
        for (t, v) in success_thresholds().iter().zip(&self.success_curve) {
            out.push_str(&format!("success,{t},{v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_cases() {
        let a = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(overlap(&a, &a), 1.0);
        assert_eq!(overlap(&a, &BoundingBox::new(20.0, 0.0, 10.0, 10.0)), 0.0);
        let b = BoundingBox::new(5.0, 0.0, 10.0, 10.0);
        assert!((overlap(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(overlap(&a, &b), overlap(&b, &a));
    }

    #[test]
    fn center_error_cases() {
        let a = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
        let b = BoundingBox::new(3.0, 4.0, 10.0, 10.0);
        assert_eq!(center_error(&a, &a), 0.0);
        assert_eq!(center_error(&a, &b), 5.0);
        assert_eq!(center_error(&b, &a), 5.0);
    }

    #[test]
    fn perfect_and_missed_runs() {
        let gt: Vec<BoundingBox> = (0..10).map(|i| BoundingBox::new(i as f64, 5.0, 20.0, 20.0)).collect();
        let m = compute_ope(&gt, &gt).unwrap();
        assert_eq!(m.success_auc, 1.0);
        assert_eq!(m.precision_at_20, 1.0);

        let miss: Vec<BoundingBox> = gt.iter().map(|b| BoundingBox::new(b.x + 200.0, b.y, b.w, b.h)).collect();
        let m = compute_ope(&miss, &gt).unwrap();
        assert_eq!(m.success_auc, 0.0);
        assert_eq!(m.precision_at_20, 0.0);
    }

    #[test]
    fn two_frame_enumeration() {
        let gt = vec![BoundingBox::new(0.0, 0.0, 10.0, 10.0); 2];
        let run = vec![gt[0], BoundingBox::new(5.0, 0.0, 10.0, 10.0)];
        let m = compute_ope(&run, &gt).unwrap();
        let th = success_thresholds();
        for (t, v) in th.iter().zip(&m.success_curve) {
            // overlaps {1, 1/3}: both exceed t below 1/3, one exceeds t up to 1
            let want = if *t < 1.0 / 3.0 { 1.0 } else { 0.5 };
            assert_eq!(*v, want, "t = {t}");
        }
        assert_eq!(m.success_curve[25], 0.5);
    }

    #[test]
    fn missing_tail_is_not_scored() {
        let gt = vec![BoundingBox::new(0.0, 0.0, 10.0, 10.0); 3];
        let run = vec![gt[0]; 5];
        let m = compute_ope(&run, &gt).unwrap();
        assert_eq!(m.frames_scored, 3);
        assert!(compute_ope(&run[..2], &gt).is_err());
    }

    #[test]
    fn csv_has_every_point() {
        let gt = vec![BoundingBox::new(0.0, 0.0, 10.0, 10.0); 2];
        let csv = compute_ope(&gt, &gt).unwrap().curves_csv();
        assert_eq!(csv.lines().count(), 2 + PRECISION_THRESHOLDS + SUCCESS_THRESHOLDS);
    }
}
