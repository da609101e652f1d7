use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::ResponseMap;

/// Excess kurtosis `μ4 / σ⁴ − 3` of all response values taken as one sample.
pub fn kurtosis(resp: &ResponseMap) -> Result<f64> {
    kurtosis_of(&resp.values)
}

pub fn kurtosis_of(values: &[f64]) -> Result<f64> {
    if values.len() < 4 {
        return Err(Error::DegenerateResponse);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (m2, m4) = values.iter().fold((0.0, 0.0), |(m2, m4), v| {
        let d = (v - mean) * (v - mean);
        (m2 + d, m4 + d * d)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    if !(m2 > 0.0) || !m2.is_finite() {
        return Err(Error::DegenerateResponse);
    }
    Ok(m4 / (m2 * m2) - 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunningMean {
    sum: f64,
    count: usize,
}

impl RunningMean {
    pub fn push(&mut self, v: f64) {
        self.sum += v;
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

/// Running S_max and BK statistics with their θ-scaled thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateGate {
    pub theta1: f64,
    pub theta2: f64,
    smax: RunningMean,
    bk: RunningMean,
}

impl UpdateGate {
    pub fn new(theta1: f64, theta2: f64) -> Self {
        UpdateGate {
            theta1,
            theta2,
            smax: RunningMean::default(),
            bk: RunningMean::default(),
        }
    }

    pub fn record(&mut self, s_max: f64, bk: f64) {
        self.smax.push(s_max);
        self.bk.push(bk);
    }

    pub fn history_len(&self) -> usize {
        self.smax.count()
    }

    /// `(S_tr, BK_tr)`, or `None` before any statistic is recorded.
    pub fn thresholds(&self) -> Option<(f64, f64)> {
        Some((
            self.theta1 * self.smax.mean()?,
            self.theta2 * self.bk.mean()?,
        ))
    }

    /// Both statistics must strictly exceed their thresholds. An empty history
    /// (the first frame) always passes.
    pub fn should_update(&self, s_max: f64, bk: f64) -> bool {
        match self.thresholds() {
            None => true,
            Some((s_tr, bk_tr)) => s_max > s_tr && bk > bk_tr,
        }
    }
}

/// Per-frame monitoring outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub s_max: f64,
    pub bk: f64,
    pub updated: bool,
    pub informative: bool,
}
