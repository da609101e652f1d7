//! Joint context-aware, mask-constrained filter learning.
//!
//! The filter minimizes the target regression error plus `λ2`-weighted
//! responses on context patches (labelled zero) and `λ1‖w‖²`, subject to the
//! filter being supported on the reliability mask. ADMM alternates an
//! element-wise Fourier solve for the unconstrained copy `ŵ_c` with a spatial
//! projection onto the mask, growing the penalty `ρ` geometrically.
//!
//! With the correlation convention of [`crate::spectral::correlate`], the data
//! term for frequency `k` is `â_k · conj(ŵ_k)`, so `ŷ` enters the closed
//! forms conjugated and the sample spectrum unconjugated.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::imaging::FeatureMap;
use crate::reliability::ReliabilityMask;
use crate::spectral::{fft2, ifft2_complex, Spectrum};

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub rho0: f64,
    pub beta: f64,
    pub rho_max: f64,
    pub max_iters: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            lambda1: 0.01,
            lambda2: 25.0,
            rho0: 5.0,
            beta: 3.0,
            rho_max: 25.0,
            max_iters: 5,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.lambda1, self.rho0, self.beta, self.rho_max];
        if positive.iter().any(|v| !(*v > 0.0)) || !(self.lambda2 >= 0.0) {
            return Err(Error::invalid("ADMM weights and penalties must be positive"));
        }
        if !(self.beta > 1.0) {
            return Err(Error::invalid("penalty multiplier must exceed 1"));
        }
        if self.rho0 > self.rho_max {
            return Err(Error::invalid("initial penalty exceeds its cap"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("at least one ADMM iteration is required"));
        }
        Ok(())
    }
}

/// Result of an ADMM solve. `wr_hat` is the detection filter.
#[derive(Debug, Clone, PartialEq)]
pub struct JointFilter {
    pub w: FeatureMap,
    pub w_r: FeatureMap,
    pub wr_hat: Spectrum,
    pub wc_hat: Spectrum,
    pub i_hat: Spectrum,
    pub rho: f64,
    /// Penalty used in each iteration.
    pub penalties: Vec<f64>,
    /// `‖ŵ_c − ŵ_r‖ / ‖ŵ_c‖` after each iteration.
    pub relative_residuals: Vec<f64>,
}

impl JointFilter {
    /// Element-wise `(1 - rate) self + rate other` of every stored tensor.
    pub fn blend(&self, other: &JointFilter, rate: f64) -> Result<JointFilter> {
        let mix_real = |a: &FeatureMap, b: &FeatureMap| -> Result<FeatureMap> {
            if a.shape() != b.shape() {
                return Err(Error::shape(a.shape(), b.shape()));
            }
            let data = a
                .data()
                .iter()
                .zip(b.data())
                .map(|(x, y)| (1.0 - rate) * x + rate * y)
                .collect();
            FeatureMap::from_vec(a.rows(), a.cols(), a.depth(), a.cell_size(), data)
        };
        Ok(JointFilter {
            w: mix_real(&self.w, &other.w)?,
            w_r: mix_real(&self.w_r, &other.w_r)?,
            wr_hat: self.wr_hat.blend(&other.wr_hat, rate)?,
            wc_hat: self.wc_hat.blend(&other.wc_hat, rate)?,
            i_hat: self.i_hat.blend(&other.i_hat, rate)?,
            rho: other.rho,
            penalties: other.penalties.clone(),
            relative_residuals: other.relative_residuals.clone(),
        })
    }
}

fn expect_label(y_spec: &Spectrum, a0: &Spectrum) -> Result<()> {
    if y_spec.depth() != 1 || (y_spec.rows(), y_spec.cols()) != (a0.rows(), a0.cols()) {
        return Err(Error::shape(
            (a0.rows(), a0.cols(), 1),
            y_spec.shape(),
        ));
    }
    Ok(())
}

/// Closed-form ridge filter `ŵ_d = â_d conj(ŷ) / (Σ_d |â_d|² + λ)`.
pub fn ridge_filter(a0_spec: &Spectrum, y_spec: &Spectrum, lambda: f64) -> Result<Spectrum> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("ridge regularizer must be positive"));
    }
    expect_label(y_spec, a0_spec)?;
    let denom = a0_spec.channel_energy();
    let y = y_spec.channel(0);
    let mut out = a0_spec.zeros_like();
    for d in 0..a0_spec.depth() {
        for (k, (o, a)) in out.channel_mut(d).iter_mut().zip(a0_spec.channel(d)).enumerate() {
            *o = a * y[k].conj() / (denom[k] + lambda);
        }
    }
    Ok(out)
}

fn not_finite(v: &[Complex64]) -> bool {
    v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite())
}

/// Runs the fixed ADMM schedule from a cold start.
pub fn solve(
    a0_spec: &Spectrum,
    ctx_specs: &[Spectrum],
    y_spec: &Spectrum,
    mask: &ReliabilityMask,
    cfg: &AdmmConfig,
) -> Result<JointFilter> {
    cfg.validate()?;
    expect_label(y_spec, a0_spec)?;
    for c in ctx_specs {
        a0_spec.ensure_same_shape(c)?;
    }
    let (rows, cols, depth) = a0_spec.shape();
    if (mask.rows(), mask.cols()) != (rows, cols) {
        return Err(Error::shape((rows, cols), (mask.rows(), mask.cols())));
    }
    let n = rows * cols;
    let cell_size = a0_spec.cell_size();

    let mut denom = a0_spec.channel_energy();
    for c in ctx_specs {
        for (d, e) in denom.iter_mut().zip(c.channel_energy()) {
            *d += cfg.lambda2 * e;
        }
    }
    let y = y_spec.channel(0);
    let mut numer = a0_spec.zeros_like();
    for d in 0..depth {
        for (k, (o, a)) in numer.channel_mut(d).iter_mut().zip(a0_spec.channel(d)).enumerate() {
            *o = a * y[k].conj();
        }
    }
    let mask_vals = mask.values();

    let mut wr_hat = a0_spec.zeros_like();
    let mut i_hat = a0_spec.zeros_like();
    let mut wc_hat = a0_spec.zeros_like();
    let mut w = FeatureMap::zeros(rows, cols, depth, cell_size);
    let mut w_r = FeatureMap::zeros(rows, cols, depth, cell_size);
    let mut rho = cfg.rho0;
    let mut penalties = Vec::with_capacity(cfg.max_iters);
    let mut relative_residuals = Vec::with_capacity(cfg.max_iters);

    for _ in 0..cfg.max_iters {
        penalties.push(rho);
        if denom.iter().any(|&d| !(d + rho >= rho)) {
            return Err(Error::Diverged("non-finite denominator".into()));
        }

        for (k, ((c, num), (wr, i))) in wc_hat
            .data_mut()
            .iter_mut()
            .zip(numer.data())
            .zip(wr_hat.data().iter().zip(i_hat.data()))
            .enumerate()
        {
            *c = (num + wr * rho - i) / (denom[k % n] + rho);
        }

        let mut lifted = wc_hat.clone();
        for (l, i) in lifted.data_mut().iter_mut().zip(i_hat.data()) {
            *l = *l * rho + i;
        }
        let spatial = ifft2_complex(&lifted);
        if not_finite(&spatial) {
            return Err(Error::Diverged("filter update produced non-finite values".into()));
        }
        let inv = 1.0 / (cfg.lambda1 + rho);
        for (idx, ((wv, wrv), s)) in w
            .data_mut()
            .iter_mut()
            .zip(w_r.data_mut().iter_mut())
            .zip(&spatial)
            .enumerate()
        {
            *wv = s.re * inv;
            *wrv = if mask_vals[idx % n] == 1 { *wv } else { 0.0 };
        }
        wr_hat = fft2(&w_r);

        for ((i, c), r) in i_hat.data_mut().iter_mut().zip(wc_hat.data()).zip(wr_hat.data()) {
            *i += (c - r) * rho;
        }
        if !i_hat.is_finite() || !wc_hat.is_finite() {
            return Err(Error::Diverged("multiplier update produced non-finite values".into()));
        }
        let scale = wc_hat.energy().sqrt();
        let res = wc_hat.distance(&wr_hat)?;
        relative_residuals.push(if scale > 0.0 { res / scale } else { res });

        rho = (cfg.beta * rho).min(cfg.rho_max);
    }

    Ok(JointFilter {
        w,
        w_r,
        wr_hat,
        wc_hat,
        i_hat,
        rho,
        penalties,
        relative_residuals,
    })
}

/// `‖ŵ_c − ŵ_r‖₂` over all channels.
pub fn residual(f: &JointFilter) -> f64 {
    f.wc_hat.distance(&f.wr_hat).unwrap_or(f64::NAN)
}
