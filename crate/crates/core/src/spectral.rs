//! 2-D DFTs over feature maps and circular correlation.
//!
//! Forward transforms are unnormalized and inverses divide by `rows * cols`,
//! so `ifft2(fft2(m)) == m` up to rounding. Correlation conjugates the filter
//! spectrum: the response at shift `τ` is `Σ_x w(x) z(x + τ)`, which puts the
//! peak at the translation of `z` relative to `w`.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::imaging::{FeatureMap, Plane};

/// Correlation output over the search window.
pub type ResponseMap = Plane;

/// Per-channel Fourier coefficients, channel-major like [`FeatureMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    rows: usize,
    cols: usize,
    depth: usize,
    cell_size: usize,
    data: Vec<Complex64>,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// In-place 2-D transform of one `rows × cols` plane, unnormalized.
fn transform_plane(buf: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    let row_fft = plans(cols, inverse);
    row_fft.process(buf);
    if rows > 1 {
        let col_fft = plans(rows, inverse);
        let mut column = vec![Complex64::new(0.0, 0.0); rows];
        for c in 0..cols {
            for r in 0..rows {
                column[r] = buf[r * cols + c];
            }
            col_fft.process(&mut column);
            for r in 0..rows {
                buf[r * cols + c] = column[r];
            }
        }
    }
}

impl Spectrum {
    pub fn zeros(rows: usize, cols: usize, depth: usize, cell_size: usize) -> Self {
        Spectrum {
            rows,
            cols,
            depth,
            cell_size,
            data: vec![Complex64::new(0.0, 0.0); rows * cols * depth],
        }
    }

    pub fn from_vec(
        rows: usize,
        cols: usize,
        depth: usize,
        cell_size: usize,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        if data.len() != rows * cols * depth {
            return Err(Error::shape(rows * cols * depth, data.len()));
        }
        Ok(Spectrum {
            rows,
            cols,
            depth,
            cell_size,
            data,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Spectrum::zeros(self.rows, self.cols, self.depth, self.cell_size)
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

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn channel(&self, d: usize) -> &[Complex64] {
        let n = self.plane_len();
        &self.data[d * n..(d + 1) * n]
    }

    pub fn channel_mut(&mut self, d: usize) -> &mut [Complex64] {
        let n = self.plane_len();
        &mut self.data[d * n..(d + 1) * n]
    }

    pub fn ensure_same_shape(&self, other: &Spectrum) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(self.shape(), other.shape()));
        }
        Ok(())
    }

    /// Sum of squared magnitudes over all coefficients.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `Σ_d |s_d|²` at each frequency.
    pub fn channel_energy(&self) -> Vec<f64> {
        let n = self.plane_len();
        let mut out = vec![0.0; n];
        for chunk in self.data.chunks(n) {
            for (o, c) in out.iter_mut().zip(chunk) {
                *o += c.norm_sqr();
            }
        }
        out
    }

    /// `(1 - rate) * self + rate * other`, element-wise.
    pub fn blend(&self, other: &Spectrum, rate: f64) -> Result<Spectrum> {
        self.ensure_same_shape(other)?;
        let mut out = self.clone();
        for (o, n) in out.data.iter_mut().zip(&other.data) {
            *o = *o * (1.0 - rate) + *n * rate;
        }
        Ok(out)
    }

    /// Euclidean distance to `other` over all coefficients.
    pub fn distance(&self, other: &Spectrum) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Forward DFT of every channel.
pub fn fft2(map: &FeatureMap) -> Spectrum {
    let (rows, cols, depth) = map.shape();
    let mut data: Vec<Complex64> = map.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for chunk in data.chunks_mut(rows * cols) {
        transform_plane(chunk, rows, cols, false);
    }
    Spectrum {
        rows,
        cols,
        depth,
        cell_size: map.cell_size(),
        data,
    }
}

/// Forward DFT of a single real plane.
pub fn fft2_plane(plane: &Plane) -> Spectrum {
    let mut data: Vec<Complex64> = plane.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_plane(&mut data, plane.rows, plane.cols, false);
    Spectrum {
        rows: plane.rows,
        cols: plane.cols,
        depth: 1,
        cell_size: 0,
        data,
    }
}

/// Inverse DFT keeping the complex result.
pub fn ifft2_complex(spec: &Spectrum) -> Vec<Complex64> {
    let n = spec.plane_len();
    let scale = 1.0 / n as f64;
    let mut data = spec.data.clone();
    for chunk in data.chunks_mut(n) {
        transform_plane(chunk, spec.rows, spec.cols, true);
        chunk.iter_mut().for_each(|c| *c *= scale);
    }
    data
}

const IMAG_TOLERANCE: f64 = 1e-8;

/// Inverse DFT to a real map.
///
/// Fails when the imaginary residue exceeds `1e-8` relative to the largest
/// real magnitude (floor 1), meaning the spectrum was not conjugate-symmetric.
pub fn ifft2(spec: &Spectrum) -> Result<FeatureMap> {
    let data = ifft2_complex(spec);
    let max_re = data.iter().fold(1.0f64, |m, c| m.max(c.re.abs()));
    let max_im = data.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
    if max_im > IMAG_TOLERANCE * max_re {
        return Err(Error::invalid(format!(
            "inverse transform has imaginary residue {max_im:e}"
        )));
    }
    FeatureMap::from_vec(
        spec.rows,
        spec.cols,
        spec.depth,
        spec.cell_size,
        data.into_iter().map(|c| c.re).collect(),
    )
}

/// Circular cross-correlation of `z` against filter `w`, summed over channels.
pub fn correlate(z_spec: &Spectrum, w_spec: &Spectrum) -> Result<ResponseMap> {
    z_spec.ensure_same_shape(w_spec)?;
    let n = z_spec.plane_len();
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    for (zc, wc) in z_spec.data.chunks(n).zip(w_spec.data.chunks(n)) {
        for ((a, z), w) in acc.iter_mut().zip(zc).zip(wc) {
            *a += z * w.conj();
        }
    }
    transform_plane(&mut acc, z_spec.rows, z_spec.cols, true);
    let scale = 1.0 / n as f64;
    Ok(Plane {
        rows: z_spec.rows,
        cols: z_spec.cols,
        values: acc.into_iter().map(|c| c.re * scale).collect(),
    })
}

/// Direct `O(N²)` circular cross-correlation with the same convention as
/// [`correlate`]: `out(τ) = Σ_d Σ_x w_d(x) z_d(x + τ)`.
pub fn spatial_correlation_oracle(z: &FeatureMap, w: &FeatureMap) -> Result<ResponseMap> {
    if z.shape() != w.shape() {
        return Err(Error::shape(z.shape(), w.shape()));
    }
    let (rows, cols, depth) = z.shape();
    Ok(Plane::from_fn(rows, cols, |tr, tc| {
        let mut sum = 0.0;
        for d in 0..depth {
            for r in 0..rows {
                for c in 0..cols {
                    sum += w.get(d, r, c) * z.get(d, (r + tr) % rows, (c + tc) % cols);
                }
            }
        }
        sum
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(rng: &mut ChaCha8Rng, rows: usize, cols: usize, depth: usize) -> FeatureMap {
        let data = (0..rows * cols * depth).map(|_| rng.random_range(-1.0..1.0)).collect();
        FeatureMap::from_vec(rows, cols, depth, 4, data).unwrap()
    }

    fn shift(map: &FeatureMap, dr: usize, dc: usize) -> FeatureMap {
        let (rows, cols, depth) = map.shape();
        let mut out = FeatureMap::zeros(rows, cols, depth, map.cell_size());
        for d in 0..depth {
            for r in 0..rows {
                for c in 0..cols {
                    out.set(d, (r + dr) % rows, (c + dc) % cols, map.get(d, r, c));
                }
            }
        }
        out
    }

    #[test]
    fn delta_transforms_to_ones() {
        let mut m = FeatureMap::zeros(5, 6, 1, 1);
        m.set(0, 0, 0, 1.0);
        let s = fft2(&m);
        assert!(s.data().iter().all(|c| (c - Complex64::new(1.0, 0.0)).norm() < 1e-14));
        let back = ifft2(&s).unwrap();
        assert!((back.get(0, 0, 0) - 1.0).abs() < 1e-14);
        assert!(back.data()[1..].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn constant_has_only_dc() {
        let m = FeatureMap::from_vec(4, 6, 1, 1, vec![2.5; 24]).unwrap();
        let s = fft2(&m);
        assert!((s.data()[0] - Complex64::new(60.0, 0.0)).norm() < 1e-12);
        assert!(s.data()[1..].iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn roundtrip_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_map(&mut rng, 8, 8, 2);
        let s = fft2(&m);
        let back = ifft2(&s).unwrap();
        let err = m.data().iter().zip(back.data()).fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
        assert!(err < 1e-10);
        let spatial: f64 = m.data().iter().map(|v| v * v).sum();
        let n = 64.0;
        assert!((s.energy() / n - spatial).abs() / spatial < 1e-8);
    }

    #[test]
    fn inverse_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s1 = fft2(&random_map(&mut rng, 6, 7, 1));
        let s2 = fft2(&random_map(&mut rng, 6, 7, 1));
        let (a, b) = (0.7, -1.3);
        let mut comb = s1.clone();
        for (c, d) in comb.data_mut().iter_mut().zip(s2.data()) {
            *c = *c * a + *d * b;
        }
        let lhs = ifft2(&comb).unwrap();
        let (r1, r2) = (ifft2(&s1).unwrap(), ifft2(&s2).unwrap());
        for i in 0..42 {
            let rhs = a * r1.data()[i] + b * r2.data()[i];
            assert!((lhs.data()[i] - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn asymmetric_spectrum_is_rejected() {
        let mut s = Spectrum::zeros(4, 4, 1, 1);
        s.data_mut()[1] = Complex64::new(0.0, 1.0);
        assert!(ifft2(&s).is_err());
    }

    #[test]
    fn autocorrelation_peak_is_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = random_map(&mut rng, 8, 8, 1);
        let s = fft2(&z);
        let resp = correlate(&s, &s).unwrap();
        let energy: f64 = z.data().iter().map(|v| v * v).sum();
        let (peak, r, c) = resp.argmax();
        assert_eq!((r, c), (0, 0));
        assert!((peak - energy).abs() < 1e-10);
    }

    #[test]
    fn shifted_target_peaks_at_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_map(&mut rng, 10, 12, 1);
        let z = shift(&w, 2, 3);
        let resp = correlate(&fft2(&z), &fft2(&w)).unwrap();
        let (_, r, c) = resp.argmax();
        assert_eq!((r, c), (2, 3));
        let oracle = spatial_correlation_oracle(&z, &w).unwrap();
        assert_eq!(oracle.argmax().1, 2);
        assert_eq!(oracle.argmax().2, 3);
    }

    #[test]
    fn oracle_sifting_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = random_map(&mut rng, 5, 5, 1);
        let mut delta = FeatureMap::zeros(5, 5, 1, 4);
        delta.set(0, 0, 0, 1.0);
        // out(τ) = w(-τ)
        let out = spatial_correlation_oracle(&delta, &w).unwrap();
        for r in 0..5 {
            for c in 0..5 {
                assert_eq!(out.get(r, c), w.get(0, (5 - r) % 5, (5 - c) % 5));
            }
        }
        let zero = FeatureMap::zeros(5, 5, 1, 4);
        let out = spatial_correlation_oracle(&w, &zero).unwrap();
        assert!(out.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fft_matches_oracle_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let z = random_map(&mut rng, 6, 6, 1);
            let w = random_map(&mut rng, 6, 6, 1);
            let a = correlate(&fft2(&z), &fft2(&w)).unwrap();
            let b = spatial_correlation_oracle(&z, &w).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = Spectrum::zeros(4, 4, 1, 1);
        let b = Spectrum::zeros(4, 5, 1, 1);
        assert!(correlate(&a, &b).is_err());
    }
}
