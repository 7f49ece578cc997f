//! Orthonormal DCT-II basis for trajectory coefficients and the one-sided
//! power spectrum used by the distribution metrics.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Smoothing added to every spectral bin before normalising.
pub const SPECTRUM_EPS: f64 = 1e-8;

/// Dense DCT matrices for one sequence length.
///
/// `matrix[l][t] = sqrt(2/L) / sqrt(1 + [l == 0]) * cos(pi / (2L) * (2t + 1) * l)`
/// with zero-based `l` and `t`. The basis is orthonormal, so the inverse is
/// the transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct DctBasis {
    len: usize,
    matrix: Array2<f64>,
    inverse_matrix: Array2<f64>,
}

impl DctBasis {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::dim("DCT length must be at least 1"));
        }
        let l_f = len as f64;
        let norm = (2.0 / l_f).sqrt();
        let matrix = Array2::from_shape_fn((len, len), |(l, t)| {
            let scale = if l == 0 { 1.0 / 2f64.sqrt() } else { 1.0 };
            norm * scale * (PI / (2.0 * l_f) * (2 * t + 1) as f64 * l as f64).cos()
        });
        let inverse_matrix = matrix.t().to_owned();
        Ok(DctBasis {
            len,
            matrix,
            inverse_matrix,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn inverse_matrix(&self) -> ArrayView2<'_, f64> {
        self.inverse_matrix.view()
    }

    pub fn forward(&self, seq: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check(seq.len())?;
        Ok(self.matrix.dot(&seq))
    }

    pub fn inverse(&self, coeffs: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check(coeffs.len())?;
        Ok(self.inverse_matrix.dot(&coeffs))
    }

    /// Inverse transform along axis 0 of a `[L, features]` block.
    pub fn inverse_columns(&self, coeffs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check(coeffs.nrows())?;
        Ok(self.inverse_matrix.dot(&coeffs))
    }

    /// Forward transform along axis 0 of a `[L, features]` block.
    pub fn forward_columns(&self, seq: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check(seq.nrows())?;
        Ok(self.matrix.dot(&seq))
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.len {
            return Err(Error::dim(format!(
                "sequence length {len} does not match DCT length {}",
                self.len
            )));
        }
        Ok(())
    }
}

pub fn dct_forward(seq: &[f64]) -> Result<Vec<f64>> {
    if seq.is_empty() {
        return Err(Error::dim("cannot transform an empty sequence"));
    }
    let basis = DctBasis::new(seq.len())?;
    Ok(basis.forward(ArrayView1::from(seq))?.to_vec())
}

pub fn dct_inverse(coeffs: &[f64]) -> Result<Vec<f64>> {
    if coeffs.is_empty() {
        return Err(Error::dim("cannot invert an empty coefficient sequence"));
    }
    let basis = DctBasis::new(coeffs.len())?;
    Ok(basis.inverse(ArrayView1::from(coeffs))?.to_vec())
}

/// Per-feature power spectra of a `[features, L]` block.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    /// `|FFT|^2` over the `L/2 + 1` one-sided bins.
    pub values: Array2<f64>,
    /// Each row of `values + eps`, scaled to sum to one.
    pub normalized: Array2<f64>,
    /// Rows whose raw power was exactly zero.
    pub degenerate: Vec<bool>,
}

impl PowerSpectrum {
    pub fn bins(&self) -> usize {
        self.values.ncols()
    }
}

pub fn power_spectrum(block: ArrayView2<'_, f64>) -> Result<PowerSpectrum> {
    let (features, len) = block.dim();
    if len < 2 {
        return Err(Error::dim(format!(
            "power spectrum needs at least 2 samples, got {len}"
        )));
    }
    let bins = len / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    let mut values = Array2::zeros((features, bins));
    let mut normalized = Array2::zeros((features, bins));
    let mut degenerate = Vec::with_capacity(features);
    for f in 0..features {
        for (slot, &x) in buf.iter_mut().zip(block.row(f).iter()) {
            *slot = Complex::new(x, 0.0);
        }
        fft.process(&mut buf);
        let mut total = 0.0;
        for e in 0..bins {
            let p = buf[e].norm_sqr();
            values[[f, e]] = p;
            total += p;
        }
        degenerate.push(total == 0.0);
        let smoothed_total = total + SPECTRUM_EPS * bins as f64;
        for e in 0..bins {
            normalized[[f, e]] = (values[[f, e]] + SPECTRUM_EPS) / smoothed_total;
        }
    }
    Ok(PowerSpectrum {
        values,
        normalized,
        degenerate,
    })
}
