use ndarray::{s, Array2, ArrayView1, ArrayView4};

use crate::error::{Error, Result};
use crate::frequency::{power_spectrum, SPECTRUM_EPS};

/// Frames per power-spectrum window (one second at 25 fps).
pub const PS_WINDOW: usize = 25;

/// Per-person `[3J, len]` blocks from frames `start..start + len` of a
/// `[P, T, J, 3]` motion. Feature `3j + c` is coordinate `c` of joint `j`.
pub fn ps_windows(motion: ArrayView4<'_, f64>, start: usize, len: usize) -> Result<Vec<Array2<f64>>> {
    let (persons, frames, joints, _) = motion.dim();
    if start + len > frames {
        return Err(Error::dim(format!(
            "window {start}..{} exceeds {frames} frames",
            start + len
        )));
    }
    Ok((0..persons)
        .map(|p| {
            let block = motion.slice(s![p, start..start + len, .., ..]);
            Array2::from_shape_fn((joints * 3, len), |(f, t)| block[[t, f / 3, f % 3]])
        })
        .collect())
}

/// Shannon entropy (nats) of one normalised spectrum.
pub fn spectrum_entropy(p: ArrayView1<'_, f64>) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

/// `KLD(p || q)` after adding `eps` to both and renormalising.
pub fn kld(p: ArrayView1<'_, f64>, q: ArrayView1<'_, f64>) -> f64 {
    let n = p.len() as f64;
    let sp = p.sum() + SPECTRUM_EPS * n;
    let sq = q.sum() + SPECTRUM_EPS * n;
    p.iter()
        .zip(q.iter())
        .map(|(&a, &b)| {
            let a = (a + SPECTRUM_EPS) / sp;
            let b = (b + SPECTRUM_EPS) / sq;
            a * (a / b).ln()
        })
        .sum()
}

fn check_windows(windows: &[Array2<f64>]) -> Result<(usize, usize)> {
    let first = windows
        .first()
        .ok_or_else(|| Error::Domain("power-spectrum metrics need at least one window".into()))?;
    let dim = first.dim();
    if windows.iter().any(|w| w.dim() != dim) {
        return Err(Error::dim("power-spectrum windows differ in shape"));
    }
    Ok(dim)
}

/// Mean per-feature spectral entropy over a set of `[features, L]` windows.
pub fn ps_entropy(windows: &[Array2<f64>]) -> Result<f64> {
    let (features, _) = check_windows(windows)?;
    let mut total = 0.0;
    for w in windows {
        let ps = power_spectrum(w.view())?;
        total += ps.normalized.rows().into_iter().map(spectrum_entropy).sum::<f64>();
    }
    Ok(total / (windows.len() * features) as f64)
}

/// Per-feature frequency distribution averaged over a window set.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSpectrum {
    /// `[features, bins]`, rows sum to one.
    pub distribution: Array2<f64>,
    pub windows: usize,
}

impl ReferenceSpectrum {
    pub fn from_windows(windows: &[Array2<f64>]) -> Result<Self> {
        check_windows(windows)?;
        let mut sum: Option<Array2<f64>> = None;
        for w in windows {
            let ps = power_spectrum(w.view())?;
            match sum.as_mut() {
                Some(acc) => *acc += &ps.normalized,
                None => sum = Some(ps.normalized),
            }
        }
        let mut distribution = sum.expect("at least one window");
        distribution /= windows.len() as f64;
        Ok(ReferenceSpectrum {
            distribution,
            windows: windows.len(),
        })
    }

    /// Symmetric KLD `½[KLD(G||P) + KLD(P||G)]`, averaged over features.
    pub fn symmetric_kld(&self, other: &ReferenceSpectrum) -> Result<f64> {
        if self.distribution.dim() != other.distribution.dim() {
            return Err(Error::dim(format!(
                "spectra {:?} and {:?} differ in shape",
                self.distribution.shape(),
                other.distribution.shape()
            )));
        }
        let features = self.distribution.nrows();
        let total: f64 = self
            .distribution
            .rows()
            .into_iter()
            .zip(other.distribution.rows())
            .map(|(g, p)| 0.5 * (kld(g, p) + kld(p, g)))
            .sum();
        Ok(total / features as f64)
    }
}

/// Symmetric power-spectrum KLD between a reference window set and the
/// prediction windows taken at one prediction second.
pub fn ps_kld(reference: &ReferenceSpectrum, predictions: &[Array2<f64>]) -> Result<f64> {
    reference.symmetric_kld(&ReferenceSpectrum::from_windows(predictions)?)
}
