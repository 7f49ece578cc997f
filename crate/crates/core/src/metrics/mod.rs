//! Benchmark metrics and naive reference predictors.
//!
//! Position metrics take motions shaped `[P, N, J, 3]` in millimetres and a
//! 1-indexed frame. Distances are Euclidean, not squared.

mod report;
mod spectral;

pub use report::{
    evaluate_scene, EvalSettings, MetricReport, SceneMetrics, REPORT_SCHEMA_VERSION,
};
pub use spectral::{
    kld, ps_entropy, ps_kld, ps_windows, spectrum_entropy, ReferenceSpectrum, PS_WINDOW,
};

use ndarray::{s, Array4, ArrayView4, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evaluation instants in milliseconds and the frame rate they map onto.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSchedule {
    pub times_ms: Vec<u32>,
    pub fps: f64,
}

pub const SHORT_TERM_MS: [u32; 4] = [80, 160, 320, 400];
pub const LONG_TERM_MS: [u32; 3] = [560, 720, 1000];
/// Ultra-long horizon covered by autoregressive prediction.
pub const ULTRA_LONG_MS: (u32, u32) = (1000, 2000);

impl Default for FrameSchedule {
    fn default() -> Self {
        FrameSchedule {
            times_ms: SHORT_TERM_MS.iter().chain(&LONG_TERM_MS).copied().collect(),
            fps: 25.0,
        }
    }
}

impl FrameSchedule {
    /// `round(ms * fps / 1000)`, 1-indexed.
    pub fn frame_index(&self, ms: u32) -> usize {
        (ms as f64 * self.fps / 1000.0).round() as usize
    }

    pub fn frames(&self) -> Vec<usize> {
        self.times_ms.iter().map(|&ms| self.frame_index(ms)).collect()
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        if !(self.fps > 0.0) || self.times_ms.is_empty() {
            return Err(Error::Config("frame schedule needs fps > 0 and at least one time".into()));
        }
        for &ms in &self.times_ms {
            let f = self.frame_index(ms);
            if f == 0 || f > horizon {
                return Err(Error::Config(format!(
                    "{ms} ms maps to frame {f}, outside 1..={horizon}"
                )));
            }
        }
        Ok(())
    }
}

fn check_pair(pred: &ArrayView4<'_, f64>, gt: &ArrayView4<'_, f64>) -> Result<()> {
    if pred.shape() != gt.shape() {
        return Err(Error::dim(format!(
            "prediction {:?} and ground truth {:?} differ in shape",
            pred.shape(),
            gt.shape()
        )));
    }
    if pred.shape()[3] != 3 || pred.shape()[0] == 0 || pred.shape()[2] == 0 {
        return Err(Error::dim(format!("expected [P, N, J, 3], got {:?}", pred.shape())));
    }
    Ok(())
}

fn check_frame(frame: usize, frames: usize) -> Result<usize> {
    if frame == 0 || frame > frames {
        return Err(Error::Domain(format!("frame {frame} outside 1..={frames}")));
    }
    Ok(frame - 1)
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn at(x: &ArrayView4<'_, f64>, p: usize, t: usize, j: usize) -> [f64; 3] {
    [x[[p, t, j, 0]], x[[p, t, j, 1]], x[[p, t, j, 2]]]
}

/// Global joint position error at `frame`: mean over persons and joints.
pub fn gjpe(pred: ArrayView4<'_, f64>, gt: ArrayView4<'_, f64>, frame: usize) -> Result<f64> {
    check_pair(&pred, &gt)?;
    let (persons, frames, joints, _) = pred.dim();
    let t = check_frame(frame, frames)?;
    let mut sum = 0.0;
    for p in 0..persons {
        for j in 0..joints {
            sum += dist(at(&pred, p, t, j), at(&gt, p, t, j));
        }
    }
    Ok(sum / (persons * joints) as f64)
}

/// Root-aligned joint position error at `frame`.
pub fn ajpe(
    pred: ArrayView4<'_, f64>,
    gt: ArrayView4<'_, f64>,
    root: usize,
    frame: usize,
) -> Result<f64> {
    check_pair(&pred, &gt)?;
    let (persons, frames, joints, _) = pred.dim();
    let t = check_frame(frame, frames)?;
    if root >= joints {
        return Err(Error::Domain(format!("root {root} outside {joints} joints")));
    }
    let mut sum = 0.0;
    for p in 0..persons {
        let pr = at(&pred, p, t, root);
        let gr = at(&gt, p, t, root);
        for j in 0..joints {
            let a = at(&pred, p, t, j);
            let b = at(&gt, p, t, j);
            sum += dist(
                [a[0] - pr[0], a[1] - pr[1], a[2] - pr[2]],
                [b[0] - gr[0], b[1] - gr[1], b[2] - gr[2]],
            );
        }
    }
    Ok(sum / (persons * joints) as f64)
}

/// Root final displacement error: mean over persons of the root distance at
/// the last frame.
pub fn rfde(pred: ArrayView4<'_, f64>, gt: ArrayView4<'_, f64>, root: usize) -> Result<f64> {
    let frames = pred.shape()[1];
    rfde_at(pred, gt, root, frames)
}

/// RFDE with the horizon truncated to `frame`.
pub fn rfde_at(
    pred: ArrayView4<'_, f64>,
    gt: ArrayView4<'_, f64>,
    root: usize,
    frame: usize,
) -> Result<f64> {
    check_pair(&pred, &gt)?;
    let (persons, frames, joints, _) = pred.dim();
    let t = check_frame(frame, frames)?;
    if root >= joints {
        return Err(Error::Domain(format!("root {root} outside {joints} joints")));
    }
    let sum: f64 = (0..persons)
        .map(|p| dist(at(&pred, p, t, root), at(&gt, p, t, root)))
        .sum();
    Ok(sum / persons as f64)
}

/// Repeat the last observed pose `n` times.
pub fn baseline_zero_velocity(observed: ArrayView4<'_, f64>, n: usize) -> Result<Array4<f64>> {
    let (p, t, j, c) = observed.dim();
    if t == 0 {
        return Err(Error::dim("observed motion has no frames"));
    }
    let last = observed.index_axis(Axis(1), t - 1);
    let mut out = Array4::zeros((p, n, j, c));
    for k in 0..n {
        out.index_axis_mut(Axis(1), k).assign(&last);
    }
    Ok(out)
}

/// Continue the last frame-to-frame displacement linearly.
pub fn baseline_constant_velocity(
    observed: ArrayView4<'_, f64>,
    n: usize,
) -> Result<Array4<f64>> {
    let (p, t, j, c) = observed.dim();
    if t < 2 {
        return Err(Error::dim(format!(
            "constant velocity needs at least 2 observed frames, got {t}"
        )));
    }
    let last = observed.index_axis(Axis(1), t - 1);
    let vel = &last - &observed.index_axis(Axis(1), t - 2);
    let mut out = Array4::zeros((p, n, j, c));
    for k in 0..n {
        let mut frame = out.index_axis_mut(Axis(1), k);
        frame.assign(&last);
        frame.scaled_add((k + 1) as f64, &vel);
    }
    Ok(out)
}

/// Mean of `metric(frame)` over all frames `1..=N`.
pub fn mean_over_frames(
    frames: usize,
    mut metric: impl FnMut(usize) -> Result<f64>,
) -> Result<f64> {
    if frames == 0 {
        return Err(Error::Domain("no frames to average".into()));
    }
    let mut sum = 0.0;
    for f in 1..=frames {
        sum += metric(f)?;
    }
    Ok(sum / frames as f64)
}

/// First `n` frames of a motion.
pub fn horizon(motion: ArrayView4<'_, f64>, n: usize) -> ArrayView4<'_, f64> {
    motion.slice_move(s![.., ..n, .., ..])
}
