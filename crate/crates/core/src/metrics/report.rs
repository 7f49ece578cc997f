use std::fmt::Write as _;

use ndarray::{Array2, Array4, ArrayView4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spectral::{ps_entropy, ps_kld, ps_windows, ReferenceSpectrum, PS_WINDOW};
use super::{ajpe, gjpe, rfde_at, FrameSchedule};
use crate::data::{window_samples, MotionSample};
use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// How test motions are cut and scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub schedule: FrameSchedule,
    pub root_index: usize,
    pub in_frames: usize,
    /// Prediction seconds per window; the power-spectrum curves have one row
    /// for the observed second plus one per prediction second.
    pub seconds: usize,
    pub stride: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            schedule: FrameSchedule::default(),
            root_index: crate::data::skeleton::DEFAULT_ROOT,
            in_frames: 25,
            seconds: 2,
            stride: 25,
        }
    }
}

impl EvalSettings {
    pub fn out_frames(&self) -> usize {
        self.seconds * PS_WINDOW
    }

    pub fn validate(&self) -> Result<()> {
        if self.seconds == 0 || self.stride == 0 || self.in_frames < PS_WINDOW {
            return Err(Error::Config(format!(
                "evaluation needs seconds >= 1, stride >= 1 and in_frames >= {PS_WINDOW}"
            )));
        }
        self.schedule.validate(self.out_frames())
    }
}

/// Metrics of one model on one scene, averaged over evaluation windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub scene: String,
    pub windows: usize,
    /// One value per scheduled time.
    pub gjpe: Vec<f64>,
    pub ajpe: Vec<f64>,
    pub rfde: Vec<f64>,
    /// One value per second, the observed second first.
    pub ps_entropy: Vec<f64>,
    pub ps_kld: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    pub model: String,
    pub split: String,
    pub seed: u64,
    pub schedule_ms: Vec<u32>,
    pub scenes: Vec<SceneMetrics>,
}

type Predictor<'a> = dyn Fn(ArrayView4<'_, f64>) -> Result<Array4<f64>> + Sync + 'a;

/// Score `predictor` on every evaluation window cut from `samples`.
///
/// The predictor receives `[P, in_frames, J, 3]` and must return at least
/// `seconds * 25` frames.
pub fn evaluate_scene(
    scene: &str,
    samples: &[MotionSample],
    settings: &EvalSettings,
    predictor: &Predictor<'_>,
) -> Result<SceneMetrics> {
    settings.validate()?;
    let out = settings.out_frames();
    let cut = window_samples(samples, settings.in_frames, out, settings.stride)?;
    if cut.windows.is_empty() {
        return Err(Error::Domain(format!(
            "scene {scene} has no sample long enough for {} + {out} frames",
            settings.in_frames
        )));
    }
    let frames = settings.schedule.frames();
    let root = settings.root_index;

    struct WindowScore {
        gjpe: Vec<f64>,
        ajpe: Vec<f64>,
        rfde: Vec<f64>,
        ps: Vec<Vec<Array2<f64>>>,
    }

    let scores: Vec<WindowScore> = cut
        .windows
        .par_iter()
        .map(|w| -> Result<WindowScore> {
            let pred = predictor(w.input.view())?;
            if pred.shape()[1] < out || pred.shape()[0] != w.target.shape()[0] {
                return Err(Error::dim(format!(
                    "predictor returned {:?}, need at least {out} frames",
                    pred.shape()
                )));
            }
            let pred = pred.slice_move(ndarray::s![.., ..out, .., ..]);
            if pred.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric("evaluate", "non-finite prediction"));
            }
            let (p, g) = (pred.view(), w.target.view());
            let mut ps = Vec::with_capacity(settings.seconds + 1);
            ps.push(ps_windows(w.input.view(), settings.in_frames - PS_WINDOW, PS_WINDOW)?);
            for t in 0..settings.seconds {
                ps.push(ps_windows(p, t * PS_WINDOW, PS_WINDOW)?);
            }
            Ok(WindowScore {
                gjpe: frames.iter().map(|&f| gjpe(p, g, f)).collect::<Result<_>>()?,
                ajpe: frames.iter().map(|&f| ajpe(p, g, root, f)).collect::<Result<_>>()?,
                rfde: frames.iter().map(|&f| rfde_at(p, g, root, f)).collect::<Result<_>>()?,
                ps,
            })
        })
        .collect::<Result<_>>()?;

    let n = scores.len() as f64;
    let mean = |pick: fn(&WindowScore) -> &Vec<f64>| -> Vec<f64> {
        (0..frames.len())
            .map(|i| scores.iter().map(|s| pick(s)[i]).sum::<f64>() / n)
            .collect()
    };
    let gjpe_mean = mean(|s| &s.gjpe);
    let ajpe_mean = mean(|s| &s.ajpe);
    let rfde_mean = mean(|s| &s.rfde);

    let mut reference = Vec::new();
    for sample in samples {
        let view = sample.data.view();
        for start in 0..=sample.frames().saturating_sub(PS_WINDOW) {
            if start + PS_WINDOW <= sample.frames() {
                reference.extend(ps_windows(view, start, PS_WINDOW)?);
            }
        }
    }
    let reference = ReferenceSpectrum::from_windows(&reference)?;
    let mut entropy = Vec::with_capacity(settings.seconds + 1);
    let mut kld = Vec::with_capacity(settings.seconds + 1);
    for t in 0..=settings.seconds {
        let windows: Vec<Array2<f64>> = scores.iter().flat_map(|s| s.ps[t].iter().cloned()).collect();
        entropy.push(ps_entropy(&windows)?);
        kld.push(ps_kld(&reference, &windows)?);
    }

    Ok(SceneMetrics {
        scene: scene.to_string(),
        windows: scores.len(),
        gjpe: gjpe_mean,
        ajpe: ajpe_mean,
        rfde: rfde_mean,
        ps_entropy: entropy,
        ps_kld: kld,
    })
}

impl MetricReport {
    pub fn new(model: impl Into<String>, split: impl Into<String>, seed: u64, schedule: &FrameSchedule) -> Self {
        MetricReport {
            schema_version: REPORT_SCHEMA_VERSION,
            model: model.into(),
            split: split.into(),
            seed,
            schedule_ms: schedule.times_ms.clone(),
            scenes: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "report schema version {} (expected {REPORT_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        for s in &self.scenes {
            let n = self.schedule_ms.len();
            if s.gjpe.len() != n || s.ajpe.len() != n || s.rfde.len() != n {
                return Err(Error::Format(format!(
                    "scene {} does not have {n} scheduled values per metric",
                    s.scene
                )));
            }
            if s.ps_entropy.len() != s.ps_kld.len() {
                return Err(Error::Format(format!("scene {} has ragged PS curves", s.scene)));
            }
            let all = [&s.gjpe, &s.ajpe, &s.rfde, &s.ps_entropy, &s.ps_kld];
            if all.iter().flat_map(|v| v.iter()).any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Format(format!(
                    "scene {} holds a negative or non-finite value",
                    s.scene
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("report JSON: {e}")))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == REPORT_SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::Format(format!(
                    "report schema version {v} (expected {REPORT_SCHEMA_VERSION})"
                )))
            }
            None => return Err(Error::Format("report has no schema_version".into())),
        }
        let report: MetricReport =
            serde_json::from_value(value).map_err(|e| Error::Format(format!("report JSON: {e}")))?;
        report.validate()?;
        Ok(report)
    }

    /// Flat table with columns `scene,metric,time_ms,value`. Power-spectrum
    /// rows use `time_ms = 1000 * t` for second `t`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scene,metric,time_ms,value\n");
        for s in &self.scenes {
            for (name, values) in [("gjpe", &s.gjpe), ("ajpe", &s.ajpe), ("rfde", &s.rfde)] {
                for (ms, v) in self.schedule_ms.iter().zip(values) {
                    writeln!(out, "{},{name},{ms},{v}", s.scene).unwrap();
                }
            }
            for (name, values) in [("ps_entropy", &s.ps_entropy), ("ps_kld", &s.ps_kld)] {
                for (t, v) in values.iter().enumerate() {
                    writeln!(out, "{},{name},{},{v}", s.scene, t * 1000).unwrap();
                }
            }
        }
        out
    }
}
