use ndarray::Array4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::window_gradients;
use crate::data::{Scene, TrainingWindow};
use crate::error::Result;
use crate::model::{ModelConfig, SocialTgcn};

/// A differentiable scalar function of a flat parameter vector.
pub trait Objective: Sync {
    fn point(&self) -> Vec<f64>;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn label(&self, index: usize) -> String {
        format!("x[{index}]")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub step: f64,
    pub tolerance: f64,
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub worst_param: String,
    pub analytic: f64,
    pub numeric: f64,
    /// Set when the check fails but the worst parameter's error drops by
    /// more than 4x at some smaller step (down to `1e-7`), i.e. the step is
    /// too coarse for central differences rather than the gradient wrong.
    pub truncation_suspected: bool,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

/// `|a - n| / max(|a|, |n|, floor)` where `floor` keeps round-off in
/// near-zero gradients from dominating.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

const MIN_RETRY_STEP: f64 = 1e-7;

fn central(obj: &dyn Objective, x: &[f64], i: usize, step: f64) -> f64 {
    let mut probe = x.to_vec();
    probe[i] = x[i] + step;
    let up = obj.value(&probe);
    probe[i] = x[i] - step;
    let down = obj.value(&probe);
    (up - down) / (2.0 * step)
}

fn sweep(obj: &dyn Objective, x: &[f64], grad: &[f64], step: f64, floor: f64) -> Vec<(f64, f64)> {
    (0..x.len())
        .into_par_iter()
        .map(|i| {
            let numeric = central(obj, x, i, step);
            (relative_error(grad[i], numeric, floor), numeric)
        })
        .collect()
}

fn worst(errors: &[(f64, f64)]) -> (usize, f64) {
    errors
        .iter()
        .enumerate()
        .fold((0, 0.0), |best, (i, &(e, _))| if e > best.1 { (i, e) } else { best })
}

/// Central differences for every coordinate of `obj` at its current point.
pub fn check_gradients(obj: &dyn Objective, step: f64, tolerance: f64) -> GradCheckReport {
    let x = obj.point();
    let grad = obj.gradient(&x);
    let floor = 1e-6 * obj.value(&x).abs().max(1.0);
    let errors = sweep(obj, &x, &grad, step, floor);
    let (worst_index, max_rel_error) = worst(&errors);
    let mut truncation_suspected = false;
    if max_rel_error >= tolerance && worst_index < x.len() {
        let mut h = step / 2.0;
        while h >= MIN_RETRY_STEP && !truncation_suspected {
            let numeric = central(obj, &x, worst_index, h);
            truncation_suspected =
                relative_error(grad[worst_index], numeric, floor) * 4.0 < max_rel_error;
            h /= 2.0;
        }
    }
    GradCheckReport {
        step,
        tolerance,
        checked: x.len(),
        max_rel_error,
        worst_index,
        worst_param: obj.label(worst_index),
        analytic: grad.get(worst_index).copied().unwrap_or(0.0),
        numeric: errors.get(worst_index).map_or(0.0, |e| e.1),
        truncation_suspected,
    }
}

/// `L_joint` of a model on a fixed set of windows, as a function of its
/// flattened parameters.
pub struct ModelObjective<'a> {
    pub model: &'a SocialTgcn,
    pub windows: &'a [TrainingWindow],
    pub alpha: f64,
}

impl ModelObjective<'_> {
    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut model = self.model.clone();
        model.params.set_flat(x);
        let mut loss = 0.0;
        let mut grads = model.params.zeros_like();
        for w in self.windows {
            let (parts, g) = window_gradients(&model, w, self.alpha).expect("finite micro-model");
            loss += parts.joint;
            grads.add_assign(&g);
        }
        let k = 1.0 / self.windows.len() as f64;
        grads.scale(k);
        (loss * k, grads.to_flat())
    }
}

impl Objective for ModelObjective<'_> {
    fn point(&self) -> Vec<f64> {
        self.model.params.to_flat()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x).0
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.eval(x).1
    }

    fn label(&self, index: usize) -> String {
        match self.model.params.locate(index) {
            Some((name, offset)) => format!("{name}[{offset}]"),
            None => format!("x[{index}]"),
        }
    }
}

/// Small configuration for exhaustive finite-difference sweeps:
/// 4 joints, 12 observed frames, 6 predicted frames.
pub fn micro_config() -> ModelConfig {
    ModelConfig {
        in_frames: 12,
        out_frames: 6,
        joints: 4,
        root_index: 0,
        psm_kernel: 4,
        psm_gcn_layers: 3,
        psm_hidden: 6,
        encoder_layers: 2,
        encoder_hidden: 6,
        decoder_tcn_layers: 2,
        ..Default::default()
    }
}

/// A seeded random-walk window shaped for `cfg`, persons about a metre apart.
pub fn random_window(cfg: &ModelConfig, persons: usize, seed: u64) -> TrainingWindow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = cfg.in_frames + cfg.out_frames;
    let mut motion = Array4::zeros((persons, frames, cfg.joints, 3));
    for p in 0..persons {
        for j in 0..cfg.joints {
            let mut pos = [
                1000.0 * p as f64 + rng.random_range(-200.0..200.0),
                rng.random_range(-200.0..200.0),
                rng.random_range(0.0..1700.0),
            ];
            for t in 0..frames {
                for c in 0..3 {
                    pos[c] += rng.random_range(-15.0..15.0);
                    motion[[p, t, j, c]] = pos[c];
                }
            }
        }
    }
    TrainingWindow {
        input: motion.slice(ndarray::s![.., ..cfg.in_frames, .., ..]).to_owned(),
        target: motion.slice(ndarray::s![.., cfg.in_frames.., .., ..]).to_owned(),
        scene: Scene::Synthetic,
        source_id: format!("random_{seed}"),
        start: 0,
    }
}

/// Full-model check on [`random_window`] data for `cfg` built from `seed`.
pub fn grad_check(
    cfg: &ModelConfig,
    persons: usize,
    seed: u64,
    step: f64,
) -> Result<GradCheckReport> {
    let model = SocialTgcn::build(cfg.clone(), seed)?;
    let windows = vec![random_window(cfg, persons, seed.wrapping_add(1))];
    let obj = ModelObjective {
        model: &model,
        windows: &windows,
        alpha: 0.1,
    };
    Ok(check_gradients(&obj, step, 1e-4))
}
