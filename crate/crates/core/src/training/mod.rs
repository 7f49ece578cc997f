//! Losses, explicit gradients, Adam and the training loop.

mod adam;
mod grad_check;
mod loss;

pub use adam::{adam_step, clip_factor, AdamConfig, AdamState};
pub use grad_check::{
    check_gradients, grad_check, micro_config, random_window, relative_error, GradCheckReport,
    ModelObjective, Objective,
};
pub use loss::{
    cumsum_backward, loss_joint, loss_joint_grad, loss_pose, loss_pose_grad, loss_rec,
    loss_rec_grad, LossParts,
};

use std::time::Instant;

use ndarray::{concatenate, s, Array4, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{to_displacements, TrainingWindow};
use crate::error::{Error, Result};
use crate::model::{Params, SocialTgcn};

/// Windows per parallel work unit. Fixed so the reduction order never
/// depends on the thread count.
const CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Weight of the pose loss.
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub gradient_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: 3e-4,
            alpha: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            gradient_clip: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config("alpha must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0
        {
            return Err(Error::Config("invalid Adam betas or eps".into()));
        }
        if matches!(self.gradient_clip, Some(c) if !(c > 0.0)) {
            return Err(Error::Config("gradient_clip must be positive".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            gradient_clip: self.gradient_clip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub rec: f64,
    pub pose: f64,
    pub joint: f64,
    pub seconds: f64,
    /// Optimizer steps taken so far.
    pub steps: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

/// Ground-truth displacements of a window's target, measured from its last
/// observed frame.
pub fn target_displacements(window: &TrainingWindow) -> Result<Array4<f64>> {
    let last = window.input.shape()[1] - 1;
    let joined = concatenate(
        Axis(1),
        &[window.input.slice(s![.., last..last + 1, .., ..]), window.target.view()],
    )
    .map_err(|e| Error::dim(format!("window input and target disagree: {e}")))?;
    Ok(to_displacements(joined.view())?.data)
}

/// Loss and parameter gradients for one window.
pub fn window_gradients(
    model: &SocialTgcn,
    window: &TrainingWindow,
    alpha: f64,
) -> Result<(LossParts, Params)> {
    let (pred, trace) = model.forward_trace(window.input.view())?;
    let gt_disp = target_displacements(window)?;
    let (parts, d_disp) = loss_joint_grad(
        pred.disp.view(),
        pred.poses.view(),
        gt_disp.view(),
        window.target.view(),
        model.config.root_index,
        alpha,
    )?;
    if !parts.is_finite() {
        let location = model
            .params
            .first_non_finite()
            .unwrap_or_else(|| "output".to_string());
        return Err(Error::numeric(location, "non-finite loss"));
    }
    let grads = model.backward(&trace, d_disp.view())?;
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::numeric(name, "non-finite gradient"));
    }
    Ok((parts, grads))
}

/// Mean loss and gradient of `L_joint` over a batch of windows.
pub fn backward(
    model: &SocialTgcn,
    windows: &[TrainingWindow],
    alpha: f64,
) -> Result<(LossParts, Params)> {
    if windows.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    let partials: Vec<(LossParts, Params)> = windows
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut loss = LossParts::default();
            let mut grads: Option<Params> = None;
            for w in chunk {
                let (l, g) = window_gradients(model, w, alpha)?;
                loss.add(&l);
                match grads.as_mut() {
                    Some(acc) => acc.add_assign(&g),
                    None => grads = Some(g),
                }
            }
            Ok((loss, grads.expect("chunks are non-empty")))
        })
        .collect::<Result<_>>()?;
    let mut iter = partials.into_iter();
    let (mut loss, mut grads) = iter.next().expect("at least one chunk");
    for (l, g) in iter {
        loss.add(&l);
        grads.add_assign(&g);
    }
    let k = 1.0 / windows.len() as f64;
    loss.scale(k);
    grads.scale(k);
    Ok((loss, grads))
}

fn with_context(e: Error, epoch: usize, step: u64) -> Error {
    match e {
        Error::Numeric { location, message } => Error::Numeric {
            location: format!("epoch {epoch} step {step}: {location}"),
            message,
        },
        other => other,
    }
}

/// Train in place. See [`train_with`].
pub fn train(
    model: &mut SocialTgcn,
    windows: &[TrainingWindow],
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    train_with(model, windows, cfg, |_| {})
}

/// Shuffled mini-batches per epoch, one Adam step per batch. `on_epoch` sees
/// each record as soon as the epoch ends.
pub fn train_with(
    model: &mut SocialTgcn,
    windows: &[TrainingWindow],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainHistory> {
    cfg.validate()?;
    if windows.is_empty() {
        return Err(Error::Domain("no training windows".into()));
    }
    let mut history = TrainHistory::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamState::new(&model.params);
    let adam = cfg.adam();
    let mut order: Vec<usize> = (0..windows.len()).collect();
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut sum = LossParts::default();
        let mut batches = 0usize;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<TrainingWindow> = idx.iter().map(|&i| windows[i].clone()).collect();
            let (loss, grads) =
                backward(model, &batch, cfg.alpha).map_err(|e| with_context(e, epoch, state.t))?;
            adam_step(&mut model.params, &grads, &mut state, &adam)
                .map_err(|e| with_context(e, epoch, state.t))?;
            sum.add(&loss);
            batches += 1;
        }
        if let Some(name) = model.params.first_non_finite() {
            return Err(with_context(
                Error::numeric(name, "parameter became non-finite"),
                epoch,
                state.t,
            ));
        }
        sum.scale(1.0 / batches as f64);
        let record = EpochRecord {
            epoch,
            rec: sum.rec,
            pose: sum.pose,
            joint: sum.joint,
            seconds: start.elapsed().as_secs_f64(),
            steps: state.t,
        };
        on_epoch(&record);
        history.epochs.push(record);
    }
    Ok(history)
}
