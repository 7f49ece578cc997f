use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale gradients whose global L2 norm exceeds this value.
    pub gradient_clip: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            gradient_clip: None,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &Params) -> Self {
        let n = params.count();
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// Scale factor that brings a gradient of norm `norm` under `clip`.
pub fn clip_factor(norm: f64, clip: Option<f64>) -> f64 {
    match clip {
        Some(c) if norm > c => c / norm,
        _ => 1.0,
    }
}

pub fn adam_step(
    params: &mut Params,
    grads: &Params,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::numeric(name, "non-finite gradient"));
    }
    let k = clip_factor(grads.l2_norm(), cfg.gradient_clip);
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let mut i = 0;
    for (dst, src) in params.slices_mut().into_iter().zip(grads.tensors()) {
        for (w, &g) in dst.iter_mut().zip(src.values) {
            let g = g * k;
            let m = &mut state.m[i];
            let v = &mut state.v[i];
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *w -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.eps);
            i += 1;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn tiny() -> Params {
        let cfg = ModelConfig {
            joints: 2,
            root_index: 0,
            in_frames: 4,
            out_frames: 2,
            psm_kernel: 2,
            psm_gcn_layers: 2,
            psm_hidden: 2,
            encoder_layers: 1,
            encoder_hidden: 2,
            decoder_tcn_layers: 1,
            ..Default::default()
        };
        Params::init(&cfg, 0)
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = tiny();
        let before = p.clone();
        let g = p.zeros_like();
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, &AdamConfig::default()).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = tiny();
        let before = p.to_flat();
        let mut g = p.zeros_like();
        g.slices_mut()[0][0] = 1.0;
        let mut s = AdamState::new(&p);
        let cfg = AdamConfig::default();
        adam_step(&mut p, &g, &mut s, &cfg).unwrap();
        let delta = before[0] - p.to_flat()[0];
        // m_hat / sqrt(v_hat) = 1, so only eps separates the step from lr
        assert!((delta / cfg.learning_rate - 1.0).abs() < 1e-7);
    }

    #[test]
    fn clipping_scales_gradient() {
        assert_eq!(clip_factor(10.0, Some(1.0)), 0.1);
        assert_eq!(clip_factor(0.5, Some(1.0)), 1.0);
        assert_eq!(clip_factor(10.0, None), 1.0);
    }

    #[test]
    fn non_finite_gradient_is_named() {
        let mut p = tiny();
        let mut g = p.zeros_like();
        g.head.bias[0] = f64::NAN;
        let mut s = AdamState::new(&p);
        match adam_step(&mut p, &g, &mut s, &AdamConfig::default()) {
            Err(Error::Numeric { location, .. }) => assert_eq!(location, "head.bias"),
            other => panic!("{other:?}"),
        }
    }
}
