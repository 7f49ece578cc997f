use serde::{Deserialize, Serialize};

use super::layers::conv_out_len;
use crate::data::skeleton::{DEFAULT_ROOT, NUM_JOINTS};
use crate::error::{Error, Result};

/// Which observed frames drive the person-to-person adjacency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyFrames {
    /// Root positions at the last observed frame.
    Last,
    /// Mean of the per-frame adjacency over all observed frames.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub in_frames: usize,
    pub out_frames: usize,
    pub joints: usize,
    pub root_index: usize,
    pub psm_kernel: usize,
    pub psm_stride: usize,
    /// Initial + residual + end graph layers; at least 2.
    pub psm_gcn_layers: usize,
    pub psm_hidden: usize,
    pub encoder_layers: usize,
    pub encoder_hidden: usize,
    pub encoder_kernel: usize,
    pub decoder_tcn_layers: usize,
    pub decoder_kernel: usize,
    pub theta: f64,
    pub leaky_slope: f64,
    /// Millimetres per internal displacement unit.
    pub unit_mm: f64,
    pub adjacency_frames: AdjacencyFrames,
    /// Half-width of the uniform noise added to the initial skeletal adjacency.
    pub a_skel_noise: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            in_frames: 25,
            out_frames: 25,
            joints: NUM_JOINTS,
            root_index: DEFAULT_ROOT,
            psm_kernel: 10,
            psm_stride: 1,
            psm_gcn_layers: 12,
            psm_hidden: 256,
            encoder_layers: 3,
            encoder_hidden: 512,
            encoder_kernel: 3,
            decoder_tcn_layers: 5,
            decoder_kernel: 3,
            theta: 1.0,
            leaky_slope: 0.01,
            unit_mm: 10.0,
            adjacency_frames: AdjacencyFrames::Last,
            a_skel_noise: 0.01,
        }
    }
}

impl ModelConfig {
    /// Coordinates per person, `3J`.
    pub fn coord_dim(&self) -> usize {
        3 * self.joints
    }

    /// Observed displacement frames, `in_frames - 1`.
    pub fn disp_frames(&self) -> usize {
        self.in_frames.saturating_sub(1)
    }

    /// Frames left after the refine-module convolution (`T - M` at stride 1).
    pub fn refined_frames(&self) -> usize {
        conv_out_len(self.disp_frames(), self.psm_kernel, self.psm_stride).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.joints == 0 || self.root_index >= self.joints {
            return fail(format!(
                "root index {} invalid for {} joints",
                self.root_index, self.joints
            ));
        }
        if self.in_frames < 2 || self.out_frames == 0 {
            return fail("in_frames must be >= 2 and out_frames >= 1".into());
        }
        if self.psm_kernel == 0 || self.psm_stride == 0 {
            return fail("psm kernel and stride must be positive".into());
        }
        if self.disp_frames() < self.psm_kernel {
            return fail(format!(
                "psm_kernel {} exceeds the {} observed displacement frames",
                self.psm_kernel,
                self.disp_frames()
            ));
        }
        if self.psm_gcn_layers < 2 {
            return fail("psm_gcn_layers must be at least 2 (initial + end)".into());
        }
        if self.psm_hidden == 0 || self.encoder_hidden == 0 {
            return fail("hidden widths must be positive".into());
        }
        if self.encoder_layers == 0 || self.decoder_tcn_layers == 0 {
            return fail("layer counts must be at least 1".into());
        }
        if self.encoder_kernel == 0 || self.decoder_kernel.is_multiple_of(2) {
            return fail("encoder kernel must be positive and decoder kernel odd".into());
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return fail(format!("theta must be positive, got {}", self.theta));
        }
        if !(self.unit_mm > 0.0 && self.unit_mm.is_finite()) {
            return fail("unit_mm must be positive".into());
        }
        if !self.leaky_slope.is_finite() || self.a_skel_noise < 0.0 {
            return fail("invalid leaky slope or adjacency noise".into());
        }
        Ok(())
    }
}
