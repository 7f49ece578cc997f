use ndarray::{s, Array3, Array4, ArrayView3, ArrayView4, Axis};

use super::json::RawSample;
use super::skeleton::{DEFAULT_RAW_MAPPING, NUM_JOINTS, NUM_RAW_JOINTS};
use super::{MotionSample, Scene};
use crate::error::{Error, Result};

/// 75 FPS exports are reduced to 25 FPS.
pub const DEFAULT_DOWNSAMPLE: usize = 3;

/// Select the 18 canonical joints with the default raw layout.
pub fn select_joints(id: &str, scene: Scene, raw: &RawSample) -> Result<MotionSample> {
    select_joints_with(id, scene, raw, &DEFAULT_RAW_MAPPING)
}

/// Select joints with an explicit raw index for each canonical joint.
pub fn select_joints_with(
    id: &str,
    scene: Scene,
    raw: &RawSample,
    mapping: &[usize; NUM_JOINTS],
) -> Result<MotionSample> {
    let joints = raw.data.shape()[2];
    if joints != NUM_RAW_JOINTS {
        return Err(Error::dim(format!(
            "raw sample must have {NUM_RAW_JOINTS} joints, got {joints}"
        )));
    }
    if let Some(&bad) = mapping.iter().find(|&&m| m >= NUM_RAW_JOINTS) {
        return Err(Error::Config(format!("joint mapping index {bad} out of range")));
    }
    let data = raw.data.select(Axis(2), mapping);
    MotionSample::new(id, scene, raw.fps, data)
}

/// Keep every `factor`-th frame starting at frame 0.
pub fn downsample(sample: &MotionSample, factor: usize) -> Result<MotionSample> {
    if factor == 0 {
        return Err(Error::Config("downsample factor must be at least 1".into()));
    }
    let frames = sample.frames();
    if factor > frames {
        return Err(Error::dim(format!(
            "downsample factor {factor} exceeds frame count {frames}"
        )));
    }
    let data = sample.data.slice(s![.., ..;factor, .., ..]).to_owned();
    if data.shape()[1] < 2 {
        return Err(Error::dim(format!(
            "downsampling {frames} frames by {factor} leaves fewer than 2 frames"
        )));
    }
    MotionSample::new(
        sample.id.clone(),
        sample.scene,
        sample.fps / factor as f64,
        data,
    )
}

/// Frame-to-frame differences plus the last pose needed to undo them.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementSequence {
    /// `[persons, frames - 1, joints, 3]`, mm per frame.
    pub data: Array4<f64>,
    /// Final source pose `[persons, joints, 3]`.
    pub anchor: Array3<f64>,
}

pub fn to_displacements(positions: ArrayView4<'_, f64>) -> Result<DisplacementSequence> {
    let frames = positions.shape()[1];
    if frames < 2 {
        return Err(Error::dim(format!(
            "displacements need at least 2 frames, got {frames}"
        )));
    }
    let data = &positions.slice(s![.., 1.., .., ..]) - &positions.slice(s![.., ..-1, .., ..]);
    let anchor = positions.index_axis(Axis(1), frames - 1).to_owned();
    Ok(DisplacementSequence { data, anchor })
}

/// `pose[k] = anchor + disp[0] + ... + disp[k]`.
pub fn reconstruct(anchor: ArrayView3<'_, f64>, disp: ArrayView4<'_, f64>) -> Result<Array4<f64>> {
    let (p, n, j, c) = disp.dim();
    if anchor.dim() != (p, j, c) {
        return Err(Error::dim(format!(
            "anchor shape {:?} does not match displacements {:?}",
            anchor.shape(),
            disp.shape()
        )));
    }
    let mut out = Array4::zeros((p, n, j, c));
    let mut current = anchor.to_owned();
    for k in 0..n {
        current += &disp.index_axis(Axis(1), k);
        out.index_axis_mut(Axis(1), k).assign(&current);
    }
    Ok(out)
}
