use ndarray::{Array4, ArrayView4, Axis};

use crate::error::{Error, Result};
use crate::metrics::{ajpe, mean_over_frames};

/// Loss values of one prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub rec: f64,
    pub pose: f64,
    pub joint: f64,
}

impl LossParts {
    pub fn add(&mut self, other: &LossParts) {
        self.rec += other.rec;
        self.pose += other.pose;
        self.joint += other.joint;
    }

    pub fn scale(&mut self, k: f64) {
        self.rec *= k;
        self.pose *= k;
        self.joint *= k;
    }

    pub fn is_finite(&self) -> bool {
        self.rec.is_finite() && self.pose.is_finite() && self.joint.is_finite()
    }
}

fn same_shape(a: &ArrayView4<'_, f64>, b: &ArrayView4<'_, f64>) -> Result<()> {
    if a.shape() != b.shape() || a.shape()[3] != 3 {
        return Err(Error::dim(format!(
            "loss inputs {:?} and {:?} must match and end in 3",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Mean over persons, frames and joints of the squared displacement error.
pub fn loss_rec(pred_disp: ArrayView4<'_, f64>, gt_disp: ArrayView4<'_, f64>) -> Result<f64> {
    Ok(loss_rec_grad(pred_disp, gt_disp)?.0)
}

/// [`loss_rec`] and its gradient with respect to `pred_disp`.
pub fn loss_rec_grad(
    pred_disp: ArrayView4<'_, f64>,
    gt_disp: ArrayView4<'_, f64>,
) -> Result<(f64, Array4<f64>)> {
    same_shape(&pred_disp, &gt_disp)?;
    let (p, n, j, _) = pred_disp.dim();
    let count = (p * n * j) as f64;
    let diff = &pred_disp - &gt_disp;
    let value = diff.iter().map(|d| d * d).sum::<f64>() / count;
    Ok((value, diff * (2.0 / count)))
}

/// Root-aligned joint error averaged over all predicted frames.
pub fn loss_pose(
    pred_poses: ArrayView4<'_, f64>,
    gt_poses: ArrayView4<'_, f64>,
    root: usize,
) -> Result<f64> {
    same_shape(&pred_poses, &gt_poses)?;
    mean_over_frames(pred_poses.shape()[1], |f| ajpe(pred_poses, gt_poses, root, f))
}

/// [`loss_pose`] and its gradient with respect to `pred_poses`. Joints whose
/// aligned error is exactly zero contribute a zero subgradient.
pub fn loss_pose_grad(
    pred_poses: ArrayView4<'_, f64>,
    gt_poses: ArrayView4<'_, f64>,
    root: usize,
) -> Result<(f64, Array4<f64>)> {
    same_shape(&pred_poses, &gt_poses)?;
    let (persons, frames, joints, _) = pred_poses.dim();
    if root >= joints {
        return Err(Error::Domain(format!("root {root} outside {joints} joints")));
    }
    let value = loss_pose(pred_poses, gt_poses, root)?;
    let scale = 1.0 / (persons * frames * joints) as f64;
    let mut grad = Array4::zeros(pred_poses.raw_dim());
    for p in 0..persons {
        for t in 0..frames {
            let mut root_grad = [0.0; 3];
            for j in 0..joints {
                let mut e = [0.0; 3];
                for c in 0..3 {
                    e[c] = (pred_poses[[p, t, j, c]] - pred_poses[[p, t, root, c]])
                        - (gt_poses[[p, t, j, c]] - gt_poses[[p, t, root, c]]);
                }
                let norm = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
                if norm == 0.0 {
                    continue;
                }
                for c in 0..3 {
                    let g = scale * e[c] / norm;
                    grad[[p, t, j, c]] += g;
                    root_grad[c] -= g;
                }
            }
            for c in 0..3 {
                grad[[p, t, root, c]] += root_grad[c];
            }
        }
    }
    Ok((value, grad))
}

/// `L_rec + alpha * L_pose`.
pub fn loss_joint(
    pred_disp: ArrayView4<'_, f64>,
    pred_poses: ArrayView4<'_, f64>,
    gt_disp: ArrayView4<'_, f64>,
    gt_poses: ArrayView4<'_, f64>,
    root: usize,
    alpha: f64,
) -> Result<LossParts> {
    Ok(loss_joint_grad(pred_disp, pred_poses, gt_disp, gt_poses, root, alpha)?.0)
}

/// [`loss_joint`] and its total gradient with respect to the predicted
/// displacements (the pose term is routed back through the cumulative sum).
pub fn loss_joint_grad(
    pred_disp: ArrayView4<'_, f64>,
    pred_poses: ArrayView4<'_, f64>,
    gt_disp: ArrayView4<'_, f64>,
    gt_poses: ArrayView4<'_, f64>,
    root: usize,
    alpha: f64,
) -> Result<(LossParts, Array4<f64>)> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("alpha must be >= 0, got {alpha}")));
    }
    same_shape(&pred_disp, &pred_poses)?;
    let (rec, mut grad) = loss_rec_grad(pred_disp, gt_disp)?;
    let (pose, pose_grad) = loss_pose_grad(pred_poses, gt_poses, root)?;
    if alpha > 0.0 {
        grad.scaled_add(alpha, &cumsum_backward(pose_grad));
    }
    Ok((
        LossParts {
            rec,
            pose,
            joint: rec + alpha * pose,
        },
        grad,
    ))
}

/// Gradient through `pose[k] = anchor + sum_{s <= k} disp[s]`: a reverse
/// cumulative sum over the frame axis.
pub fn cumsum_backward(mut d_poses: Array4<f64>) -> Array4<f64> {
    let frames = d_poses.shape()[1];
    for k in (0..frames.saturating_sub(1)).rev() {
        let next = d_poses.index_axis(Axis(1), k + 1).to_owned();
        let mut cur = d_poses.index_axis_mut(Axis(1), k);
        cur += &next;
    }
    d_poses
}
