use ndarray::{Array2, ArrayView2, ArrayView3, Axis};

use crate::error::{Error, Result};

/// Person-to-person weights `exp(-d_ij) / theta`, `d_ij` in metres.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialAdjacency {
    pub matrix: Array2<f64>,
}

impl SpatialAdjacency {
    pub fn persons(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Build the adjacency from root positions `[persons, 3]` given in millimetres.
pub fn spatial_adjacency(roots: ArrayView2<'_, f64>, theta: f64) -> Result<SpatialAdjacency> {
    let (persons, dims) = roots.dim();
    if persons == 0 || dims != 3 {
        return Err(Error::dim(format!(
            "roots must be [persons >= 1, 3], got {:?}",
            roots.shape()
        )));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Config(format!("theta must be positive, got {theta}")));
    }
    if roots.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("spatial_adjacency", "non-finite root position"));
    }
    let mut matrix = Array2::zeros((persons, persons));
    for i in 0..persons {
        for j in 0..persons {
            let d_mm = (0..3)
                .map(|c| {
                    let diff = roots[[i, c]] - roots[[j, c]];
                    diff * diff
                })
                .sum::<f64>()
                .sqrt();
            matrix[[i, j]] = (-d_mm / 1000.0).exp() / theta;
        }
    }
    Ok(SpatialAdjacency { matrix })
}

/// Mean of the per-frame adjacency over a root track `[persons, frames, 3]`.
pub fn mean_spatial_adjacency(
    roots: ArrayView3<'_, f64>,
    theta: f64,
) -> Result<SpatialAdjacency> {
    let frames = roots.shape()[1];
    if frames == 0 {
        return Err(Error::dim("root track has no frames"));
    }
    let mut sum = spatial_adjacency(roots.index_axis(Axis(1), 0), theta)?.matrix;
    for t in 1..frames {
        sum += &spatial_adjacency(roots.index_axis(Axis(1), t), theta)?.matrix;
    }
    sum /= frames as f64;
    Ok(SpatialAdjacency { matrix: sum })
}
