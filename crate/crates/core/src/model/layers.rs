//! Layer primitives with explicit forward and backward passes.
//!
//! All activations are `[rows, channels]` matrices. For temporal layers the
//! rows are time steps; for skeletal graph layers the rows are graph nodes.

use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis, Zip};

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    /// `[kernel, in_channels, out_channels]`
    pub weight: Array3<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphConv {
    /// `[nodes, nodes]`, learnable.
    pub adjacency: Array2<f64>,
    /// `[in_features, out_features]`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `[in_features, out_features]`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

pub fn conv_out_len(len: usize, kernel: usize, stride: usize) -> Option<usize> {
    if len < kernel || stride == 0 {
        None
    } else {
        Some((len - kernel) / stride + 1)
    }
}

impl Conv1d {
    pub fn zeros(kernel: usize, cin: usize, cout: usize) -> Self {
        Conv1d {
            weight: Array3::zeros((kernel, cin, cout)),
            bias: Array1::zeros(cout),
        }
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[0]
    }

    /// Valid (unpadded) convolution: `y[t] = b + sum_k x[t*stride + k] W[k]`.
    pub fn forward(&self, x: ArrayView2<'_, f64>, stride: usize) -> Array2<f64> {
        let k = self.kernel();
        let out_len = conv_out_len(x.nrows(), k, stride).expect("conv input shorter than kernel");
        let mut y = Array2::zeros((out_len, self.bias.len()));
        y += &self.bias;
        let span = stride * (out_len - 1) + 1;
        for tap in 0..k {
            let rows = x.slice(s![tap..tap + span;stride, ..]);
            y += &rows.dot(&self.weight.index_axis(Axis(0), tap));
        }
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(
        &self,
        x: ArrayView2<'_, f64>,
        dy: ArrayView2<'_, f64>,
        stride: usize,
        grad: &mut Conv1d,
    ) -> Array2<f64> {
        let k = self.kernel();
        let out_len = dy.nrows();
        let span = stride * (out_len - 1) + 1;
        let mut dx = Array2::zeros(x.raw_dim());
        grad.bias += &dy.sum_axis(Axis(0));
        for tap in 0..k {
            let rows = x.slice(s![tap..tap + span;stride, ..]);
            let mut gw = grad.weight.index_axis_mut(Axis(0), tap);
            gw += &rows.t().dot(&dy);
            let mut dx_rows = dx.slice_mut(s![tap..tap + span;stride, ..]);
            dx_rows += &dy.dot(&self.weight.index_axis(Axis(0), tap).t());
        }
        dx
    }
}

impl GraphConv {
    pub fn zeros(nodes: usize, fin: usize, fout: usize) -> Self {
        GraphConv {
            adjacency: Array2::zeros((nodes, nodes)),
            weight: Array2::zeros((fin, fout)),
            bias: Array1::zeros(fout),
        }
    }

    /// `A (x W) + b`; also returns `x W` for the backward pass.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> (Array2<f64>, Array2<f64>) {
        let support = x.dot(&self.weight);
        let mut out = self.adjacency.dot(&support);
        out += &self.bias;
        (out, support)
    }

    pub fn backward(
        &self,
        x: ArrayView2<'_, f64>,
        support: ArrayView2<'_, f64>,
        dout: ArrayView2<'_, f64>,
        grad: &mut GraphConv,
    ) -> Array2<f64> {
        grad.adjacency += &dout.dot(&support.t());
        grad.bias += &dout.sum_axis(Axis(0));
        let dsupport = self.adjacency.t().dot(&dout);
        grad.weight += &x.t().dot(&dsupport);
        dsupport.dot(&self.weight.t())
    }
}

impl Dense {
    pub fn zeros(fin: usize, fout: usize) -> Self {
        Dense {
            weight: Array2::zeros((fin, fout)),
            bias: Array1::zeros(fout),
        }
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weight);
        y += &self.bias;
        y
    }

    pub fn backward(
        &self,
        x: ArrayView2<'_, f64>,
        dy: ArrayView2<'_, f64>,
        grad: &mut Dense,
    ) -> Array2<f64> {
        grad.weight += &x.t().dot(&dy);
        grad.bias += &dy.sum_axis(Axis(0));
        dy.dot(&self.weight.t())
    }
}

pub fn tanh(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(f64::tanh)
}

/// `dL/dx` for `y = tanh(x)` given the output `y`.
pub fn tanh_backward(y: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
    let mut dx = dy.clone();
    Zip::from(&mut dx).and(y).for_each(|d, &v| *d *= 1.0 - v * v);
    dx
}

pub fn leaky(x: &Array2<f64>, slope: f64) -> Array2<f64> {
    x.mapv(|v| if v > 0.0 { v } else { slope * v })
}

/// `dL/dx` for `y = leaky(x)` given the pre-activation `x`.
pub fn leaky_backward(x: &Array2<f64>, dy: &Array2<f64>, slope: f64) -> Array2<f64> {
    let mut dx = dy.clone();
    Zip::from(&mut dx)
        .and(x)
        .for_each(|d, &v| if v <= 0.0 { *d *= slope });
    dx
}

/// Prepend `pad` zero rows (causal padding).
pub fn pad_front(x: ArrayView2<'_, f64>, pad: usize) -> Array2<f64> {
    let mut out = Array2::zeros((x.nrows() + pad, x.ncols()));
    out.slice_mut(s![pad.., ..]).assign(&x);
    out
}

/// Zero rows on both sides.
pub fn pad_both(x: ArrayView2<'_, f64>, before: usize, after: usize) -> Array2<f64> {
    let mut out = Array2::zeros((x.nrows() + before + after, x.ncols()));
    out.slice_mut(s![before..before + x.nrows(), ..]).assign(&x);
    out
}

/// `out_i = sum_j a_ij u_j` over persons.
///
/// Each output element sums its `P` terms in ascending value order, so
/// relabelling persons (together with the rows and columns of `a`) permutes
/// the result exactly, bit for bit.
pub fn mix_persons(a: &Array2<f64>, inputs: &[Array2<f64>]) -> Vec<Array2<f64>> {
    let persons = inputs.len();
    let shape = inputs[0].raw_dim();
    let mut terms = vec![0.0; persons];
    (0..persons)
        .map(|i| {
            let mut out = Array2::zeros(shape);
            for (idx, slot) in out.indexed_iter_mut() {
                for (j, term) in terms.iter_mut().enumerate() {
                    *term = a[[i, j]] * inputs[j][idx];
                }
                terms.sort_unstable_by(f64::total_cmp);
                *slot = terms.iter().sum();
            }
            out
        })
        .collect()
}

/// Transpose-mixing for the backward pass: `d u_j = sum_i a_ij d out_i`.
pub fn mix_persons_backward(a: &Array2<f64>, douts: &[Array2<f64>]) -> Vec<Array2<f64>> {
    let persons = douts.len();
    (0..persons)
        .map(|j| {
            let mut du = Array2::zeros(douts[0].raw_dim());
            for (i, d) in douts.iter().enumerate() {
                du.scaled_add(a[[i, j]], d);
            }
            du
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(rows: usize, cols: usize, seed: f64) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |(r, c)| ((r * 7 + c * 3) as f64 * seed).sin())
    }

    #[test]
    fn conv_matches_direct_sum() {
        let mut conv = Conv1d::zeros(3, 2, 4);
        conv.weight = Array3::from_shape_fn((3, 2, 4), |(k, i, o)| (k * 8 + i * 4 + o) as f64 * 0.1);
        conv.bias = Array1::from(vec![0.5, -0.5, 1.0, 0.0]);
        let x = ramp(9, 2, 0.3);
        for stride in [1, 2, 3] {
            let y = conv.forward(x.view(), stride);
            let out_len = (9 - 3) / stride + 1;
            assert_eq!(y.nrows(), out_len);
            for t in 0..out_len {
                for o in 0..4 {
                    let mut want = conv.bias[o];
                    for k in 0..3 {
                        for i in 0..2 {
                            want += x[[t * stride + k, i]] * conv.weight[[k, i, o]];
                        }
                    }
                    assert!((y[[t, o]] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mixing_is_matrix_product() {
        let a = Array2::from_shape_fn((3, 3), |(i, j)| 1.0 / (1.0 + (i + j) as f64));
        let u: Vec<_> = (0..3).map(|p| ramp(4, 5, 0.1 + p as f64)).collect();
        let v = mix_persons(&a, &u);
        for i in 0..3 {
            let mut want = Array2::<f64>::zeros((4, 5));
            for j in 0..3 {
                want.scaled_add(a[[i, j]], &u[j]);
            }
            for (x, y) in v[i].iter().zip(want.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mixing_permutation_is_exact() {
        let a = Array2::from_shape_fn((4, 4), |(i, j)| {
            if i == j { 1.0 } else { 0.1 + 0.05 * (i + j) as f64 }
        });
        let u: Vec<_> = (0..4).map(|p| ramp(3, 6, 0.37 + 0.11 * p as f64)).collect();
        let perm = [2, 0, 3, 1];
        let a_p = Array2::from_shape_fn((4, 4), |(i, j)| a[[perm[i], perm[j]]]);
        let u_p: Vec<_> = perm.iter().map(|&p| u[p].clone()).collect();
        let v = mix_persons(&a, &u);
        let v_p = mix_persons(&a_p, &u_p);
        for (i, &p) in perm.iter().enumerate() {
            assert_eq!(v_p[i], v[p]);
        }
    }
}
