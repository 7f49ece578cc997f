use ndarray::{Array2, ArrayViewMut, Dimension};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::layers::{Conv1d, Dense, GraphConv};
use crate::data::skeleton::bones_for;

/// Every learnable tensor of the network. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// Temporal downsampling convolution of the refine module.
    pub psm_conv: Conv1d,
    /// Initial, residual and end skeletal graph layers.
    pub psm_gcn: Vec<GraphConv>,
    pub encoder: Vec<EncoderLayer>,
    /// Temporal decoder convolutions; the first expands observed steps to
    /// output slots.
    pub decoder: Vec<Conv1d>,
    /// Per-slot map from embedding features to DCT coefficients.
    pub head: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub social: Dense,
    pub temporal: Conv1d,
}

/// A named view of one tensor.
pub struct Tensor<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: &'a [f64],
}

fn slice_mut<D: Dimension>(a: ArrayViewMut<'_, f64, D>) -> &mut [f64] {
    a.into_slice().expect("parameters are stored contiguously")
}

impl Params {
    /// All-zero parameters shaped for `cfg`.
    pub fn zeros(cfg: &ModelConfig) -> Params {
        let d = cfg.coord_dim();
        let refined = cfg.refined_frames();
        let hid = cfg.psm_hidden;
        let mut psm_gcn = Vec::with_capacity(cfg.psm_gcn_layers);
        psm_gcn.push(GraphConv::zeros(d, refined, hid));
        for _ in 0..cfg.psm_gcn_layers - 2 {
            psm_gcn.push(GraphConv::zeros(d, hid, hid));
        }
        psm_gcn.push(GraphConv::zeros(d, hid, refined));
        let eh = cfg.encoder_hidden;
        let encoder = (0..cfg.encoder_layers)
            .map(|l| EncoderLayer {
                social: Dense::zeros(if l == 0 { d } else { eh }, eh),
                temporal: Conv1d::zeros(cfg.encoder_kernel, eh, eh),
            })
            .collect();
        let decoder = (0..cfg.decoder_tcn_layers)
            .map(|l| {
                let cin = if l == 0 { refined } else { cfg.out_frames };
                Conv1d::zeros(cfg.decoder_kernel, cin, cfg.out_frames)
            })
            .collect();
        Params {
            psm_conv: Conv1d::zeros(cfg.psm_kernel, d, d),
            psm_gcn,
            encoder,
            decoder,
            head: Dense::zeros(eh, d),
        }
    }

    /// Seeded initialisation: weights uniform in `±1/sqrt(fan_in)`, biases
    /// zero, skeletal adjacencies set to the normalised bone graph plus
    /// uniform noise.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Params {
        let mut p = Params::zeros(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fill = |w: &mut [f64], fan_in: usize, rng: &mut ChaCha8Rng| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        };
        let k = cfg.psm_kernel;
        let d = cfg.coord_dim();
        fill(slice_mut(p.psm_conv.weight.view_mut()), k * d, &mut rng);
        let skel = skeletal_adjacency(cfg.joints);
        for layer in p.psm_gcn.iter_mut() {
            let fan_in = layer.weight.nrows();
            fill(slice_mut(layer.weight.view_mut()), fan_in, &mut rng);
            for (a, &s) in layer.adjacency.iter_mut().zip(skel.iter()) {
                let noise = if cfg.a_skel_noise > 0.0 {
                    rng.random_range(-cfg.a_skel_noise..cfg.a_skel_noise)
                } else {
                    0.0
                };
                *a = s + noise;
            }
        }
        for layer in p.encoder.iter_mut() {
            let fan_in = layer.social.weight.nrows();
            fill(slice_mut(layer.social.weight.view_mut()), fan_in, &mut rng);
            let sh = layer.temporal.weight.shape().to_vec();
            fill(slice_mut(layer.temporal.weight.view_mut()), sh[0] * sh[1], &mut rng);
        }
        for layer in p.decoder.iter_mut() {
            let sh = layer.weight.shape().to_vec();
            fill(slice_mut(layer.weight.view_mut()), sh[0] * sh[1], &mut rng);
        }
        let fan_in = p.head.weight.nrows();
        fill(slice_mut(p.head.weight.view_mut()), fan_in, &mut rng);
        p
    }

    pub fn tensors(&self) -> Vec<Tensor<'_>> {
        fn t<'a, D: Dimension>(
            out: &mut Vec<Tensor<'a>>,
            name: String,
            a: &'a ndarray::Array<f64, D>,
        ) {
            out.push(Tensor {
                name,
                shape: a.shape().to_vec(),
                values: a.as_slice().expect("parameters are stored contiguously"),
            });
        }
        let mut out = Vec::new();
        t(&mut out, "psm.conv.weight".into(), &self.psm_conv.weight);
        t(&mut out, "psm.conv.bias".into(), &self.psm_conv.bias);
        for (i, g) in self.psm_gcn.iter().enumerate() {
            t(&mut out, format!("psm.gcn.{i}.adjacency"), &g.adjacency);
            t(&mut out, format!("psm.gcn.{i}.weight"), &g.weight);
            t(&mut out, format!("psm.gcn.{i}.bias"), &g.bias);
        }
        for (i, e) in self.encoder.iter().enumerate() {
            t(&mut out, format!("encoder.{i}.social.weight"), &e.social.weight);
            t(&mut out, format!("encoder.{i}.social.bias"), &e.social.bias);
            t(&mut out, format!("encoder.{i}.temporal.weight"), &e.temporal.weight);
            t(&mut out, format!("encoder.{i}.temporal.bias"), &e.temporal.bias);
        }
        for (i, c) in self.decoder.iter().enumerate() {
            t(&mut out, format!("decoder.{i}.weight"), &c.weight);
            t(&mut out, format!("decoder.{i}.bias"), &c.bias);
        }
        t(&mut out, "head.weight".into(), &self.head.weight);
        t(&mut out, "head.bias".into(), &self.head.bias);
        out
    }

    /// Mutable slices in the same order as [`Params::tensors`].
    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        out.push(slice_mut(self.psm_conv.weight.view_mut()));
        out.push(slice_mut(self.psm_conv.bias.view_mut()));
        for g in self.psm_gcn.iter_mut() {
            out.push(slice_mut(g.adjacency.view_mut()));
            out.push(slice_mut(g.weight.view_mut()));
            out.push(slice_mut(g.bias.view_mut()));
        }
        for e in self.encoder.iter_mut() {
            out.push(slice_mut(e.social.weight.view_mut()));
            out.push(slice_mut(e.social.bias.view_mut()));
            out.push(slice_mut(e.temporal.weight.view_mut()));
            out.push(slice_mut(e.temporal.bias.view_mut()));
        }
        for c in self.decoder.iter_mut() {
            out.push(slice_mut(c.weight.view_mut()));
            out.push(slice_mut(c.bias.view_mut()));
        }
        out.push(slice_mut(self.head.weight.view_mut()));
        out.push(slice_mut(self.head.bias.view_mut()));
        out
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.values.len()).sum()
    }

    pub fn zeros_like(&self) -> Params {
        let mut z = self.clone();
        for s in z.slices_mut() {
            s.fill(0.0);
        }
        z
    }

    /// `self += other`, tensor by tensor in a fixed order.
    pub fn add_assign(&mut self, other: &Params) {
        let src = other.tensors();
        for (dst, t) in self.slices_mut().into_iter().zip(src) {
            for (d, s) in dst.iter_mut().zip(t.values) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for s in self.slices_mut() {
            for v in s.iter_mut() {
                *v *= k;
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.values.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Name of the first tensor holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<String> {
        self.tensors()
            .into_iter()
            .find(|t| t.values.iter().any(|v| !v.is_finite()))
            .map(|t| t.name)
    }

    /// Flat copy of every value in tensor order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|t| t.values.iter().copied())
            .collect()
    }

    /// Inverse of [`Params::to_flat`].
    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut rest = flat;
        for dst in self.slices_mut() {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
        assert!(rest.is_empty(), "flat vector longer than parameter set");
    }

    /// Tensor name and offset within that tensor for a flat index.
    pub fn locate(&self, mut index: usize) -> Option<(String, usize)> {
        for t in self.tensors() {
            if index < t.values.len() {
                return Some((t.name, index));
            }
            index -= t.values.len();
        }
        None
    }
}

/// Symmetrically normalised bone graph over the `3J` coordinate nodes:
/// coordinate `c` of joint `a` links to coordinate `c` of joint `b` for every
/// bone, plus self loops, scaled by `D^-1/2 (A + I) D^-1/2`.
pub fn skeletal_adjacency(joints: usize) -> Array2<f64> {
    let n = 3 * joints;
    let mut a = Array2::<f64>::eye(n);
    for (p, c) in bones_for(joints) {
        for k in 0..3 {
            a[[3 * p + k, 3 * c + k]] = 1.0;
            a[[3 * c + k, 3 * p + k]] = 1.0;
        }
    }
    let deg: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
    for ((i, j), v) in a.indexed_iter_mut() {
        *v /= (deg[i] * deg[j]).sqrt();
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skeletal_adjacency_is_symmetric() {
        let a = skeletal_adjacency(18);
        assert_eq!(a.dim(), (54, 54));
        for i in 0..54 {
            for j in 0..54 {
                assert_eq!(a[[i, j]], a[[j, i]]);
            }
        }
        // Spine1 x-coordinate links to Spine2 x only
        assert!(a[[24, 27]] > 0.0);
        assert_eq!(a[[24, 28]], 0.0);
    }

    #[test]
    fn names_and_slices_align() {
        let cfg = ModelConfig {
            psm_hidden: 8,
            encoder_hidden: 6,
            ..Default::default()
        };
        let mut p = Params::init(&cfg, 1);
        let lens: Vec<usize> = p.tensors().iter().map(|t| t.values.len()).collect();
        let mut_lens: Vec<usize> = p.slices_mut().iter().map(|s| s.len()).collect();
        assert_eq!(lens, mut_lens);
        let names: std::collections::HashSet<String> =
            p.tensors().into_iter().map(|t| t.name).collect();
        assert_eq!(names.len(), lens.len());
    }
}
