//! Forward and reverse passes of the full forecaster.
//!
//! Pipeline for one scene with `P` persons:
//!
//! 1. observed poses -> displacements `[L = T-1, 3J]` per person (scaled to
//!    model units by `unit_mm`)
//! 2. refine module: temporal convolution (kernel `M`) to `T' = T-M` steps,
//!    transpose to `3J` graph nodes, then initial / residual / end skeletal
//!    graph layers with tanh, plus a skip from the convolution output
//! 3. encoder: per layer, person-graph convolution `leaky(A_spa Z W)`
//!    followed by a causal temporal convolution with a residual
//! 4. decoder: convolutions along the feature axis with time steps as
//!    channels (first layer expands `T'` to `N` slots), then a per-slot
//!    linear head to `3J` DCT coefficients
//! 5. inverse DCT over the `N` slots gives displacements, which are
//!    accumulated from the last observed pose

use ndarray::{s, Array2, Array3, Array4, ArrayView2, ArrayView3, ArrayView4, Axis};

use super::adjacency::{mean_spatial_adjacency, spatial_adjacency, SpatialAdjacency};
use super::config::{AdjacencyFrames, ModelConfig};
use super::layers::{
    leaky, leaky_backward, mix_persons, mix_persons_backward, pad_both, pad_front, tanh,
    tanh_backward,
};
use super::params::Params;
use crate::data::{reconstruct, to_displacements};
use crate::error::{Error, Result};
use crate::frequency::DctBasis;

/// The SocialTGCN forecaster: configuration plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialTgcn {
    pub config: ModelConfig,
    pub params: Params,
    dct: DctBasis,
}

/// Output of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Predicted displacements `[P, N, J, 3]`, mm per frame.
    pub disp: Array4<f64>,
    /// Predicted poses `[P, N, J, 3]`, mm.
    pub poses: Array4<f64>,
}

struct GcnTrace {
    input: Array2<f64>,
    support: Array2<f64>,
    act: Array2<f64>,
}

struct PsmTrace {
    input: Array2<f64>,
    layers: Vec<GcnTrace>,
}

struct EncoderTrace {
    inputs: Vec<Array2<f64>>,
    mixed: Vec<Array2<f64>>,
    padded: Vec<Array2<f64>>,
    temporal: Vec<Array2<f64>>,
}

struct DecoderLayerTrace {
    padded: Array2<f64>,
    pre: Array2<f64>,
}

struct DecoderTrace {
    layers: Vec<DecoderLayerTrace>,
    slots: Array2<f64>,
}

/// Everything the reverse pass needs from a forward pass.
pub struct ForwardTrace {
    psm: Vec<PsmTrace>,
    adjacency: Array2<f64>,
    encoder: Vec<EncoderTrace>,
    decoder: Vec<DecoderTrace>,
}

impl SocialTgcn {
    pub fn new(config: ModelConfig, params: Params) -> Result<Self> {
        config.validate()?;
        let expected = Params::zeros(&config);
        let want: Vec<Vec<usize>> = expected.tensors().into_iter().map(|t| t.shape).collect();
        let got: Vec<Vec<usize>> = params.tensors().into_iter().map(|t| t.shape).collect();
        if want != got {
            return Err(Error::Compatibility(
                "parameter shapes do not match the model configuration".into(),
            ));
        }
        let dct = DctBasis::new(config.out_frames)?;
        Ok(SocialTgcn {
            config,
            params,
            dct,
        })
    }

    /// Seeded construction; see [`Params::init`].
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = Params::init(&config, seed);
        SocialTgcn::new(config, params)
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    fn check_observed(&self, observed: &ArrayView4<'_, f64>) -> Result<()> {
        let (p, t, j, c) = observed.dim();
        if p == 0 || t != self.config.in_frames || j != self.config.joints || c != 3 {
            return Err(Error::dim(format!(
                "observed shape {:?} incompatible with model (expects [P, {}, {}, 3])",
                observed.shape(),
                self.config.in_frames,
                self.config.joints
            )));
        }
        if observed.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("predict", "non-finite observed coordinate"));
        }
        Ok(())
    }

    /// Person adjacency from the observed root track.
    pub fn adjacency_for(&self, observed: ArrayView4<'_, f64>) -> Result<SpatialAdjacency> {
        let root = self.config.root_index;
        let roots = observed.index_axis(Axis(2), root);
        match self.config.adjacency_frames {
            AdjacencyFrames::Last => {
                let last = roots.shape()[1] - 1;
                spatial_adjacency(roots.index_axis(Axis(1), last), self.config.theta)
            }
            AdjacencyFrames::Mean => mean_spatial_adjacency(roots, self.config.theta),
        }
    }

    // ---- refine module ------------------------------------------------

    fn psm_person(&self, input: Array2<f64>) -> (Array2<f64>, PsmTrace) {
        let p = &self.params;
        let refined = p.psm_conv.forward(input.view(), self.config.psm_stride);
        let nodes = refined.t().to_owned();
        let last = p.psm_gcn.len() - 1;
        let mut h = nodes.clone();
        let mut layers = Vec::with_capacity(p.psm_gcn.len());
        for (i, g) in p.psm_gcn.iter().enumerate() {
            let (pre, support) = g.forward(h.view());
            let act = tanh(&pre);
            let next = if i == 0 {
                act.clone()
            } else if i == last {
                &act + &nodes
            } else {
                &act + &h
            };
            layers.push(GcnTrace {
                input: std::mem::replace(&mut h, next),
                support,
                act,
            });
        }
        (h.t().to_owned(), PsmTrace { input, layers })
    }

    fn psm_person_backward(
        &self,
        trace: &PsmTrace,
        dout: ArrayView2<'_, f64>,
        grads: &mut Params,
    ) -> Array2<f64> {
        let p = &self.params;
        let last = p.psm_gcn.len() - 1;
        let dz = dout.t().to_owned();
        let mut d_nodes = dz.clone();
        let mut dh = dz;
        for i in (0..=last).rev() {
            let g = &p.psm_gcn[i];
            let tr = &trace.layers[i];
            let dpre = tanh_backward(&tr.act, &dh);
            let din = g.backward(tr.input.view(), tr.support.view(), dpre.view(), &mut grads.psm_gcn[i]);
            dh = if i == 0 || i == last { din } else { din + &dh };
            if i == 0 {
                d_nodes += &dh;
            }
        }
        let d_refined = d_nodes.t().to_owned();
        p.psm_conv.backward(
            trace.input.view(),
            d_refined.view(),
            self.config.psm_stride,
            &mut grads.psm_conv,
        )
    }

    /// Refine-module features `[P, T', 3J]` from displacements `[P, T-1, 3J]` in mm.
    pub fn psm_forward(&self, disp: ArrayView3<'_, f64>) -> Result<Array3<f64>> {
        let (persons, frames, dims) = disp.dim();
        if frames != self.config.disp_frames() || dims != self.config.coord_dim() {
            return Err(Error::dim(format!(
                "refine module expects [P, {}, {}], got {:?}",
                self.config.disp_frames(),
                self.config.coord_dim(),
                disp.shape()
            )));
        }
        let refined = self.config.refined_frames();
        let mut out = Array3::zeros((persons, refined, dims));
        for p in 0..persons {
            let x = disp.index_axis(Axis(0), p).mapv(|v| v / self.config.unit_mm);
            let (z, _) = self.psm_person(x);
            out.index_axis_mut(Axis(0), p).assign(&z);
        }
        Ok(out)
    }

    // ---- encoder ------------------------------------------------------

    fn encoder_layers(
        &self,
        mut z: Vec<Array2<f64>>,
        a: &Array2<f64>,
    ) -> (Vec<Array2<f64>>, Vec<EncoderTrace>) {
        let slope = self.config.leaky_slope;
        let pad = self.config.encoder_kernel - 1;
        let mut traces = Vec::with_capacity(self.params.encoder.len());
        for layer in &self.params.encoder {
            let u: Vec<Array2<f64>> = z.iter().map(|zp| layer.social.forward(zp.view())).collect();
            let mixed = mix_persons(a, &u);
            let social: Vec<Array2<f64>> = mixed.iter().map(|v| leaky(v, slope)).collect();
            let padded: Vec<Array2<f64>> = social.iter().map(|g| pad_front(g.view(), pad)).collect();
            let temporal: Vec<Array2<f64>> = padded
                .iter()
                .map(|x| layer.temporal.forward(x.view(), 1))
                .collect();
            let next: Vec<Array2<f64>> = temporal
                .iter()
                .zip(&social)
                .map(|(c, g)| leaky(c, slope) + g)
                .collect();
            traces.push(EncoderTrace {
                inputs: std::mem::replace(&mut z, next),
                mixed,
                padded,
                temporal,
            });
        }
        (z, traces)
    }

    fn encoder_backward(
        &self,
        traces: &[EncoderTrace],
        a: &Array2<f64>,
        mut dz: Vec<Array2<f64>>,
        grads: &mut Params,
    ) -> Vec<Array2<f64>> {
        let slope = self.config.leaky_slope;
        let pad = self.config.encoder_kernel - 1;
        for (l, tr) in traces.iter().enumerate().rev() {
            let layer = &self.params.encoder[l];
            let grad = &mut grads.encoder[l];
            let mut dv = Vec::with_capacity(dz.len());
            for p in 0..dz.len() {
                let dc = leaky_backward(&tr.temporal[p], &dz[p], slope);
                let dpadded = layer
                    .temporal
                    .backward(tr.padded[p].view(), dc.view(), 1, &mut grad.temporal);
                let dg = &dz[p] + &dpadded.slice(s![pad.., ..]);
                dv.push(leaky_backward(&tr.mixed[p], &dg, slope));
            }
            let du = mix_persons_backward(a, &dv);
            dz = du
                .iter()
                .enumerate()
                .map(|(p, d)| layer.social.backward(tr.inputs[p].view(), d.view(), &mut grad.social))
                .collect();
        }
        dz
    }

    /// Encoder embedding `[T', P, H]` from features `[T', P, 3J]`.
    pub fn encoder_forward(
        &self,
        features: ArrayView3<'_, f64>,
        adjacency: &SpatialAdjacency,
    ) -> Result<Array3<f64>> {
        let (frames, persons, dims) = features.dim();
        if adjacency.persons() != persons {
            return Err(Error::dim(format!(
                "adjacency is {0}x{0} but features hold {persons} persons",
                adjacency.persons()
            )));
        }
        if dims != self.config.coord_dim() || frames != self.config.refined_frames() {
            return Err(Error::dim(format!(
                "encoder expects [{}, P, {}], got {:?}",
                self.config.refined_frames(),
                self.config.coord_dim(),
                features.shape()
            )));
        }
        let z: Vec<Array2<f64>> = (0..persons)
            .map(|p| features.index_axis(Axis(1), p).to_owned())
            .collect();
        let (out, _) = self.encoder_layers(z, &adjacency.matrix);
        let h = self.config.encoder_hidden;
        let mut emb = Array3::zeros((frames, persons, h));
        for (p, e) in out.iter().enumerate() {
            emb.index_axis_mut(Axis(1), p).assign(e);
        }
        Ok(emb)
    }

    // ---- decoder ------------------------------------------------------

    fn decoder_person(&self, embedding: ArrayView2<'_, f64>) -> (Array2<f64>, DecoderTrace) {
        let slope = self.config.leaky_slope;
        let pad = (self.config.decoder_kernel - 1) / 2;
        let last = self.params.decoder.len() - 1;
        let mut x = embedding.t().to_owned();
        let mut layers = Vec::with_capacity(last + 1);
        for (l, conv) in self.params.decoder.iter().enumerate() {
            let padded = pad_both(x.view(), pad, pad);
            let pre = conv.forward(padded.view(), 1);
            let act = if l == last { pre.clone() } else { leaky(&pre, slope) };
            x = if l == 0 { act } else { act + &x };
            layers.push(DecoderLayerTrace { padded, pre });
        }
        let slots = x.t().to_owned();
        let coeffs = self.params.head.forward(slots.view());
        (coeffs, DecoderTrace { layers, slots })
    }

    fn decoder_person_backward(
        &self,
        trace: &DecoderTrace,
        dcoeffs: ArrayView2<'_, f64>,
        grads: &mut Params,
    ) -> Array2<f64> {
        let slope = self.config.leaky_slope;
        let pad = (self.config.decoder_kernel - 1) / 2;
        let last = self.params.decoder.len() - 1;
        let dslots = self
            .params
            .head
            .backward(trace.slots.view(), dcoeffs, &mut grads.head);
        let mut dx = dslots.t().to_owned();
        for l in (0..=last).rev() {
            let tr = &trace.layers[l];
            let dpre = if l == last {
                dx.clone()
            } else {
                leaky_backward(&tr.pre, &dx, slope)
            };
            let dpadded = self.params.decoder[l].backward(
                tr.padded.view(),
                dpre.view(),
                1,
                &mut grads.decoder[l],
            );
            let rows = tr.padded.nrows() - 2 * pad;
            let din = dpadded.slice(s![pad..pad + rows, ..]).to_owned();
            dx = if l == 0 { din } else { din + &dx };
        }
        dx.t().to_owned()
    }

    /// DCT coefficients `[P, N, 3J]` from an embedding `[T', P, H]`.
    pub fn decoder_forward(&self, embedding: ArrayView3<'_, f64>) -> Result<Array3<f64>> {
        let (frames, persons, h) = embedding.dim();
        if frames != self.config.refined_frames() || h != self.config.encoder_hidden {
            return Err(Error::dim(format!(
                "decoder expects [{}, P, {}], got {:?}",
                self.config.refined_frames(),
                self.config.encoder_hidden,
                embedding.shape()
            )));
        }
        let mut out = Array3::zeros((persons, self.config.out_frames, self.config.coord_dim()));
        for p in 0..persons {
            let (c, _) = self.decoder_person(embedding.index_axis(Axis(1), p));
            out.index_axis_mut(Axis(0), p).assign(&c);
        }
        Ok(out)
    }

    // ---- full pipeline ------------------------------------------------

    /// Forward pass keeping the intermediate activations for [`Self::backward`].
    pub fn forward_trace(&self, observed: ArrayView4<'_, f64>) -> Result<(Prediction, ForwardTrace)> {
        self.check_observed(&observed)?;
        let cfg = &self.config;
        let (persons, _, joints, _) = observed.dim();
        let d = cfg.coord_dim();
        let disp = to_displacements(observed)?;
        let adjacency = self.adjacency_for(observed)?.matrix;

        let mut psm = Vec::with_capacity(persons);
        let mut features = Vec::with_capacity(persons);
        for p in 0..persons {
            let x = disp
                .data
                .index_axis(Axis(0), p)
                .to_shape((cfg.disp_frames(), d))
                .expect("contiguous displacement block")
                .mapv(|v| v / cfg.unit_mm);
            let (z, tr) = self.psm_person(x);
            features.push(z);
            psm.push(tr);
        }
        let (embedding, encoder) = self.encoder_layers(features, &adjacency);

        let n = cfg.out_frames;
        let mut pred_disp = Array4::zeros((persons, n, joints, 3));
        let mut decoder = Vec::with_capacity(persons);
        for (p, e) in embedding.iter().enumerate() {
            let (coeffs, tr) = self.decoder_person(e.view());
            let frames = self.dct.inverse_columns(coeffs.view())? * cfg.unit_mm;
            let frames = frames
                .into_shape_with_order((n, joints, 3))
                .expect("coefficient block is [N, 3J]");
            pred_disp.index_axis_mut(Axis(0), p).assign(&frames);
            decoder.push(tr);
        }
        let poses = reconstruct(disp.anchor.view(), pred_disp.view())?;
        Ok((
            Prediction {
                disp: pred_disp,
                poses,
            },
            ForwardTrace {
                psm,
                adjacency,
                encoder,
                decoder,
            },
        ))
    }

    /// Parameter gradients given `dL/d disp` for the predicted displacements
    /// `[P, N, J, 3]` (mm).
    pub fn backward(&self, trace: &ForwardTrace, d_disp: ArrayView4<'_, f64>) -> Result<Params> {
        let cfg = &self.config;
        let (persons, n, joints, _) = d_disp.dim();
        if persons != trace.decoder.len() || n != cfg.out_frames || joints != cfg.joints {
            return Err(Error::dim("gradient shape does not match forward pass"));
        }
        let d = cfg.coord_dim();
        let mut grads = self.params.zeros_like();
        let mut d_emb = Vec::with_capacity(persons);
        for p in 0..persons {
            let dd = d_disp
                .index_axis(Axis(0), p)
                .to_shape((n, d))
                .expect("contiguous gradient block")
                .mapv(|v| v * cfg.unit_mm);
            // frames = inverse * coeffs, so dcoeffs = inverse^T dframes = forward * dframes
            let dcoeffs = self.dct.forward_columns(dd.view())?;
            d_emb.push(self.decoder_person_backward(&trace.decoder[p], dcoeffs.view(), &mut grads));
        }
        let d_features = self.encoder_backward(&trace.encoder, &trace.adjacency, d_emb, &mut grads);
        for (p, dz) in d_features.iter().enumerate() {
            self.psm_person_backward(&trace.psm[p], dz.view(), &mut grads);
        }
        Ok(grads)
    }

    /// Forecast `out_frames` poses from `[P, in_frames, J, 3]` observed poses.
    pub fn predict(&self, observed: ArrayView4<'_, f64>) -> Result<Array4<f64>> {
        Ok(self.forward_trace(observed)?.0.poses)
    }

    /// Feed the latest `in_frames` frames back as input `steps` times.
    pub fn predict_autoregressive(
        &self,
        observed: ArrayView4<'_, f64>,
        steps: usize,
    ) -> Result<Array4<f64>> {
        if steps == 0 {
            return Err(Error::Config("autoregressive steps must be at least 1".into()));
        }
        self.check_observed(&observed)?;
        let t_in = self.config.in_frames;
        let n = self.config.out_frames;
        let (persons, _, joints, _) = observed.dim();
        let mut history = observed.to_owned();
        let mut out = Array4::zeros((persons, steps * n, joints, 3));
        for k in 0..steps {
            let pred = self.predict(history.view())?;
            out.slice_mut(s![.., k * n..(k + 1) * n, .., ..]).assign(&pred);
            let joined = ndarray::concatenate(Axis(1), &[history.view(), pred.view()])
                .expect("matching person/joint axes");
            let len = joined.shape()[1];
            history = joined.slice(s![.., len - t_in.., .., ..]).to_owned();
        }
        Ok(out)
    }
}
