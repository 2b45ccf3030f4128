//! Convolutional support estimator networks.
//!
//! A model maps a proxy plane x̃ (reshaped B·y) to a per-pixel probability
//! map p ∈ [0,1]^{H×W}; thresholding p yields the estimated support. Two
//! stock architectures are provided: [`csen1_init`] (three convolutions)
//! and [`csen2_init`] (adds a down/upsampling pair around the middle
//! convolution).

mod ckpt;
mod head;
mod layers;
mod tensor;
mod train;

pub use ckpt::write_loss_curve;
pub use head::classify_head;
pub use train::{
    threshold_grid, train, train_classifier, tune_threshold, tune_threshold_maps, ClassSample,
    EpochStats, LossKind, TrainConfig, TrainSample,
};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::rng;
use layers::*;
use rand_distr::{Distribution, Normal};
use tensor::Tensor;

/// What a layer does.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// Zero-padded 3×3 convolution preserving spatial dims.
    Conv3x3,
    /// 2×2 max pooling, halving each spatial dim.
    DownSample2x,
    /// Nearest-neighbor duplication, doubling each spatial dim.
    UpSample2x,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    ReLU,
    Linear,
}

/// One layer of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub activation: Activation,
}

impl LayerSpec {
    fn conv(in_channels: usize, out_channels: usize, activation: Activation) -> Self {
        LayerSpec {
            kind: LayerKind::Conv3x3,
            in_channels,
            out_channels,
            activation,
        }
    }

    fn resample(kind: LayerKind, channels: usize) -> Self {
        LayerSpec {
            kind,
            in_channels: channels,
            out_channels: channels,
            activation: Activation::Linear,
        }
    }
}

/// Weights and biases of one convolution, kernels laid out
/// [out][in][ky][kx].
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ConvParams {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// A support estimator network: the layer table, the trainable tensors,
/// the proxy grid it operates on, and (while training) Adam state.
#[derive(Debug, Clone)]
pub struct CsenModel {
    layers: Vec<LayerSpec>,
    params: Vec<Option<ConvParams>>,
    grid: (usize, usize),
    pub(crate) adam: Option<train::AdamState>,
}

/// Gradients of the MSE loss w.r.t. every weight and bias, mirroring the
/// model's parameter layout.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub(crate) blocks: Vec<Option<ConvParams>>,
}

/// CSEN1: three zero-padded convolutions, 48 and 24 hidden channels.
pub fn csen1_init(grid: (usize, usize), seed: u64) -> Result<CsenModel> {
    let (h, w) = grid;
    if h < 3 || w < 3 {
        return Err(Error::invalid(format!(
            "csen1 needs a grid of at least 3x3, got {h}x{w}"
        )));
    }
    let layers = vec![
        LayerSpec::conv(1, 48, Activation::ReLU),
        LayerSpec::conv(48, 24, Activation::ReLU),
        LayerSpec::conv(24, 1, Activation::ReLU),
    ];
    Ok(CsenModel::init(layers, grid, seed))
}

/// CSEN2: CSEN1 with a max-pool/upsample pair and one extra convolution,
/// trading parameters for a wider receptive field.
pub fn csen2_init(grid: (usize, usize), seed: u64) -> Result<CsenModel> {
    let (h, w) = grid;
    if h < 3 || w < 3 {
        return Err(Error::invalid(format!(
            "csen2 needs a grid of at least 3x3, got {h}x{w}"
        )));
    }
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::invalid(format!(
            "csen2 needs even grid dims, got {h}x{w}"
        )));
    }
    let layers = vec![
        LayerSpec::conv(1, 48, Activation::ReLU),
        LayerSpec::resample(LayerKind::DownSample2x, 48),
        LayerSpec::conv(48, 24, Activation::ReLU),
        LayerSpec::resample(LayerKind::UpSample2x, 24),
        LayerSpec::conv(24, 24, Activation::ReLU),
        LayerSpec::conv(24, 1, Activation::ReLU),
    ];
    Ok(CsenModel::init(layers, grid, seed))
}

impl CsenModel {
    /// He-style init: kernels N(0, 2/fan_in), biases zero.
    fn init(layers: Vec<LayerSpec>, grid: (usize, usize), seed: u64) -> CsenModel {
        let mut rng = rng::seeded(seed);
        let params = layers
            .iter()
            .map(|spec| match spec.kind {
                LayerKind::Conv3x3 => {
                    let fan_in = 9 * spec.in_channels;
                    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("std");
                    let w = (0..9 * spec.in_channels * spec.out_channels)
                        .map(|_| normal.sample(&mut rng))
                        .collect();
                    Some(ConvParams {
                        w,
                        b: vec![0.0; spec.out_channels],
                    })
                }
                _ => None,
            })
            .collect();
        let model = CsenModel {
            layers,
            params,
            grid,
            adam: None,
        };
        debug_assert!(model.validate().is_ok());
        model
    }

    pub(crate) fn from_parts(
        layers: Vec<LayerSpec>,
        params: Vec<Option<ConvParams>>,
        grid: (usize, usize),
    ) -> Result<CsenModel> {
        let model = CsenModel {
            layers,
            params,
            grid,
            adam: None,
        };
        model.validate()?;
        Ok(model)
    }

    /// Channel chain consistency, spatial round trip and single-channel
    /// output.
    pub fn validate(&self) -> Result<()> {
        let mut ch = 1usize;
        let (mut h, mut w) = self.grid;
        for (i, spec) in self.layers.iter().enumerate() {
            if spec.in_channels != ch {
                return Err(Error::invalid(format!(
                    "layer {i} expects {} input channels, chain carries {ch}",
                    spec.in_channels
                )));
            }
            match spec.kind {
                LayerKind::Conv3x3 => {
                    let p = self.params[i].as_ref().ok_or_else(|| {
                        Error::invalid(format!("conv layer {i} has no parameters"))
                    })?;
                    if p.w.len() != 9 * spec.in_channels * spec.out_channels
                        || p.b.len() != spec.out_channels
                    {
                        return Err(Error::invalid(format!("layer {i} parameter shape")));
                    }
                }
                LayerKind::DownSample2x => {
                    if h % 2 != 0 || w % 2 != 0 {
                        return Err(Error::invalid(format!(
                            "layer {i} downsamples odd dims {h}x{w}"
                        )));
                    }
                    h /= 2;
                    w /= 2;
                }
                LayerKind::UpSample2x => {
                    h *= 2;
                    w *= 2;
                }
            }
            ch = spec.out_channels;
        }
        if ch != 1 {
            return Err(Error::invalid("network must end with one channel"));
        }
        if (h, w) != self.grid {
            return Err(Error::invalid(format!(
                "spatial chain returns {h}x{w}, expected {}x{}",
                self.grid.0, self.grid.1
            )));
        }
        Ok(())
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    /// Total trainable scalars (weights + biases).
    pub fn parameter_count(&self) -> usize {
        self.params
            .iter()
            .flatten()
            .map(|p| p.w.len() + p.b.len())
            .sum()
    }

    /// Flat parameter access in layer order, weights before biases; used
    /// by the finite-difference checks.
    pub fn param(&self, mut idx: usize) -> f64 {
        for p in self.params.iter().flatten() {
            if idx < p.w.len() {
                return p.w[idx];
            }
            idx -= p.w.len();
            if idx < p.b.len() {
                return p.b[idx];
            }
            idx -= p.b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut idx: usize, v: f64) {
        for p in self.params.iter_mut().flatten() {
            if idx < p.w.len() {
                p.w[idx] = v;
                return;
            }
            idx -= p.w.len();
            if idx < p.b.len() {
                p.b[idx] = v;
                return;
            }
            idx -= p.b.len();
        }
        panic!("parameter index out of range");
    }

    fn trace(&self, proxy: &Matrix) -> Result<Trace> {
        if (proxy.rows(), proxy.cols()) != self.grid {
            return Err(Error::invalid(format!(
                "proxy is {}x{}, model grid is {}x{}",
                proxy.rows(),
                proxy.cols(),
                self.grid.0,
                self.grid.1
            )));
        }
        let input = Tensor::from_plane(proxy.data(), self.grid.0, self.grid.1);
        let n_layers = self.layers.len();
        let mut pre: Vec<Option<Tensor>> = Vec::with_capacity(n_layers);
        let mut post: Vec<Tensor> = Vec::with_capacity(n_layers);
        let mut argmax: Vec<Option<Vec<usize>>> = Vec::with_capacity(n_layers);
        let mut cur = input;
        for (i, spec) in self.layers.iter().enumerate() {
            let last = i == n_layers - 1;
            match spec.kind {
                LayerKind::Conv3x3 => {
                    let p = self.params[i].as_ref().expect("validated conv");
                    let z = conv3x3_forward(&cur, &p.w, &p.b, spec.out_channels);
                    let mut a = z.clone();
                    match spec.activation {
                        Activation::ReLU => a.data.iter_mut().for_each(|v| *v = v.max(0.0)),
                        Activation::Linear => {}
                    }
                    if last {
                        // Probability clamp; differentiated as pass-through
                        // strictly inside (0,1).
                        a.data.iter_mut().for_each(|v| *v = v.min(1.0).max(0.0));
                    }
                    pre.push(Some(z));
                    argmax.push(None);
                    post.push(a.clone());
                    cur = a;
                }
                LayerKind::DownSample2x => {
                    let (a, am) = maxpool2_forward(&cur);
                    pre.push(None);
                    argmax.push(Some(am));
                    post.push(a.clone());
                    cur = a;
                }
                LayerKind::UpSample2x => {
                    let a = upsample2_forward(&cur);
                    pre.push(None);
                    argmax.push(None);
                    post.push(a.clone());
                    cur = a;
                }
            }
        }
        Ok(Trace {
            input: Tensor::from_plane(proxy.data(), self.grid.0, self.grid.1),
            pre,
            post,
            argmax,
        })
    }

    /// Probability map p ∈ [0,1]^{H×W} for one proxy plane.
    pub fn forward(&self, proxy: &Matrix) -> Result<Matrix> {
        let trace = self.trace(proxy)?;
        trace.output(self.grid)
    }

    /// Exact gradients of [`loss_mse`] w.r.t. every weight and bias.
    pub fn backward_gradients(&self, proxy: &Matrix, mask: &Matrix) -> Result<Gradients> {
        let trace = self.trace(proxy)?;
        let p = trace.output(self.grid)?;
        if (mask.rows(), mask.cols()) != self.grid {
            return Err(Error::invalid("mask shape does not match grid"));
        }
        // dL/dp for E = Σ (p − v)².
        let dp: Vec<f64> = p
            .data()
            .iter()
            .zip(mask.data())
            .map(|(pi, vi)| 2.0 * (pi - vi))
            .collect();
        Ok(self.backward_from_dp(&trace, dp))
    }

    /// Backpropagate an arbitrary dL/dp through the traced network.
    pub(crate) fn backward_from_dp(&self, trace: &Trace, dp: Vec<f64>) -> Gradients {
        let n_layers = self.layers.len();
        let mut blocks: Vec<Option<ConvParams>> = self
            .layers
            .iter()
            .map(|spec| match spec.kind {
                LayerKind::Conv3x3 => Some(ConvParams {
                    w: vec![0.0; 9 * spec.in_channels * spec.out_channels],
                    b: vec![0.0; spec.out_channels],
                }),
                _ => None,
            })
            .collect();

        let last_post = &trace.post[n_layers - 1];
        let mut dact = Tensor {
            ch: last_post.ch,
            h: last_post.h,
            w: last_post.w,
            data: dp,
        };
        for i in (0..n_layers).rev() {
            let spec = self.layers[i];
            let layer_input = if i == 0 { &trace.input } else { &trace.post[i - 1] };
            match spec.kind {
                LayerKind::Conv3x3 => {
                    let z = trace.pre[i].as_ref().expect("conv pre-activation");
                    let last = i == n_layers - 1;
                    // Activation derivative, including the terminal clamp.
                    let mut dz = dact;
                    for (g, &zv) in dz.data.iter_mut().zip(&z.data) {
                        let open = if last {
                            zv > 0.0 && zv < 1.0
                        } else {
                            match spec.activation {
                                Activation::ReLU => zv > 0.0,
                                Activation::Linear => true,
                            }
                        };
                        if !open {
                            *g = 0.0;
                        }
                    }
                    let p = self.params[i].as_ref().expect("validated conv");
                    let block = blocks[i].as_mut().expect("conv block");
                    dact = conv3x3_backward(layer_input, &dz, &p.w, &mut block.w, &mut block.b);
                }
                LayerKind::DownSample2x => {
                    let am = trace.argmax[i].as_ref().expect("pool argmax");
                    dact = maxpool2_backward(&dact, am, layer_input.h, layer_input.w);
                }
                LayerKind::UpSample2x => {
                    dact = upsample2_backward(&dact);
                }
            }
        }
        Gradients { blocks }
    }
}

pub(crate) struct Trace {
    input: Tensor,
    pre: Vec<Option<Tensor>>,
    post: Vec<Tensor>,
    argmax: Vec<Option<Vec<usize>>>,
}

impl Trace {
    fn output(&self, grid: (usize, usize)) -> Result<Matrix> {
        let last = self.post.last().expect("nonempty network");
        debug_assert_eq!(last.ch, 1);
        Matrix::new(grid.0, grid.1, last.plane(0).to_vec())
    }
}

impl Gradients {
    pub fn parameter_count(&self) -> usize {
        self.blocks
            .iter()
            .flatten()
            .map(|p| p.w.len() + p.b.len())
            .sum()
    }

    /// Flat access mirroring [`CsenModel::param`].
    pub fn param(&self, mut idx: usize) -> f64 {
        for p in self.blocks.iter().flatten() {
            if idx < p.w.len() {
                return p.w[idx];
            }
            idx -= p.w.len();
            if idx < p.b.len() {
                return p.b[idx];
            }
            idx -= p.b.len();
        }
        panic!("gradient index out of range");
    }

    /// Gradient of the bias of the last convolution, for hand-derived
    /// cross-checks.
    pub fn last_bias(&self) -> &[f64] {
        self.blocks
            .iter()
            .flatten()
            .last()
            .map(|p| p.b.as_slice())
            .expect("at least one conv layer")
    }
}

/// Sum of squared differences between a probability map and a binary mask
/// over all pixels.
pub fn loss_mse(p: &Matrix, mask: &Matrix) -> f64 {
    assert_eq!(
        (p.rows(), p.cols()),
        (mask.rows(), mask.cols()),
        "loss shapes differ"
    );
    p.data()
        .iter()
        .zip(mask.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Support estimate: indices of the flattened row-major grid with
/// pᵢ > τ.
pub fn threshold_support(p: &Matrix, tau: f64) -> Vec<usize> {
    p.data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > tau)
        .map(|(i, _)| i)
        .collect()
}
