//! Flat parameter storage with a named tensor layout.
//!
//! All tensors live in one contiguous buffer so the optimizer, gradient
//! clipping, checkpoints and finite-difference checks can treat the model as
//! a single vector. Each layer's past-tap, current-tap and condition
//! projection matrices are adjacent, so together they form one
//! `(2R + D) × 2R` block that a single matrix product can consume.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use ndarray::{ArrayView1, ArrayView2, ArrayViewMut2, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::NetConfig;
use crate::error::{Error, Result};

/// Floating-point element type of the network.
pub trait Real:
    Float
    + LinalgScalar
    + ScalarOperand
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Debug
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).unwrap()
    }

    fn f64(self) -> f64 {
        self.to_f64().unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
    pub fan_in: usize,
    pub fan_out: usize,
    pub is_bias: bool,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Offsets of one residual layer's tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlots {
    pub dilation: usize,
    pub conv_past: usize,
    pub conv_now: usize,
    pub cond: usize,
    pub gate_bias: usize,
    /// Absent on the last layer, whose residual output is never consumed.
    pub res: Option<(usize, usize)>,
    pub skip_w: usize,
    pub skip_b: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub config: NetConfig,
    pub tensors: Vec<TensorSpec>,
    pub input_w: usize,
    pub input_b: usize,
    pub layers: Vec<LayerSlots>,
    pub out1_w: usize,
    pub out1_b: usize,
    pub out2_w: usize,
    pub out2_b: usize,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(config: &NetConfig) -> Result<Self> {
        config.validate()?;
        let (r, s, d, q) = (
            config.residual_channels,
            config.skip_channels,
            config.condition_dim,
            config.quant_levels,
        );
        let mut tensors = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, rows: usize, cols: usize, fan: (usize, usize), is_bias: bool| {
            let at = tensors.len();
            tensors.push(TensorSpec {
                name,
                rows,
                cols,
                offset,
                fan_in: fan.0,
                fan_out: fan.1,
                is_bias,
            });
            offset += rows * cols;
            at
        };
        let input_w = push("input.w".into(), 1, r, (1, r), false);
        let input_b = push("input.b".into(), 1, r, (1, r), true);
        let dilations = config.dilations();
        let n_layers = dilations.len();
        let mut layers = Vec::with_capacity(n_layers);
        for (l, &dilation) in dilations.iter().enumerate() {
            let conv_fan = (2 * r, 2 * 2 * r);
            let conv_past = push(format!("layer{l}.conv_past"), r, 2 * r, conv_fan, false);
            let conv_now = push(format!("layer{l}.conv_now"), r, 2 * r, conv_fan, false);
            let cond = push(format!("layer{l}.cond"), d, 2 * r, (d, 2 * r), false);
            let gate_bias = push(format!("layer{l}.gate_b"), 1, 2 * r, (1, 2 * r), true);
            let res = (l + 1 < n_layers).then(|| {
                (
                    push(format!("layer{l}.res_w"), r, r, (r, r), false),
                    push(format!("layer{l}.res_b"), 1, r, (1, r), true),
                )
            });
            let skip_w = push(format!("layer{l}.skip_w"), r, s, (r, s), false);
            let skip_b = push(format!("layer{l}.skip_b"), 1, s, (1, s), true);
            layers.push(LayerSlots {
                dilation,
                conv_past,
                conv_now,
                cond,
                gate_bias,
                res,
                skip_w,
                skip_b,
            });
        }
        let out1_w = push("out1.w".into(), s, s, (s, s), false);
        let out1_b = push("out1.b".into(), 1, s, (1, s), true);
        let out2_w = push("out2.w".into(), s, q, (s, q), false);
        let out2_b = push("out2.b".into(), 1, q, (1, q), true);
        Ok(Self {
            config: *config,
            tensors,
            input_w,
            input_b,
            layers,
            out1_w,
            out1_b,
            out2_w,
            out2_b,
            total: offset,
        })
    }

    pub fn spec(&self, index: usize) -> &TensorSpec {
        &self.tensors[index]
    }
}

/// Parameters (or gradients, which share the layout) of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<A> {
    pub layout: ParamLayout,
    pub data: Vec<A>,
}

impl<A: Real> ModelParams<A> {
    pub fn zeros(config: &NetConfig) -> Result<Self> {
        let layout = ParamLayout::new(config)?;
        let data = vec![A::zero(); layout.total];
        Ok(Self { layout, data })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layout: self.layout.clone(),
            data: vec![A::zero(); self.data.len()],
        }
    }

    pub fn from_data(config: &NetConfig, data: Vec<A>) -> Result<Self> {
        let layout = ParamLayout::new(config)?;
        if data.len() != layout.total {
            return Err(Error::Shape(format!(
                "parameter buffer has {} values, layout needs {}",
                data.len(),
                layout.total
            )));
        }
        Ok(Self { layout, data })
    }

    pub fn config(&self) -> &NetConfig {
        &self.layout.config
    }

    pub fn mat(&self, index: usize) -> ArrayView2<'_, A> {
        let t = &self.layout.tensors[index];
        ArrayView2::from_shape((t.rows, t.cols), &self.data[t.range()]).unwrap()
    }

    pub fn mat_mut(&mut self, index: usize) -> ArrayViewMut2<'_, A> {
        let t = self.layout.tensors[index].clone();
        ArrayViewMut2::from_shape((t.rows, t.cols), &mut self.data[t.range()]).unwrap()
    }

    pub fn vector(&self, index: usize) -> ArrayView1<'_, A> {
        let t = &self.layout.tensors[index];
        ArrayView1::from(&self.data[t.range()])
    }

    pub fn slice(&self, index: usize) -> &[A] {
        &self.data[self.layout.tensors[index].range()]
    }

    /// `[conv_past; conv_now; cond]` of layer `l` as one `(2R + D) × 2R` view.
    pub fn layer_input_block(&self, l: usize) -> ArrayView2<'_, A> {
        let slots = &self.layout.layers[l];
        let first = &self.layout.tensors[slots.conv_past];
        let cfg = &self.layout.config;
        let rows = 2 * cfg.residual_channels + cfg.condition_dim;
        let cols = 2 * cfg.residual_channels;
        ArrayView2::from_shape((rows, cols), &self.data[first.offset..first.offset + rows * cols])
            .unwrap()
    }

    pub fn layer_input_block_mut(&mut self, l: usize) -> ArrayViewMut2<'_, A> {
        let slots = self.layout.layers[l];
        let first = self.layout.tensors[slots.conv_past].offset;
        let cfg = self.layout.config;
        let rows = 2 * cfg.residual_channels + cfg.condition_dim;
        let cols = 2 * cfg.residual_channels;
        ArrayViewMut2::from_shape((rows, cols), &mut self.data[first..first + rows * cols]).unwrap()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v.f64() * v.f64()).sum::<f64>().sqrt()
    }

    pub fn cast<B: Real>(&self) -> ModelParams<B> {
        ModelParams {
            layout: self.layout.clone(),
            data: self.data.iter().map(|v| B::of(v.f64())).collect(),
        }
    }
}

/// Xavier-uniform weights (`U(±sqrt(6/(fan_in+fan_out)))`), zero biases.
pub fn init_params<A: Real>(config: &NetConfig, seed: u64) -> Result<ModelParams<A>> {
    let mut params = ModelParams::<A>::zeros(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in params.layout.tensors.clone() {
        if t.is_bias {
            continue;
        }
        let limit = (6.0 / (t.fan_in + t.fan_out) as f64).sqrt();
        for v in &mut params.data[t.range()] {
            *v = A::of(rng.random_range(-limit..limit));
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_contiguous_and_complete() {
        let cfg = NetConfig::desk(19);
        let layout = ParamLayout::new(&cfg).unwrap();
        let mut expect = 0;
        for t in &layout.tensors {
            assert_eq!(t.offset, expect);
            expect += t.len();
        }
        assert_eq!(expect, layout.total);
        assert_eq!(layout.layers.len(), 12);
        assert!(layout.layers.last().unwrap().res.is_none());
        for l in &layout.layers {
            assert_eq!(layout.tensors[l.conv_now].offset, layout.tensors[l.conv_past].range().end);
            assert_eq!(layout.tensors[l.cond].offset, layout.tensors[l.conv_now].range().end);
        }
    }

    #[test]
    fn init_is_deterministic_and_seed_dependent() {
        let cfg = NetConfig::desk(19);
        let a: ModelParams<f32> = init_params(&cfg, 1).unwrap();
        let b: ModelParams<f32> = init_params(&cfg, 1).unwrap();
        let c: ModelParams<f32> = init_params(&cfg, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn xavier_variance() {
        let cfg = NetConfig::desk(19);
        let p: ModelParams<f64> = init_params(&cfg, 3).unwrap();
        for t in p.layout.tensors.iter().filter(|t| !t.is_bias && t.len() >= 4096) {
            let vals = &p.data[t.range()];
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            let target = 2.0 / (t.fan_in + t.fan_out) as f64;
            assert!((var / target - 1.0).abs() < 0.2, "{}: {var} vs {target}", t.name);
        }
        for t in p.layout.tensors.iter().filter(|t| t.is_bias) {
            assert!(p.data[t.range()].iter().all(|&v| v == 0.0));
        }
    }
}
