//! Batched forward pass, loss and hand-written backpropagation.
//!
//! Per layer with dilation `d`, the pre-activation is
//! `Z = [h(t-d) | h(t) | c(t)] · W + b`, split into filter and gate halves:
//! `a = tanh(Z_f) ⊙ σ(Z_g)`. The activation feeds a skip projection and,
//! except on the last layer, a residual projection added back onto `h`.
//! The summed skips go through `relu → 1×1 → relu → 1×1` to 256 logits.
//!
//! The network input at position `t` is the companded sample at `t - 1`
//! (zero at `t = 0`), so logits at `t` never see the sample they predict.

use std::ops::Range;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::params::{ModelParams, Real};
use crate::error::{Error, Result};

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<A> {
    /// Shifted network input.
    pub input: Array1<A>,
    pub cond: Array2<A>,
    /// Residual-stream input of every layer.
    pub layer_in: Vec<Array2<A>>,
    pub filt: Vec<Array2<A>>,
    pub gate: Vec<Array2<A>>,
    pub act: Vec<Array2<A>>,
    pub skip: Array2<A>,
    pub hidden: Array2<A>,
    pub logits: Array2<A>,
}

impl<A> ForwardCache<A> {
    pub fn len(&self) -> usize {
        self.input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }
}

fn relu<A: Real>(x: &Array2<A>) -> Array2<A> {
    x.mapv(|v| if v > A::zero() { v } else { A::zero() })
}

fn sigmoid<A: Real>(x: A) -> A {
    A::one() / (A::one() + (-x).exp())
}

fn add_row<A: Real>(m: &mut Array2<A>, bias: &[A]) {
    for mut row in m.rows_mut() {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

fn accumulate_col_sums<A: Real>(dst: &mut [A], m: &Array2<A>) {
    for row in m.rows() {
        for (d, &v) in dst.iter_mut().zip(row.iter()) {
            *d += v;
        }
    }
}

/// Rows `[h(t-d) | h(t) | c(t)]` with zeros where `t - d < 0`.
fn layer_input_matrix<A: Real>(h: &Array2<A>, cond: &Array2<A>, d: usize) -> Array2<A> {
    let (t, r) = h.dim();
    let dc = cond.ncols();
    let mut x = Array2::<A>::zeros((t, 2 * r + dc));
    if d < t {
        x.slice_mut(s![d.., 0..r]).assign(&h.slice(s![..t - d, ..]));
    }
    x.slice_mut(s![.., r..2 * r]).assign(h);
    x.slice_mut(s![.., 2 * r..]).assign(cond);
    x
}

/// Runs the network over a whole sequence.
///
/// `inputs[t]` is the companded sample at position `t`; the one-sample shift
/// is applied here.
pub fn forward<A: Real>(
    params: &ModelParams<A>,
    inputs: &[A],
    cond: ArrayView2<'_, A>,
) -> Result<ForwardCache<A>> {
    let cfg = *params.config();
    let n = inputs.len();
    if n == 0 {
        return Err(Error::Shape("empty input sequence".into()));
    }
    if cond.dim() != (n, cfg.condition_dim) {
        return Err(Error::Shape(format!(
            "condition rows {:?}, expected ({n}, {})",
            cond.dim(),
            cfg.condition_dim
        )));
    }
    let lay = &params.layout;
    let r = cfg.residual_channels;
    let mut input = Array1::<A>::zeros(n);
    input.slice_mut(s![1..]).assign(&ArrayView1::from(&inputs[..n - 1]));
    let cond = cond.to_owned();

    let w_in = params.slice(lay.input_w);
    let b_in = params.slice(lay.input_b);
    let mut h = Array2::<A>::zeros((n, r));
    for (t, mut row) in h.rows_mut().into_iter().enumerate() {
        let x = input[t];
        for c in 0..r {
            row[c] = x * w_in[c] + b_in[c];
        }
    }

    let n_layers = lay.layers.len();
    let mut layer_in = Vec::with_capacity(n_layers);
    let mut filt = Vec::with_capacity(n_layers);
    let mut gate = Vec::with_capacity(n_layers);
    let mut act = Vec::with_capacity(n_layers);
    let mut skip = Array2::<A>::zeros((n, cfg.skip_channels));
    for (l, slots) in lay.layers.iter().enumerate() {
        let x = layer_input_matrix(&h, &cond, slots.dilation);
        let mut z = Array2::<A>::zeros((n, 2 * r));
        general_mat_mul(A::one(), &x, &params.layer_input_block(l), A::zero(), &mut z);
        add_row(&mut z, params.slice(slots.gate_bias));
        let f = z.slice(s![.., ..r]).mapv(|v| v.tanh());
        let g = z.slice(s![.., r..]).mapv(sigmoid);
        let a = &f * &g;
        general_mat_mul(A::one(), &a, &params.mat(slots.skip_w), A::one(), &mut skip);
        add_row(&mut skip, params.slice(slots.skip_b));
        let next = slots.res.map(|(rw, rb)| {
            let mut next = h.clone();
            general_mat_mul(A::one(), &a, &params.mat(rw), A::one(), &mut next);
            add_row(&mut next, params.slice(rb));
            next
        });
        layer_in.push(h);
        filt.push(f);
        gate.push(g);
        act.push(a);
        h = match next {
            Some(next) => next,
            None => Array2::zeros((0, r)),
        };
    }

    let mut hidden = Array2::<A>::zeros((n, cfg.skip_channels));
    general_mat_mul(A::one(), &relu(&skip), &params.mat(lay.out1_w), A::zero(), &mut hidden);
    add_row(&mut hidden, params.slice(lay.out1_b));
    let mut logits = Array2::<A>::zeros((n, cfg.quant_levels));
    general_mat_mul(A::one(), &relu(&hidden), &params.mat(lay.out2_w), A::zero(), &mut logits);
    add_row(&mut logits, params.slice(lay.out2_b));

    Ok(ForwardCache {
        input,
        cond,
        layer_in,
        filt,
        gate,
        act,
        skip,
        hidden,
        logits,
    })
}

fn check_range(range: &Range<usize>, n: usize) -> Result<()> {
    if range.start >= range.end {
        return Err(Error::EmptyRange);
    }
    if range.end > n {
        return Err(Error::Shape(format!("valid range {range:?} beyond {n} positions")));
    }
    Ok(())
}

fn log_softmax_at<A: Real>(row: ArrayView1<'_, A>, target: usize) -> f64 {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v.f64()));
    let sum: f64 = row.iter().map(|&v| (v.f64() - max).exp()).sum();
    row[target].f64() - max - sum.ln()
}

/// Softmax of one logit row, computed in double precision.
pub fn softmax_row<A: Real>(row: ArrayView1<'_, A>) -> Vec<f64> {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v.f64()));
    let mut p: Vec<f64> = row.iter().map(|&v| (v.f64() - max).exp()).collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= sum);
    p
}

/// Mean negative log-likelihood (nats per sample) over `valid`.
pub fn nll<A: Real>(logits: ArrayView2<'_, A>, targets: &[u8], valid: Range<usize>) -> Result<f64> {
    check_range(&valid, logits.nrows())?;
    if targets.len() != logits.nrows() {
        return Err(Error::LengthMismatch {
            what: "targets",
            expected: logits.nrows(),
            actual: targets.len(),
        });
    }
    let count = valid.len() as f64;
    let total: f64 = valid
        .map(|t| -log_softmax_at(logits.row(t), targets[t] as usize))
        .sum();
    Ok(total / count)
}

/// Mean NLL and its gradient with respect to the logits.
pub fn nll_with_grad<A: Real>(
    logits: ArrayView2<'_, A>,
    targets: &[u8],
    valid: Range<usize>,
) -> Result<(f64, Array2<A>)> {
    let loss = nll(logits, targets, valid.clone())?;
    let count = valid.len() as f64;
    let mut grad = Array2::<A>::zeros(logits.dim());
    for t in valid {
        let p = softmax_row(logits.row(t));
        let mut row = grad.row_mut(t);
        for (q, &pq) in p.iter().enumerate() {
            let onehot = if q == targets[t] as usize { 1.0 } else { 0.0 };
            row[q] = A::of((pq - onehot) / count);
        }
    }
    Ok((loss, grad))
}

/// Gradients of a scalar loss with respect to every parameter, given the
/// loss gradient with respect to the logits.
pub fn backward<A: Real>(
    params: &ModelParams<A>,
    cache: &ForwardCache<A>,
    dlogits: ArrayView2<'_, A>,
) -> Result<ModelParams<A>> {
    let cfg = *params.config();
    let lay = &params.layout;
    let n = cache.len();
    if cache.layer_in.len() != lay.layers.len() || cache.logits.dim() != (n, cfg.quant_levels) {
        return Err(Error::Shape("forward cache does not match the model".into()));
    }
    if dlogits.dim() != cache.logits.dim() {
        return Err(Error::Shape(format!(
            "logit gradient {:?}, expected {:?}",
            dlogits.dim(),
            cache.logits.dim()
        )));
    }
    let r = cfg.residual_channels;
    let mut grads = params.zeros_like();
    let one = A::one();

    let y2 = relu(&cache.hidden);
    general_mat_mul(one, &y2.t(), &dlogits, one, &mut grads.mat_mut(lay.out2_w));
    accumulate_col_sums(&mut grads.data[lay.tensors[lay.out2_b].range()], &dlogits.to_owned());
    let mut dz1 = dlogits.dot(&params.mat(lay.out2_w).t());
    Zip::from(&mut dz1).and(&cache.hidden).for_each(|d, &z| {
        if z <= A::zero() {
            *d = A::zero();
        }
    });
    let y1 = relu(&cache.skip);
    general_mat_mul(one, &y1.t(), &dz1, one, &mut grads.mat_mut(lay.out1_w));
    accumulate_col_sums(&mut grads.data[lay.tensors[lay.out1_b].range()], &dz1);
    let mut dskip = dz1.dot(&params.mat(lay.out1_w).t());
    Zip::from(&mut dskip).and(&cache.skip).for_each(|d, &z| {
        if z <= A::zero() {
            *d = A::zero();
        }
    });

    let mut dh = Array2::<A>::zeros((n, r));
    for (l, slots) in lay.layers.iter().enumerate().rev() {
        let a = &cache.act[l];
        let f = &cache.filt[l];
        let g = &cache.gate[l];
        general_mat_mul(one, &a.t(), &dskip, one, &mut grads.mat_mut(slots.skip_w));
        accumulate_col_sums(&mut grads.data[lay.tensors[slots.skip_b].range()], &dskip);
        let mut da = dskip.dot(&params.mat(slots.skip_w).t());
        if let Some((rw, rb)) = slots.res {
            general_mat_mul(one, &a.t(), &dh, one, &mut grads.mat_mut(rw));
            accumulate_col_sums(&mut grads.data[lay.tensors[rb].range()], &dh);
            general_mat_mul(one, &dh, &params.mat(rw).t(), one, &mut da);
        } else {
            dh.fill(A::zero());
        }

        let mut dz = Array2::<A>::zeros((n, 2 * r));
        {
            let (mut dzf, mut dzg) = dz.view_mut().split_at(Axis(1), r);
            Zip::from(&mut dzf)
                .and(&da)
                .and(f)
                .and(g)
                .for_each(|o, &d, &fv, &gv| *o = d * gv * (one - fv * fv));
            Zip::from(&mut dzg)
                .and(&da)
                .and(f)
                .and(g)
                .for_each(|o, &d, &fv, &gv| *o = d * fv * gv * (one - gv));
        }
        let x = layer_input_matrix(&cache.layer_in[l], &cache.cond, slots.dilation);
        general_mat_mul(one, &x.t(), &dz, one, &mut grads.layer_input_block_mut(l));
        accumulate_col_sums(&mut grads.data[lay.tensors[slots.gate_bias].range()], &dz);
        let dx = dz.dot(&params.layer_input_block(l).t());
        dh += &dx.slice(s![.., r..2 * r]);
        let d = slots.dilation;
        if d < n {
            let mut target = dh.slice_mut(s![..n - d, ..]);
            target += &dx.slice(s![d.., 0..r]);
        }
    }

    let gw = lay.tensors[lay.input_w].range();
    let gb = lay.tensors[lay.input_b].range();
    for (t, row) in dh.rows().into_iter().enumerate() {
        let x = cache.input[t];
        for c in 0..r {
            grads.data[gw.start + c] += x * row[c];
            grads.data[gb.start + c] += row[c];
        }
    }
    Ok(grads)
}

/// Forward, loss and backward for one teacher-forced sequence.
pub fn loss_and_grad<A: Real>(
    params: &ModelParams<A>,
    inputs: &[A],
    cond: ArrayView2<'_, A>,
    targets: &[u8],
    valid: Range<usize>,
) -> Result<(f64, ModelParams<A>)> {
    let cache = forward(params, inputs, cond)?;
    let (loss, dlogits) = nll_with_grad(cache.logits.view(), targets, valid)?;
    let grads = backward(params, &cache, dlogits.view())?;
    Ok((loss, grads))
}
