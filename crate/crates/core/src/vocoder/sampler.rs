//! Autoregressive sampling.
//!
//! Two drivers share one per-position kernel. The naive driver recomputes a
//! receptive-field window of activations for every output sample; the queued
//! driver keeps, per layer, a ring buffer of the last `d` layer inputs. Since
//! both evaluate each position with the same operations in the same order,
//! their outputs agree bitwise.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::net::softmax_row;
use super::params::{ModelParams, Real};
use crate::error::{Error, Result};
use crate::excitation::symbol_to_companded;

fn embed<A: Real>(params: &ModelParams<A>, x: A) -> Vec<A> {
    let lay = &params.layout;
    params
        .slice(lay.input_w)
        .iter()
        .zip(params.slice(lay.input_b))
        .map(|(&w, &b)| x * w + b)
        .collect()
}

/// `out += v · W` for a row-major `W` with `out.len()` columns.
#[inline]
fn accumulate_vm<A: Real>(out: &mut [A], v: &[A], w: &[A]) {
    let cols = out.len();
    for (i, &vi) in v.iter().enumerate() {
        let row = &w[i * cols..(i + 1) * cols];
        for (o, &wij) in out.iter_mut().zip(row) {
            *o += vi * wij;
        }
    }
}

/// One residual layer at one position. Adds the skip contribution into
/// `skip` when given and returns the next layer's input.
fn layer_step<A: Real>(
    params: &ModelParams<A>,
    l: usize,
    past: &[A],
    now: &[A],
    cond: &[A],
    skip: Option<&mut [A]>,
) -> Option<Vec<A>> {
    let lay = &params.layout;
    let slots = &lay.layers[l];
    let r = now.len();
    let mut z = params.slice(slots.gate_bias).to_vec();
    accumulate_vm(&mut z, past, params.slice(slots.conv_past));
    accumulate_vm(&mut z, now, params.slice(slots.conv_now));
    accumulate_vm(&mut z, cond, params.slice(slots.cond));
    let a: Vec<A> = (0..r)
        .map(|c| {
            let g = A::one() / (A::one() + (-z[r + c]).exp());
            z[c].tanh() * g
        })
        .collect();
    if let Some(skip) = skip {
        let mut contrib = params.slice(slots.skip_b).to_vec();
        accumulate_vm(&mut contrib, &a, params.slice(slots.skip_w));
        skip.iter_mut().zip(&contrib).for_each(|(s, &c)| *s += c);
    }
    slots.res.map(|(rw, rb)| {
        let mut delta = params.slice(rb).to_vec();
        accumulate_vm(&mut delta, &a, params.slice(rw));
        now.iter().zip(&delta).map(|(&h, &d)| h + d).collect()
    })
}

fn head<A: Real>(params: &ModelParams<A>, skip: &[A]) -> Vec<A> {
    let lay = &params.layout;
    let relu = |v: &A| if *v > A::zero() { *v } else { A::zero() };
    let y1: Vec<A> = skip.iter().map(relu).collect();
    let mut z1 = params.slice(lay.out1_b).to_vec();
    accumulate_vm(&mut z1, &y1, params.slice(lay.out1_w));
    let y2: Vec<A> = z1.iter().map(relu).collect();
    let mut logits = params.slice(lay.out2_b).to_vec();
    accumulate_vm(&mut logits, &y2, params.slice(lay.out2_w));
    logits
}

fn draw(logits: &[f64], rng: &mut ChaCha8Rng) -> u8 {
    let p = softmax_row(ndarray::ArrayView1::from(logits));
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (s, &ps) in p.iter().enumerate() {
        acc += ps;
        if u < acc {
            return s as u8;
        }
    }
    (p.len() - 1) as u8
}

fn check_cond<A: Real>(params: &ModelParams<A>, cond: &ArrayView2<'_, A>) -> Result<()> {
    let want = params.config().condition_dim;
    if cond.ncols() != want {
        return Err(Error::Shape(format!(
            "condition dimension {} does not match the model's {want}",
            cond.ncols()
        )));
    }
    Ok(())
}

/// What drives the input at the next position.
enum Feed<'a> {
    Sample(ChaCha8Rng),
    Forced(&'a [u8]),
}

struct Outputs<A> {
    symbols: Vec<u8>,
    logits: Option<Array2<A>>,
}

fn next_symbol<A: Real>(logits: &[A], t: usize, feed: &mut Feed<'_>) -> u8 {
    match feed {
        Feed::Sample(rng) => {
            let wide: Vec<f64> = logits.iter().map(|v| v.f64()).collect();
            draw(&wide, rng)
        }
        Feed::Forced(symbols) => symbols[t],
    }
}

fn run_queued<A: Real>(
    params: &ModelParams<A>,
    cond: ArrayView2<'_, A>,
    mut feed: Feed<'_>,
    keep_logits: bool,
) -> Result<Outputs<A>> {
    check_cond(params, &cond)?;
    let lay = &params.layout;
    let n = cond.nrows();
    let r = params.config().residual_channels;
    let mut queues: Vec<Vec<Vec<A>>> = lay
        .layers
        .iter()
        .map(|s| vec![vec![A::zero(); r]; s.dilation])
        .collect();
    let mut symbols = Vec::with_capacity(n);
    let mut all_logits = keep_logits.then(|| Array2::zeros((n, params.config().quant_levels)));
    let mut x = A::zero();
    for t in 0..n {
        let row = cond.row(t);
        let c = row.as_slice().map(|s| s.to_vec()).unwrap_or_else(|| row.to_vec());
        let mut skip = vec![A::zero(); params.config().skip_channels];
        let mut h = embed(params, x);
        for (l, slots) in lay.layers.iter().enumerate() {
            let slot = t % slots.dilation;
            let next = layer_step(params, l, &queues[l][slot], &h, &c, Some(&mut skip));
            queues[l][slot] = h;
            h = next.unwrap_or_default();
        }
        let logits = head(params, &skip);
        let s = next_symbol(&logits, t, &mut feed);
        if let Some(all) = all_logits.as_mut() {
            all.row_mut(t).iter_mut().zip(&logits).for_each(|(o, &v)| *o = v);
        }
        symbols.push(s);
        x = A::of(symbol_to_companded(s));
    }
    Ok(Outputs {
        symbols,
        logits: all_logits,
    })
}

fn run_naive<A: Real>(
    params: &ModelParams<A>,
    cond: ArrayView2<'_, A>,
    mut feed: Feed<'_>,
) -> Result<Outputs<A>> {
    check_cond(params, &cond)?;
    let lay = &params.layout;
    let n = cond.nrows();
    let rf = params.config().receptive_field();
    let r = params.config().residual_channels;
    let zeros = vec![A::zero(); r];
    let mut inputs: Vec<A> = Vec::with_capacity(n);
    let mut symbols = Vec::with_capacity(n);
    let mut x = A::zero();
    for t in 0..n {
        inputs.push(x);
        let w0 = (t + 1).saturating_sub(rf);
        let window = t + 1 - w0;
        let mut hs: Vec<Vec<A>> = (w0..=t).map(|u| embed(params, inputs[u])).collect();
        let mut skip = vec![A::zero(); params.config().skip_channels];
        for (l, slots) in lay.layers.iter().enumerate() {
            let d = slots.dilation;
            let mut next_hs = Vec::with_capacity(window);
            for i in 0..window {
                let u = w0 + i;
                let row = cond.row(u);
                let c = row.to_vec();
                let past = if i >= d { &hs[i - d] } else { &zeros };
                let skip_here = (u == t).then_some(skip.as_mut_slice());
                next_hs.push(layer_step(params, l, past, &hs[i], &c, skip_here).unwrap_or_default());
            }
            hs = next_hs;
        }
        let logits = head(params, &skip);
        let s = next_symbol(&logits, t, &mut feed);
        symbols.push(s);
        x = A::of(symbol_to_companded(s));
    }
    Ok(Outputs {
        symbols,
        logits: None,
    })
}

/// Draws one symbol per condition row, temperature 1, reproducible from `seed`.
pub fn sample<A: Real>(params: &ModelParams<A>, cond: ArrayView2<'_, A>, seed: u64) -> Result<Vec<u8>> {
    let rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(run_queued(params, cond, Feed::Sample(rng), false)?.symbols)
}

/// Reference sampler that recomputes the receptive field at every step.
pub fn sample_naive<A: Real>(
    params: &ModelParams<A>,
    cond: ArrayView2<'_, A>,
    seed: u64,
) -> Result<Vec<u8>> {
    let rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(run_naive(params, cond, Feed::Sample(rng))?.symbols)
}

/// Incremental logits under teacher forcing with `symbols`.
pub fn incremental_logits<A: Real>(
    params: &ModelParams<A>,
    cond: ArrayView2<'_, A>,
    symbols: &[u8],
) -> Result<Array2<A>> {
    if symbols.len() != cond.nrows() {
        return Err(Error::LengthMismatch {
            what: "symbols",
            expected: cond.nrows(),
            actual: symbols.len(),
        });
    }
    Ok(run_queued(params, cond, Feed::Forced(symbols), true)?
        .logits
        .expect("logits requested"))
}
