#![allow(dead_code)]

use mbg_core::vocoder::{init_params, loss_and_grad, nll, forward, ModelParams, NetConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 1 block × 3 layers, 8 channels.
pub fn tiny_config() -> NetConfig {
    NetConfig {
        n_blocks: 1,
        layers_per_block: 3,
        residual_channels: 8,
        skip_channels: 8,
        condition_dim: 3,
        kernel_size: 2,
        quant_levels: 256,
    }
}

/// Xavier weights with small random biases so every bias gradient is exercised.
pub fn random_params(cfg: &NetConfig, seed: u64) -> ModelParams<f64> {
    let mut p = init_params::<f64>(cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for t in p.layout.tensors.clone() {
        if t.is_bias {
            for v in &mut p.data[t.range()] {
                *v = rng.random_range(-0.1..0.1);
            }
        }
    }
    p
}

pub struct Probe {
    pub inputs: Vec<f64>,
    pub cond: Array2<f64>,
    pub targets: Vec<u8>,
}

pub fn random_probe(n: usize, dim: usize, seed: u64) -> Probe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets: Vec<u8> = (0..n).map(|_| rng.random()).collect();
    let inputs = targets
        .iter()
        .map(|&s| (2.0 * s as f64 + 1.0) / 256.0 - 1.0)
        .collect();
    let cond = Array2::from_shape_fn((n, dim), |_| rng.random_range(-1.5..1.5));
    Probe {
        inputs,
        cond,
        targets,
    }
}

#[derive(Debug)]
pub struct TensorCheck {
    pub name: String,
    /// `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)`.
    pub rel_error: f64,
    pub norm: f64,
}

/// Central finite differences over every parameter, reported per tensor.
pub fn gradient_check(params: &ModelParams<f64>, probe: &Probe, h: f64) -> Vec<TensorCheck> {
    let n = probe.targets.len();
    let (_, analytic) =
        loss_and_grad(params, &probe.inputs, probe.cond.view(), &probe.targets, 0..n).unwrap();
    let loss = |p: &ModelParams<f64>| {
        let cache = forward(p, &probe.inputs, probe.cond.view()).unwrap();
        nll(cache.logits.view(), &probe.targets, 0..n).unwrap()
    };
    let mut work = params.clone();
    let mut out = Vec::new();
    for t in &params.layout.tensors {
        let mut diff = 0.0;
        let mut na = 0.0;
        let mut nn = 0.0;
        for i in t.range() {
            let orig = work.data[i];
            work.data[i] = orig + h;
            let up = loss(&work);
            work.data[i] = orig - h;
            let down = loss(&work);
            work.data[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.data[i];
            diff += (a - numeric).powi(2);
            na += a * a;
            nn += numeric * numeric;
        }
        let scale = na.sqrt().max(nn.sqrt());
        out.push(TensorCheck {
            name: t.name.clone(),
            rel_error: if scale == 0.0 { 0.0 } else { diff.sqrt() / scale },
            norm: na.sqrt(),
        });
    }
    out
}

/// Straightforward `-(z_t - log Σ exp z)` averaged over rows.
pub fn nll_oracle(logits: &Array2<f64>, targets: &[u8]) -> f64 {
    let mut total = 0.0;
    for (row, &t) in logits.rows().into_iter().zip(targets) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        total += lse - row[t as usize];
    }
    total / targets.len() as f64
}
