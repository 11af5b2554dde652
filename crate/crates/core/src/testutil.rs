//! Test-only oracles and generators, independent of the code under test.

use rand::Rng;
use rand_distr::StandardNormal;

/// Solves the p×p Toeplitz normal equations by Gaussian elimination with
/// partial pivoting.
pub fn dense_solve(r: &[f64], p: usize) -> Vec<f64> {
    let mut m: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            let mut row: Vec<f64> = (0..p).map(|j| r[i.abs_diff(j)]).collect();
            row.push(r[i + 1]);
            row
        })
        .collect();
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        for row in col + 1..p {
            let f = m[row][col] / m[col][col];
            for c in col..=p {
                m[row][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; p];
    for row in (0..p).rev() {
        let s: f64 = (row + 1..p).map(|c| m[row][c] * x[c]).sum();
        x[row] = (m[row][p] - s) / m[row][row];
    }
    x
}

/// Random minimum-phase predictor built from reflection coefficients drawn
/// uniformly from `(-max_k, max_k)`.
pub fn random_stable_predictor<R: Rng>(rng: &mut R, order: usize, max_k: f64) -> Vec<f64> {
    let ks: Vec<f64> = (0..order).map(|_| rng.random_range(-max_k..max_k)).collect();
    crate::lp::predictor_from_reflection(&ks)
}

/// Realization of the AR process `x_n = w_n + Σ α_k x_{n-k}` driven by unit
/// Gaussian noise, after a burn-in.
pub fn ar_realization<R: Rng>(rng: &mut R, alpha: &[f64], n: usize) -> Vec<f64> {
    let burn = 500;
    let mut x = vec![0.0; n + burn];
    for i in 0..n + burn {
        let mut v: f64 = rng.sample(StandardNormal);
        for (k, a) in alpha.iter().enumerate() {
            if i > k {
                v += a * x[i - k - 1];
            }
        }
        x[i] = v;
    }
    x.split_off(burn)
}

pub fn white_noise<R: Rng>(rng: &mut R, n: usize, std: f64) -> Vec<f64> {
    (0..n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect()
}
