use rustfft::num_complex::Complex64;

/// Relative white-noise floor added to `r[0]` before the recursion.
pub const DEFAULT_FLOOR_EPS: f64 = 1e-6;

/// `r[k] = Σ_n f[n]·f[n+k]` for `k = 0..=max_lag`.
pub fn autocorrelate(frame: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|k| {
            if k >= frame.len() {
                0.0
            } else {
                frame[..frame.len() - k]
                    .iter()
                    .zip(&frame[k..])
                    .map(|(a, b)| a * b)
                    .sum()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// Predictor coefficients `α_1..α_p`.
    pub coeffs: Vec<f64>,
    pub reflection: Vec<f64>,
    /// Prediction error energy after the final order.
    pub energy: f64,
    /// Set for silent frames (`r[0] = 0`), whose coefficients are all zero.
    pub degenerate: bool,
}

/// Solves the order-`order` Toeplitz normal equations for predictor
/// coefficients. `r[0]` is first scaled by `1 + floor_eps`.
///
/// # Panics
///
/// If `order == 0` or `r.len() <= order`.
pub fn levinson_durbin(r: &[f64], order: usize, floor_eps: f64) -> LpSolution {
    assert!(order >= 1, "LP order must be at least 1");
    assert!(r.len() > order, "need {} autocorrelation lags", order + 1);

    let r0 = r[0] * (1.0 + floor_eps);
    if !(r0 > 0.0) || !r0.is_finite() {
        return LpSolution {
            coeffs: vec![0.0; order],
            reflection: vec![0.0; order],
            energy: 0.0,
            degenerate: true,
        };
    }

    let mut a = vec![0.0; order];
    let mut prev = vec![0.0; order];
    let mut reflection = vec![0.0; order];
    let mut energy = r0;
    for i in 0..order {
        let mut acc = r[i + 1];
        for j in 0..i {
            acc -= a[j] * r[i - j];
        }
        let k = acc / energy;
        if !(k.abs() < 1.0) {
            // Numerically singular: keep the lower-order solution.
            return LpSolution {
                coeffs: a,
                reflection,
                energy,
                degenerate: true,
            };
        }
        prev[..i].copy_from_slice(&a[..i]);
        for j in 0..i {
            a[j] = prev[j] - k * prev[i - 1 - j];
        }
        a[i] = k;
        reflection[i] = k;
        energy *= 1.0 - k * k;
    }
    LpSolution {
        coeffs: a,
        reflection,
        energy: energy.max(0.0),
        degenerate: false,
    }
}

/// Step-down recursion. Returns `None` when some stage hits `|k| >= 1`,
/// i.e. the filter is not minimum phase.
pub fn reflection_from_predictor(alpha: &[f64]) -> Option<Vec<f64>> {
    let p = alpha.len();
    let mut a = alpha.to_vec();
    let mut ks = vec![0.0; p];
    for m in (0..p).rev() {
        let k = a[m];
        if !(k.abs() < 1.0) {
            return None;
        }
        ks[m] = k;
        let denom = 1.0 - k * k;
        let prev: Vec<f64> = (0..m).map(|j| (a[j] + k * a[m - 1 - j]) / denom).collect();
        a[..m].copy_from_slice(&prev);
    }
    Some(ks)
}

/// Step-up recursion from reflection coefficients to predictor coefficients.
pub fn predictor_from_reflection(reflection: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = Vec::with_capacity(reflection.len());
    for (i, &k) in reflection.iter().enumerate() {
        let next: Vec<f64> = (0..i).map(|j| a[j] - k * a[i - 1 - j]).collect();
        a = next;
        a.push(k);
    }
    a
}

/// Minimum-phase check through the reflection coefficients.
pub fn is_stable(alpha: &[f64]) -> bool {
    reflection_from_predictor(alpha).is_some()
}

/// Largest root modulus of `z^p - Σ α_k z^{p-k}` (Durand-Kerner iteration).
/// Slow; intended for verification rather than hot paths.
pub fn max_pole_radius(alpha: &[f64]) -> f64 {
    let p = alpha.len();
    if p == 0 {
        return 0.0;
    }
    // Monic polynomial coefficients, highest power first.
    let mut c = vec![Complex64::new(1.0, 0.0)];
    c.extend(alpha.iter().map(|&a| Complex64::new(-a, 0.0)));
    let eval = |z: Complex64| c.iter().fold(Complex64::new(0.0, 0.0), |acc, &ci| acc * z + ci);

    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..p).map(|i| seed.powu(i as u32)).collect();
    for _ in 0..2000 {
        let mut delta: f64 = 0.0;
        for i in 0..p {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..p {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-14 {
            break;
        }
    }
    roots.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{dense_solve, random_stable_predictor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn impulse_autocorrelation() {
        let mut f = vec![0.0; 16];
        f[0] = 1.0;
        let r = autocorrelate(&f, 5);
        assert_eq!(r, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn r0_is_squared_norm_and_dominates() {
        let f: Vec<f64> = (0..50).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let r = autocorrelate(&f, 20);
        let norm: f64 = f.iter().map(|x| x * x).sum();
        assert_eq!(r[0], norm);
        assert!(r.iter().all(|v| v.abs() <= r[0]));
    }

    #[test]
    fn cosine_autocorrelation_matches_direct_sum() {
        let w = 0.3;
        let n = 8192;
        let f: Vec<f64> = (0..n).map(|i| (w * i as f64).cos()).collect();
        let r = autocorrelate(&f, 8);
        for k in 0..=8 {
            // direct summation oracle
            let direct: f64 = (0..n - k).map(|i| f[i] * f[i + k]).sum();
            assert!((r[k] - direct).abs() < 1e-9);
            assert!((r[k] / r[0] - (w * k as f64).cos()).abs() < 5e-3);
        }
    }

    #[test]
    fn white_noise_gives_zero_predictor() {
        let mut r = vec![0.0; 9];
        r[0] = 1.0;
        let s = levinson_durbin(&r, 8, 0.0);
        assert!(s.coeffs.iter().all(|&a| a == 0.0));
        assert!(!s.degenerate);
    }

    #[test]
    fn ar1_closed_form() {
        let a: f64 = 0.7;
        let r: Vec<f64> = (0..6).map(|k| a.powi(k)).collect();
        let s = levinson_durbin(&r, 5, 0.0);
        assert!((s.coeffs[0] - a).abs() < 1e-12);
        assert!(s.coeffs[1..].iter().all(|c| c.abs() < 1e-12));
        assert!((s.energy - (1.0 - a * a)).abs() < 1e-12);
    }

    #[test]
    fn silent_frame_is_flagged() {
        let s = levinson_durbin(&[0.0; 5], 4, DEFAULT_FLOOR_EPS);
        assert!(s.degenerate);
        assert_eq!(s.coeffs, vec![0.0; 4]);
        assert_eq!(s.energy, 0.0);
    }

    #[test]
    fn matches_dense_normal_equation_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let alpha = random_stable_predictor(&mut rng, 2, 0.9);
            // autocorrelation of a long AR(2) realization
            let x = crate::testutil::ar_realization(&mut rng, &alpha, 4000);
            let r = autocorrelate(&x, 6);
            let s = levinson_durbin(&r, 6, 0.0);
            let dense = dense_solve(&r, 6);
            for (a, b) in s.coeffs.iter().zip(&dense) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn energy_non_increasing_in_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let alpha = random_stable_predictor(&mut rng, 8, 0.95);
        let x = crate::testutil::ar_realization(&mut rng, &alpha, 2000);
        let r = autocorrelate(&x, 20);
        let energies: Vec<f64> = (1..=20).map(|p| levinson_durbin(&r, p, 1e-6).energy).collect();
        assert!(energies.windows(2).all(|w| w[1] <= w[0]));
        assert!(energies.iter().all(|&e| e >= 0.0));
    }

    #[test]
    fn step_down_inverts_step_up() {
        let ks = [0.5, -0.3, 0.8, -0.95, 0.1];
        let a = predictor_from_reflection(&ks);
        let back = reflection_from_predictor(&a).unwrap();
        for (x, y) in ks.iter().zip(&back) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(!is_stable(&[2.0]));
        assert!(is_stable(&[0.9]));
    }

    #[test]
    fn pole_radius_of_resonator() {
        let (r, th) = (0.9_f64, 0.7_f64);
        let alpha = [2.0 * r * th.cos(), -r * r];
        assert!((max_pole_radius(&alpha) - r).abs() < 1e-9);
        assert!((max_pole_radius(&[0.5]) - 0.5).abs() < 1e-12);
    }
}
