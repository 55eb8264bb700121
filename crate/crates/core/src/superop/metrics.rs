use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Superoperator, STRUCTURAL_TOL};
use crate::error::{Error, Result};

/// Average gate infidelity `1 - F̄(G̃, G)` through the trace formula
/// `(d² - Tr Λ) / (d(d+1))` with `Λ = G̃ G⁻¹`.
pub fn agi(g_tilde: &Superoperator, g: &Superoperator) -> Result<f64> {
    if g_tilde.dim() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), found: g_tilde.dim() });
    }
    for map in [g_tilde, g] {
        let deviation = map.trace_preservation_error();
        if deviation > STRUCTURAL_TOL {
            return Err(Error::NotTracePreserving { deviation });
        }
    }
    let lambda = g_tilde.compose(&g.inverse()?)?;
    let d = g.dim() as f64;
    Ok((d * d - lambda.ptm().trace()) / (d * (d + 1.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Monte Carlo estimate of the average gate infidelity by direct averaging of
/// `Tr(G̃[ψ] G[ψ])` over Haar-random qubit pure states.
pub fn agi_haar_oracle(
    g_tilde: &Superoperator,
    g: &Superoperator,
    n_samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if g_tilde.dim() != 2 || g.dim() != 2 {
        return Err(Error::InvalidInput("Haar oracle is implemented for qubits only".into()));
    }
    if n_samples < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        let z: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (a_re, a_im, b_re, b_im) = (z[0] / norm, z[1] / norm, z[2] / norm, z[3] / norm);
        // Bloch vector of |ψ⟩ = a|0⟩ + b|1⟩
        let x = 2.0 * (a_re * b_re + a_im * b_im);
        let y = 2.0 * (a_re * b_im - a_im * b_re);
        let zc = (a_re * a_re + a_im * a_im) - (b_re * b_re + b_im * b_im);
        let psi = DVector::from_vec(vec![s, s * x, s * y, s * zc]);
        let out_tilde = g_tilde.ptm() * &psi;
        let out = g.ptm() * &psi;
        let infidelity = 1.0 - out_tilde.dot(&out);
        sum += infidelity;
        sum_sq += infidelity * infidelity;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(MonteCarloEstimate { mean, std_error: (var / n).sqrt(), samples: n_samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superop::{depolarizing_channel, rotation_channel};

    #[test]
    fn agi_of_identical_maps_is_zero() {
        let g = rotation_channel([0.0, 1.0, 0.0], 1.1).unwrap();
        assert!(agi(&g, &g).unwrap().abs() < 1e-15);
    }

    #[test]
    fn agi_of_depolarized_gate() {
        let g = rotation_channel([1.0, 0.0, 0.0], std::f64::consts::FRAC_PI_2).unwrap();
        let lambda = 0.99;
        let noisy = depolarizing_channel(lambda, 2).unwrap().compose(&g).unwrap();
        assert!((agi(&noisy, &g).unwrap() - 0.005).abs() < 1e-15);
    }

    #[test]
    fn agi_of_small_rotation() {
        let theta: f64 = 0.1;
        let g = rotation_channel([0.0, 1.0, 0.0], 0.4).unwrap();
        let noisy = rotation_channel([0.0, 0.0, 1.0], theta).unwrap().compose(&g).unwrap();
        // (4 - (2 + 2cos θ)) / 6
        let expected = (1.0 - theta.cos()) / 3.0;
        assert!((agi(&noisy, &g).unwrap() - expected).abs() < 1e-14);
        assert!((expected - theta * theta / 6.0).abs() < 1e-5);
    }

    #[test]
    fn agi_rejects_singular_and_non_tp() {
        let zero_ish = depolarizing_channel(0.0, 2).unwrap();
        let id = Superoperator::identity(2);
        assert_eq!(agi(&id, &zero_ish), Err(Error::Singular));
        assert!(matches!(agi(&Superoperator::zero(2), &id), Err(Error::NotTracePreserving { .. })));
    }

    #[test]
    fn haar_oracle_identity_pair_is_exact() {
        let id = Superoperator::identity(2);
        let est = agi_haar_oracle(&id, &id, 1000, 3).unwrap();
        assert!(est.mean.abs() < 1e-14);
        assert!(est.std_error < 1e-14);
    }
}
