#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rblab::clifford::ErrorModel;
use rblab::superop::{amplitude_damping, depolarizing_channel, rotation_channel, Superoperator};

pub type U2 = Matrix2<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn paulis() -> [U2; 3] {
    [
        U2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)),
        U2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)),
        U2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)),
    ]
}

/// `exp(-i θ (n·σ)/2)` by power series, independent of the library's closed form.
pub fn rotation_unitary(n: [f64; 3], theta: f64) -> U2 {
    let p = paulis();
    let gen = (p[0] * c(n[0], 0.0) + p[1] * c(n[1], 0.0) + p[2] * c(n[2], 0.0)) * c(0.0, -theta / 2.0);
    let mut term = U2::identity();
    let mut sum = U2::identity();
    for k in 1..40 {
        term = term * gen / c(k as f64, 0.0);
        sum += term;
    }
    sum
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n < 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn random_channel(rng: &mut ChaCha8Rng) -> Superoperator {
    let rot = rotation_channel(random_unit(rng), rng.random_range(0.0..0.3)).unwrap();
    let dep = depolarizing_channel(rng.random_range(0.95..1.0), 2).unwrap();
    let ad = amplitude_damping(rng.random_range(0.0..0.05)).unwrap();
    let frame = rotation_channel(random_unit(rng), rng.random_range(0.0..3.0)).unwrap();
    // Amplitude damping along a random axis, so the error is non-unital and generic.
    let tilted = frame.compose(&ad).unwrap().compose(&frame.inverse().unwrap()).unwrap();
    tilted.compose(&dep).unwrap().compose(&rot).unwrap()
}

/// Five gate-dependent, non-unital error models.
pub fn random_models(seed: u64) -> Vec<ErrorModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..5)
        .map(|_| ErrorModel::Custom { x_error: random_channel(&mut rng), y_error: random_channel(&mut rng) })
        .collect()
}

/// Random TP-form gauge `𝟙 + scale·P` with `P` on the last three rows.
pub fn random_gauge(rng: &mut ChaCha8Rng, scale: f64) -> DMatrix<f64> {
    let mut m = DMatrix::identity(4, 4);
    for i in 1..4 {
        for j in 0..4 {
            m[(i, j)] += scale * rng.random_range(-1.0..1.0);
        }
    }
    m
}

/// Representative gatesets used by several suites.
pub fn named_models() -> Vec<(&'static str, ErrorModel)> {
    vec![
        ("coherent_z", ErrorModel::CoherentZ { theta: 0.1 }),
        (
            "general",
            ErrorModel::general_from_rotation_vectors([0.001, 0.005, 0.1], [0.004, 0.003, 0.1], 1.0 - 5e-5).unwrap(),
        ),
        ("depolarizing", ErrorModel::gate_independent_depolarizing(0.99).unwrap()),
    ]
}
