//! Diamond norm of Hermiticity-preserving maps by restarted ascent over pure
//! inputs on the system ⊗ ancilla space.
//!
//! For a pure input `|ψ⟩` the objective `‖(Φ⊗𝟙)(ψψ†)‖₁` equals
//! `max_{-𝟙≤S≤𝟙} ψ† (Φ†⊗𝟙)(S) ψ`. Alternating between the optimal `S` (the sign
//! of the output) and the top eigenvector of `(Φ†⊗𝟙)(S)` never decreases the
//! objective, so every restart climbs to a local maximum.

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::Result;
use crate::superop::{CMatrix, Superoperator};

#[derive(Clone, Copy, Debug)]
pub struct DiamondOptions {
    /// Number of random starts in addition to the maximally entangled input.
    pub restarts: usize,
    pub seed: u64,
    /// Stop a restart once an iteration improves the objective by less than this.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for DiamondOptions {
    fn default() -> Self {
        Self { restarts: 24, seed: 0x00d1_a30d, tol: 1e-13, max_iterations: 5000 }
    }
}

/// `‖A - B‖_⋄` with default options.
pub fn diamond_distance(a: &Superoperator, b: &Superoperator) -> Result<f64> {
    diamond_distance_with(a, b, &DiamondOptions::default())
}

pub fn diamond_distance_with(a: &Superoperator, b: &Superoperator, opts: &DiamondOptions) -> Result<f64> {
    Ok(diamond_norm_with(&a.sub(b)?, opts))
}

/// `‖Φ‖_⋄` for a Hermiticity-preserving `Φ` (any real PTM qualifies).
pub fn diamond_norm_with(map: &Superoperator, opts: &DiamondOptions) -> f64 {
    let images = MatrixUnitImages::new(map);
    let adjoint_images = MatrixUnitImages::new(&map.adjoint());
    let n = map.size();

    let starts: Vec<DVector<Complex64>> = std::iter::once(maximally_entangled(map.dim()))
        .chain((0..opts.restarts).map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(k as u64 + 1);
            random_pure_state(n, &mut rng)
        }))
        .collect();

    let values: Vec<f64> = starts.into_par_iter().map(|psi| ascend(&images, &adjoint_images, psi, opts)).collect();
    values.into_iter().fold(0.0, f64::max)
}

/// Objective value `‖(Φ⊗𝟙)(ψψ†)‖₁` at a given input.
pub fn trace_norm_at(map: &Superoperator, psi: &DVector<Complex64>) -> f64 {
    let images = MatrixUnitImages::new(map);
    let out = images.apply_extended(&(psi * psi.adjoint()));
    trace_norm(&out)
}

fn ascend(
    images: &MatrixUnitImages,
    adjoint_images: &MatrixUnitImages,
    mut psi: DVector<Complex64>,
    opts: &DiamondOptions,
) -> f64 {
    let mut best = 0.0;
    for _ in 0..opts.max_iterations {
        let out = images.apply_extended(&(&psi * psi.adjoint()));
        let eig = SymmetricEigen::new(hermitian_part(&out));
        let value: f64 = eig.eigenvalues.iter().map(|v| v.abs()).sum();
        let improved = value - best;
        best = f64::max(best, value);
        if improved <= opts.tol {
            break;
        }
        let signs = eig.eigenvalues.map(|v| Complex64::new(v.signum() * f64::from(v != 0.0), 0.0));
        let sign_op = &eig.eigenvectors * CMatrix::from_diagonal(&signs) * eig.eigenvectors.adjoint();
        let h = hermitian_part(&adjoint_images.apply_extended(&sign_op));
        let heig = SymmetricEigen::new(h);
        let top = heig.eigenvalues.imax();
        psi = heig.eigenvectors.column(top).into_owned();
    }
    best
}

fn trace_norm(x: &CMatrix) -> f64 {
    SymmetricEigen::new(hermitian_part(x)).eigenvalues.iter().map(|v| v.abs()).sum()
}

fn hermitian_part(x: &CMatrix) -> CMatrix {
    (x + x.adjoint()) * Complex64::new(0.5, 0.0)
}

fn maximally_entangled(dim: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(dim * dim);
    let amp = 1.0 / (dim as f64).sqrt();
    for i in 0..dim {
        v[i * dim + i] = Complex64::new(amp, 0.0);
    }
    v
}

pub(crate) fn random_pure_state(n: usize, rng: &mut ChaCha8Rng) -> DVector<Complex64> {
    let v =
        DVector::from_fn(n, |_, _| Complex64::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng)));
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

/// Images `Φ(|i⟩⟨k|)` of the matrix units, used to apply `Φ ⊗ 𝟙` to operators
/// on system ⊗ ancilla with row index `system · d + ancilla`.
struct MatrixUnitImages {
    dim: usize,
    images: Vec<CMatrix>,
}

impl MatrixUnitImages {
    fn new(map: &Superoperator) -> Self {
        let d = map.dim();
        let mut images = Vec::with_capacity(d * d);
        let mut unit = CMatrix::zeros(d, d);
        for i in 0..d {
            for k in 0..d {
                unit[(i, k)] = Complex64::new(1.0, 0.0);
                images.push(map.apply_operator(&unit));
                unit[(i, k)] = Complex64::new(0.0, 0.0);
            }
        }
        Self { dim: d, images }
    }

    fn apply_extended(&self, y: &CMatrix) -> CMatrix {
        let d = self.dim;
        let mut out = CMatrix::zeros(d * d, d * d);
        for j in 0..d {
            for l in 0..d {
                for i in 0..d {
                    for k in 0..d {
                        let coeff = y[(i * d + j, k * d + l)];
                        if coeff == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        let img = &self.images[i * d + k];
                        for a in 0..d {
                            for b in 0..d {
                                out[(a * d + j, b * d + l)] += coeff * img[(a, b)];
                            }
                        }
                    }
                }
            }
        }
        out
    }
}
