//! Spectra of small dense real non-symmetric matrices.
//!
//! Eigenvalues and right eigenvectors come from faer's Hessenberg/Schur
//! solver, which also handles the highly degenerate spectra of the RB
//! transfer matrices. Defective or nearly defective spectra show up as a huge
//! condition number of the eigenvector matrix; callers decide whether to trust
//! the decomposition.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::superop::CMatrix;

fn to_faer(a: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn to_faer_complex(a: &CMatrix) -> faer::Mat<Complex64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Singular values in descending order. Empty if the solver fails.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut sv = to_faer(a).singular_values().unwrap_or_default();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

pub fn singular_values_complex(a: &CMatrix) -> Vec<f64> {
    let mut sv = to_faer_complex(a).singular_values().unwrap_or_default();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// `(σ_i, v_i)` pairs of a square or tall matrix, descending in `σ`.
pub fn right_singular_pairs(a: &DMatrix<f64>) -> Option<Vec<(f64, DVector<f64>)>> {
    let svd = to_faer(a).svd().ok()?;
    let s = svd.S().column_vector();
    let v = svd.V();
    let mut pairs: Vec<(f64, DVector<f64>)> =
        (0..s.nrows()).map(|k| (s[k], DVector::from_fn(v.nrows(), |i, _| v[(i, k)]))).collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    Some(pairs)
}

/// `σ_max / σ_min`; infinite when singular or when the solver fails.
pub fn condition_number(a: &CMatrix) -> f64 {
    let sv = singular_values_complex(a);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// All eigenvalues, in solver order. Empty if the solver fails.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    to_faer(a).eigenvalues().unwrap_or_default()
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Sorts by descending modulus, ties by descending real part then imaginary part.
pub fn sort_by_modulus(values: &mut [Complex64]) {
    values.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)).then(b.im.total_cmp(&a.im)));
}

#[derive(Clone, Debug)]
pub struct Eigendecomposition {
    pub values: Vec<Complex64>,
    /// Right eigenvectors as columns, unit 2-norm.
    pub vectors: CMatrix,
    /// `σ_max / σ_min` of `vectors`; infinite when singular or unavailable.
    pub condition: f64,
    /// `‖A V - V Λ‖_max / max(1, ‖A‖_max)`.
    pub residual: f64,
}

impl Eigendecomposition {
    /// `V⁻¹` when the eigenvector matrix is invertible.
    pub fn inverse_vectors(&self) -> Option<CMatrix> {
        self.vectors.clone().try_inverse()
    }
}

pub fn eigendecompose(a: &DMatrix<f64>) -> Eigendecomposition {
    let n = a.nrows();
    let Ok(evd) = to_faer(a).eigen() else {
        return Eigendecomposition {
            values: Vec::new(),
            vectors: CMatrix::zeros(n, 0),
            condition: f64::INFINITY,
            residual: f64::INFINITY,
        };
    };
    let values: Vec<Complex64> = (0..n).map(|i| evd.S()[i]).collect();
    let u = evd.U();
    let mut vectors = CMatrix::from_fn(n, n, |i, j| u[(i, j)]);
    for mut col in vectors.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= Complex64::new(norm, 0.0);
        }
    }

    let condition = condition_number(&vectors);
    let scale = a.amax().max(1.0);
    let ac: CMatrix = a.map(|v| Complex64::new(v, 0.0));
    let lambda = CMatrix::from_diagonal(&DVector::from_column_slice(&values));
    let residual = (&ac * &vectors - &vectors * lambda).iter().map(|c| c.norm()).fold(0.0, f64::max) / scale;
    Eigendecomposition { values, vectors, condition, residual }
}
