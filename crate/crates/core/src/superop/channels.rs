use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{pauli_operators, CMatrix, Superoperator};
use crate::error::{Error, Result};

/// PTM of `ρ ↦ U ρ U†`.
pub fn unitary_channel(u: &CMatrix) -> Result<Superoperator> {
    let dim = u.nrows();
    if !u.is_square() || !dim.is_power_of_two() || dim < 2 {
        return Err(Error::InvalidInput("unitary must be square with dimension 2^n".into()));
    }
    let unitarity = (u.adjoint() * u - CMatrix::identity(dim, dim)).iter().map(|c| c.norm()).fold(0.0, f64::max);
    if unitarity > 1e-10 {
        return Err(Error::InvalidInput(format!("matrix is not unitary (deviation {unitarity:e})")));
    }
    let basis = pauli_operators(dim);
    let images: Vec<CMatrix> = basis.iter().map(|p| u * p * u.adjoint()).collect();
    let n = dim * dim;
    let ptm = DMatrix::from_fn(n, n, |r, c| (&basis[r] * &images[c]).trace().re / dim as f64);
    Ok(Superoperator::from_ptm_unchecked(dim, ptm))
}

/// Qubit rotation `ρ ↦ e^{-iθ(v̂·σ)/2} ρ e^{iθ(v̂·σ)/2}`.
pub fn rotation_channel(axis: [f64; 3], angle: f64) -> Result<Superoperator> {
    let norm = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("rotation axis must be a unit vector, |v| = {norm}")));
    }
    if !angle.is_finite() {
        return Err(Error::InvalidInput("rotation angle must be finite".into()));
    }
    let (s, c) = (angle / 2.0).sin_cos();
    let [x, y, z] = axis;
    // cos(θ/2) 𝟙 - i sin(θ/2) (v̂·σ)
    let u = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(c, -s * z),
            Complex64::new(-s * y, -s * x),
            Complex64::new(s * y, -s * x),
            Complex64::new(c, s * z),
        ],
    );
    unitary_channel(&u)
}

/// Depolarizing channel `ρ ↦ (1 - λ)𝟙/d + λρ`, PTM `diag(1, λ, …, λ)`.
pub fn depolarizing_channel(lambda: f64, dim: usize) -> Result<Superoperator> {
    if !dim.is_power_of_two() || dim < 2 {
        return Err(Error::InvalidInput(format!("Hilbert dimension {dim} is not 2^n")));
    }
    let lower = -1.0 / ((dim * dim - 1) as f64);
    // Unnormalized Choi eigenvalues are (1 + (d²-1)λ)/d and (1-λ)/d.
    if lambda.is_nan() || lambda > 1.0 {
        return Err(Error::NotCompletelyPositive { lambda, condition: "(1 - lambda)/d >= 0" });
    }
    if lambda < lower {
        return Err(Error::NotCompletelyPositive { lambda, condition: "(1 + (d^2 - 1) lambda)/d >= 0" });
    }
    let n = dim * dim;
    let mut diag = DVector::from_element(n, lambda);
    diag[0] = 1.0;
    Ok(Superoperator::from_ptm_unchecked(dim, DMatrix::from_diagonal(&diag)))
}

/// Qubit amplitude damping towards `|0⟩` with decay probability `gamma`.
pub fn amplitude_damping(gamma: f64) -> Result<Superoperator> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidInput(format!("damping probability {gamma} outside [0, 1]")));
    }
    let s = (1.0 - gamma).sqrt();
    #[rustfmt::skip]
    let ptm = DMatrix::from_row_slice(4, 4, &[
        1.0,   0.0, 0.0, 0.0,
        0.0,   s,   0.0, 0.0,
        0.0,   0.0, s,   0.0,
        gamma, 0.0, 0.0, 1.0 - gamma,
    ]);
    Ok(Superoperator::from_ptm_unchecked(2, ptm))
}
