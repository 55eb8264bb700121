//! Superoperators in the Pauli-transfer-matrix (PTM) representation.
//!
//! Every linear map on operators is stored as a real `d² × d²` matrix in the
//! normalized Pauli basis `{P_k / √d}`, ordered `I, X, Y, Z` per qubit with the
//! first qubit most significant. Row and column 0 belong to the identity
//! component, so a map is trace-preserving iff row 0 is `e₀ᵀ` and unital iff
//! column 0 is `e₀`.
//!
//! States and effects are vectors in the same basis, and Born's rule is a
//! plain dot product: `Tr[E G(ρ)] = eᵀ · G · ρ`.

mod channels;
mod metrics;

pub use channels::{amplitude_damping, depolarizing_channel, rotation_channel, unitary_channel};
pub use metrics::{agi, agi_haar_oracle, MonteCarloEstimate};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex dense matrix used for operators and Choi matrices.
pub type CMatrix = DMatrix<Complex64>;

/// Structural checks (TP, unitality, orthogonality).
pub const STRUCTURAL_TOL: f64 = 1e-9;
/// Allowed imaginary part / anti-Hermitian part when extracting real spectra.
pub const REALNESS_TOL: f64 = 1e-10;

/// Unnormalized Pauli operators for `dim = 2ⁿ`, in basis order.
pub fn pauli_operators(dim: usize) -> Vec<CMatrix> {
    assert!(dim.is_power_of_two() && dim >= 2, "dimension must be 2^n, got {dim}");
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let zero = Complex64::new(0.0, 0.0);
    let single = [
        CMatrix::from_row_slice(2, 2, &[one, zero, zero, one]),
        CMatrix::from_row_slice(2, 2, &[zero, one, one, zero]),
        CMatrix::from_row_slice(2, 2, &[zero, -i, i, zero]),
        CMatrix::from_row_slice(2, 2, &[one, zero, zero, -one]),
    ];
    let mut basis = vec![CMatrix::identity(1, 1)];
    let mut d = 1;
    while d < dim {
        basis = basis.iter().flat_map(|p| single.iter().map(move |s| p.kronecker(s))).collect();
        d *= 2;
    }
    basis
}

/// Complex coefficients of `x` in the normalized Pauli basis.
pub fn operator_to_coeffs(x: &CMatrix) -> Vec<Complex64> {
    let dim = x.nrows();
    let norm = (dim as f64).sqrt();
    pauli_operators(dim).iter().map(|p| (p * x).trace() / norm).collect()
}

/// Inverse of [`operator_to_coeffs`].
pub fn coeffs_to_operator(dim: usize, coeffs: &[Complex64]) -> CMatrix {
    let norm = (dim as f64).sqrt();
    let mut out = CMatrix::zeros(dim, dim);
    for (p, c) in pauli_operators(dim).iter().zip(coeffs) {
        out += p * (*c / norm);
    }
    out
}

/// Real PTM of a linear map acting on operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "SuperoperatorRepr", try_from = "SuperoperatorRepr")]
pub struct Superoperator {
    dim: usize,
    ptm: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct SuperoperatorRepr {
    dim: usize,
    ptm: Vec<Vec<f64>>,
}

impl From<Superoperator> for SuperoperatorRepr {
    fn from(s: Superoperator) -> Self {
        let ptm = s.ptm.row_iter().map(|row| row.iter().copied().collect()).collect();
        SuperoperatorRepr { dim: s.dim, ptm }
    }
}

impl TryFrom<SuperoperatorRepr> for Superoperator {
    type Error = Error;

    fn try_from(r: SuperoperatorRepr) -> Result<Self> {
        let n = r.ptm.len();
        if r.ptm.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidInput("PTM rows must form a square matrix".into()));
        }
        let flat: Vec<f64> = r.ptm.into_iter().flatten().collect();
        Superoperator::from_ptm(r.dim, DMatrix::from_row_slice(n, n, &flat))
    }
}

impl Superoperator {
    /// Wraps a PTM. `ptm` must be `dim² × dim²`.
    pub fn from_ptm(dim: usize, ptm: DMatrix<f64>) -> Result<Self> {
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::InvalidInput(format!("Hilbert dimension {dim} is not 2^n")));
        }
        let n = dim * dim;
        if ptm.nrows() != n || ptm.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: ptm.nrows().max(ptm.ncols()) });
        }
        if ptm.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("PTM has non-finite entries".into()));
        }
        Ok(Self { dim, ptm })
    }

    /// Builds from PTM rows; rows must form a square `dim² × dim²` matrix.
    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidInput("PTM rows must form a square matrix".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Superoperator::from_ptm(dim, DMatrix::from_row_slice(n, n, &flat))
    }

    pub(crate) fn from_ptm_unchecked(dim: usize, ptm: DMatrix<f64>) -> Self {
        debug_assert_eq!(ptm.nrows(), dim * dim);
        Self { dim, ptm }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_ptm_unchecked(dim, DMatrix::identity(dim * dim, dim * dim))
    }

    /// The map sending every operator to 0.
    pub fn zero(dim: usize) -> Self {
        Self::from_ptm_unchecked(dim, DMatrix::zeros(dim * dim, dim * dim))
    }

    /// Hilbert-space dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Side length of the PTM, `d²`.
    pub fn size(&self) -> usize {
        self.dim * self.dim
    }

    pub fn ptm(&self) -> &DMatrix<f64> {
        &self.ptm
    }

    pub fn into_ptm(self) -> DMatrix<f64> {
        self.ptm
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        Ok(())
    }

    /// `self ∘ other`: `other` acts first.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self::from_ptm_unchecked(self.dim, &self.ptm * &other.ptm))
    }

    /// Product `ops[0] ∘ ops[1] ∘ …`; the last element acts first.
    pub fn compose_all(ops: &[Superoperator]) -> Result<Self> {
        let first = ops.first().ok_or_else(|| Error::InvalidInput("cannot compose an empty list".into()))?;
        ops[1..].iter().try_fold(first.clone(), |acc, op| acc.compose(op))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self::from_ptm_unchecked(self.dim, &self.ptm + &other.ptm))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self::from_ptm_unchecked(self.dim, &self.ptm - &other.ptm))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::from_ptm_unchecked(self.dim, &self.ptm * factor)
    }

    /// Entrywise mean of a non-empty set of maps.
    pub fn mean(ops: &[Superoperator]) -> Result<Self> {
        let first = ops.first().ok_or_else(|| Error::InvalidInput("cannot average an empty list".into()))?;
        let mut acc = DMatrix::zeros(first.size(), first.size());
        for op in ops {
            first.check_same_dim(op)?;
            acc += &op.ptm;
        }
        Ok(Self::from_ptm_unchecked(first.dim, acc / ops.len() as f64))
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self.ptm.clone().try_inverse().ok_or(Error::Singular)?;
        if inv.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular);
        }
        Ok(Self::from_ptm_unchecked(self.dim, inv))
    }

    /// Hilbert–Schmidt adjoint. The basis is orthonormal and Hermitian, so
    /// this is the PTM transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_ptm_unchecked(self.dim, self.ptm.transpose())
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        if state.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: state.dim });
        }
        Ok(StateVector { dim: self.dim, coeffs: &self.ptm * &state.coeffs })
    }

    /// Applies the map to an arbitrary (not necessarily Hermitian) operator.
    pub fn apply_operator(&self, x: &CMatrix) -> CMatrix {
        let coeffs = operator_to_coeffs(x);
        let n = self.size();
        let out: Vec<Complex64> = (0..n).map(|r| (0..n).map(|c| coeffs[c] * self.ptm[(r, c)]).sum()).collect();
        coeffs_to_operator(self.dim, &out)
    }

    /// Max deviation of PTM row 0 from `e₀ᵀ`.
    pub fn trace_preservation_error(&self) -> f64 {
        self.ptm.row(0).iter().enumerate().map(|(j, v)| (v - if j == 0 { 1.0 } else { 0.0 }).abs()).fold(0.0, f64::max)
    }

    pub fn is_tp(&self, tol: f64) -> bool {
        self.trace_preservation_error() <= tol
    }

    pub fn is_unital(&self, tol: f64) -> bool {
        self.ptm.column(0).iter().enumerate().all(|(j, v)| (v - if j == 0 { 1.0 } else { 0.0 }).abs() <= tol)
    }

    /// `ptmᵀ · ptm = 𝟙`, which holds for unitary channels.
    pub fn is_orthogonal(&self, tol: f64) -> bool {
        let g = self.ptm.transpose() * &self.ptm;
        (g - DMatrix::<f64>::identity(self.size(), self.size())).iter().all(|v| v.abs() <= tol)
    }

    /// Unnormalized Choi matrix `χ = Σ_ij B_ij ⊗ G(B_ij)`.
    pub fn to_choi(&self) -> ChoiMatrix {
        let d = self.dim;
        let mut chi = CMatrix::zeros(d * d, d * d);
        let mut unit = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                unit[(i, j)] = Complex64::new(1.0, 0.0);
                let image = self.apply_operator(&unit);
                unit[(i, j)] = Complex64::new(0.0, 0.0);
                for a in 0..d {
                    for b in 0..d {
                        chi[(i * d + a, j * d + b)] = image[(a, b)];
                    }
                }
            }
        }
        ChoiMatrix { dim: d, entries: chi }
    }

    /// Choi eigenvalues sorted ascending.
    pub fn choi_eigenvalues(&self) -> Result<Vec<f64>> {
        self.to_choi().eigenvalues()
    }

    pub fn min_choi_eigenvalue(&self) -> Result<f64> {
        Ok(self.choi_eigenvalues()?[0])
    }

    /// Completely positive iff the smallest Choi eigenvalue is `≥ -tol`.
    pub fn is_cp(&self, tol: f64) -> bool {
        self.min_choi_eigenvalue().map(|e| e >= -tol).unwrap_or(false)
    }
}

/// Unnormalized Choi matrix in the matrix-unit basis; its trace is `d` for
/// trace-preserving maps.
#[derive(Clone, Debug)]
pub struct ChoiMatrix {
    dim: usize,
    entries: CMatrix,
}

impl ChoiMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.entries - self.entries.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Real eigenvalues sorted ascending. Fails when the matrix is not
    /// Hermitian, i.e. the map does not preserve Hermiticity.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let deviation = self.hermiticity_error();
        if deviation > REALNESS_TOL {
            return Err(Error::NotHermiticityPreserving { deviation });
        }
        let herm = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        let mut values: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        values.sort_by(f64::total_cmp);
        Ok(values)
    }
}

/// A density operator expanded in the normalized Pauli basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    dim: usize,
    coeffs: DVector<f64>,
}

impl StateVector {
    /// Requires unit trace, i.e. `coeffs[0] = 1/√d`.
    pub fn from_coeffs(dim: usize, coeffs: DVector<f64>) -> Result<Self> {
        if coeffs.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: coeffs.len() });
        }
        let expected = 1.0 / (dim as f64).sqrt();
        if (coeffs[0] - expected).abs() > STRUCTURAL_TOL {
            return Err(Error::InvalidInput(format!(
                "state identity coefficient {} != 1/sqrt(d) = {expected}",
                coeffs[0]
            )));
        }
        Ok(Self { dim, coeffs })
    }

    /// Coefficients without the unit-trace check; used for gauge-transformed
    /// states, which need not look like density operators.
    pub fn from_coeffs_unchecked(dim: usize, coeffs: DVector<f64>) -> Self {
        Self { dim, coeffs }
    }

    pub fn from_density(rho: &CMatrix) -> Result<Self> {
        let dim = rho.nrows();
        let coeffs = real_coeffs(rho)?;
        Self::from_coeffs(dim, coeffs)
    }

    /// `|0⟩⟨0|`, the +1 eigenstate of every `σ_z`.
    pub fn zero_state(dim: usize) -> Self {
        let mut rho = CMatrix::zeros(dim, dim);
        rho[(0, 0)] = Complex64::new(1.0, 0.0);
        Self::from_density(&rho).expect("projector is a valid state")
    }

    /// Qubit state with Bloch vector `r` (`|r| ≤ 1`).
    pub fn from_bloch(r: [f64; 3]) -> Result<Self> {
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1.0 + STRUCTURAL_TOL {
            return Err(Error::InvalidInput(format!("Bloch vector norm {norm} exceeds 1")));
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Ok(Self { dim: 2, coeffs: DVector::from_vec(vec![s, s * r[0], s * r[1], s * r[2]]) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    /// Bloch vector (qubits only).
    pub fn bloch(&self) -> Option<[f64; 3]> {
        (self.dim == 2).then(|| {
            let s = std::f64::consts::SQRT_2;
            [self.coeffs[1] * s, self.coeffs[2] * s, self.coeffs[3] * s]
        })
    }

    pub fn to_operator(&self) -> CMatrix {
        let c: Vec<Complex64> = self.coeffs.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        coeffs_to_operator(self.dim, &c)
    }
}

/// A POVM effect expanded in the normalized Pauli basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    dim: usize,
    coeffs: DVector<f64>,
}

impl Effect {
    pub fn from_coeffs(dim: usize, coeffs: DVector<f64>) -> Result<Self> {
        if coeffs.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: coeffs.len() });
        }
        Ok(Self { dim, coeffs })
    }

    pub fn from_operator(e: &CMatrix) -> Result<Self> {
        let dim = e.nrows();
        Self::from_coeffs(dim, real_coeffs(e)?)
    }

    /// Projector onto `|0⟩`.
    pub fn projector_zero(dim: usize) -> Self {
        let mut e = CMatrix::zeros(dim, dim);
        e[(0, 0)] = Complex64::new(1.0, 0.0);
        Self::from_operator(&e).expect("projector is Hermitian")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn to_operator(&self) -> CMatrix {
        let c: Vec<Complex64> = self.coeffs.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        coeffs_to_operator(self.dim, &c)
    }

    /// Operator eigenvalues lie in `[-tol, 1 + tol]`.
    pub fn is_physical(&self, tol: f64) -> bool {
        let eig = SymmetricEigen::new(self.to_operator()).eigenvalues;
        eig.iter().all(|v| *v >= -tol && *v <= 1.0 + tol)
    }
}

fn real_coeffs(x: &CMatrix) -> Result<DVector<f64>> {
    if !x.is_square() || !x.nrows().is_power_of_two() || x.nrows() < 2 {
        return Err(Error::InvalidInput("operator must be square with dimension 2^n".into()));
    }
    let c = operator_to_coeffs(x);
    let max_imag = c.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if max_imag > REALNESS_TOL {
        return Err(Error::InvalidInput(format!("operator is not Hermitian (imag coeff {max_imag:e})")));
    }
    Ok(DVector::from_iterator(c.len(), c.iter().map(|v| v.re)))
}

/// Born's rule `Tr[E G(ρ)]`.
pub fn born(effect: &Effect, gate: &Superoperator, state: &StateVector) -> Result<f64> {
    if effect.dim != gate.dim {
        return Err(Error::DimensionMismatch { expected: gate.dim, found: effect.dim });
    }
    let out = gate.apply(state)?;
    Ok(effect.coeffs.dot(&out.coeffs))
}

/// `Tr[E ρ]` without an intervening gate.
pub fn born_state(effect: &Effect, state: &StateVector) -> Result<f64> {
    if effect.dim != state.dim {
        return Err(Error::DimensionMismatch { expected: state.dim, found: effect.dim });
    }
    Ok(effect.coeffs.dot(&state.coeffs))
}
