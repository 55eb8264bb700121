//! Representation-independent theories of the RB decay.
//!
//! * The exact theory builds the `4|𝒞| × 4|𝒞|` block matrix `𝓡` whose
//!   powers enumerate all RB sequences, so `P_m = |𝒞| Tr(E (vᵀ𝓡^{m+1}v)(ρ))`.
//! * The approximate theory uses the linear map on superoperators
//!   `𝓛(ℰ) = avg_i C_i⁻¹ ℰ C̃_i`. Its second eigenvalue `γ` sets the decay rate
//!   and `P_m = Tr(E Λ̄ [𝓛^m(𝟙)](ρ)) + δ̃_m` with `|δ̃_m| ≤ δ_⋄`.
//!
//! Superoperators are vectorized by column stacking, so
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford::{error_maps, GateSet};
use crate::diamond::{diamond_distance_with, DiamondOptions};
use crate::eigen::{eigendecompose, eigenvalues, sort_by_modulus};
use crate::error::{Error, Result};
use crate::export::{csv_table, fmt_f64};
use crate::fit::rb_number;
use crate::rb::{SequenceEvaluator, Spam};
use crate::superop::Superoperator;

/// Largest eigenvector condition number for which the spectral form of the
/// exact decay is used.
pub const MAX_EIGENVECTOR_CONDITION: f64 = 1e8;

/// Block matrix with block `(k, j) = C̃_g / |𝒞|` where `C_g = C_k C_j⁻¹`.
#[derive(Clone, Debug)]
pub struct RMatrix {
    matrix: DMatrix<f64>,
    block: usize,
    order: usize,
    identity_index: usize,
}

impl RMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn block_at(&self, k: usize, j: usize) -> DMatrix<f64> {
        self.matrix.view((k * self.block, j * self.block), (self.block, self.block)).into_owned()
    }

    /// `|𝒞| · vᵀ M v` for a matrix `M` of the same shape as `𝓡`.
    pub fn sandwich(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let o = self.identity_index * self.block;
        m.view((o, o), (self.block, self.block)).into_owned() * self.order as f64
    }
}

pub fn build_r_matrix(gateset: &GateSet) -> RMatrix {
    let group = gateset.ideal();
    let n = group.len();
    let b = gateset.dim() * gateset.dim();
    let mut matrix = DMatrix::zeros(n * b, n * b);
    for k in 0..n {
        for j in 0..n {
            let g = group.compose(k, group.inverse(j));
            let block = gateset.imperfect()[g].ptm() / n as f64;
            matrix.view_mut((k * b, j * b), (b, b)).copy_from(&block);
        }
    }
    RMatrix { matrix, block: b, order: n, identity_index: group.identity_index() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralSource {
    RMatrix,
    LMap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMethod {
    /// `P_m = Σ α_i λ_i^{m+1}` from the eigendecomposition.
    Spectral,
    /// Repeated multiplication by `𝓡`; used when the eigenbasis is unreliable.
    Iterated,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralDecay {
    pub source: SpectralSource,
    pub eigenvalues: Vec<Complex64>,
    /// `α_i` for the given SPAM, when the eigenbasis is usable.
    pub weights: Option<Vec<Complex64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExactDecay {
    pub spectral: SpectralDecay,
    pub method: DecayMethod,
    pub eigenvector_condition: f64,
    pub lengths: Vec<usize>,
    pub probabilities: Vec<f64>,
}

fn spam_vectors(gateset: &GateSet, spam: &Spam) -> Result<(DVector<f64>, DVector<f64>)> {
    let b = gateset.dim() * gateset.dim();
    if spam.state.dim() != gateset.dim() || spam.effect.dim() != gateset.dim() {
        return Err(Error::DimensionMismatch { expected: gateset.dim(), found: spam.state.dim() });
    }
    let _ = b;
    Ok((spam.state.coeffs().clone(), spam.effect.coeffs().clone()))
}

/// Exact average survival probability for every length in `lengths`.
pub fn exact_decay(gateset: &GateSet, spam: &Spam, lengths: &[usize]) -> Result<ExactDecay> {
    let (rho, e) = spam_vectors(gateset, spam)?;
    let r = build_r_matrix(gateset);
    let n = r.matrix.nrows();
    let b = r.block;
    let off = r.identity_index * b;
    let order = r.order as f64;

    let mut x0 = DVector::zeros(n);
    x0.rows_mut(off, b).copy_from(&rho);
    let mut e_full = DVector::zeros(n);
    e_full.rows_mut(off, b).copy_from(&e);

    let dec = eigendecompose(&r.matrix);
    let mut sorted = dec.values.clone();
    sort_by_modulus(&mut sorted);

    let iterated = iterate_powers(&r.matrix, &x0, &e_full, order, lengths);
    let check_lengths = [0usize, 1];
    let check = iterate_powers(&r.matrix, &x0, &e_full, order, &check_lengths);

    let spectral = (dec.condition <= MAX_EIGENVECTOR_CONDITION && dec.residual <= 1e-10)
        .then(|| dec.inverse_vectors())
        .flatten()
        .and_then(|vinv| {
            let left: Vec<Complex64> =
                (0..n).map(|i| (0..n).map(|k| dec.vectors[(k, i)] * e_full[k]).sum::<Complex64>()).collect();
            let right = vinv * x0.map(|v| Complex64::new(v, 0.0));
            let weights: Vec<Complex64> = left.iter().zip(right.iter()).map(|(l, r)| l * r * order).collect();
            let eval = |m: usize| -> Complex64 {
                weights.iter().zip(&dec.values).map(|(w, l)| w * l.powu(m as u32 + 1)).sum()
            };
            let trusted = check_lengths.iter().zip(&check).all(|(&m, &p)| {
                let z = eval(m);
                z.im.abs() <= 1e-10 && (z.re - p).abs() <= 1e-12
            });
            if !trusted {
                return None;
            }
            let values: Vec<Complex64> = lengths.iter().map(|&m| eval(m)).collect();
            values
                .iter()
                .all(|z| z.im.abs() <= 1e-10)
                .then(|| (weights, values.iter().map(|z| z.re).collect::<Vec<f64>>()))
        });

    let (method, weights, probabilities) = match spectral {
        Some((w, p)) => (DecayMethod::Spectral, Some(w), p),
        None => (DecayMethod::Iterated, None, iterated),
    };
    Ok(ExactDecay {
        spectral: SpectralDecay { source: SpectralSource::RMatrix, eigenvalues: sorted, weights },
        method,
        eigenvector_condition: dec.condition,
        lengths: lengths.to_vec(),
        probabilities,
    })
}

/// `order · eᵀ 𝓡^{m+1} x0` for each requested `m`, in one sweep.
fn iterate_powers(r: &DMatrix<f64>, x0: &DVector<f64>, e: &DVector<f64>, order: f64, lengths: &[usize]) -> Vec<f64> {
    let Some(&max_m) = lengths.iter().max() else {
        return Vec::new();
    };
    let mut at_power = vec![f64::NAN; max_m + 2];
    let mut x = x0.clone();
    let mut next = DVector::zeros(x.len());
    for slot in at_power.iter_mut().skip(1) {
        next.gemv(1.0, r, &x, 0.0);
        std::mem::swap(&mut x, &mut next);
        *slot = order * e.dot(&x);
    }
    lengths.iter().map(|&m| at_power[m + 1]).collect()
}

/// `𝓛` (or `𝓛′` when `primed`) as a `16 × 16` matrix on column-stacked PTMs.
#[derive(Clone, Debug)]
pub struct LMap {
    pub matrix: DMatrix<f64>,
    pub primed: bool,
}

pub fn build_l_map(gateset: &GateSet, primed: bool) -> LMap {
    let group = gateset.ideal();
    let n = gateset.dim() * gateset.dim();
    let mut matrix = DMatrix::zeros(n * n, n * n);
    for (i, tilde) in gateset.imperfect().iter().enumerate() {
        let inv = group.element(group.inverse(i)).ptm();
        matrix += if primed {
            // 𝓛′(ℰ) = avg C̃_i ℰ C_i⁻¹
            inv.transpose().kronecker(tilde.ptm())
        } else {
            // 𝓛(ℰ) = avg C_i⁻¹ ℰ C̃_i
            tilde.ptm().transpose().kronecker(inv)
        };
    }
    matrix /= gateset.len() as f64;
    LMap { matrix, primed }
}

impl LMap {
    /// Eigenvalues sorted by descending modulus.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut v = eigenvalues(&self.matrix);
        sort_by_modulus(&mut v);
        v
    }

    pub fn apply(&self, s: &Superoperator) -> Superoperator {
        let n = s.size();
        let v = DVector::from_column_slice(s.ptm().as_slice());
        let out = &self.matrix * v;
        Superoperator::from_ptm_unchecked(s.dim(), DMatrix::from_column_slice(n, n, out.as_slice()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaResult {
    pub gamma: f64,
    pub r_gamma: f64,
    /// Moduli of the eigenvalues after `1` and `γ`, descending.
    pub subdominant_moduli: Vec<f64>,
    pub eigenvalues: Vec<Complex64>,
}

impl GammaResult {
    /// `Σ_{i≥2} |γ_i|^m`: `κ_m` is at most this times the largest `|ω_i|`.
    pub fn kappa_scale_at(&self, m: u32) -> f64 {
        self.subdominant_moduli.iter().map(|g| g.powi(m as i32)).sum()
    }
}

/// `γ`: the largest-modulus eigenvalue of `𝓛` other than the unit eigenvalue.
pub fn gamma_and_r_gamma(l: &LMap, dim: usize) -> Result<GammaResult> {
    let eigenvalues = l.spectrum();
    let unit: Vec<usize> = eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, z)| (**z - Complex64::new(1.0, 0.0)).norm() <= 1e-9)
        .map(|(i, _)| i)
        .collect();
    if unit.len() != 1 {
        return Err(Error::SpectralAssumption(format!(
            "expected exactly one eigenvalue within 1e-9 of 1, found {}",
            unit.len()
        )));
    }
    let rest: Vec<Complex64> = eigenvalues.iter().enumerate().filter(|(i, _)| *i != unit[0]).map(|(_, z)| *z).collect();
    let gamma_c = rest[0];
    if gamma_c.im.abs() >= 1e-9 {
        return Err(Error::SpectralAssumption(format!("gamma = {gamma_c} is not real")));
    }
    let gamma = gamma_c.re;
    Ok(GammaResult {
        gamma,
        r_gamma: rb_number(gamma, dim),
        subdominant_moduli: rest[1..].iter().map(|z| z.norm()).collect(),
        eigenvalues,
    })
}

/// `Tr(E Λ̄ [𝓛^m(𝟙)](ρ))` for each length.
pub fn predicted_decay(gateset: &GateSet, spam: &Spam, lengths: &[usize]) -> Result<Vec<f64>> {
    let (rho, e) = spam_vectors(gateset, spam)?;
    let l = build_l_map(gateset, false);
    let mean = error_maps(gateset)?.mean;
    let dim = gateset.dim();
    let n = dim * dim;
    let Some(&max_m) = lengths.iter().max() else {
        return Ok(Vec::new());
    };
    let mut at = Vec::with_capacity(max_m + 1);
    let mut x = DVector::from_column_slice(DMatrix::<f64>::identity(n, n).as_slice());
    let mut next = DVector::zeros(n * n);
    for m in 0..=max_m {
        if m > 0 {
            next.gemv(1.0, &l.matrix, &x, 0.0);
            std::mem::swap(&mut x, &mut next);
        }
        let op = DMatrix::from_column_slice(n, n, x.as_slice());
        at.push(e.dot(&(mean.ptm() * op * &rho)));
    }
    Ok(lengths.iter().map(|&m| at[m]).collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeltaBound {
    pub delta_diamond: f64,
    /// `‖Λ_i - Λ̄‖_⋄` per Clifford.
    pub per_gate_distances: Vec<f64>,
}

/// `δ_⋄ = ½ avg_i ‖Λ_i - Λ̄‖_⋄`.
pub fn delta_diamond(gateset: &GateSet) -> Result<DeltaBound> {
    delta_diamond_with(gateset, &DiamondOptions::default())
}

pub fn delta_diamond_with(gateset: &GateSet, opts: &DiamondOptions) -> Result<DeltaBound> {
    let maps = error_maps(gateset)?;
    let per_gate_distances =
        maps.per_gate.par_iter().map(|lam| diamond_distance_with(lam, &maps.mean, opts)).collect::<Result<Vec<_>>>()?;
    let delta_diamond = 0.5 * per_gate_distances.iter().sum::<f64>() / per_gate_distances.len() as f64;
    Ok(DeltaBound { delta_diamond, per_gate_distances })
}

/// Exhaustive average over all `|𝒞|^m` sequences.
pub const BRUTE_FORCE_MAX_M: usize = 3;

pub fn brute_force_pm(gateset: &GateSet, spam: &Spam, m: usize) -> Result<f64> {
    if m > BRUTE_FORCE_MAX_M {
        return Err(Error::LengthTooLarge { m, max: BRUTE_FORCE_MAX_M });
    }
    let group = gateset.ideal();
    let eval = SequenceEvaluator::new(gateset.imperfect(), spam)?;
    let n = group.len();
    let total = n.pow(m as u32);
    let mut sum = 0.0;
    let mut seq = vec![0usize; m + 1];
    for code in 0..total {
        let mut c = code;
        for slot in seq.iter_mut().take(m) {
            *slot = c % n;
            c /= n;
        }
        seq[m] = group.inverse(group.product_of(&seq[..m]));
        sum += eval.evaluate(seq.iter().copied());
    }
    Ok(sum / total as f64)
}

/// Exact and predicted decays together with the `δ_⋄` band.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TheoryReport {
    pub lengths: Vec<usize>,
    pub exact: Vec<f64>,
    pub predicted: Vec<f64>,
    pub gamma: Option<GammaResult>,
    pub gamma_error: Option<String>,
    pub delta: DeltaBound,
    pub exact_method: DecayMethod,
}

pub fn theory_report(gateset: &GateSet, spam: &Spam, lengths: &[usize]) -> Result<TheoryReport> {
    let exact = exact_decay(gateset, spam, lengths)?;
    let predicted = predicted_decay(gateset, spam, lengths)?;
    let (gamma, gamma_error) = match gamma_and_r_gamma(&build_l_map(gateset, false), gateset.dim()) {
        Ok(g) => (Some(g), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(TheoryReport {
        lengths: lengths.to_vec(),
        exact: exact.probabilities,
        predicted,
        gamma,
        gamma_error,
        delta: delta_diamond(gateset)?,
        exact_method: exact.method,
    })
}

impl TheoryReport {
    /// Columns `m,p_exact,p_predicted,bound_lo,bound_hi`.
    pub fn to_csv(&self) -> String {
        let d = self.delta.delta_diamond;
        csv_table(
            &["m", "p_exact", "p_predicted", "bound_lo", "bound_hi"],
            self.lengths.iter().enumerate().map(|(i, m)| {
                vec![
                    m.to_string(),
                    fmt_f64(self.exact[i]),
                    fmt_f64(self.predicted[i]),
                    fmt_f64(self.predicted[i] - d),
                    fmt_f64(self.predicted[i] + d),
                ]
            }),
        )
    }

    /// `{gamma, r_gamma, delta_diamond, eigenvalues[]}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "gamma": self.gamma.as_ref().map(|g| g.gamma),
            "r_gamma": self.gamma.as_ref().map(|g| g.r_gamma),
            "gamma_error": self.gamma_error,
            "delta_diamond": self.delta.delta_diamond,
            "eigenvalues": self.gamma.as_ref().map(|g| {
                g.eigenvalues.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()
            }),
            "exact_method": self.exact_method,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::{build_gateset, ErrorModel};
    use crate::superop::depolarizing_channel;

    #[test]
    fn perfect_r_matrix_inverts_perfectly() {
        let gs = build_gateset(&ErrorModel::Perfect).unwrap();
        let r = build_r_matrix(&gs);
        assert_eq!(r.matrix().nrows(), 96);
        let top = r.sandwich(&(r.matrix() * r.matrix()));
        assert!((top - DMatrix::<f64>::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn r_blocks_follow_cayley_table() {
        let gs = build_gateset(&ErrorModel::CoherentZ { theta: 0.1 }).unwrap();
        let r = build_r_matrix(&gs);
        let g = gs.ideal();
        for k in 0..24 {
            for j in 0..24 {
                let expected = gs.imperfect()[g.compose(k, g.inverse(j))].ptm() / 24.0;
                assert!((r.block_at(k, j) - expected).amax() == 0.0);
            }
        }
    }

    #[test]
    fn depolarizing_exact_decay_closed_form() {
        let lambda: f64 = 0.97;
        let gs = build_gateset(&ErrorModel::gate_independent_depolarizing(lambda).unwrap()).unwrap();
        let lengths = [1, 2, 5, 50, 300];
        let dec = exact_decay(&gs, &Spam::ideal(2), &lengths).unwrap();
        for (m, p) in lengths.iter().zip(&dec.probabilities) {
            assert!((p - (0.5 + 0.5 * lambda.powi(*m as i32 + 1))).abs() < 1e-12);
        }
        let pred = predicted_decay(&gs, &Spam::ideal(2), &lengths).unwrap();
        for (a, b) in pred.iter().zip(&dec.probabilities) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn l_map_gate_independent_spectrum() {
        let lambda = 0.9;
        let gs = build_gateset(&ErrorModel::gate_independent_depolarizing(lambda).unwrap()).unwrap();
        let l = build_l_map(&gs, false);
        let spec = l.spectrum();
        assert!((spec[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((spec[1] - Complex64::new(lambda, 0.0)).norm() < 1e-12);
        assert!(spec[2..].iter().all(|z| z.norm() < 1e-12));
        let g = gamma_and_r_gamma(&l, 2).unwrap();
        assert!((g.gamma - lambda).abs() < 1e-12);
        assert!((g.r_gamma - 0.05).abs() < 1e-12);
    }

    #[test]
    fn perfect_l_map_is_twirl_projector() {
        let gs = build_gateset(&ErrorModel::Perfect).unwrap();
        let l = build_l_map(&gs, false);
        // Idempotent, rank 2.
        assert!((&l.matrix * &l.matrix - &l.matrix).amax() < 1e-12);
        assert!((l.matrix.trace() - 2.0).abs() < 1e-12);
        assert!(gamma_and_r_gamma(&l, 2).is_err());
    }

    #[test]
    fn l_map_apply_matches_definition() {
        let gs = build_gateset(&ErrorModel::CoherentZ { theta: 0.2 }).unwrap();
        let l = build_l_map(&gs, false);
        let e = depolarizing_channel(0.8, 2).unwrap();
        let g = gs.ideal();
        let mut direct = DMatrix::zeros(4, 4);
        for i in 0..24 {
            direct += g.element(g.inverse(i)).ptm() * e.ptm() * gs.imperfect()[i].ptm();
        }
        direct /= 24.0;
        assert!((l.apply(&e).ptm() - direct).amax() < 1e-14);
    }

    #[test]
    fn brute_force_limits() {
        let gs = build_gateset(&ErrorModel::Perfect).unwrap();
        assert!((brute_force_pm(&gs, &Spam::ideal(2), 2).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(brute_force_pm(&gs, &Spam::ideal(2), 4), Err(Error::LengthTooLarge { .. })));
    }

    #[test]
    fn delta_diamond_vanishes_for_gate_independent() {
        let gs = build_gateset(&ErrorModel::gate_independent_depolarizing(0.95).unwrap()).unwrap();
        assert!(delta_diamond(&gs).unwrap().delta_diamond < 1e-12);
        let perfect = build_gateset(&ErrorModel::Perfect).unwrap();
        assert!(delta_diamond(&perfect).unwrap().delta_diamond < 1e-12);
    }

    #[test]
    fn report_csv_has_bounds() {
        let gs = build_gateset(&ErrorModel::CoherentZ { theta: 0.1 }).unwrap();
        let rep = theory_report(&gs, &Spam::ideal(2), &[1, 2]).unwrap();
        let csv = rep.to_csv();
        assert!(csv.starts_with("m,p_exact,p_predicted,bound_lo,bound_hi\n"));
        assert_eq!(csv.lines().count(), 3);
        assert!(rep.to_json()["gamma"].as_f64().unwrap() < 1.0);
    }
}
