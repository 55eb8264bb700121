//! Gauge freedom of gatesets.
//!
//! A gauge transformation `M` maps gates to `M G M⁻¹`, states to `M ρ` and
//! effects to `M⁻ᵀ E` in the Pauli-transfer representation. Every circuit
//! probability is unchanged, but the average gateset infidelity `ε` is not.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford::{build_gateset, ErrorModel, GateSet};
use crate::eigen::{right_singular_pairs, singular_values};
use crate::error::{Error, Result};
use crate::export::{csv_table, fmt_f64};
use crate::optim::NelderMead;
use crate::rb::Spam;
use crate::seeding::derive_seed;
use crate::superop::{agi, Effect, StateVector, Superoperator};
use crate::theory::{build_l_map, gamma_and_r_gamma};

/// Gates with a minimal Choi eigenvalue at or above `-CP_TOL` count as CP.
pub const CP_TOL: f64 = 1e-8;

/// Invertible `M` whose first PTM row is `(1, 0, …, 0)`, so conjugation
/// preserves trace preservation.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeTransform {
    dim: usize,
    m: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl GaugeTransform {
    /// The first row must equal `e₀ᵀ` within `1e-9`; it is then set exactly.
    pub fn new(dim: usize, m: DMatrix<f64>) -> Result<Self> {
        let n = dim * dim;
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.nrows().max(m.ncols()) });
        }
        let mut m = m;
        let deviation = (0..n).map(|j| (m[(0, j)] - if j == 0 { 1.0 } else { 0.0 }).abs()).fold(0.0, f64::max);
        if deviation > 1e-9 {
            return Err(Error::InvalidInput(format!("gauge first row deviates from e0 by {deviation:e}")));
        }
        m.row_mut(0).fill(0.0);
        m[(0, 0)] = 1.0;
        let mut inverse = m.clone().try_inverse().ok_or(Error::Singular)?;
        inverse.row_mut(0).fill(0.0);
        inverse[(0, 0)] = 1.0;
        let err = (&m * &inverse - DMatrix::identity(n, n)).amax();
        if !err.is_finite() || err > 1e-10 {
            return Err(Error::Singular);
        }
        Ok(GaugeTransform { dim, m, inverse })
    }

    pub fn identity(dim: usize) -> Self {
        let n = dim * dim;
        GaugeTransform { dim, m: DMatrix::identity(n, n), inverse: DMatrix::identity(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn inverse_matrix(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// The transform with `M` and `M⁻¹` exchanged.
    pub fn inverse(&self) -> GaugeTransform {
        GaugeTransform { dim: self.dim, m: self.inverse.clone(), inverse: self.m.clone() }
    }

    /// `M G M⁻¹`.
    pub fn conjugate(&self, g: &Superoperator) -> Result<Superoperator> {
        self.check(g.dim())?;
        Ok(Superoperator::from_ptm_unchecked(self.dim, &self.m * g.ptm() * &self.inverse))
    }

    pub fn conjugate_all(&self, gates: &[Superoperator]) -> Result<Vec<Superoperator>> {
        gates.iter().map(|g| self.conjugate(g)).collect()
    }

    /// `M ρ`.
    pub fn push_state(&self, rho: &StateVector) -> Result<StateVector> {
        self.check(rho.dim())?;
        Ok(StateVector::from_coeffs_unchecked(self.dim, &self.m * rho.coeffs()))
    }

    /// `M⁻ᵀ E`, so that `⟨E′, ρ′⟩ = ⟨E, ρ⟩`.
    pub fn pull_effect(&self, e: &Effect) -> Result<Effect> {
        self.check(e.dim())?;
        Effect::from_coeffs(self.dim, self.inverse.tr_mul(e.coeffs()))
    }

    pub fn apply_spam(&self, spam: &Spam) -> Result<Spam> {
        Ok(Spam { state: self.push_state(&spam.state)?, effect: self.pull_effect(&spam.effect)? })
    }

    /// Conjugates the imperfect gates; ideal gates are left alone.
    pub fn apply_gateset(&self, gateset: &GateSet) -> Result<GateSet> {
        gateset.with_imperfect(self.conjugate_all(gateset.imperfect())?)
    }

    fn check(&self, dim: usize) -> Result<()> {
        if dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: dim });
        }
        Ok(())
    }
}

/// Average gateset infidelity: the mean of `agi(C̃_i, C_i)`.
pub fn agsi(imperfect: &[Superoperator], ideal: &[Superoperator]) -> Result<f64> {
    if imperfect.len() != ideal.len() || ideal.is_empty() {
        return Err(Error::DimensionMismatch { expected: ideal.len(), found: imperfect.len() });
    }
    let mut sum = 0.0;
    for (t, g) in imperfect.iter().zip(ideal) {
        sum += agi(t, g)?;
    }
    Ok(sum / ideal.len() as f64)
}

pub fn gateset_agsi(gateset: &GateSet) -> Result<f64> {
    agsi(gateset.imperfect(), gateset.ideal().elements())
}

/// Smallest Choi eigenvalue over all gates.
pub fn min_choi_over(gates: &[Superoperator]) -> Result<f64> {
    gates.iter().try_fold(f64::INFINITY, |acc, g| Ok(acc.min(g.min_choi_eigenvalue()?)))
}

/// `diag(1, 1, α, 1)`: rescales the `σ_y` component by `α`.
pub fn m_alpha(alpha: f64) -> Result<GaugeTransform> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    GaugeTransform::new(2, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, alpha, 1.0])))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeReport {
    pub epsilon_before: f64,
    pub epsilon_after: f64,
    pub all_cp_after: bool,
    pub min_choi_eigenvalue_after: f64,
    pub r_reference: f64,
}

/// `ε` before and after transforming the imperfect gates by `m`.
pub fn gauge_report(gateset: &GateSet, m: &GaugeTransform, r_reference: f64) -> Result<GaugeReport> {
    let after = m.conjugate_all(gateset.imperfect())?;
    let min_choi = min_choi_over(&after)?;
    Ok(GaugeReport {
        epsilon_before: gateset_agsi(gateset)?,
        epsilon_after: agsi(&after, gateset.ideal().elements())?,
        all_cp_after: min_choi >= -CP_TOL,
        min_choi_eigenvalue_after: min_choi,
        r_reference,
    })
}

/// `(3 - λ(α² + α + 1)/α) / 6`: the AGI of a transformed depolarized Clifford
/// that does not fix `±σ_y`.
pub fn counterexample_gate_agi(lambda: f64, alpha: f64) -> f64 {
    (3.0 - lambda * (alpha * alpha + alpha + 1.0) / alpha) / 6.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CounterexamplePoint {
    pub alpha: f64,
    pub report: GaugeReport,
    /// Closed-form per-gate AGI for gates not fixing `±σ_y`.
    pub closed_form_agi: f64,
    /// Largest deviation of those gates' `agi` from the closed form.
    pub closed_form_error: f64,
}

impl CounterexamplePoint {
    /// CP and strictly below `r`.
    pub fn is_success(&self) -> bool {
        self.report.all_cp_after && self.report.epsilon_after < self.report.r_reference
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CounterexampleSweep {
    pub lambda: f64,
    pub points: Vec<CounterexamplePoint>,
}

impl CounterexampleSweep {
    pub fn successes(&self) -> impl Iterator<Item = &CounterexamplePoint> {
        self.points.iter().filter(|p| p.is_success() && p.alpha != 1.0)
    }

    /// Columns `alpha,epsilon,min_choi_eigenvalue,all_cp,r_reference`.
    pub fn to_csv(&self) -> String {
        csv_table(
            &["alpha", "epsilon", "min_choi_eigenvalue", "all_cp", "r_reference"],
            self.points.iter().map(|p| {
                vec![
                    fmt_f64(p.alpha),
                    fmt_f64(p.report.epsilon_after),
                    fmt_f64(p.report.min_choi_eigenvalue_after),
                    p.report.all_cp_after.to_string(),
                    fmt_f64(p.report.r_reference),
                ]
            }),
        )
    }
}

/// Depolarized Cliffords `𝒟_λ C_i` transformed by `M_α` for each `α`.
pub fn counterexample_epsilon_min(lambda: f64, alpha_grid: &[f64]) -> Result<CounterexampleSweep> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidInput(format!("lambda must lie in [0, 1), got {lambda}")));
    }
    let gateset = build_gateset(&ErrorModel::gate_independent_depolarizing(lambda)?)?;
    let r_reference = (1.0 - lambda) / 2.0;
    let fixes_y: Vec<bool> = gateset.ideal().elements().iter().map(|c| c.ptm()[(2, 2)].abs() > 0.5).collect();
    let points = alpha_grid
        .par_iter()
        .map(|&alpha| {
            let m = m_alpha(alpha)?;
            let report = gauge_report(&gateset, &m, r_reference)?;
            let closed_form_agi = counterexample_gate_agi(lambda, alpha);
            let mut closed_form_error: f64 = 0.0;
            for (i, (t, c)) in gateset.imperfect().iter().zip(gateset.ideal().elements()).enumerate() {
                if !fixes_y[i] {
                    let direct = agi(&m.conjugate(t)?, c)?;
                    closed_form_error = closed_form_error.max((direct - closed_form_agi).abs());
                }
            }
            Ok(CounterexamplePoint { alpha, report, closed_form_agi, closed_form_error })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CounterexampleSweep { lambda, points })
}

#[derive(Clone, Debug)]
pub struct EpsilonMinResult {
    /// Best feasible `ε` found; an upper bound on the true minimum.
    pub epsilon_min: f64,
    pub m_best: GaugeTransform,
    /// Smallest Choi eigenvalue of the gates at `m_best`.
    pub min_choi_eigenvalue: f64,
    /// `ε` of the input representation.
    pub epsilon_input: f64,
    /// Whether any point other than the input was feasible and better.
    pub improved: bool,
}

/// Gains below this are rounding noise and do not replace the incumbent.
const IMPROVEMENT_FLOOR: f64 = 1e-15;

/// Penalty weight on squared CP violations.
const CP_PENALTY: f64 = 1e6;

/// Local search for the CP-constrained minimum of `ε` over TP-form gauges
/// `M = 𝟙 + P`, `P` supported on the last three rows.
///
/// Restart `k` starts from a random perturbation seeded by `(seed, k)`;
/// restart 0 starts at the identity. The best feasible evaluation across all
/// restarts is returned, so adding restarts never worsens the result.
pub fn epsilon_min_search(gateset: &GateSet, restarts: usize, seed: u64) -> Result<EpsilonMinResult> {
    let dim = gateset.dim();
    let n = dim * dim;
    let ideal_inv: Vec<DMatrix<f64>> =
        gateset.ideal().elements().iter().map(|c| c.inverse().map(Superoperator::into_ptm)).collect::<Result<_>>()?;
    let epsilon_input = gateset_agsi(gateset)?;
    let input_min_choi = min_choi_over(gateset.imperfect())?;
    if input_min_choi < -CP_TOL {
        return Err(Error::InvalidChannel(format!("input gateset is not CP (min Choi eigenvalue {input_min_choi:e})")));
    }
    let d = dim as f64;
    let to_matrix = |x: &[f64]| -> DMatrix<f64> {
        let mut m = DMatrix::identity(n, n);
        for (k, v) in x.iter().enumerate() {
            m[(1 + k / n, k % n)] += v;
        }
        m
    };
    // (ε, min Choi) at x, or None when M is singular.
    let evaluate = |x: &[f64]| -> Option<(f64, f64)> {
        let m = to_matrix(x);
        let minv = m.clone().try_inverse()?;
        let mut eps = 0.0;
        let mut min_choi = f64::INFINITY;
        for (g, inv) in gateset.imperfect().iter().zip(&ideal_inv) {
            let t = &m * g.ptm() * &minv;
            eps += (d * d - (&t * inv).trace()) / (d * (d + 1.0));
            let choi = Superoperator::from_ptm_unchecked(dim, t).min_choi_eigenvalue().ok()?;
            min_choi = min_choi.min(choi);
        }
        Some((eps / gateset.len() as f64, min_choi))
    };

    let free = n * (n - 1);
    let nm = NelderMead { initial_step: 2e-3, max_evaluations: 3000, f_tol: 1e-16 };
    let runs: Vec<(f64, Vec<f64>)> = (0..restarts.max(1))
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
            let x0: Vec<f64> = if k == 0 {
                vec![0.0; free]
            } else {
                (0..free)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        1e-3 * z
                    })
                    .collect()
            };
            let mut best = (f64::INFINITY, Vec::new());
            nm.minimize(&x0, |x| match evaluate(x) {
                None => f64::INFINITY,
                Some((eps, min_choi)) => {
                    if min_choi >= -CP_TOL && eps < best.0 {
                        best = (eps, x.to_vec());
                    }
                    let violation = (-min_choi).max(0.0);
                    eps + CP_PENALTY * violation * violation
                }
            });
            best
        })
        .collect();

    let mut incumbent = (epsilon_input, GaugeTransform::identity(dim), input_min_choi, false);
    for (eps, x) in runs {
        if eps < incumbent.0 {
            if let Ok(t) = GaugeTransform::new(dim, to_matrix(&x)) {
                let after = t.conjugate_all(gateset.imperfect())?;
                let exact = agsi(&after, gateset.ideal().elements())?;
                let min_choi = min_choi_over(&after)?;
                if min_choi >= -CP_TOL && exact < incumbent.0 - IMPROVEMENT_FLOOR {
                    incumbent = (exact, t, min_choi, true);
                }
            }
        }
    }
    let (epsilon_min, m_best, min_choi_eigenvalue, improved) = incumbent;
    Ok(EpsilonMinResult { epsilon_min, m_best, min_choi_eigenvalue, epsilon_input, improved })
}

/// Gauge `ℒ` solving `𝓛′(ℒ) = ℒ 𝒟_γ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WallmanGauge {
    pub l_op: Superoperator,
    pub gamma: f64,
    pub r_gamma: f64,
    /// `ε` of the gateset transformed by `ℒ⁻¹`.
    pub epsilon_in_gauge: f64,
    pub min_choi_eigenvalue: f64,
    pub null_space_dim: usize,
    /// `‖𝓛′(ℒ) - ℒ 𝒟_γ‖_F` with `ℒ₀₀ = 1`.
    pub residual: f64,
}

impl WallmanGauge {
    pub fn transform(&self) -> Result<GaugeTransform> {
        Ok(GaugeTransform::new(self.l_op.dim(), self.l_op.ptm().clone())?.inverse())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain data")
    }
}

const NULL_RELATIVE_TOL: f64 = 1e-8;
const NULL_FLOOR: f64 = 1e-6;
const COMBINATION_SAMPLES: usize = 4000;
const COMBINATION_SEED: u64 = 0x1a11_a5ed;

pub fn wallman_gauge(gateset: &GateSet) -> Result<WallmanGauge> {
    let dim = gateset.dim();
    let n = dim * dim;
    let gamma_result = gamma_and_r_gamma(&build_l_map(gateset, false), dim)?;
    let gamma = gamma_result.gamma;
    let mprime = build_l_map(gateset, true).matrix;
    let mut diag = vec![gamma; n];
    diag[0] = 1.0;
    let d_gamma = DMatrix::from_diagonal(&DVector::from_vec(diag));
    // vec(ℒ 𝒟) = (𝒟ᵀ ⊗ 𝟙) vec(ℒ)
    let a = &mprime - d_gamma.transpose().kronecker(&DMatrix::<f64>::identity(n, n));

    let pairs = right_singular_pairs(&a).ok_or_else(|| Error::Internal("SVD failed".into()))?;
    let smax = pairs[0].0;
    let mut null: Vec<DVector<f64>> =
        pairs.iter().filter(|(s, _)| *s <= NULL_RELATIVE_TOL * smax).map(|(_, v)| v.clone()).collect();
    if null.is_empty() {
        let (smin, v) = pairs.last().expect("non-empty");
        if *smin > NULL_FLOOR {
            return Err(Error::GaugeConstruction(format!("no null space: smallest singular value {smin:e}")));
        }
        null.push(v.clone());
    }
    let null_space_dim = null.len();

    let reshape = |c: &[f64]| -> DMatrix<f64> {
        let v = null.iter().zip(c).fold(DVector::zeros(n * n), |acc, (b, w)| acc + b * *w);
        DMatrix::from_column_slice(n, n, v.as_slice())
    };
    let smallest_sv = |m: &DMatrix<f64>| singular_values(m).last().copied().unwrap_or(0.0);
    let mut candidates: Vec<Vec<f64>> =
        (0..null_space_dim).map(|i| (0..null_space_dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    if null_space_dim > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(COMBINATION_SEED);
        for _ in 0..COMBINATION_SAMPLES {
            let c: Vec<f64> = (0..null_space_dim).map(|_| -> f64 { StandardNormal.sample(&mut rng) }).collect();
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            candidates.push(c.iter().map(|v| v / norm).collect());
        }
    }
    let (best_sv, best) = candidates.iter().map(|c| (smallest_sv(&reshape(c)), c)).fold((-1.0, None), |acc, (s, c)| {
        if s > acc.0 {
            (s, Some(c))
        } else {
            acc
        }
    });
    let best = best.expect("at least one candidate");
    if best_sv <= 1e-10 {
        return Err(Error::GaugeConstruction("no invertible combination in the null space".into()));
    }
    let mut l = reshape(best);
    if l[(0, 0)].abs() < 1e-12 {
        return Err(Error::GaugeConstruction("L has vanishing trace component".into()));
    }
    l /= l[(0, 0)];

    let lv = DVector::from_column_slice(l.as_slice());
    let lhs = &mprime * &lv;
    let rhs = &l * &d_gamma;
    let residual = (lhs - DVector::from_column_slice(rhs.as_slice())).norm();

    let l_transform = GaugeTransform::new(dim, l.clone())
        .map_err(|e| Error::GaugeConstruction(format!("L is not of trace-preserving form: {e}")))?;
    let m = l_transform.inverse();
    let after = m.conjugate_all(gateset.imperfect())?;
    Ok(WallmanGauge {
        l_op: Superoperator::from_ptm(dim, l_transform.matrix().clone())?,
        gamma,
        r_gamma: gamma_result.r_gamma,
        epsilon_in_gauge: agsi(&after, gateset.ideal().elements())?,
        min_choi_eigenvalue: min_choi_over(&after)?,
        null_space_dim,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superop::born;

    #[test]
    fn identity_transform_changes_nothing() {
        let gs = build_gateset(&ErrorModel::CoherentZ { theta: 0.1 }).unwrap();
        let t = GaugeTransform::identity(2);
        let after = t.apply_gateset(&gs).unwrap();
        for (a, b) in after.imperfect().iter().zip(gs.imperfect()) {
            assert_eq!(a.ptm(), b.ptm());
        }
    }

    #[test]
    fn non_tp_form_rejected() {
        let mut m = DMatrix::identity(4, 4);
        m[(0, 1)] = 0.1;
        assert!(GaugeTransform::new(2, m).is_err());
        let mut s = DMatrix::identity(4, 4);
        s[(3, 3)] = 0.0;
        assert!(matches!(GaugeTransform::new(2, s), Err(Error::Singular)));
        assert!(m_alpha(0.0).is_err());
        assert!(m_alpha(-1.0).is_err());
    }

    #[test]
    fn probabilities_preserved() {
        let gs = build_gateset(&ErrorModel::CoherentZ { theta: 0.3 }).unwrap();
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[1.0, 0.0, 0.0, 0.0, 0.1, 1.2, 0.3, 0.0, -0.2, 0.1, 0.9, 0.4, 0.05, 0.0, 0.2, 1.1],
        );
        let t = GaugeTransform::new(2, m).unwrap();
        let spam = Spam::ideal(2);
        let spam2 = t.apply_spam(&spam).unwrap();
        for g in gs.imperfect() {
            let p = born(&spam.effect, g, &spam.state).unwrap();
            let q = born(&spam2.effect, &t.conjugate(g).unwrap(), &spam2.state).unwrap();
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn depolarizing_commutes_with_m_alpha() {
        let d = crate::superop::depolarizing_channel(0.9, 2).unwrap();
        let t = m_alpha(1.3).unwrap();
        assert!((t.conjugate(&d).unwrap().ptm() - d.ptm()).amax() < 1e-15);
    }

    #[test]
    fn counterexample_closed_form_and_success() {
        let grid: Vec<f64> = (-20..=20).map(|k| 1.0 + 0.0005 * k as f64).collect();
        let sweep = counterexample_epsilon_min(0.99, &grid).unwrap();
        let at_one = sweep.points.iter().find(|p| p.alpha == 1.0).unwrap();
        assert!((at_one.report.epsilon_after - 0.005).abs() < 1e-12);
        assert!(sweep.points.iter().all(|p| p.closed_form_error < 1e-12));
        assert!(sweep.successes().next().is_some());
        assert!(sweep.to_csv().starts_with("alpha,epsilon,min_choi_eigenvalue,all_cp,r_reference\n"));
    }

    #[test]
    fn perfect_gateset_epsilon_min_is_zero() {
        let gs = build_gateset(&ErrorModel::Perfect).unwrap();
        let res = epsilon_min_search(&gs, 2, 1).unwrap();
        assert!(res.epsilon_min.abs() < 1e-12);
        assert!(!res.improved);
    }

    #[test]
    fn wallman_gate_independent() {
        let gs = build_gateset(&ErrorModel::gate_independent_depolarizing(0.95).unwrap()).unwrap();
        let w = wallman_gauge(&gs).unwrap();
        assert!(w.residual < 1e-8);
        assert!((w.epsilon_in_gauge - w.r_gamma).abs() < 1e-8);
        assert!((w.r_gamma - 0.025).abs() < 1e-12);
    }

    #[test]
    fn wallman_coherent() {
        let gs = build_gateset(&ErrorModel::CoherentZ { theta: 0.1 }).unwrap();
        let w = wallman_gauge(&gs).unwrap();
        assert!(w.residual < 1e-8, "{}", w.residual);
        assert!((w.epsilon_in_gauge - w.r_gamma).abs() < 1e-8);
    }
}
