//! Simulated randomized benchmarking in the infinite-shot limit.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford::{CliffordGroup, GateSet};
use crate::error::{Error, Result};
use crate::fit::{fit_decay, FitModel, FitResult};
use crate::seeding::{derive_seed, task_rng};
use crate::superop::{Effect, StateVector, Superoperator};

/// State preparation and measurement effect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spam {
    pub state: StateVector,
    pub effect: Effect,
}

impl Spam {
    /// Preparation of and projection onto the `+1` eigenstate of `σ_z`.
    pub fn ideal(dim: usize) -> Self {
        Spam { state: StateVector::zero_state(dim), effect: Effect::projector_zero(dim) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbConfig {
    pub lengths: Vec<usize>,
    pub k_per_length: usize,
    pub seed: u64,
    pub repeats: usize,
    pub spam: Spam,
}

/// `{1, 51, 101, …, 2001}`.
pub fn default_lengths() -> Vec<usize> {
    (0..=40).map(|i| 1 + 50 * i).collect()
}

impl Default for RbConfig {
    fn default() -> Self {
        Self { lengths: default_lengths(), k_per_length: 500, seed: 0, repeats: 50, spam: Spam::ideal(2) }
    }
}

impl RbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() {
            return Err(Error::InvalidInput("at least one sequence length is required".into()));
        }
        if self.lengths.contains(&0) {
            return Err(Error::InvalidInput("sequence lengths must be >= 1".into()));
        }
        if self.k_per_length == 0 {
            return Err(Error::InvalidInput("k_per_length must be >= 1".into()));
        }
        if self.spam.state.dim() != self.spam.effect.dim() {
            return Err(Error::DimensionMismatch { expected: self.spam.state.dim(), found: self.spam.effect.dim() });
        }
        Ok(())
    }
}

/// `m` random Cliffords followed by the Clifford that inverts them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RbSequence {
    pub gates: Vec<usize>,
    pub inversion: usize,
}

impl RbSequence {
    /// All `m + 1` indices in time order.
    pub fn full(&self) -> impl Iterator<Item = usize> + '_ {
        self.gates.iter().copied().chain(std::iter::once(self.inversion))
    }
}

pub fn sample_rb_sequence<R: Rng + ?Sized>(group: &CliffordGroup, m: usize, rng: &mut R) -> RbSequence {
    let gates: Vec<usize> = (0..m).map(|_| rng.random_range(0..group.len())).collect();
    let inversion = group.inverse(group.product_of(&gates));
    RbSequence { gates, inversion }
}

/// Exact Born-rule evaluator for Clifford sequences on a qubit.
pub(crate) struct SequenceEvaluator {
    gates: Vec<[[f64; 4]; 4]>,
    state: [f64; 4],
    effect: [f64; 4],
}

impl SequenceEvaluator {
    pub(crate) fn new(gates: &[Superoperator], spam: &Spam) -> Result<Self> {
        if spam.state.dim() != 2 || spam.effect.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: spam.state.dim().max(spam.effect.dim()) });
        }
        if let Some(bad) = gates.iter().find(|g| g.dim() != 2) {
            return Err(Error::DimensionMismatch { expected: 2, found: bad.dim() });
        }
        let gates = gates.iter().map(|g| std::array::from_fn(|r| std::array::from_fn(|c| g.ptm()[(r, c)]))).collect();
        let state = std::array::from_fn(|i| spam.state.coeffs()[i]);
        let effect = std::array::from_fn(|i| spam.effect.coeffs()[i]);
        Ok(Self { gates, state, effect })
    }

    pub(crate) fn evaluate(&self, sequence: impl IntoIterator<Item = usize>) -> f64 {
        let mut v = self.state;
        for g in sequence {
            let m = &self.gates[g];
            v = std::array::from_fn(|r| m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2] + m[r][3] * v[3]);
        }
        self.effect.iter().zip(&v).map(|(e, x)| e * x).sum()
    }
}

/// `Tr(E C̃_inv C̃_{s_m} ⋯ C̃_{s_1}(ρ))` with imperfect gates throughout.
pub fn survival_probability(gateset: &GateSet, sequence: &RbSequence, spam: &Spam) -> Result<f64> {
    let eval = SequenceEvaluator::new(gateset.imperfect(), spam)?;
    Ok(eval.evaluate(sequence.full()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthData {
    pub m: usize,
    pub probabilities: Vec<f64>,
    pub mean: f64,
}

impl LengthData {
    fn from_probabilities(m: usize, probabilities: Vec<f64>) -> Self {
        let mean = probabilities.iter().sum::<f64>() / probabilities.len() as f64;
        Self { m, probabilities, mean }
    }

    /// Sample standard deviation across sequences (0 for a single sequence).
    pub fn std_across_sequences(&self) -> f64 {
        let n = self.probabilities.len();
        if n < 2 {
            return 0.0;
        }
        let ss: f64 = self.probabilities.iter().map(|p| (p - self.mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbDataset {
    pub dim: usize,
    pub points: Vec<LengthData>,
}

impl RbDataset {
    /// Builds a dataset directly from `(m, P̂_m)` pairs, e.g. synthetic curves.
    pub fn from_means(dim: usize, points: &[(usize, f64)]) -> Self {
        let points = points.iter().map(|&(m, p)| LengthData::from_probabilities(m, vec![p])).collect();
        Self { dim, points }
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.m).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }

    /// Concatenates the sequences of datasets sampled at the same lengths.
    pub fn pool(datasets: &[RbDataset]) -> Result<Self> {
        let first = datasets.first().ok_or_else(|| Error::InvalidInput("no datasets to pool".into()))?;
        if datasets.iter().any(|d| d.dim != first.dim || d.lengths() != first.lengths()) {
            return Err(Error::InvalidInput("pooled datasets must share dimension and lengths".into()));
        }
        let points = (0..first.points.len())
            .map(|i| {
                let probabilities = datasets.iter().flat_map(|d| d.points[i].probabilities.iter().copied()).collect();
                LengthData::from_probabilities(first.points[i].m, probabilities)
            })
            .collect();
        Ok(Self { dim: first.dim, points })
    }

    /// CSV with columns `m,p_mean,p_std_across_sequences,k`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,p_mean,p_std_across_sequences,k\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.m,
                crate::export::fmt_f64(p.mean),
                crate::export::fmt_f64(p.std_across_sequences()),
                p.probabilities.len()
            ));
        }
        out
    }
}

/// Samples `k_per_length` sequences for every length and records their exact
/// survival probabilities. Task `(length index, sequence index)` draws from its
/// own RNG stream, so results do not depend on scheduling.
pub fn run_rb(gateset: &GateSet, config: &RbConfig) -> Result<RbDataset> {
    config.validate()?;
    let eval = SequenceEvaluator::new(gateset.imperfect(), &config.spam)?;
    let group = gateset.ideal();
    let points = config
        .lengths
        .iter()
        .enumerate()
        .map(|(li, &m)| {
            let probabilities: Vec<f64> = (0..config.k_per_length)
                .into_par_iter()
                .map(|s| {
                    let mut rng = task_rng(config.seed, li as u64, s as u64);
                    let seq = sample_rb_sequence(group, m, &mut rng);
                    eval.evaluate(seq.full())
                })
                .collect();
            LengthData::from_probabilities(m, probabilities)
        })
        .collect();
    Ok(RbDataset { dim: gateset.dim(), points })
}

/// Seed used for repeat `r` of an estimate under base seed `seed`.
pub fn repeat_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, r as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbEstimate {
    pub model: FitModel,
    pub r_mean: f64,
    pub r_std: f64,
    /// Successful per-repeat fits, in repeat order.
    pub fits: Vec<FitResult>,
    pub failed: usize,
}

impl RbEstimate {
    fn from_fits(model: FitModel, results: Vec<Result<FitResult>>) -> Result<Self> {
        let total = results.len();
        let fits: Vec<FitResult> = results.into_iter().filter_map(|r| r.ok()).collect();
        let failed = total - fits.len();
        if fits.is_empty() || 2 * failed > total {
            return Err(Error::TooManyFailedRepeats { failed, total });
        }
        let n = fits.len() as f64;
        let r_mean = fits.iter().map(|f| f.r_hat).sum::<f64>() / n;
        let r_std = if fits.len() > 1 {
            (fits.iter().map(|f| (f.r_hat - r_mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(Self { model, r_mean, r_std, fits, failed })
    }

    /// Mean of a fitted parameter across repeats.
    pub fn mean_of(&self, f: impl Fn(&FitResult) -> f64) -> f64 {
        self.fits.iter().map(f).sum::<f64>() / self.fits.len() as f64
    }
}

/// Repeats the whole RB experiment `config.repeats` times with derived seeds
/// and summarizes the fitted RB numbers.
pub fn estimate_r(gateset: &GateSet, config: &RbConfig, model: FitModel) -> Result<RbEstimate> {
    Ok(estimate_r_models(gateset, config, &[model])?.remove(0))
}

/// Like [`estimate_r`] but fits every model in `models` to the same datasets.
pub fn estimate_r_models(gateset: &GateSet, config: &RbConfig, models: &[FitModel]) -> Result<Vec<RbEstimate>> {
    estimate_from_datasets(&run_repeats(gateset, config)?, models)
}

/// The `config.repeats` datasets behind [`estimate_r`], in repeat order.
pub fn run_repeats(gateset: &GateSet, config: &RbConfig) -> Result<Vec<RbDataset>> {
    config.validate()?;
    if config.repeats < 2 {
        return Err(Error::InvalidInput("estimate_r needs at least 2 repeats".into()));
    }
    (0..config.repeats)
        .map(|r| run_rb(gateset, &RbConfig { seed: repeat_seed(config.seed, r), ..config.clone() }))
        .collect()
}

/// Fits every model to each dataset and summarizes the RB numbers per model.
pub fn estimate_from_datasets(datasets: &[RbDataset], models: &[FitModel]) -> Result<Vec<RbEstimate>> {
    models
        .iter()
        .map(|&model| RbEstimate::from_fits(model, datasets.iter().map(|d| fit_decay(d, model)).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::{build_gateset, ErrorModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sequences_invert_to_identity() {
        let gs = build_gateset(&ErrorModel::Perfect).unwrap();
        let group = gs.ideal();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in [1, 2, 5, 40] {
            for _ in 0..50 {
                let seq = sample_rb_sequence(group, m, &mut rng);
                assert_eq!(seq.gates.len(), m);
                let all: Vec<usize> = seq.full().collect();
                assert_eq!(group.product_of(&all), group.identity_index());
            }
        }
    }

    #[test]
    fn identity_only_sequence_inverts_to_identity() {
        let gs = build_gateset(&ErrorModel::Perfect).unwrap();
        let group = gs.ideal();
        let id = group.identity_index();
        assert_eq!(group.inverse(group.product_of(&[id])), id);
    }

    #[test]
    fn perfect_gateset_survives() {
        let gs = build_gateset(&ErrorModel::Perfect).unwrap();
        let cfg = RbConfig { lengths: vec![1, 7, 30], k_per_length: 20, ..Default::default() };
        let data = run_rb(&gs, &cfg).unwrap();
        for p in &data.points {
            assert!(p.probabilities.iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn depolarizing_survival_closed_form() {
        let lambda = 0.9;
        let gs = build_gateset(&ErrorModel::gate_independent_depolarizing(lambda).unwrap()).unwrap();
        let cfg = RbConfig { lengths: vec![1, 2, 10], k_per_length: 30, ..Default::default() };
        let data = run_rb(&gs, &cfg).unwrap();
        for p in &data.points {
            let expected = 0.5 + 0.5 * lambda.powi(p.m as i32 + 1);
            assert!((p.mean - expected).abs() < 1e-14);
            assert!(p.std_across_sequences() < 1e-14);
        }
    }

    #[test]
    fn dataset_mean_matches_list() {
        let gs = build_gateset(&ErrorModel::CoherentZ { theta: 0.2 }).unwrap();
        let cfg = RbConfig { lengths: vec![3, 9], k_per_length: 17, seed: 5, ..Default::default() };
        let data = run_rb(&gs, &cfg).unwrap();
        for p in &data.points {
            let mean = p.probabilities.iter().sum::<f64>() / p.probabilities.len() as f64;
            assert!((mean - p.mean).abs() <= 1e-15);
            assert!(p.probabilities.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
        }
        let again = run_rb(&gs, &cfg).unwrap();
        assert_eq!(data, again);
    }

    #[test]
    fn pooling_concatenates_sequences() {
        let a = RbDataset::from_means(2, &[(1, 0.9), (5, 0.7)]);
        let b = RbDataset::from_means(2, &[(1, 0.8), (5, 0.5)]);
        let pooled = RbDataset::pool(&[a.clone(), b]).unwrap();
        assert_eq!(pooled.points[1].probabilities, vec![0.7, 0.5]);
        assert!((pooled.points[0].mean - 0.85).abs() < 1e-15);
        assert!(RbDataset::pool(&[a, RbDataset::from_means(2, &[(2, 0.9), (5, 0.7)])]).is_err());
        assert!(RbDataset::pool(&[]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = RbConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.k_per_length = 0;
        assert!(cfg.validate().is_err());
        let cfg = RbConfig { lengths: vec![0, 1], ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn csv_export_columns() {
        let ds = RbDataset::from_means(2, &[(1, 0.9), (2, 0.8)]);
        let csv = ds.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("m,p_mean,p_std_across_sequences,k"));
        assert_eq!(lines.next(), Some("1,9.0000000000000002e-1,0.0000000000000000e0,1"));
    }
}
