mod common;

use std::f64::consts::FRAC_PI_2;

use common::{c, rotation_unitary, U2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rblab::clifford::{build_gateset, ErrorModel, Primitive};
use rblab::fit::{fit_decay, FitFlag, FitModel};
use rblab::rb::{run_rb, sample_rb_sequence, survival_probability, RbConfig, Spam};
use rblab::theory::brute_force_pm;

fn small_config(lengths: Vec<usize>, k: usize, seed: u64) -> RbConfig {
    RbConfig { lengths, k_per_length: k, seed, repeats: 1, spam: Spam::ideal(2) }
}

/// Pure-state evolution with 2×2 unitaries for the coherent model.
#[test]
fn coherent_survival_matches_dense_evolution() {
    let theta = 0.1;
    let gs = build_gateset(&ErrorModel::CoherentZ { theta }).unwrap();
    let rz = rotation_unitary([0.0, 0.0, 1.0], theta);
    let prim = |p: Primitive| match p {
        Primitive::Gx => rz * rotation_unitary([1.0, 0.0, 0.0], FRAC_PI_2),
        Primitive::Gy => rz * rotation_unitary([0.0, 1.0, 0.0], FRAC_PI_2),
    };
    let cliffords: Vec<U2> =
        gs.compilation().words().iter().map(|w| w.iter().fold(U2::identity(), |acc, &p| prim(p) * acc)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for m in [1, 2, 7, 40, 300] {
        for _ in 0..5 {
            let seq = sample_rb_sequence(gs.ideal(), m, &mut rng);
            let mut rho = U2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
            for g in seq.full() {
                let u = cliffords[g];
                rho = u * rho * u.adjoint();
            }
            let dense = rho[(0, 0)].re;
            let ours = survival_probability(&gs, &seq, &Spam::ideal(2)).unwrap();
            assert!((dense - ours).abs() < 1e-14 * m as f64, "m={m}: {dense} vs {ours}");
        }
    }
}

#[test]
fn first_gate_is_uniform() {
    let gs = build_gateset(&ErrorModel::Perfect).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000;
    let mut counts = [0usize; 24];
    for _ in 0..n {
        counts[sample_rb_sequence(gs.ideal(), 3, &mut rng).gates[0]] += 1;
    }
    let p = 1.0 / 24.0;
    let expected = n as f64 * p;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    let mut chi2 = 0.0;
    for &k in &counts {
        assert!((k as f64 - expected).abs() <= 4.0 * sigma, "{counts:?}");
        chi2 += (k as f64 - expected).powi(2) / expected;
    }
    // 99.9% quantile of χ² with 23 degrees of freedom.
    assert!(chi2 < 49.73, "chi2 = {chi2}");
}

#[test]
fn inversion_returns_to_identity() {
    let gs = build_gateset(&ErrorModel::Perfect).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for m in [0, 1, 5, 100] {
        let seq = sample_rb_sequence(gs.ideal(), m, &mut rng);
        let all: Vec<usize> = seq.full().collect();
        assert_eq!(gs.ideal().product_of(&all), gs.ideal().identity_index());
        assert!((survival_probability(&gs, &seq, &Spam::ideal(2)).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn gate_independent_has_no_sequence_variance() {
    let lambda: f64 = 0.97;
    let gs = build_gateset(&ErrorModel::gate_independent_depolarizing(lambda).unwrap()).unwrap();
    let data = run_rb(&gs, &small_config(vec![1, 10, 100], 30, 4)).unwrap();
    for pt in &data.points {
        let exact = 0.5 + 0.5 * lambda.powi(pt.m as i32 + 1);
        assert!(pt.probabilities.iter().all(|p| (p - exact).abs() < 1e-12));
        assert!(pt.std_across_sequences() < 1e-12);
    }
    assert!((data.points[0].mean - (1.0 + lambda * lambda) / 2.0).abs() < 1e-12);
}

#[test]
fn perfect_gateset_is_flat_and_flagged() {
    let gs = build_gateset(&ErrorModel::Perfect).unwrap();
    let data = run_rb(&gs, &small_config(vec![1, 51, 101, 151], 10, 0)).unwrap();
    assert!(data.means().iter().all(|p| (p - 1.0).abs() < 1e-12));
    let fit = fit_decay(&data, FitModel::Zeroth).unwrap();
    assert_eq!(fit.flag, Some(FitFlag::NoDecay));
    assert_eq!(fit.r_hat, 0.0);
}

#[test]
fn coherent_decay_is_slow() {
    let gs = build_gateset(&ErrorModel::CoherentZ { theta: 0.1 }).unwrap();
    let data = run_rb(&gs, &small_config(vec![1, 1001, 2001], 40, 3)).unwrap();
    assert!(data.means().iter().all(|p| *p > 0.9), "{:?}", data.means());
}

#[test]
fn sampled_means_agree_with_exhaustive_average() {
    for (name, model) in
        common::named_models().into_iter().chain(common::random_models(17).into_iter().map(|m| ("random", m)))
    {
        let gs = build_gateset(&model).unwrap();
        let data = run_rb(&gs, &small_config(vec![1, 2], 500, 21)).unwrap();
        for pt in &data.points {
            let exact = brute_force_pm(&gs, &Spam::ideal(2), pt.m).unwrap();
            let band = 4.0 * pt.std_across_sequences() / (pt.probabilities.len() as f64).sqrt();
            assert!((pt.mean - exact).abs() <= band.max(1e-12), "{name} m={}: {} vs {exact} ± {band}", pt.m, pt.mean);
        }
    }
}

#[test]
fn runs_are_reproducible() {
    let gs = build_gateset(&ErrorModel::CoherentZ { theta: 0.2 }).unwrap();
    let cfg = small_config(vec![1, 20, 40], 25, 77);
    let a = run_rb(&gs, &cfg).unwrap();
    let b = run_rb(&gs, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
    let other = run_rb(&gs, &RbConfig { seed: 78, ..cfg }).unwrap();
    assert_ne!(a.means(), other.means());
}
