mod common;

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use common::{rotation_unitary, U2};
use nalgebra::DMatrix;
use rblab::clifford::{build_gateset, compile_cliffords, generate_clifford_group, ErrorModel, Primitive};
use rblab::superop::{agi, unitary_channel, Superoperator};

/// Removes the global phase: the first entry with modulus above 1e-6 becomes real positive.
fn canonical(u: &U2) -> U2 {
    let pivot = u.iter().find(|z| z.norm() > 1e-6).copied().unwrap();
    let phase = pivot / pivot.norm();
    u / phase
}

fn same(a: &U2, b: &U2) -> bool {
    (canonical(a) - canonical(b)).iter().all(|z| z.norm() < 1e-9)
}

fn ptm_of(u: &U2) -> Superoperator {
    unitary_channel(&DMatrix::from_fn(2, 2, |i, j| u[(i, j)])).unwrap()
}

/// Breadth-first closure over `{Rx(π/2), Ry(π/2)}` acting on unitaries modulo phase.
fn unitary_bfs() -> Vec<(U2, usize)> {
    let gens = [rotation_unitary([1.0, 0.0, 0.0], FRAC_PI_2), rotation_unitary([0.0, 1.0, 0.0], FRAC_PI_2)];
    let mut found: Vec<(U2, usize)> = vec![(U2::identity(), 0)];
    let mut frontier = vec![U2::identity()];
    let mut depth = 0;
    while !frontier.is_empty() {
        depth += 1;
        let mut next = Vec::new();
        for u in &frontier {
            for g in &gens {
                let v = g * u;
                if !found.iter().any(|(w, _)| same(w, &v)) {
                    found.push((v, depth));
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    found
}

#[test]
fn group_matches_unitary_closure() {
    let oracle = unitary_bfs();
    assert_eq!(oracle.len(), 24);
    let group = generate_clifford_group().unwrap();
    for (u, _) in &oracle {
        assert!(group.find(&ptm_of(u), 1e-12).is_some());
    }
    let id = Superoperator::identity(2);
    assert_eq!(group.element(group.identity_index()).ptm(), id.ptm());
}

#[test]
fn word_length_histogram_matches_bfs() {
    let group = generate_clifford_group().unwrap();
    let table = compile_cliffords(&group).unwrap();
    let mut oracle_hist = BTreeMap::new();
    let mut ours_hist = BTreeMap::new();
    for (u, depth) in unitary_bfs() {
        *oracle_hist.entry(depth).or_insert(0) += 1;
        let i = group.find(&ptm_of(&u), 1e-12).unwrap();
        assert_eq!(table.word(i).len(), depth, "Clifford {i}");
    }
    for w in table.words() {
        *ours_hist.entry(w.len()).or_insert(0) += 1;
    }
    assert_eq!(ours_hist, oracle_hist);
    assert!(table.word(group.identity_index()).is_empty());
}

#[test]
fn words_recompose_to_every_element() {
    let group = generate_clifford_group().unwrap();
    let table = compile_cliffords(&group).unwrap();
    for (i, w) in table.words().iter().enumerate() {
        let prod = w.iter().fold(Superoperator::identity(2), |acc, p| p.ideal().compose(&acc).unwrap());
        assert_eq!(prod.ptm(), group.element(i).ptm());
    }
}

#[test]
fn cayley_table_matches_unitary_products() {
    let group = generate_clifford_group().unwrap();
    let oracle = unitary_bfs();
    let index: Vec<usize> = oracle.iter().map(|(u, _)| group.find(&ptm_of(u), 1e-12).unwrap()).collect();
    for (a, (ua, _)) in oracle.iter().enumerate() {
        for (b, (ub, _)) in oracle.iter().enumerate() {
            let prod = group.find(&ptm_of(&(ua * ub)), 1e-12).unwrap();
            assert_eq!(group.compose(index[a], index[b]), prod);
        }
    }
}

#[test]
fn coherent_z_cliffords_are_unitary_and_imperfect() {
    let gs = build_gateset(&ErrorModel::CoherentZ { theta: 0.1 }).unwrap();
    let id = gs.ideal().identity_index();
    for (i, (t, c)) in gs.imperfect().iter().zip(gs.ideal().elements()).enumerate() {
        assert!((t.ptm().transpose() * t.ptm() - DMatrix::<f64>::identity(4, 4)).amax() < 1e-12);
        if i != id {
            assert!(agi(t, c).unwrap() > 0.0);
        }
    }
}

#[test]
fn coherent_z_matches_dense_unitaries() {
    let theta = 0.1;
    let gs = build_gateset(&ErrorModel::CoherentZ { theta }).unwrap();
    let rz = rotation_unitary([0.0, 0.0, 1.0], theta);
    let prim = |p: Primitive| match p {
        Primitive::Gx => rz * rotation_unitary([1.0, 0.0, 0.0], FRAC_PI_2),
        Primitive::Gy => rz * rotation_unitary([0.0, 1.0, 0.0], FRAC_PI_2),
    };
    for (i, w) in gs.compilation().words().iter().enumerate() {
        let u = w.iter().fold(U2::identity(), |acc, &p| prim(p) * acc);
        assert!((ptm_of(&u).ptm() - gs.imperfect()[i].ptm()).amax() < 1e-12);
    }
}
