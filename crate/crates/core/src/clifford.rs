//! The single-qubit Clifford group, its compilation into `Gx`/`Gy` words, and
//! imperfect gatesets built from primitive-level error models.

use std::collections::VecDeque;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::superop::{depolarizing_channel, rotation_channel, Superoperator, STRUCTURAL_TOL};

/// Number of single-qubit Cliffords modulo phase.
pub const CLIFFORD_ORDER: usize = 24;

/// The ideal `π/2` primitives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Primitive {
    Gx,
    Gy,
}

impl Primitive {
    pub const ALL: [Primitive; 2] = [Primitive::Gx, Primitive::Gy];

    pub fn ideal(self) -> Superoperator {
        let axis = match self {
            Primitive::Gx => [1.0, 0.0, 0.0],
            Primitive::Gy => [0.0, 1.0, 0.0],
        };
        snap_signed_permutation(&rotation_channel(axis, FRAC_PI_2).expect("unit axis"))
            .expect("π/2 rotation is a signed permutation")
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Primitive::Gx => f.write_str("Gx"),
            Primitive::Gy => f.write_str("Gy"),
        }
    }
}

/// Rounds a PTM whose entries are all within tolerance of `-1, 0, 1` to
/// exact integers.
fn snap_signed_permutation(s: &Superoperator) -> Option<Superoperator> {
    let mut snapped = s.ptm().clone();
    for v in snapped.iter_mut() {
        let r = v.round();
        if (r.abs() > 1.0) || (*v - r).abs() > STRUCTURAL_TOL {
            return None;
        }
        *v = r;
    }
    Superoperator::from_ptm(s.dim(), snapped).ok()
}

fn ptm_close(a: &Superoperator, b: &Superoperator, tol: f64) -> bool {
    (a.ptm() - b.ptm()).iter().all(|v| v.abs() <= tol)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CliffordGroup {
    elements: Vec<Superoperator>,
    cayley: Vec<Vec<usize>>,
    inverse: Vec<usize>,
    identity_index: usize,
}

impl CliffordGroup {
    pub fn elements(&self) -> &[Superoperator] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &Superoperator {
        &self.elements[i]
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Index of `elements[i] · elements[j]` (`j` acts first).
    pub fn compose(&self, i: usize, j: usize) -> usize {
        self.cayley[i][j]
    }

    pub fn cayley(&self) -> &[Vec<usize>] {
        &self.cayley
    }

    pub fn inverse(&self, i: usize) -> usize {
        self.inverse[i]
    }

    pub fn inverses(&self) -> &[usize] {
        &self.inverse
    }

    pub fn identity_index(&self) -> usize {
        self.identity_index
    }

    /// Index of the element equal to `s` within `tol`.
    pub fn find(&self, s: &Superoperator, tol: f64) -> Option<usize> {
        self.elements.iter().position(|e| ptm_close(e, s, tol))
    }

    /// Index of the product of a time-ordered index sequence (first entry acts first).
    pub fn product_of(&self, sequence: &[usize]) -> usize {
        sequence.iter().fold(self.identity_index, |acc, &s| self.compose(s, acc))
    }
}

/// Closure of `{Gx, Gy}` under composition. Element 0 is the identity.
pub fn generate_clifford_group() -> Result<CliffordGroup> {
    let generators: Vec<Superoperator> = Primitive::ALL.iter().map(|p| p.ideal()).collect();
    let mut elements = vec![Superoperator::identity(2)];
    let mut frontier = 0;
    while frontier < elements.len() {
        let current = elements[frontier].clone();
        for g in &generators {
            let next = g.compose(&current)?;
            if !elements.iter().any(|e| ptm_close(e, &next, STRUCTURAL_TOL)) {
                elements.push(next);
            }
        }
        frontier += 1;
        if elements.len() > CLIFFORD_ORDER {
            break;
        }
    }
    if elements.len() != CLIFFORD_ORDER {
        return Err(Error::Internal(format!(
            "Clifford closure produced {} elements, expected {CLIFFORD_ORDER}",
            elements.len()
        )));
    }

    let lookup = |s: &Superoperator| -> Result<usize> {
        elements
            .iter()
            .position(|e| ptm_close(e, s, STRUCTURAL_TOL))
            .ok_or_else(|| Error::Internal("Clifford group is not closed".into()))
    };
    let mut cayley = vec![vec![0; CLIFFORD_ORDER]; CLIFFORD_ORDER];
    for i in 0..CLIFFORD_ORDER {
        for j in 0..CLIFFORD_ORDER {
            cayley[i][j] = lookup(&elements[i].compose(&elements[j])?)?;
        }
    }
    let identity_index = 0;
    let inverse = (0..CLIFFORD_ORDER)
        .map(|i| {
            (0..CLIFFORD_ORDER)
                .find(|&j| cayley[i][j] == identity_index)
                .ok_or_else(|| Error::Internal(format!("element {i} has no inverse")))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CliffordGroup { elements, cayley, inverse, identity_index })
}

/// For each Clifford index, a time-ordered primitive word (first letter acts first).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompilationTable {
    words: Vec<Vec<Primitive>>,
}

impl CompilationTable {
    /// Checks that every word reproduces its Clifford.
    pub fn new(group: &CliffordGroup, words: Vec<Vec<Primitive>>) -> Result<Self> {
        if words.len() != group.len() {
            return Err(Error::DimensionMismatch { expected: group.len(), found: words.len() });
        }
        let table = Self { words };
        for (i, _) in table.words.iter().enumerate() {
            let product = table.ideal_product(i);
            if !ptm_close(&product, group.element(i), 1e-12) {
                return Err(Error::InvalidInput(format!("word for Clifford {i} does not reproduce it")));
            }
        }
        Ok(table)
    }

    pub fn words(&self) -> &[Vec<Primitive>] {
        &self.words
    }

    pub fn word(&self, i: usize) -> &[Primitive] {
        &self.words[i]
    }

    fn ideal_product(&self, i: usize) -> Superoperator {
        compose_word(&self.words[i], |p| p.ideal())
    }
}

fn compose_word(word: &[Primitive], mut gate: impl FnMut(Primitive) -> Superoperator) -> Superoperator {
    word.iter().fold(Superoperator::identity(2), |acc, &p| gate(p).compose(&acc).expect("qubit maps"))
}

/// Shortest `{Gx, Gy}` word for every Clifford, ties broken lexicographically
/// with `Gx < Gy`. The identity gets the empty word.
pub fn compile_cliffords(group: &CliffordGroup) -> Result<CompilationTable> {
    let mut words: Vec<Option<Vec<Primitive>>> = vec![None; group.len()];
    words[group.identity_index()] = Some(Vec::new());
    let generator_index: Vec<usize> = Primitive::ALL
        .iter()
        .map(|p| {
            group.find(&p.ideal(), STRUCTURAL_TOL).ok_or_else(|| Error::Internal(format!("{p} is not in the group")))
        })
        .collect::<Result<_>>()?;

    let mut queue = VecDeque::from([group.identity_index()]);
    while let Some(current) = queue.pop_front() {
        let word = words[current].clone().expect("queued elements have words");
        for (p, &g) in Primitive::ALL.iter().zip(&generator_index) {
            let next = group.compose(g, current);
            if words[next].is_none() {
                let mut w = word.clone();
                w.push(*p);
                words[next] = Some(w);
                queue.push_back(next);
            }
        }
    }
    let words = words
        .into_iter()
        .enumerate()
        .map(|(i, w)| w.ok_or_else(|| Error::Internal(format!("Clifford {i} unreachable from Gx, Gy"))))
        .collect::<Result<Vec<_>>>()?;
    CompilationTable::new(group, words)
}

/// How the imperfect gates deviate from the ideal ones.
///
/// Primitive-level models put the error channel to the left of each ideal
/// primitive (`G̃ = Λ G`); `GateIndependent` acts on whole Cliffords.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ErrorModel {
    Perfect,
    /// `G̃ = R(σ_z, θ) G` for both primitives.
    CoherentZ {
        theta: f64,
    },
    /// `G̃_{x,y} = D_λ R(v̂_{x,y}·σ, θ_{x,y}) G_{x,y}`.
    GeneralPrimitive {
        theta_x: f64,
        axis_x: [f64; 3],
        theta_y: f64,
        axis_y: [f64; 3],
        lambda: f64,
    },
    /// `C̃_i = Λ C_i` for every Clifford, the identity included.
    GateIndependent {
        channel: Superoperator,
    },
    /// Arbitrary error channels for `Gx` and `Gy`.
    Custom {
        x_error: Superoperator,
        y_error: Superoperator,
    },
}

impl ErrorModel {
    /// General model from rotation vectors `θ v̂`.
    pub fn general_from_rotation_vectors(x: [f64; 3], y: [f64; 3], lambda: f64) -> Result<Self> {
        let split = |v: [f64; 3]| -> Result<(f64, [f64; 3])> {
            let theta = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if theta == 0.0 {
                return Ok((0.0, [0.0, 0.0, 1.0]));
            }
            if !theta.is_finite() {
                return Err(Error::InvalidInput("rotation vector must be finite".into()));
            }
            Ok((theta, [v[0] / theta, v[1] / theta, v[2] / theta]))
        };
        let (theta_x, axis_x) = split(x)?;
        let (theta_y, axis_y) = split(y)?;
        Ok(ErrorModel::GeneralPrimitive { theta_x, axis_x, theta_y, axis_y, lambda })
    }

    pub fn gate_independent_depolarizing(lambda: f64) -> Result<Self> {
        Ok(ErrorModel::GateIndependent { channel: depolarizing_channel(lambda, 2)? })
    }

    /// Error channel for one primitive, `None` for Clifford-level models.
    pub fn primitive_error(&self, p: Primitive) -> Result<Option<Superoperator>> {
        Ok(match self {
            ErrorModel::Perfect => Some(Superoperator::identity(2)),
            ErrorModel::CoherentZ { theta } => Some(rotation_channel([0.0, 0.0, 1.0], *theta)?),
            ErrorModel::GeneralPrimitive { theta_x, axis_x, theta_y, axis_y, lambda } => {
                let (theta, axis) = match p {
                    Primitive::Gx => (*theta_x, *axis_x),
                    Primitive::Gy => (*theta_y, *axis_y),
                };
                Some(depolarizing_channel(*lambda, 2)?.compose(&rotation_channel(axis, theta)?)?)
            }
            ErrorModel::GateIndependent { .. } => None,
            ErrorModel::Custom { x_error, y_error } => Some(match p {
                Primitive::Gx => x_error.clone(),
                Primitive::Gy => y_error.clone(),
            }),
        })
    }
}

fn check_cptp(s: &Superoperator, what: &str) -> Result<()> {
    if s.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: s.dim() });
    }
    if !s.is_tp(STRUCTURAL_TOL) || !s.is_cp(STRUCTURAL_TOL) {
        return Err(Error::InvalidChannel(what.to_string()));
    }
    Ok(())
}

/// Ideal Cliffords together with one representation of their imperfect
/// implementations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GateSet {
    ideal: CliffordGroup,
    compilation: CompilationTable,
    error_model: ErrorModel,
    primitives: Option<Vec<Superoperator>>,
    imperfect: Vec<Superoperator>,
}

/// Compiles with the default table and applies `model`.
pub fn build_gateset(model: &ErrorModel) -> Result<GateSet> {
    let group = generate_clifford_group()?;
    let table = compile_cliffords(&group)?;
    build_gateset_with(model, group, table)
}

pub fn build_gateset_with(model: &ErrorModel, group: CliffordGroup, table: CompilationTable) -> Result<GateSet> {
    let (primitives, imperfect) = match model {
        ErrorModel::GateIndependent { channel } => {
            check_cptp(channel, "gate-independent error channel")?;
            let imperfect = group.elements().iter().map(|c| channel.compose(c)).collect::<Result<Vec<_>>>()?;
            (None, imperfect)
        }
        _ => {
            let prims = Primitive::ALL
                .iter()
                .map(|&p| {
                    let err = model.primitive_error(p)?.expect("primitive-level model");
                    check_cptp(&err, &format!("{p} error channel"))?;
                    err.compose(&p.ideal())
                })
                .collect::<Result<Vec<_>>>()?;
            let imperfect = table.words().iter().map(|w| compose_word(w, |p| prims[p as usize].clone())).collect();
            (Some(prims), imperfect)
        }
    };
    Ok(GateSet { ideal: group, compilation: table, error_model: model.clone(), primitives, imperfect })
}

impl GateSet {
    pub fn ideal(&self) -> &CliffordGroup {
        &self.ideal
    }

    pub fn imperfect(&self) -> &[Superoperator] {
        &self.imperfect
    }

    pub fn compilation(&self) -> &CompilationTable {
        &self.compilation
    }

    /// The model this gateset, or the representation it was transformed
    /// from, was built with.
    pub fn error_model(&self) -> &ErrorModel {
        &self.error_model
    }

    /// Imperfect `Gx`, `Gy` (absent for Clifford-level models).
    pub fn primitives(&self) -> Option<&[Superoperator]> {
        self.primitives.as_deref()
    }

    pub fn len(&self) -> usize {
        self.imperfect.len()
    }

    pub fn is_empty(&self) -> bool {
        self.imperfect.is_empty()
    }

    pub fn dim(&self) -> usize {
        2
    }

    /// Same ideal gates and compilation with a different representation of
    /// the imperfect gates (e.g. after a gauge transformation). Primitives are
    /// dropped since they no longer match.
    pub fn with_imperfect(&self, imperfect: Vec<Superoperator>) -> Result<GateSet> {
        if imperfect.len() != self.imperfect.len() {
            return Err(Error::DimensionMismatch { expected: self.imperfect.len(), found: imperfect.len() });
        }
        if let Some(bad) = imperfect.iter().find(|g| g.dim() != 2) {
            return Err(Error::DimensionMismatch { expected: 2, found: bad.dim() });
        }
        Ok(GateSet { imperfect, primitives: None, ..self.clone() })
    }

    /// JSON document with primitive and Clifford PTMs, words, and the error model.
    pub fn to_json(&self) -> serde_json::Value {
        let rows =
            |s: &Superoperator| -> Vec<Vec<f64>> { s.ptm().row_iter().map(|r| r.iter().copied().collect()).collect() };
        serde_json::json!({
            "error_model": self.error_model,
            "primitives": self.primitives.as_ref().map(|p| {
                Primitive::ALL.iter().zip(p).map(|(name, s)| {
                    serde_json::json!({ "name": name.to_string(), "ptm": rows(s) })
                }).collect::<Vec<_>>()
            }),
            "cliffords": self.imperfect.iter().enumerate().map(|(i, s)| serde_json::json!({
                "index": i,
                "word": self.compilation.word(i).iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                "ideal_ptm": rows(self.ideal.element(i)),
                "ptm": rows(s),
            })).collect::<Vec<_>>(),
        })
    }
}

/// `Λ_i = C̃_i C_i⁻¹` and their mean `Λ̄`.
#[derive(Clone, Debug)]
pub struct ErrorMaps {
    pub per_gate: Vec<Superoperator>,
    pub mean: Superoperator,
}

pub fn error_maps(gateset: &GateSet) -> Result<ErrorMaps> {
    error_maps_of(gateset.imperfect(), gateset.ideal())
}

pub(crate) fn error_maps_of(imperfect: &[Superoperator], group: &CliffordGroup) -> Result<ErrorMaps> {
    let per_gate = imperfect
        .iter()
        .enumerate()
        .map(|(i, g)| g.compose(group.element(group.inverse(i))))
        .collect::<Result<Vec<_>>>()?;
    let mean = Superoperator::mean(&per_gate)?;
    Ok(ErrorMaps { per_gate, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superop::agi;

    fn group() -> CliffordGroup {
        generate_clifford_group().unwrap()
    }

    #[test]
    fn group_has_24_signed_permutations() {
        let g = group();
        assert_eq!(g.len(), 24);
        for e in g.elements() {
            let ptm = e.ptm();
            assert_eq!(ptm[(0, 0)], 1.0);
            for r in 1..4 {
                let nonzero: Vec<f64> = (1..4).map(|c| ptm[(r, c)]).filter(|v| *v != 0.0).collect();
                assert_eq!(nonzero.len(), 1);
                assert_eq!(nonzero[0].abs(), 1.0);
            }
        }
        for i in 0..24 {
            for j in (i + 1)..24 {
                assert_ne!(g.element(i), g.element(j));
            }
        }
    }

    #[test]
    fn inverse_table_is_consistent() {
        let g = group();
        for i in 0..24 {
            assert_eq!(g.compose(i, g.inverse(i)), g.identity_index());
            assert_eq!(g.compose(g.inverse(i), i), g.identity_index());
        }
    }

    #[test]
    fn cayley_matches_matrix_products() {
        let g = group();
        for i in 0..24 {
            for j in 0..24 {
                let prod = g.element(i).compose(g.element(j)).unwrap();
                assert!(ptm_close(&prod, g.element(g.compose(i, j)), 1e-9));
            }
        }
    }

    #[test]
    fn compilation_examples() {
        let g = group();
        let table = compile_cliffords(&g).unwrap();
        assert!(table.word(g.identity_index()).is_empty());
        let gx = g.find(&Primitive::Gx.ideal(), 1e-9).unwrap();
        assert_eq!(table.word(gx), &[Primitive::Gx]);
        let gy = g.find(&Primitive::Gy.ideal(), 1e-9).unwrap();
        assert_eq!(table.word(gy), &[Primitive::Gy]);
        for i in 0..24 {
            assert!(ptm_close(&table.ideal_product(i), g.element(i), 1e-12));
        }
    }

    #[test]
    fn compilation_table_rejects_wrong_word() {
        let g = group();
        let mut words = compile_cliffords(&g).unwrap().words().to_vec();
        words[0] = vec![Primitive::Gx];
        assert!(CompilationTable::new(&g, words).is_err());
    }

    #[test]
    fn perfect_model_reproduces_ideal() {
        let gs = build_gateset(&ErrorModel::Perfect).unwrap();
        for (a, b) in gs.imperfect().iter().zip(gs.ideal().elements()) {
            assert!(ptm_close(a, b, 1e-15));
        }
        let maps = error_maps(&gs).unwrap();
        assert!(ptm_close(&maps.mean, &Superoperator::identity(2), 1e-15));
    }

    #[test]
    fn coherent_z_gates_are_unitary_and_imperfect() {
        let gs = build_gateset(&ErrorModel::CoherentZ { theta: 0.1 }).unwrap();
        let id = gs.ideal().identity_index();
        for (i, (a, b)) in gs.imperfect().iter().zip(gs.ideal().elements()).enumerate() {
            assert!(a.is_orthogonal(1e-12));
            if i != id {
                assert!(agi(a, b).unwrap() > 0.0);
            } else {
                assert!(ptm_close(a, &Superoperator::identity(2), 0.0));
            }
        }
        for lam in error_maps(&gs).unwrap().per_gate {
            assert!(lam.is_orthogonal(1e-12));
        }
    }

    #[test]
    fn gate_independent_error_maps() {
        let channel = depolarizing_channel(0.97, 2).unwrap();
        let gs = build_gateset(&ErrorModel::GateIndependent { channel: channel.clone() }).unwrap();
        let maps = error_maps(&gs).unwrap();
        for lam in &maps.per_gate {
            assert!(ptm_close(lam, &channel, 1e-15));
        }
        assert!(ptm_close(&maps.mean, &channel, 1e-15));
    }

    #[test]
    fn rejects_non_cptp_models() {
        let bad = Superoperator::from_ptm(
            2,
            nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.2, 1.0, 1.0])),
        )
        .unwrap();
        let err = build_gateset(&ErrorModel::Custom { x_error: bad.clone(), y_error: Superoperator::identity(2) });
        assert!(matches!(err, Err(Error::InvalidChannel(_))));
        assert!(build_gateset(&ErrorModel::GateIndependent { channel: bad }).is_err());
    }

    #[test]
    fn alternate_compilation_changes_imperfect_only() {
        let g = group();
        let table = compile_cliffords(&g).unwrap();
        // Replace Gx by Gx·Gx·Gx·Gx·Gx (a 2π turn is the identity on PTMs).
        let gx = g.find(&Primitive::Gx.ideal(), 1e-9).unwrap();
        let mut words = table.words().to_vec();
        words[gx] = vec![Primitive::Gx; 5];
        let alt = CompilationTable::new(&g, words).unwrap();

        let perfect_a = build_gateset_with(&ErrorModel::Perfect, g.clone(), table.clone()).unwrap();
        let perfect_b = build_gateset_with(&ErrorModel::Perfect, g.clone(), alt.clone()).unwrap();
        for (a, b) in perfect_a.imperfect().iter().zip(perfect_b.imperfect()) {
            assert!(ptm_close(a, b, 1e-12));
        }
        let model = ErrorModel::CoherentZ { theta: 0.1 };
        let noisy_a = build_gateset_with(&model, g.clone(), table).unwrap();
        let noisy_b = build_gateset_with(&model, g, alt).unwrap();
        assert!(!ptm_close(&noisy_a.imperfect()[gx], &noisy_b.imperfect()[gx], 1e-6));
    }

    #[test]
    fn gateset_json_has_all_cliffords() {
        let gs = build_gateset(&ErrorModel::CoherentZ { theta: 0.05 }).unwrap();
        let doc = gs.to_json();
        assert_eq!(doc["cliffords"].as_array().unwrap().len(), 24);
        assert_eq!(doc["primitives"].as_array().unwrap().len(), 2);
        assert_eq!(doc["error_model"]["model"], "coherent_z");
    }
}
