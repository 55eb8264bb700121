//! Unweighted least-squares fits of `P_m = A + (B + C m) p^m`.
//!
//! The model is linear in `(A, B, C)` once `p` is fixed, so the fit profiles
//! those out and minimizes the residual over `u = logit(p)` alone. This keeps
//! `p` inside `(0, 1)` and leaves a one-dimensional search.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rb::RbDataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `A + B p^m`.
    Zeroth,
    /// `A + (B + C m) p^m`.
    First,
}

impl FitModel {
    fn n_linear(self) -> usize {
        match self {
            FitModel::Zeroth => 2,
            FitModel::First => 3,
        }
    }

    fn min_lengths(self) -> usize {
        self.n_linear() + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    /// The data are constant; `p` is reported as 1 and `r̂` as 0.
    NoDecay,
    /// The optimum sits at the edge of the search range for `p`.
    PAtBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub p: f64,
    pub r_hat: f64,
    pub residual_norm: f64,
    pub flag: Option<FitFlag>,
}

/// `r = (d - 1)(1 - p)/d`.
pub fn rb_number(p: f64, dim: usize) -> f64 {
    let d = dim as f64;
    (d - 1.0) * (1.0 - p) / d
}

pub fn fit_decay(dataset: &RbDataset, model: FitModel) -> Result<FitResult> {
    let lengths: Vec<f64> = dataset.points.iter().map(|p| p.m as f64).collect();
    fit_decay_points(&lengths, &dataset.means(), model, dataset.dim)
}

// Search range for u = logit(p).
const U_MIN: f64 = -20.0;
const U_MAX: f64 = 30.0;

pub fn fit_decay_points(lengths: &[f64], values: &[f64], model: FitModel, dim: usize) -> Result<FitResult> {
    if lengths.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: lengths.len(), found: values.len() });
    }
    let mut distinct = lengths.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < model.min_lengths() {
        return Err(Error::InsufficientLengths { required: model.min_lengths(), found: distinct.len() });
    }
    if values.iter().chain(lengths).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("fit data must be finite".into()));
    }

    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        let a = values.iter().sum::<f64>() / values.len() as f64;
        return Ok(FitResult {
            model,
            a,
            b: 0.0,
            c: 0.0,
            p: 1.0,
            r_hat: 0.0,
            residual_norm: residual_of(values, a),
            flag: Some(FitFlag::NoDecay),
        });
    }

    let problem = Profile { lengths, values, model };
    let p0 = initial_p(lengths, values);
    let mut starts: Vec<f64> =
        [p0, p0 * 0.9, (p0 * 1.1).min(1.0 - 1e-12)].iter().map(|p| logit(p.clamp(1e-9, 1.0 - 1e-12))).collect();
    // Coarse scan guards against the starts landing in the wrong basin.
    let grid: Vec<f64> = (0..=250).map(|i| U_MIN + (U_MAX - U_MIN) * i as f64 / 250.0).collect();
    let grid_best = grid
        .iter()
        .copied()
        .min_by(|a, b| problem.objective(*a).total_cmp(&problem.objective(*b)))
        .expect("non-empty grid");
    starts.push(grid_best);

    let mut best: Option<(f64, f64)> = None;
    for u0 in starts {
        if let Some((u, f)) = local_minimize(|u| problem.objective(u), u0, 0.25) {
            if best.is_none_or(|(_, fb)| f < fb) {
                best = Some((u, f));
            }
        }
    }
    let (u, f) = best.ok_or(Error::FitNotConverged { best_residual: f64::INFINITY })?;
    if !f.is_finite() {
        return Err(Error::FitNotConverged { best_residual: f.sqrt() });
    }
    let p = logistic(u);
    let coeffs = problem.solve_linear(p).ok_or(Error::FitNotConverged { best_residual: f.sqrt() })?;
    let at_bound = u >= U_MAX - 1e-6 || u <= U_MIN + 1e-6;
    Ok(FitResult {
        model,
        a: coeffs[0],
        b: coeffs[1],
        c: if model == FitModel::First { coeffs[2] } else { 0.0 },
        p,
        r_hat: rb_number(p, dim),
        residual_norm: f.sqrt(),
        flag: at_bound.then_some(FitFlag::PAtBound),
    })
}

fn residual_of(values: &[f64], a: f64) -> f64 {
    values.iter().map(|v| (v - a).powi(2)).sum::<f64>().sqrt()
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `A₀` from the last three points; `p₀` from the log-linear slope of
/// `P̂_m - A₀` over points where that is positive.
fn initial_p(lengths: &[f64], values: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by(|&i, &j| lengths[i].total_cmp(&lengths[j]));
    let tail = &order[order.len().saturating_sub(3)..];
    let a0 = tail.iter().map(|&i| values[i]).sum::<f64>() / tail.len() as f64;
    let pts: Vec<(f64, f64)> =
        order.iter().filter(|&&i| values[i] - a0 > 0.0).map(|&i| (lengths[i], (values[i] - a0).ln())).collect();
    if pts.len() < 2 {
        return 0.99;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return 0.99;
    }
    let p0 = (sxy / sxx).exp();
    if p0.is_finite() && p0 > 0.0 && p0 < 1.0 {
        p0
    } else {
        0.99
    }
}

struct Profile<'a> {
    lengths: &'a [f64],
    values: &'a [f64],
    model: FitModel,
}

impl Profile<'_> {
    fn design(&self, p: f64) -> DMatrix<f64> {
        let k = self.model.n_linear();
        DMatrix::from_fn(self.lengths.len(), k, |r, c| {
            let m = self.lengths[r];
            match c {
                0 => 1.0,
                1 => p.powf(m),
                _ => m * p.powf(m),
            }
        })
    }

    fn solve_linear(&self, p: f64) -> Option<DVector<f64>> {
        let x = self.design(p);
        let y = DVector::from_column_slice(self.values);
        x.try_svd(true, true, f64::EPSILON, 10_000)?.solve(&y, 1e-14).ok()
    }

    /// Residual sum of squares with the linear parameters profiled out.
    fn objective(&self, u: f64) -> f64 {
        let p = logistic(u);
        let Some(beta) = self.solve_linear(p) else {
            return f64::INFINITY;
        };
        let y = DVector::from_column_slice(self.values);
        let r = y - self.design(p) * beta;
        r.norm_squared()
    }
}

/// Expands a bracket around `u0` and refines it with Brent's method.
/// Returns `None` if no bracket with an interior minimum is found inside
/// `[U_MIN, U_MAX]` and the boundary is not better either.
fn local_minimize(f: impl Fn(f64) -> f64, u0: f64, step: f64) -> Option<(f64, f64)> {
    let u0 = u0.clamp(U_MIN, U_MAX);
    let f0 = f(u0);
    let mut left = (u0 - step).max(U_MIN);
    let mut right = (u0 + step).min(U_MAX);
    let mut h = step;
    for _ in 0..200 {
        let fl = f(left);
        let fr = f(right);
        let left_ok = fl >= f0 || left <= U_MIN;
        let right_ok = fr >= f0 || right >= U_MAX;
        if left_ok && right_ok {
            break;
        }
        h *= 1.6;
        if !left_ok {
            left = (left - h).max(U_MIN);
        }
        if !right_ok {
            right = (right + h).min(U_MAX);
        }
    }
    let (u, fu) = brent(&f, left, right, 1e-12, 500)?;
    // Compare against the bracket ends in case the minimum is on the boundary.
    [(u, fu), (left, f(left)), (right, f(right))]
        .into_iter()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Brent's minimization on `[a, b]`.
fn brent(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> Option<(f64, f64)> {
    const GOLDEN: f64 = 0.381_966_011_250_105_1;
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e): (f64, f64) = (0.0, 0.0);
    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-14;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            return Some((x, fx));
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if m >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= m { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    None
}
