//! Derivative-free local minimization.

/// Nelder–Mead with the standard coefficients (1, 2, ½, ½).
#[derive(Clone, Copy, Debug)]
pub struct NelderMead {
    pub initial_step: f64,
    pub max_evaluations: usize,
    /// Stop when the spread of simplex values drops below this.
    pub f_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead { initial_step: 1e-3, max_evaluations: 4000, f_tol: 1e-15 }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

impl NelderMead {
    pub fn minimize(&self, x0: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Minimum {
        let n = x0.len();
        let mut evaluations = 0;
        let mut eval = |x: &[f64], evaluations: &mut usize| {
            *evaluations += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), eval(x0, &mut evaluations)));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += self.initial_step;
            let v = eval(&x, &mut evaluations);
            simplex.push((x, v));
        }

        while evaluations < self.max_evaluations {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[n].1;
            if (worst - best).abs() <= self.f_tol {
                break;
            }
            let centroid: Vec<f64> =
                (0..n).map(|j| simplex[..n].iter().map(|p| p.0[j]).sum::<f64>() / n as f64).collect();
            let along =
                |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (w - c)).collect() };

            let xr = along(-1.0);
            let fr = eval(&xr, &mut evaluations);
            if fr < best {
                let xe = along(-2.0);
                let fe = eval(&xe, &mut evaluations);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < worst {
                let x = along(-0.5);
                let v = eval(&x, &mut evaluations);
                (x, v)
            } else {
                let x = along(0.5);
                let v = eval(&x, &mut evaluations);
                (x, v)
            };
            if fc < fr.min(worst) {
                simplex[n] = (xc, fc);
                continue;
            }
            let x_best = simplex[0].0.clone();
            for p in simplex.iter_mut().skip(1) {
                for (xi, bi) in p.0.iter_mut().zip(&x_best) {
                    *xi = bi + 0.5 * (*xi - bi);
                }
                p.1 = eval(&p.0, &mut evaluations);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Minimum { x, value, evaluations }
    }
}
