//! Derivative-free simplex search plus quasi-Newton polish.
//!
//! Both minimizers are deterministic: no randomness, stable tie-breaking,
//! fixed evaluation order. The MLE driver runs Nelder-Mead first to get off
//! the flat λ ≈ 0 ridge of the frontier likelihoods, then BFGS with the
//! analytic gradient to machine-level first-order conditions.

use nalgebra::{DMatrix, DVector};

/// Nelder-Mead with the dimension-adaptive coefficients of Gao & Han (2012).
pub struct NelderMead {
    pub max_iter: usize,
    /// Stop when the simplex function spread falls below
    /// `ftol_rel * (1 + |f_best|)`.
    pub ftol_rel: f64,
    /// Initial simplex step per coordinate, relative to max(1, |x_i|).
    pub step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead { max_iter: 0, ftol_rel: 1e-12, step: 0.1 }
    }
}

pub struct NmOutcome {
    pub x: DVector<f64>,
    pub f: f64,
    pub iterations: usize,
}

impl NelderMead {
    pub fn minimize<F: FnMut(&DVector<f64>) -> f64>(
        &self,
        mut f: F,
        x0: &DVector<f64>,
    ) -> NmOutcome {
        let n = x0.len();
        let max_iter = if self.max_iter == 0 { 250 * n.max(2) } else { self.max_iter };
        // Adaptive coefficients.
        let nf = n as f64;
        let alpha = 1.0;
        let beta = 1.0 + 2.0 / nf;
        let gamma = 0.75 - 1.0 / (2.0 * nf);
        let delta = 1.0 - 1.0 / nf;

        let mut simplex: Vec<DVector<f64>> = Vec::with_capacity(n + 1);
        simplex.push(x0.clone());
        for i in 0..n {
            let mut v = x0.clone();
            v[i] += self.step * v[i].abs().max(1.0);
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| guard(f(v))).collect();

        let mut iterations = 0;
        while iterations < max_iter {
            iterations += 1;
            // Order vertices; stable sort keeps determinism on ties.
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
            let best = order[0];
            let worst = order[n];
            let second_worst = order[n - 1];

            let spread = values[worst] - values[best];
            if spread.abs() <= self.ftol_rel * (1.0 + values[best].abs()) {
                break;
            }

            // Centroid of all but the worst vertex.
            let mut centroid = DVector::zeros(n);
            for &i in order.iter().take(n) {
                centroid += &simplex[i];
            }
            centroid /= nf;

            let reflected = &centroid + (&centroid - &simplex[worst]) * alpha;
            let f_r = guard(f(&reflected));

            if f_r < values[best] {
                let expanded = &centroid + (&reflected - &centroid) * beta;
                let f_e = guard(f(&expanded));
                if f_e < f_r {
                    simplex[worst] = expanded;
                    values[worst] = f_e;
                } else {
                    simplex[worst] = reflected;
                    values[worst] = f_r;
                }
            } else if f_r < values[second_worst] {
                simplex[worst] = reflected;
                values[worst] = f_r;
            } else {
                let contracted = if f_r < values[worst] {
                    &centroid + (&reflected - &centroid) * gamma
                } else {
                    &centroid - (&reflected - &centroid) * gamma
                };
                let f_c = guard(f(&contracted));
                if f_c < values[worst].min(f_r) {
                    simplex[worst] = contracted;
                    values[worst] = f_c;
                } else {
                    // Shrink toward the best vertex.
                    let best_point = simplex[best].clone();
                    for &i in order.iter().skip(1) {
                        simplex[i] = &best_point + (&simplex[i] - &best_point) * delta;
                        values[i] = guard(f(&simplex[i]));
                    }
                }
            }
        }

        let (arg_best, &f_best) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        NmOutcome { x: simplex[arg_best].clone(), f: f_best, iterations }
    }
}

fn guard(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

pub struct Bfgs {
    pub max_iter: usize,
    /// Target gradient norm, relative: `‖g‖ ≤ gtol·(1 + |f|)`.
    pub gtol_rel: f64,
    /// Relative objective-change convergence threshold.
    pub ftol_rel: f64,
}

impl Default for Bfgs {
    fn default() -> Self {
        Bfgs { max_iter: 400, gtol_rel: 1e-9, ftol_rel: 1e-13 }
    }
}

pub struct BfgsOutcome {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad: DVector<f64>,
    pub iterations: usize,
    /// Gradient criterion reached (as opposed to stalling).
    pub converged: bool,
}

impl Bfgs {
    pub fn minimize<F, G>(&self, mut f: F, mut g: G, x0: &DVector<f64>) -> BfgsOutcome
    where
        F: FnMut(&DVector<f64>) -> f64,
        G: FnMut(&DVector<f64>) -> DVector<f64>,
    {
        let n = x0.len();
        let mut x = x0.clone();
        let mut fx = guard(f(&x));
        let mut grad = g(&x);
        let mut h_inv = DMatrix::<f64>::identity(n, n);
        let mut iterations = 0;
        let mut converged = grad.norm() <= self.gtol_rel * (1.0 + fx.abs());

        while !converged && iterations < self.max_iter {
            iterations += 1;
            let direction = -(&h_inv * &grad);
            let slope = grad.dot(&direction);
            if !slope.is_finite() || slope >= 0.0 {
                // Lost positive definiteness; reset to steepest descent.
                h_inv = DMatrix::identity(n, n);
                let direction = -grad.clone();
                let (x_new, f_new, ok) = backtrack(&mut f, &x, fx, &direction, grad.dot(&direction));
                if !ok {
                    break;
                }
                let grad_new = g(&x_new);
                x = x_new;
                fx = f_new;
                grad = grad_new;
                converged = grad.norm() <= self.gtol_rel * (1.0 + fx.abs());
                continue;
            }

            let (x_new, f_new, ok) = backtrack(&mut f, &x, fx, &direction, slope);
            if !ok {
                break;
            }
            let grad_new = g(&x_new);
            let s = &x_new - &x;
            let yv = &grad_new - &grad;
            let sy = s.dot(&yv);
            if sy > 1e-10 * s.norm() * yv.norm() {
                // Sherman-Morrison BFGS inverse update.
                let rho = 1.0 / sy;
                let hy = &h_inv * &yv;
                let yhy = yv.dot(&hy);
                let ss = &s * s.transpose();
                let hys = &hy * s.transpose();
                h_inv = &h_inv + ss * (rho * rho * yhy + rho) - (&hys + hys.transpose()) * rho;
            }

            let f_change = (fx - f_new).abs();
            x = x_new;
            fx = f_new;
            grad = grad_new;
            converged = grad.norm() <= self.gtol_rel * (1.0 + fx.abs());
            if !converged && f_change <= self.ftol_rel * (1.0 + fx.abs()) {
                break;
            }
        }

        BfgsOutcome { x, f: fx, grad, iterations, converged }
    }
}

/// Armijo backtracking line search; returns (x_new, f_new, accepted).
fn backtrack<F: FnMut(&DVector<f64>) -> f64>(
    f: &mut F,
    x: &DVector<f64>,
    fx: f64,
    direction: &DVector<f64>,
    slope: f64,
) -> (DVector<f64>, f64, bool) {
    const C1: f64 = 1e-4;
    let mut t = 1.0;
    for _ in 0..50 {
        let x_new = x + direction * t;
        let f_new = guard(f(&x_new));
        if f_new <= fx + C1 * t * slope {
            return (x_new, f_new, true);
        }
        t *= 0.5;
    }
    (x.clone(), fx, false)
}
