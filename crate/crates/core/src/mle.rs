//! Maximum-likelihood driver: starts, two-stage optimization, convergence
//! certification, and observed-information covariance.
//!
//! The frontier likelihoods are flat in λ near zero, so every fit runs a
//! simplex stage from corrected-OLS starts before the quasi-Newton polish.
//! Nested warm starts (OLS point for NHN; the fitted NHN point for the
//! heteroskedastic and truncated families) are always tried as well, which
//! makes the ladder monotone by construction: the winning point can never
//! fall below the likelihood of the model it nests.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::likelihood::{
    grad_loglik, loglik, IneffBlock, ParameterVector, THETA_CEIL, THETA_FLOOR,
};
use crate::model::{DesignMatrices, Family, ModelSpec};
use crate::normal::norm_cdf;
use crate::ols::{cols_start, fit_ols};
use crate::optim::{Bfgs, NelderMead};

/// Certified first-order tolerance: ‖∇ℓ‖ ≤ GRAD_TOL·(1 + |ℓ|).
pub const GRAD_TOL: f64 = 1e-5;
/// Restart budget of deterministically jittered starts.
const RESTART_BUDGET: usize = 5;
/// Step for the central-difference Hessian of the analytic gradient.
const HESSIAN_STEP: f64 = 1e-4;

/// Quantities derived from the raw variance parameters.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Derived {
    pub sigma_v: f64,
    /// σ_u, or the mean of σ_{u,i} for the heteroskedastic family.
    pub sigma_u: f64,
    pub lambda: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Convergence {
    pub iterations: usize,
    pub grad_norm: f64,
    pub restarts: usize,
    pub wrong_skew_warning: bool,
    /// σ_u collapsed to its floor: "no detectable inefficiency".
    pub boundary_collapse: bool,
    pub converged: bool,
    pub message: Option<String>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub labels: Vec<String>,
    pub pv_hat: ParameterVector,
    pub loglik: f64,
    /// Inverse observed information; `None` when the information matrix is
    /// singular (estimates are still valid).
    pub cov: Option<DMatrix<f64>>,
    pub se: Option<DVector<f64>>,
    pub z: Option<DVector<f64>>,
    pub p_values: Option<DVector<f64>>,
    pub derived: Derived,
    pub convergence: Convergence,
    pub n: usize,
    pub column_hash: String,
}

impl FitResult {
    pub fn family(&self) -> Family {
        self.spec.family
    }
}

/// Fit a model by maximum likelihood (OLS delegates to least squares).
pub fn fit(spec: &ModelSpec, dm: &DesignMatrices) -> Result<FitResult> {
    spec.validate()?;
    match spec.family {
        Family::Ols => fit_ols_wrapped(spec, dm),
        _ => fit_frontier(spec, dm),
    }
}

fn fit_ols_wrapped(spec: &ModelSpec, dm: &DesignMatrices) -> Result<FitResult> {
    let ofit = fit_ols(dm)?;
    let n = dm.n();
    let p = dm.p();
    let pv_hat = ParameterVector {
        beta: ofit.beta_hat.clone(),
        theta_v: ofit.sigma2_hat.max(1e-300).ln(),
        ineff: IneffBlock::None,
    };
    let labels = ParameterVector::labels(Family::Ols, dm);

    // Covariance: OLS block for β, var(ln σ̂²) = 2/n, zero cross terms.
    let dim = p + 1;
    let mut cov = DMatrix::zeros(dim, dim);
    cov.view_mut((0, 0), (p, p)).copy_from(&ofit.cov_beta);
    cov[(p, p)] = 2.0 / n as f64;
    let (se, z, p_values) = inference_from_cov(&pv_hat.pack(), &cov);

    let sigma_v = ofit.sigma2_hat.sqrt();
    let grad_norm = grad_loglik(dm, &pv_hat)?.norm();
    Ok(FitResult {
        spec: spec.clone(),
        labels,
        pv_hat,
        loglik: ofit.loglik,
        cov: Some(cov),
        se: Some(se),
        z: Some(z),
        p_values: Some(p_values),
        derived: Derived { sigma_v, sigma_u: 0.0, lambda: 0.0, sigma2: ofit.sigma2_hat },
        convergence: Convergence {
            iterations: 1,
            grad_norm,
            restarts: 0,
            wrong_skew_warning: false,
            boundary_collapse: false,
            converged: true,
            message: None,
        },
        n,
        column_hash: dm.column_hash(),
    })
}

fn fit_frontier(spec: &ModelSpec, dm: &DesignMatrices) -> Result<FitResult> {
    let n = dm.n();
    let family = spec.family;
    let ofit = fit_ols(dm)?;
    if ofit.degenerate {
        return Err(Error::Invalid(
            "dependent variable is an exact linear function of the design; \
             no error variance to decompose"
                .to_string(),
        ));
    }
    let start = cols_start(&ofit, family, dm);
    let dim = start.pv.dim();
    if n <= dim {
        return Err(Error::InsufficientData { n, p: dim });
    }

    // Candidate starts, tried in fixed order; best final point wins.
    let mut candidates: Vec<ParameterVector> = vec![start.pv.clone()];
    match family {
        Family::Nhn => {
            candidates.push(ParameterVector {
                beta: ofit.beta_hat.clone(),
                theta_v: ofit.sigma2_hat.ln(),
                ineff: IneffBlock::Nhn { theta_u: THETA_FLOOR },
            });
        }
        Family::NhnHet | Family::Tn => {
            // Warm start from the fitted plain half-normal point.
            let nhn_spec = ModelSpec { family: Family::Nhn, ineff_vars: Vec::new(), ..spec.clone() };
            if let Ok(nhn_fit) = fit_frontier(&nhn_spec, dm) {
                let (beta, theta_v, theta_u) = match &nhn_fit.pv_hat.ineff {
                    IneffBlock::Nhn { theta_u } => {
                        (nhn_fit.pv_hat.beta.clone(), nhn_fit.pv_hat.theta_v, *theta_u)
                    }
                    _ => unreachable!(),
                };
                let embedded = match family {
                    Family::NhnHet => {
                        let mut delta = DVector::zeros(dm.q());
                        match dm.labels_z.iter().position(|l| l == "const") {
                            Some(idx) => {
                                delta[idx] = theta_u;
                                Some(IneffBlock::Het { delta })
                            }
                            // No intercept in Z: the NHN point is not
                            // representable; skip the warm start.
                            None => None,
                        }
                    }
                    Family::Tn => Some(IneffBlock::Tn {
                        delta: DVector::zeros(dm.q()),
                        theta_u,
                    }),
                    _ => unreachable!(),
                };
                if let Some(ineff) = embedded {
                    candidates.push(ParameterVector { beta, theta_v, ineff });
                }
            }
        }
        Family::Ols => unreachable!(),
    }

    let p = dm.p();
    let q = dm.q();
    let objective = |x: &DVector<f64>| -> f64 {
        match ParameterVector::unpack(family, p, q, x) {
            Ok(pv) => match loglik(dm, &pv) {
                Ok(ll) => -ll,
                Err(_) => f64::INFINITY,
            },
            Err(_) => f64::INFINITY,
        }
    };
    let gradient = |x: &DVector<f64>| -> DVector<f64> {
        match ParameterVector::unpack(family, p, q, x) {
            Ok(pv) => match grad_loglik(dm, &pv) {
                Ok(g) => -g,
                Err(_) => DVector::zeros(x.len()),
            },
            Err(_) => DVector::zeros(x.len()),
        }
    };

    let mut best: Option<(DVector<f64>, f64, f64, bool)> = None; // (x, ll, gnorm, converged)
    let mut iterations = 0usize;
    let mut restarts = 0usize;

    let try_start = |x0: &DVector<f64>, iterations: &mut usize| -> (DVector<f64>, f64, f64, bool) {
        let nm = NelderMead::default().minimize(&objective, x0);
        *iterations += nm.iterations;
        let polish = Bfgs::default().minimize(&objective, &gradient, &nm.x);
        *iterations += polish.iterations;
        // Newton steps on the gradient itself: the likelihood surface is
        // too flat for f-comparisons to certify tight first-order
        // conditions, but the score is full-precision.
        let (x, gnorm, steps) = newton_polish(family, dm, &polish.x);
        *iterations += steps;
        let ll = -objective(&x);
        let ok = gnorm <= GRAD_TOL * (1.0 + ll.abs());
        (x, ll, gnorm, ok)
    };

    for cand in &candidates {
        let outcome = try_start(&cand.pack(), &mut iterations);
        if best.as_ref().map_or(true, |b| outcome.1 > b.1) {
            best = Some(outcome);
        }
    }

    // Jittered restarts only if nothing converged yet.
    let mut seed: u64 = 0x5ca1_ab1e_0000_0001;
    while !best.as_ref().map_or(false, |b| b.3) && restarts < RESTART_BUDGET {
        restarts += 1;
        let base = best.as_ref().map(|b| b.0.clone()).unwrap_or_else(|| candidates[0].pack());
        let mut jittered = base.clone();
        for j in 0..jittered.len() {
            let u = unit_uniform(&mut seed);
            jittered[j] += 0.3 * (u - 0.5) * jittered[j].abs().max(1.0);
        }
        let outcome = try_start(&jittered, &mut iterations);
        if outcome.1 > best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1) {
            best = Some(outcome);
        }
    }

    let (mut x_hat, _, grad_norm, converged) = best.expect("at least one candidate");

    // Canonicalize boundary collapse.
    let mut boundary_collapse = false;
    let theta_u_index = match family {
        Family::Nhn => Some(p + 1),
        Family::Tn => Some(p + 1 + q),
        _ => None,
    };
    if let Some(idx) = theta_u_index {
        if x_hat[idx] <= THETA_FLOOR + 1e-6 {
            x_hat[idx] = THETA_FLOOR;
            boundary_collapse = true;
        }
    }
    let pv_hat = ParameterVector::unpack(family, p, q, &x_hat)?;
    if family == Family::NhnHet {
        if let IneffBlock::Het { delta } = &pv_hat.ineff {
            let zd = dm.z.as_ref().expect("checked") * delta;
            if zd.iter().all(|t| *t <= THETA_FLOOR + 1e-6) {
                boundary_collapse = true;
            }
        }
    }
    let loglik_hat = loglik(dm, &pv_hat)?;
    let grad_norm = if boundary_collapse { grad_loglik(dm, &pv_hat)?.norm() } else { grad_norm };

    if !converged {
        let derived = derived_quantities(&pv_hat, dm);
        let best_fit = FitResult {
            spec: spec.clone(),
            labels: ParameterVector::labels(family, dm),
            pv_hat: pv_hat.clone(),
            loglik: loglik_hat,
            cov: None,
            se: None,
            z: None,
            p_values: None,
            derived,
            convergence: Convergence {
                iterations,
                grad_norm,
                restarts,
                wrong_skew_warning: start.wrong_skew,
                boundary_collapse,
                converged: false,
                message: Some("optimizer failed the gradient criterion".to_string()),
            },
            n,
            column_hash: dm.column_hash(),
        };
        return Err(Error::NonConvergence {
            restarts,
            loglik: loglik_hat,
            grad_norm,
            best: Box::new(best_fit),
        });
    }

    // Covariance from the observed information.
    let (cov, se, z, p_values, cov_message) =
        match observed_information_covariance(family, dm, &pv_hat) {
            Some(cov) => {
                let (se, z, pvals) = inference_from_cov(&x_hat, &cov);
                (Some(cov), Some(se), Some(z), Some(pvals), None)
            }
            None => (None, None, None, None, Some("covariance unavailable (singular information matrix)".to_string())),
        };

    let derived = derived_quantities(&pv_hat, dm);
    let message = if boundary_collapse {
        Some("no detectable inefficiency".to_string())
    } else {
        cov_message
    };

    Ok(FitResult {
        spec: spec.clone(),
        labels: ParameterVector::labels(family, dm),
        pv_hat,
        loglik: loglik_hat,
        cov,
        se,
        z,
        p_values,
        derived,
        convergence: Convergence {
            iterations,
            grad_norm,
            restarts,
            wrong_skew_warning: start.wrong_skew,
            boundary_collapse,
            converged: true,
            message,
        },
        n,
        column_hash: dm.column_hash(),
    })
}

fn unit_uniform(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// σ_v, σ_u, λ, σ² from raw parameters; for the heteroskedastic family σ_u
/// is the mean of the per-observation σ_{u,i}.
pub fn derived_quantities(pv: &ParameterVector, dm: &DesignMatrices) -> Derived {
    let sigma_v = (pv.theta_v.clamp(THETA_FLOOR, THETA_CEIL) / 2.0).exp();
    let sigma_u = match &pv.ineff {
        IneffBlock::None => 0.0,
        IneffBlock::Nhn { theta_u } | IneffBlock::Tn { theta_u, .. } => {
            (theta_u.clamp(THETA_FLOOR, THETA_CEIL) / 2.0).exp()
        }
        IneffBlock::Het { delta } => {
            let z = dm.z.as_ref().expect("heteroskedastic family carries Z");
            let zd = z * delta;
            zd.iter().map(|t| (t.clamp(THETA_FLOOR, THETA_CEIL) / 2.0).exp()).sum::<f64>()
                / zd.len() as f64
        }
    };
    Derived {
        sigma_v,
        sigma_u,
        lambda: sigma_u / sigma_v,
        sigma2: sigma_u * sigma_u + sigma_v * sigma_v,
    }
}

fn inference_from_cov(
    x: &DVector<f64>,
    cov: &DMatrix<f64>,
) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let dim = x.len();
    let mut se = DVector::zeros(dim);
    let mut z = DVector::zeros(dim);
    let mut p = DVector::zeros(dim);
    for j in 0..dim {
        se[j] = cov[(j, j)].max(0.0).sqrt();
        z[j] = if se[j] > 0.0 { x[j] / se[j] } else { f64::NAN };
        p[j] = if z[j].is_finite() { 2.0 * norm_cdf(-z[j].abs()) } else { f64::NAN };
    }
    (se, z, p)
}

/// Drive the score toward zero with damped Newton steps on the gradient.
///
/// Returns (point, gradient norm, hessian evaluations). Steps are accepted
/// only when they shrink ‖∇ℓ‖, so the result never regresses.
fn newton_polish(
    family: Family,
    dm: &DesignMatrices,
    x0: &DVector<f64>,
) -> (DVector<f64>, f64, usize) {
    let p = dm.p();
    let q = dm.q();
    let grad_at = |x: &DVector<f64>| -> Option<DVector<f64>> {
        let pv = ParameterVector::unpack(family, p, q, x).ok()?;
        grad_loglik(dm, &pv).ok().filter(|g| g.iter().all(|v| v.is_finite()))
    };

    let mut x = x0.clone();
    let mut grad = match grad_at(&x) {
        Some(g) => g,
        None => return (x, f64::INFINITY, 0),
    };
    let mut steps = 0usize;
    for _ in 0..10 {
        let gnorm = grad.norm();
        if gnorm <= 1e-12 {
            break;
        }
        let Some(info) = observed_information(family, dm, &x) else { break };
        steps += 1;
        // Ridge-regularized solve keeps collapsed directions harmless.
        let dim = x.len();
        let scale = info.diagonal().amax().max(1.0);
        let mut solved = None;
        let mut ridge = 0.0;
        for _ in 0..6 {
            let reg = &info + DMatrix::identity(dim, dim) * ridge;
            if let Some(chol) = reg.cholesky() {
                solved = Some(chol.solve(&grad));
                break;
            }
            ridge = if ridge == 0.0 { 1e-10 * scale } else { ridge * 100.0 };
        }
        let Some(step) = solved else { break };

        let mut accepted = false;
        let mut t = 1.0;
        for _ in 0..12 {
            let x_new = &x + &step * t;
            if let Some(g_new) = grad_at(&x_new) {
                if g_new.norm() < gnorm {
                    x = x_new;
                    grad = g_new;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let gnorm = grad.norm();
    (x, gnorm, steps)
}

/// Observed information −∇²ℓ by central differences of the analytic
/// gradient.
fn observed_information(
    family: Family,
    dm: &DesignMatrices,
    x: &DVector<f64>,
) -> Option<DMatrix<f64>> {
    let dim = x.len();
    let p = dm.p();
    let q = dm.q();
    let mut hess = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let h = HESSIAN_STEP * (1.0 + x[j].abs());
        let mut plus = x.clone();
        plus[j] += h;
        let mut minus = x.clone();
        minus[j] -= h;
        let gp = grad_loglik(dm, &ParameterVector::unpack(family, p, q, &plus).ok()?).ok()?;
        let gm = grad_loglik(dm, &ParameterVector::unpack(family, p, q, &minus).ok()?).ok()?;
        let col = (gp - gm) / (2.0 * h);
        hess.set_column(j, &col);
    }
    Some(-(hess.clone() + hess.transpose()) * 0.5)
}

/// Negative inverse Hessian by central differences of the analytic gradient.
/// Returns `None` when the information matrix is not positive definite.
fn observed_information_covariance(
    family: Family,
    dm: &DesignMatrices,
    pv: &ParameterVector,
) -> Option<DMatrix<f64>> {
    let info = observed_information(family, dm, &pv.pack())?;
    let chol = info.cholesky()?;
    Some(chol.inverse())
}

/// Post-fit certification record.
#[derive(Debug, Clone, Serialize)]
pub struct Certification {
    pub loglik_reevaluated: f64,
    pub grad_norm: f64,
    pub max_derived_gap: f64,
    pub checks: Vec<(String, bool)>,
}

/// Re-evaluate everything the estimates claim and fail on the first broken
/// invariant.
pub fn certify(fr: &FitResult, dm: &DesignMatrices) -> Result<Certification> {
    let mut checks = Vec::new();
    let mut fail: Option<String> = None;
    let mut record = |name: &str, ok: bool, fail: &mut Option<String>| {
        checks.push((name.to_string(), ok));
        if !ok && fail.is_none() {
            *fail = Some(name.to_string());
        }
    };

    let ll = loglik(dm, &fr.pv_hat)?;
    let ll_ok = if ll.is_finite() {
        (ll - fr.loglik).abs() <= 1e-10 * (1.0 + ll.abs())
    } else {
        ll == fr.loglik
    };
    record("loglik reproduces stored value", ll_ok, &mut fail);

    let grad_norm = if fr.loglik.is_finite() {
        grad_loglik(dm, &fr.pv_hat)?.norm()
    } else {
        0.0
    };
    record(
        "gradient norm within first-order tolerance",
        grad_norm <= GRAD_TOL * (1.0 + fr.loglik.abs()) || !fr.loglik.is_finite(),
        &mut fail,
    );

    let derived = derived_quantities(&fr.pv_hat, dm);
    let gap_lambda = (derived.lambda - fr.derived.lambda).abs();
    let gap_sigma2 = (derived.sigma2 - fr.derived.sigma2).abs();
    let identity = (derived.sigma2 - (derived.sigma_u.powi(2) + derived.sigma_v.powi(2))).abs();
    let max_derived_gap = gap_lambda.max(gap_sigma2).max(identity);
    record("derived quantities match raw parameters", max_derived_gap <= 1e-12, &mut fail);
    record("lambda is nonnegative", fr.derived.lambda >= 0.0, &mut fail);

    if let (Some(cov), Some(se)) = (&fr.cov, &fr.se) {
        let sym = (cov - cov.transpose()).abs().max();
        record("covariance symmetric", sym <= 1e-10, &mut fail);
        let mut se_ok = true;
        for j in 0..se.len() {
            if (se[j] - cov[(j, j)].max(0.0).sqrt()).abs() > 1e-12 * (1.0 + se[j]) {
                se_ok = false;
            }
        }
        record("standard errors equal sqrt of diagonal", se_ok, &mut fail);
        record(
            "covariance positive semidefinite",
            cov.clone().cholesky().is_some() || se.iter().all(|s| *s >= 0.0),
            &mut fail,
        );
    }

    match fail {
        Some(name) => Err(Error::Certification(name)),
        None => Ok(Certification {
            loglik_reevaluated: ll,
            grad_norm,
            max_derived_gap,
            checks,
        }),
    }
}
