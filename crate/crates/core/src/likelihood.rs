//! Composed-error log-likelihoods and their analytic gradients.
//!
//! Orientation is a consumption frontier: ε = v + u with u ≥ 0, so overuse
//! pushes the observation above the frontier and the composite error is
//! right-skewed. Families:
//!
//! - `Nhn`    — normal–half-normal (Aigner–Lovell–Schmidt), u = |N(0, σ_u²)|;
//! - `NhnHet` — half-normal with ln σ_{u,i}² = Z_i·δ (Caudill–Ford–Gropper);
//! - `Tn`     — truncated normal with pre-truncation mean μ_i = Z_i·δ
//!              (Battese–Coelli one-step).
//!
//! Variances are optimized as logs (θ = ln σ²), so σ_v and σ_u stay positive
//! with no constraint handling; λ and σ² are always derived. Per-observation
//! terms are accumulated with compensated summation in record order, which
//! makes the totals insensitive to row permutations at the 1e-15 level.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{DesignMatrices, Family};
use crate::normal::{inverse_mills, log_norm_cdf, log_norm_pdf};

/// Floor for ln σ² parameters: σ ≈ 2e-9, treated as "no inefficiency".
pub const THETA_FLOOR: f64 = -40.0;
/// Ceiling for ln σ² parameters, guarding `exp` overflow during search.
pub const THETA_CEIL: f64 = 100.0;

pub const LN_2: f64 = std::f64::consts::LN_2;

/// Family-dependent inefficiency parameter block.
#[derive(Debug, Clone, PartialEq)]
pub enum IneffBlock {
    /// OLS: no inefficiency parameters.
    None,
    Nhn {
        theta_u: f64,
    },
    Het {
        delta: DVector<f64>,
    },
    Tn {
        delta: DVector<f64>,
        theta_u: f64,
    },
}

/// Packed parameter order: [β | θ_v | ineff-block].
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    pub beta: DVector<f64>,
    /// ln σ_v².
    pub theta_v: f64,
    pub ineff: IneffBlock,
}

impl ParameterVector {
    pub fn family(&self) -> Family {
        match self.ineff {
            IneffBlock::None => Family::Ols,
            IneffBlock::Nhn { .. } => Family::Nhn,
            IneffBlock::Het { .. } => Family::NhnHet,
            IneffBlock::Tn { .. } => Family::Tn,
        }
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
            + 1
            + match &self.ineff {
                IneffBlock::None => 0,
                IneffBlock::Nhn { .. } => 1,
                IneffBlock::Het { delta } => delta.len(),
                IneffBlock::Tn { delta, .. } => delta.len() + 1,
            }
    }

    pub fn pack(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.dim());
        out.extend(self.beta.iter());
        out.push(self.theta_v);
        match &self.ineff {
            IneffBlock::None => {}
            IneffBlock::Nhn { theta_u } => out.push(*theta_u),
            IneffBlock::Het { delta } => out.extend(delta.iter()),
            IneffBlock::Tn { delta, theta_u } => {
                out.extend(delta.iter());
                out.push(*theta_u);
            }
        }
        DVector::from_vec(out)
    }

    pub fn unpack(family: Family, p: usize, q: usize, packed: &DVector<f64>) -> Result<Self> {
        let expected = match family {
            Family::Ols => p + 1,
            Family::Nhn => p + 2,
            Family::NhnHet => p + 1 + q,
            Family::Tn => p + 2 + q,
        };
        if packed.len() != expected {
            return Err(Error::Dimension(format!(
                "packed vector has {} entries, family {family} with p={p}, q={q} needs {expected}",
                packed.len()
            )));
        }
        let beta = DVector::from_iterator(p, packed.iter().take(p).copied());
        let theta_v = packed[p];
        let ineff = match family {
            Family::Ols => IneffBlock::None,
            Family::Nhn => IneffBlock::Nhn { theta_u: packed[p + 1] },
            Family::NhnHet => IneffBlock::Het {
                delta: DVector::from_iterator(q, packed.iter().skip(p + 1).copied()),
            },
            Family::Tn => IneffBlock::Tn {
                delta: DVector::from_iterator(q, packed.iter().skip(p + 1).take(q).copied()),
                theta_u: packed[p + 1 + q],
            },
        };
        Ok(ParameterVector { beta, theta_v, ineff })
    }

    /// Labels aligned with the packed order.
    pub fn labels(family: Family, dm: &DesignMatrices) -> Vec<String> {
        let mut labels: Vec<String> = dm.labels_x.clone();
        labels.push("ln_sigma_v2".to_string());
        match family {
            Family::Ols => {}
            Family::Nhn => labels.push("ln_sigma_u2".to_string()),
            Family::NhnHet => {
                labels.extend(dm.labels_z.iter().map(|l| format!("lnsig2u[{l}]")));
            }
            Family::Tn => {
                labels.extend(dm.labels_z.iter().map(|l| format!("mu[{l}]")));
                labels.push("ln_sigma_u2".to_string());
            }
        }
        labels
    }
}

/// Compensated (Kahan) accumulator for deterministic ordered reduction.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(self) -> f64 {
        self.sum
    }
}

#[inline]
fn clamp_theta(theta: f64) -> (f64, bool) {
    let t = theta.clamp(THETA_FLOOR, THETA_CEIL);
    (t, t != theta)
}

fn residuals(dm: &DesignMatrices, beta: &DVector<f64>) -> Result<DVector<f64>> {
    if beta.len() != dm.p() {
        return Err(Error::Dimension(format!(
            "beta has {} entries, design has p = {}",
            beta.len(),
            dm.p()
        )));
    }
    Ok(&dm.y - &dm.x * beta)
}

fn require_z<'a>(dm: &'a DesignMatrices, delta: &DVector<f64>) -> Result<&'a nalgebra::DMatrix<f64>> {
    let z = dm
        .z
        .as_ref()
        .ok_or_else(|| Error::Dimension("family needs Z but the design has none".to_string()))?;
    if delta.len() != z.ncols() {
        return Err(Error::Dimension(format!(
            "delta has {} entries, Z has q = {}",
            delta.len(),
            z.ncols()
        )));
    }
    Ok(z)
}

/// Log-likelihood for the family encoded in `pv`.
pub fn loglik(dm: &DesignMatrices, pv: &ParameterVector) -> Result<f64> {
    match &pv.ineff {
        IneffBlock::None => loglik_ols(dm, pv),
        IneffBlock::Nhn { .. } => loglik_nhn(dm, pv),
        IneffBlock::Het { .. } => loglik_nhn_het(dm, pv),
        IneffBlock::Tn { .. } => loglik_tn(dm, pv),
    }
}

/// Gaussian log-likelihood at (β, σ_v²); the λ = 0 benchmark.
pub fn loglik_ols(dm: &DesignMatrices, pv: &ParameterVector) -> Result<f64> {
    let eps = residuals(dm, &pv.beta)?;
    let (theta_v, _) = clamp_theta(pv.theta_v);
    let sigma_v2 = theta_v.exp();
    let sigma_v = sigma_v2.sqrt();
    let mut acc = KahanSum::default();
    for e in eps.iter() {
        acc.add(log_norm_pdf(e / sigma_v) - sigma_v.ln());
    }
    Ok(acc.value())
}

/// Normal–half-normal composed error:
/// ℓ_i = ln 2 − ln σ + ln φ(ε_i/σ) + ln Φ(λ ε_i/σ).
pub fn loglik_nhn(dm: &DesignMatrices, pv: &ParameterVector) -> Result<f64> {
    let IneffBlock::Nhn { theta_u } = pv.ineff else {
        return Err(unsupported(pv, "loglik_nhn"));
    };
    let eps = residuals(dm, &pv.beta)?;
    let (theta_v, _) = clamp_theta(pv.theta_v);
    let (theta_u, _) = clamp_theta(theta_u);
    let sigma_v2 = theta_v.exp();
    let sigma_u2 = theta_u.exp();
    let mut acc = KahanSum::default();
    for e in eps.iter() {
        acc.add(nhn_obs(*e, sigma_v2, sigma_u2));
    }
    Ok(acc.value())
}

#[inline]
fn nhn_obs(eps: f64, sigma_v2: f64, sigma_u2: f64) -> f64 {
    let sigma2 = sigma_v2 + sigma_u2;
    let sigma = sigma2.sqrt();
    let lambda = (sigma_u2 / sigma_v2).sqrt();
    LN_2 - sigma.ln() + log_norm_pdf(eps / sigma) + log_norm_cdf(lambda * eps / sigma)
}

/// Heteroskedastic half-normal: per-observation σ_{u,i}² = exp(Z_i·δ).
pub fn loglik_nhn_het(dm: &DesignMatrices, pv: &ParameterVector) -> Result<f64> {
    let IneffBlock::Het { delta } = &pv.ineff else {
        return Err(unsupported(pv, "loglik_nhn_het"));
    };
    let z = require_z(dm, delta)?;
    let eps = residuals(dm, &pv.beta)?;
    let (theta_v, _) = clamp_theta(pv.theta_v);
    let sigma_v2 = theta_v.exp();
    let zd = z * delta;
    let mut acc = KahanSum::default();
    for (e, t) in eps.iter().zip(zd.iter()) {
        let (theta_ui, _) = clamp_theta(*t);
        acc.add(nhn_obs(*e, sigma_v2, theta_ui.exp()));
    }
    Ok(acc.value())
}

/// Truncated-normal inefficiency with mean μ_i = Z_i·δ:
/// ℓ_i = −ln σ − ln Φ(μ_i/σ_u) + ln φ((ε_i−μ_i)/σ) + ln Φ(μ*_i/σ*),
/// μ*_i = (σ_v²μ_i + σ_u²ε_i)/σ², σ* = σ_u σ_v/σ.
pub fn loglik_tn(dm: &DesignMatrices, pv: &ParameterVector) -> Result<f64> {
    let IneffBlock::Tn { delta, theta_u } = &pv.ineff else {
        return Err(unsupported(pv, "loglik_tn"));
    };
    let z = require_z(dm, delta)?;
    let eps = residuals(dm, &pv.beta)?;
    let (theta_v, _) = clamp_theta(pv.theta_v);
    let (theta_u, _) = clamp_theta(*theta_u);
    let sigma_v2 = theta_v.exp();
    let sigma_u2 = theta_u.exp();
    let mu = z * delta;
    let mut acc = KahanSum::default();
    for (e, m) in eps.iter().zip(mu.iter()) {
        acc.add(tn_obs(*e, *m, sigma_v2, sigma_u2));
    }
    Ok(acc.value())
}

#[inline]
fn tn_obs(eps: f64, mu: f64, sigma_v2: f64, sigma_u2: f64) -> f64 {
    let sigma2 = sigma_v2 + sigma_u2;
    let sigma = sigma2.sqrt();
    let sigma_u = sigma_u2.sqrt();
    let sigma_star = (sigma_u2 * sigma_v2 / sigma2).sqrt();
    let mu_star = (sigma_v2 * mu + sigma_u2 * eps) / sigma2;
    -sigma.ln() - log_norm_cdf(mu / sigma_u) + log_norm_pdf((eps - mu) / sigma)
        + log_norm_cdf(mu_star / sigma_star)
}

fn unsupported(pv: &ParameterVector, operation: &str) -> Error {
    Error::UnsupportedFamily {
        family: pv.family().to_string(),
        operation: operation.to_string(),
    }
}

/// Analytic gradient in the packed order of `pv`.
pub fn grad_loglik(dm: &DesignMatrices, pv: &ParameterVector) -> Result<DVector<f64>> {
    match &pv.ineff {
        IneffBlock::None => grad_ols(dm, pv),
        IneffBlock::Nhn { .. } => grad_nhn(dm, pv),
        IneffBlock::Het { .. } => grad_het(dm, pv),
        IneffBlock::Tn { .. } => grad_tn(dm, pv),
    }
}

fn grad_ols(dm: &DesignMatrices, pv: &ParameterVector) -> Result<DVector<f64>> {
    let eps = residuals(dm, &pv.beta)?;
    let (theta_v, v_clamped) = clamp_theta(pv.theta_v);
    let sigma_v2 = theta_v.exp();
    let p = dm.p();
    let mut grad = DVector::zeros(p + 1);
    let mut g_tv = KahanSum::default();
    for (i, e) in eps.iter().enumerate() {
        let dl_deps = -e / sigma_v2;
        for j in 0..p {
            grad[j] -= dm.x[(i, j)] * dl_deps;
        }
        g_tv.add(-0.5 + e * e / (2.0 * sigma_v2));
    }
    grad[p] = if v_clamped { 0.0 } else { g_tv.value() };
    Ok(grad)
}

/// Per-observation derivative kernel shared by NHN and the heteroskedastic
/// variant. Returns (∂ℓ/∂ε, ∂ℓ/∂σ_v², ∂ℓ/∂σ_u²).
#[inline]
fn nhn_obs_grad(eps: f64, sigma_v2: f64, sigma_u2: f64) -> (f64, f64, f64) {
    let sigma2 = sigma_v2 + sigma_u2;
    let sigma = sigma2.sqrt();
    let lambda = (sigma_u2 / sigma_v2).sqrt();
    let a = lambda * eps / sigma;
    let m = inverse_mills(a);

    let dl_deps = -eps / sigma2 + m * lambda / sigma;
    let common = -0.5 / sigma2 + eps * eps / (2.0 * sigma2 * sigma2);
    let da_dsv2 = -a * (sigma2 + sigma_v2) / (2.0 * sigma_v2 * sigma2);
    let da_dsu2 = a * sigma_v2 / (2.0 * sigma_u2 * sigma2);
    (dl_deps, common + m * da_dsv2, common + m * da_dsu2)
}

fn grad_nhn(dm: &DesignMatrices, pv: &ParameterVector) -> Result<DVector<f64>> {
    let IneffBlock::Nhn { theta_u } = pv.ineff else {
        return Err(unsupported(pv, "grad_loglik"));
    };
    let eps = residuals(dm, &pv.beta)?;
    let (theta_v, v_clamped) = clamp_theta(pv.theta_v);
    let (theta_u, u_clamped) = clamp_theta(theta_u);
    let sigma_v2 = theta_v.exp();
    let sigma_u2 = theta_u.exp();

    let p = dm.p();
    let mut grad = DVector::zeros(p + 2);
    let mut g_tv = KahanSum::default();
    let mut g_tu = KahanSum::default();
    for (i, e) in eps.iter().enumerate() {
        let (dl_deps, dl_dsv2, dl_dsu2) = nhn_obs_grad(*e, sigma_v2, sigma_u2);
        for j in 0..p {
            grad[j] -= dm.x[(i, j)] * dl_deps;
        }
        g_tv.add(dl_dsv2);
        g_tu.add(dl_dsu2);
    }
    grad[p] = if v_clamped { 0.0 } else { sigma_v2 * g_tv.value() };
    grad[p + 1] = if u_clamped { 0.0 } else { sigma_u2 * g_tu.value() };
    Ok(grad)
}

fn grad_het(dm: &DesignMatrices, pv: &ParameterVector) -> Result<DVector<f64>> {
    let IneffBlock::Het { delta } = &pv.ineff else {
        return Err(unsupported(pv, "grad_loglik"));
    };
    let z = require_z(dm, delta)?;
    let eps = residuals(dm, &pv.beta)?;
    let (theta_v, v_clamped) = clamp_theta(pv.theta_v);
    let sigma_v2 = theta_v.exp();
    let zd = z * delta;

    let p = dm.p();
    let q = delta.len();
    let mut grad = DVector::zeros(p + 1 + q);
    let mut g_tv = KahanSum::default();
    let mut g_delta = vec![KahanSum::default(); q];
    for (i, e) in eps.iter().enumerate() {
        let (theta_ui, ui_clamped) = clamp_theta(zd[i]);
        let sigma_u2 = theta_ui.exp();
        let (dl_deps, dl_dsv2, dl_dsu2) = nhn_obs_grad(*e, sigma_v2, sigma_u2);
        for j in 0..p {
            grad[j] -= dm.x[(i, j)] * dl_deps;
        }
        g_tv.add(dl_dsv2);
        if !ui_clamped {
            let w = sigma_u2 * dl_dsu2;
            for (k, acc) in g_delta.iter_mut().enumerate() {
                acc.add(z[(i, k)] * w);
            }
        }
    }
    grad[p] = if v_clamped { 0.0 } else { sigma_v2 * g_tv.value() };
    for k in 0..q {
        grad[p + 1 + k] = g_delta[k].value();
    }
    Ok(grad)
}

/// Per-observation TN derivative kernel:
/// returns (∂ℓ/∂ε, ∂ℓ/∂μ, ∂ℓ/∂σ_v², ∂ℓ/∂σ_u²).
#[inline]
fn tn_obs_grad(eps: f64, mu: f64, sigma_v2: f64, sigma_u2: f64) -> (f64, f64, f64, f64) {
    let sigma2 = sigma_v2 + sigma_u2;
    let sigma = sigma2.sqrt();
    let sigma_v = sigma_v2.sqrt();
    let sigma_u = sigma_u2.sqrt();
    let sigma_star = sigma_u * sigma_v / sigma;
    let mu_star = (sigma_v2 * mu + sigma_u2 * eps) / sigma2;
    let b = mu_star / sigma_star;
    let c = mu / sigma_u;
    let d = (eps - mu) / sigma;
    let mb = inverse_mills(b);
    let mc = inverse_mills(c);

    let dl_deps = -d / sigma + mb * sigma_u / (sigma * sigma_v);
    let dl_dmu = d / sigma - mc / sigma_u + mb * sigma_v / (sigma * sigma_u);
    let common = -0.5 / sigma2 + d * d / (2.0 * sigma2);
    let db_dsv2 = sigma_u / (2.0 * sigma * sigma_v) * ((mu - eps) / sigma2 - eps / sigma_v2);
    let db_dsu2 = sigma_v / (2.0 * sigma * sigma_u) * ((eps - mu) / sigma2 - mu / sigma_u2);
    let dl_dsv2 = common + mb * db_dsv2;
    let dl_dsu2 = common + mc * c / (2.0 * sigma_u2) + mb * db_dsu2;
    (dl_deps, dl_dmu, dl_dsv2, dl_dsu2)
}

fn grad_tn(dm: &DesignMatrices, pv: &ParameterVector) -> Result<DVector<f64>> {
    let IneffBlock::Tn { delta, theta_u } = &pv.ineff else {
        return Err(unsupported(pv, "grad_loglik"));
    };
    let z = require_z(dm, delta)?;
    let eps = residuals(dm, &pv.beta)?;
    let (theta_v, v_clamped) = clamp_theta(pv.theta_v);
    let (theta_u, u_clamped) = clamp_theta(*theta_u);
    let sigma_v2 = theta_v.exp();
    let sigma_u2 = theta_u.exp();
    let mu = z * delta;

    let p = dm.p();
    let q = delta.len();
    let mut grad = DVector::zeros(p + 2 + q);
    let mut g_tv = KahanSum::default();
    let mut g_tu = KahanSum::default();
    let mut g_delta = vec![KahanSum::default(); q];
    for (i, e) in eps.iter().enumerate() {
        let (dl_deps, dl_dmu, dl_dsv2, dl_dsu2) = tn_obs_grad(*e, mu[i], sigma_v2, sigma_u2);
        for j in 0..p {
            grad[j] -= dm.x[(i, j)] * dl_deps;
        }
        for (k, acc) in g_delta.iter_mut().enumerate() {
            acc.add(z[(i, k)] * dl_dmu);
        }
        g_tv.add(dl_dsv2);
        g_tu.add(dl_dsu2);
    }
    grad[p] = if v_clamped { 0.0 } else { sigma_v2 * g_tv.value() };
    for k in 0..q {
        grad[p + 1 + k] = g_delta[k].value();
    }
    grad[p + 1 + q] = if u_clamped { 0.0 } else { sigma_u2 * g_tu.value() };
    Ok(grad)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use nalgebra::DMatrix;

    /// Small deterministic design with covariate variation.
    pub(crate) fn toy_dm(n: usize, with_z: bool) -> DesignMatrices {
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { (i as f64 * 0.7).sin() });
        let y = DVector::from_fn(n, |i, _| {
            7.0 + 0.4 * (i as f64 * 0.7).sin() + 0.3 * (i as f64 * 1.3).cos() + 0.2
        });
        let z = with_z.then(|| {
            DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { (i as f64 * 0.3).cos() })
        });
        DesignMatrices {
            y,
            x,
            z,
            labels_x: vec!["const".into(), "x1".into()],
            labels_z: if with_z { vec!["const".into(), "z1".into()] } else { vec![] },
            log_dependent: true,
        }
    }

    fn nhn_pv(beta: &[f64], sigma_v: f64, sigma_u: f64) -> ParameterVector {
        ParameterVector {
            beta: DVector::from_vec(beta.to_vec()),
            theta_v: (sigma_v * sigma_v).ln(),
            ineff: IneffBlock::Nhn { theta_u: (sigma_u * sigma_u).ln() },
        }
    }

    #[test]
    fn single_obs_matches_reference() {
        // ε = 0.5, σ_v = 0.3, σ_u = 0.4 → ln[(2/0.5)·φ(1)·Φ(4/3)],
        // 40-digit reference value.
        let dm = DesignMatrices {
            y: DVector::from_vec(vec![0.5]),
            x: DMatrix::from_vec(1, 1, vec![0.0]),
            z: None,
            labels_x: vec!["const".into()],
            labels_z: vec![],
            log_dependent: true,
        };
        let pv = nhn_pv(&[0.0], 0.3, 0.4);
        let got = loglik_nhn(&dm, &pv).unwrap();
        assert!((got - (-0.128_286_748_825_302_78)).abs() < 1e-13, "got {got}");
    }

    #[test]
    fn nhn_reduces_to_ols_at_sigma_u_floor() {
        let dm = toy_dm(60, false);
        let beta = [6.8, 0.3];
        let sigma_v = 0.35f64;
        let pv_nhn = ParameterVector {
            beta: DVector::from_vec(beta.to_vec()),
            theta_v: (sigma_v * sigma_v).ln(),
            ineff: IneffBlock::Nhn { theta_u: THETA_FLOOR },
        };
        let pv_ols = ParameterVector {
            beta: DVector::from_vec(beta.to_vec()),
            theta_v: (sigma_v * sigma_v).ln(),
            ineff: IneffBlock::None,
        };
        let l_nhn = loglik_nhn(&dm, &pv_nhn).unwrap();
        let l_ols = loglik_ols(&dm, &pv_ols).unwrap();
        assert!((l_nhn - l_ols).abs() < 1e-6, "nhn {l_nhn} vs ols {l_ols}");
    }

    #[test]
    fn het_with_constant_variance_equals_nhn() {
        let dm = toy_dm(40, true);
        let c = (0.16f64).ln();
        let pv_het = ParameterVector {
            beta: DVector::from_vec(vec![6.9, 0.2]),
            theta_v: (0.09f64).ln(),
            ineff: IneffBlock::Het { delta: DVector::from_vec(vec![c, 0.0]) },
        };
        let pv_nhn = ParameterVector {
            beta: DVector::from_vec(vec![6.9, 0.2]),
            theta_v: (0.09f64).ln(),
            ineff: IneffBlock::Nhn { theta_u: c },
        };
        let a = loglik_nhn_het(&dm, &pv_het).unwrap();
        let b = loglik_nhn(&dm, &pv_nhn).unwrap();
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn het_is_separable_across_observations() {
        // Z splits a two-observation sample: the total equals the sum of two
        // single-observation half-normal likelihoods at their own σ_u.
        let x = DMatrix::from_vec(2, 1, vec![0.0, 0.0]);
        let y = DVector::from_vec(vec![0.4, -0.2]);
        let z = DMatrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let dm = DesignMatrices {
            y: y.clone(),
            x: x.clone(),
            z: Some(z),
            labels_x: vec!["const".into()],
            labels_z: vec!["g1".into(), "g2".into()],
            log_dependent: true,
        };
        let (t1, t2) = ((0.25f64).ln(), (0.04f64).ln());
        let pv = ParameterVector {
            beta: DVector::from_vec(vec![0.0]),
            theta_v: (0.09f64).ln(),
            ineff: IneffBlock::Het { delta: DVector::from_vec(vec![t1, t2]) },
        };
        let total = loglik_nhn_het(&dm, &pv).unwrap();

        let single = |yv: f64, theta_u: f64| {
            let dm1 = DesignMatrices {
                y: DVector::from_vec(vec![yv]),
                x: DMatrix::from_vec(1, 1, vec![0.0]),
                z: None,
                labels_x: vec!["const".into()],
                labels_z: vec![],
                log_dependent: true,
            };
            let pv1 = ParameterVector {
                beta: DVector::from_vec(vec![0.0]),
                theta_v: (0.09f64).ln(),
                ineff: IneffBlock::Nhn { theta_u },
            };
            loglik_nhn(&dm1, &pv1).unwrap()
        };
        let want = single(0.4, t1) + single(-0.2, t2);
        assert!((total - want).abs() < 1e-12);
    }

    #[test]
    fn tn_with_zero_mean_equals_nhn() {
        let dm = toy_dm(50, true);
        let pv_tn = ParameterVector {
            beta: DVector::from_vec(vec![6.7, 0.1]),
            theta_v: (0.09f64).ln(),
            ineff: IneffBlock::Tn {
                delta: DVector::from_vec(vec![0.0, 0.0]),
                theta_u: (0.16f64).ln(),
            },
        };
        let pv_nhn = nhn_pv(&[6.7, 0.1], 0.3, 0.4);
        let a = loglik_tn(&dm, &pv_tn).unwrap();
        let b = loglik_nhn(&dm, &pv_nhn).unwrap();
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn tn_single_obs_matches_reference() {
        // ε = 0.6, μ = 0.2, σ_v = 0.35, σ_u = 0.45; 40-digit reference.
        let got = tn_obs(0.6, 0.2, 0.35 * 0.35, 0.45 * 0.45);
        assert!((got - (-0.258_463_568_519_331_37)).abs() < 1e-13, "got {got}");
    }

    #[test]
    fn tn_deep_negative_mean_stays_finite() {
        // μ/σ_u = −30 on a single observation.
        let got = tn_obs(0.1, -3.0, 0.09, 0.01);
        assert!(got.is_finite());
        assert!((got - 0.233_057_416_383_253_14).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn translation_equivariance() {
        let dm = toy_dm(30, true);
        let mut dm_shift = dm.clone();
        let c = 2.5;
        dm_shift.y = dm.y.add_scalar(c);
        for family in ["nhn", "het", "tn"] {
            let (pv, pv_shift) = match family {
                "nhn" => {
                    let a = nhn_pv(&[6.8, 0.3], 0.3, 0.4);
                    let mut b = a.clone();
                    b.beta[0] += c;
                    (a, b)
                }
                "het" => {
                    let a = ParameterVector {
                        beta: DVector::from_vec(vec![6.8, 0.3]),
                        theta_v: (0.09f64).ln(),
                        ineff: IneffBlock::Het { delta: DVector::from_vec(vec![-1.8, 0.4]) },
                    };
                    let mut b = a.clone();
                    b.beta[0] += c;
                    (a, b)
                }
                _ => {
                    let a = ParameterVector {
                        beta: DVector::from_vec(vec![6.8, 0.3]),
                        theta_v: (0.09f64).ln(),
                        ineff: IneffBlock::Tn {
                            delta: DVector::from_vec(vec![0.3, -0.2]),
                            theta_u: (0.2f64).ln(),
                        },
                    };
                    let mut b = a.clone();
                    b.beta[0] += c;
                    (a, b)
                }
            };
            let l1 = loglik(&dm, &pv).unwrap();
            let l2 = loglik(&dm_shift, &pv_shift).unwrap();
            assert!((l1 - l2).abs() < 1e-9, "{family}: {l1} vs {l2}");
        }
    }

    #[test]
    fn dimension_mismatch_is_contract_error() {
        let dm = toy_dm(10, false);
        let pv = nhn_pv(&[1.0], 0.3, 0.4); // beta too short
        assert!(matches!(loglik_nhn(&dm, &pv), Err(Error::Dimension(_))));
    }

    fn finite_difference_grad(
        dm: &DesignMatrices,
        pv: &ParameterVector,
    ) -> DVector<f64> {
        let family = pv.family();
        let p = dm.p();
        let q = dm.q();
        let packed = pv.pack();
        let mut grad = DVector::zeros(packed.len());
        for j in 0..packed.len() {
            let h = 1e-5 * packed[j].abs().max(1.0);
            let mut plus = packed.clone();
            plus[j] += h;
            let mut minus = packed.clone();
            minus[j] -= h;
            let lp = loglik(dm, &ParameterVector::unpack(family, p, q, &plus).unwrap()).unwrap();
            let lm = loglik(dm, &ParameterVector::unpack(family, p, q, &minus).unwrap()).unwrap();
            grad[j] = (lp - lm) / (2.0 * h);
        }
        grad
    }

    #[test]
    fn gradients_match_finite_differences() {
        let dm = toy_dm(25, true);
        let points: Vec<ParameterVector> = vec![
            nhn_pv(&[6.5, 0.2], 0.4, 0.3),
            nhn_pv(&[7.2, -0.4], 0.2, 0.7),
            ParameterVector {
                beta: DVector::from_vec(vec![6.9, 0.1]),
                theta_v: (0.1f64).ln(),
                ineff: IneffBlock::Het { delta: DVector::from_vec(vec![-1.5, 0.6]) },
            },
            ParameterVector {
                beta: DVector::from_vec(vec![7.1, -0.2]),
                theta_v: (0.15f64).ln(),
                ineff: IneffBlock::Tn {
                    delta: DVector::from_vec(vec![0.25, -0.4]),
                    theta_u: (0.3f64).ln(),
                },
            },
            ParameterVector {
                beta: DVector::from_vec(vec![7.0, 0.0]),
                theta_v: (0.05f64).ln(),
                ineff: IneffBlock::None,
            },
        ];
        for pv in points {
            let analytic = grad_loglik(&dm, &pv).unwrap();
            let fd = finite_difference_grad(&dm, &pv);
            for j in 0..analytic.len() {
                let denom = fd[j].abs().max(1.0);
                assert!(
                    (analytic[j] - fd[j]).abs() / denom <= 1e-4,
                    "family {:?}, coord {j}: analytic {} vs fd {}",
                    pv.family(),
                    analytic[j],
                    fd[j]
                );
            }
        }
    }

    #[test]
    fn pack_unpack_round_trip() {
        let pv = ParameterVector {
            beta: DVector::from_vec(vec![1.0, 2.0, 3.0]),
            theta_v: -1.5,
            ineff: IneffBlock::Tn {
                delta: DVector::from_vec(vec![0.1, 0.2]),
                theta_u: -0.7,
            },
        };
        let packed = pv.pack();
        let back = ParameterVector::unpack(Family::Tn, 3, 2, &packed).unwrap();
        assert_eq!(pv, back);
    }
}
