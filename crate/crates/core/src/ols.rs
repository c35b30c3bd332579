//! Ordinary least squares benchmark and moment-based frontier starts.
//!
//! OLS is model 1 of the ladder and doubles as the initializer for the
//! frontier likelihoods: the third residual moment identifies σ_u up to the
//! half-normal moment constant, and the intercept is shifted down by the
//! implied E[u] (observed consumption sits above the frontier).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::likelihood::{IneffBlock, ParameterVector, THETA_FLOOR};
use crate::model::{DesignMatrices, Family};

/// √(2/π)(4/π − 1): third central moment of a half-normal deviate per σ_u³
/// under the consumption-frontier orientation (ε = v + u, u ≥ 0).
const HALF_NORMAL_M3: f64 = 0.218_089_116_183_491_32;

/// E[u]/σ_u for half-normal u.
pub const HALF_NORMAL_MEAN: f64 = 0.797_884_560_802_865_4; // √(2/π)

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub beta_hat: DVector<f64>,
    /// ML variance (divisor n), so the Gaussian loglik nests LR tests.
    pub sigma2_hat: f64,
    pub loglik: f64,
    pub residuals: DVector<f64>,
    /// Unbiased covariance σ̂²·n/(n−p)·(XᵀX)⁻¹.
    pub cov_beta: DMatrix<f64>,
    /// Third standardized moment of the residuals.
    pub skewness: f64,
    /// Exact fit: residual variance at numerical zero.
    pub degenerate: bool,
}

/// Fit OLS by thin-QR orthogonal decomposition.
pub fn fit_ols(dm: &DesignMatrices) -> Result<OlsFit> {
    let n = dm.n();
    let p = dm.p();
    if n <= p {
        return Err(Error::InsufficientData { n, p });
    }

    let qr = dm.x.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let qty = q.transpose() * &dm.y;
    let beta_hat = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Collinear("<rank-deficient design>".to_string()))?;

    let residuals = &dm.y - &dm.x * &beta_hat;
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let sigma2_hat = ssr / n as f64;
    let y_scale = dm.y.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    let degenerate = sigma2_hat <= 1e-28 * y_scale;

    let loglik = if degenerate {
        f64::INFINITY
    } else {
        -0.5 * n as f64 * ((2.0 * std::f64::consts::PI).ln() + sigma2_hat.ln() + 1.0)
    };

    // (XᵀX)⁻¹ = R⁻¹ R⁻ᵀ.
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Collinear("<rank-deficient design>".to_string()))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let cov_beta = xtx_inv * (sigma2_hat * n as f64 / (n - p) as f64);

    let m2 = sigma2_hat;
    let m3: f64 = residuals.iter().map(|e| e * e * e).sum::<f64>() / n as f64;
    let skewness = if degenerate { 0.0 } else { m3 / m2.powf(1.5) };

    Ok(OlsFit { beta_hat, sigma2_hat, loglik, residuals, cov_beta, skewness, degenerate })
}

/// Corrected-OLS starting point for a frontier family.
#[derive(Debug, Clone)]
pub struct ColsStart {
    pub pv: ParameterVector,
    /// Residual skew had the wrong sign for a consumption frontier.
    pub wrong_skew: bool,
}

/// Moment-based starting values.
///
/// σ_u is identified from the third central residual moment,
/// m₃ = √(2/π)(4/π − 1)·σ_u³ (positive under the v+u orientation), clamped
/// below at 0.05·σ̂ so the start is total; σ_v² keeps at least a quarter of
/// the OLS variance; the intercept moves down by E[u] = √(2/π)·σ_u.
/// Negative skew cannot come from v+u, so it clamps and flags instead of
/// aborting: the fit then collapses toward λ≈0 and the LR test reports the
/// absence of inefficiency.
pub fn cols_start(ofit: &OlsFit, family: Family, dm: &DesignMatrices) -> ColsStart {
    let n = ofit.residuals.len() as f64;
    let m3: f64 = ofit.residuals.iter().map(|e| e * e * e).sum::<f64>() / n;
    let sigma = ofit.sigma2_hat.sqrt();
    let floor = 0.05 * sigma;

    let wrong_skew = m3 < 0.0;
    let sigma_u_raw = if m3 > 0.0 { (m3 / HALF_NORMAL_M3).cbrt() } else { 0.0 };
    let sigma_u = sigma_u_raw.max(floor).max(1e-12);
    let sigma_v2 =
        (ofit.sigma2_hat - (1.0 - 2.0 / std::f64::consts::PI) * sigma_u * sigma_u)
            .max(0.25 * ofit.sigma2_hat)
            .max(1e-24);

    let mut beta = ofit.beta_hat.clone();
    if let Some(idx) = dm.labels_x.iter().position(|l| l == "const") {
        beta[idx] -= HALF_NORMAL_MEAN * sigma_u;
    }

    let theta_v = sigma_v2.ln();
    let theta_u = (sigma_u * sigma_u).ln().max(THETA_FLOOR);

    let ineff = match family {
        Family::Ols => IneffBlock::None,
        Family::Nhn => IneffBlock::Nhn { theta_u },
        Family::NhnHet => {
            // Same (β, σ_v, σ_u) point: intercept of ln σ_u² carries the
            // moment estimate when Z has one, remaining loadings zero.
            let q = dm.q();
            let mut delta = DVector::zeros(q);
            if let Some(idx) = dm.labels_z.iter().position(|l| l == "const") {
                delta[idx] = theta_u;
            }
            IneffBlock::Het { delta }
        }
        Family::Tn => IneffBlock::Tn { delta: DVector::zeros(dm.q()), theta_u },
    };

    ColsStart { pv: ParameterVector { beta, theta_v, ineff }, wrong_skew }
}
