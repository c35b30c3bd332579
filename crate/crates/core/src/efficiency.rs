//! Per-household inefficiency and efficiency scoring.
//!
//! Conditional on the composite residual ε_i, the inefficiency u_i is
//! normal with mean μ*_i and scale σ*_i truncated to [0, ∞). Two estimators
//! are offered: E[u|ε] (Jondrow et al.) and the efficiency expectations
//! E[e^{−u}|ε] (Battese–Coelli, the default) or exp(−E[u|ε]). All kernels
//! are evaluated through the log-space Mills machinery, so scores stay
//! finite and inside (0, 1] even when μ*/σ* is far in the left tail.

use nalgebra::DVector;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::likelihood::{IneffBlock, ParameterVector, THETA_CEIL, THETA_FLOOR};
use crate::mle::FitResult;
use crate::model::DesignMatrices;
use crate::normal::{inverse_mills_plus_x, log_norm_cdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum TeEstimator {
    /// E[e^{−u}|ε] (Battese–Coelli).
    #[serde(rename = "BC")]
    Bc,
    /// exp(−E[u|ε]).
    #[serde(rename = "EXP_JLMS")]
    ExpJlms,
}

impl std::fmt::Display for TeEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TeEstimator::Bc => f.write_str("BC"),
            TeEstimator::ExpJlms => f.write_str("EXP_JLMS"),
        }
    }
}

/// E[u | ε] for u|ε ~ N(μ*, σ*²) truncated to u ≥ 0.
///
/// E[u|ε] = μ* + σ*·m(μ*/σ*) = σ*·(b + m(b)); the combined Mills form
/// keeps full precision when b is far below zero.
#[inline]
pub fn jlms_kernel(mu_star: f64, sigma_star: f64) -> f64 {
    let b = mu_star / sigma_star;
    (sigma_star * inverse_mills_plus_x(b)).max(0.0)
}

/// E[e^{−u} | ε] for the same conditional law, evaluated in log space.
#[inline]
pub fn bc_kernel(mu_star: f64, sigma_star: f64) -> f64 {
    let b = mu_star / sigma_star;
    let log_te =
        -mu_star + 0.5 * sigma_star * sigma_star + log_norm_cdf(b - sigma_star) - log_norm_cdf(b);
    log_te.min(0.0).exp()
}

/// Conditional moments (μ*_i, σ*_i) and residuals for a fitted frontier.
fn conditional_moments(
    pv: &ParameterVector,
    dm: &DesignMatrices,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let eps = &dm.y - &dm.x * &pv.beta;
    let n = eps.len();
    let sigma_v2 = pv.theta_v.clamp(THETA_FLOOR, THETA_CEIL).exp();
    let mut mu_star = DVector::zeros(n);
    let mut sigma_star = DVector::zeros(n);
    match &pv.ineff {
        IneffBlock::None => {
            return Err(Error::UnsupportedFamily {
                family: "OLS".to_string(),
                operation: "efficiency scoring".to_string(),
            })
        }
        IneffBlock::Nhn { theta_u } => {
            let sigma_u2 = theta_u.clamp(THETA_FLOOR, THETA_CEIL).exp();
            let sigma2 = sigma_v2 + sigma_u2;
            let s_star = (sigma_u2 * sigma_v2 / sigma2).sqrt();
            for i in 0..n {
                mu_star[i] = eps[i] * sigma_u2 / sigma2;
                sigma_star[i] = s_star;
            }
        }
        IneffBlock::Het { delta } => {
            let z = dm
                .z
                .as_ref()
                .ok_or_else(|| Error::Dimension("heteroskedastic family needs Z".to_string()))?;
            let zd = z * delta;
            for i in 0..n {
                let sigma_u2 = zd[i].clamp(THETA_FLOOR, THETA_CEIL).exp();
                let sigma2 = sigma_v2 + sigma_u2;
                mu_star[i] = eps[i] * sigma_u2 / sigma2;
                sigma_star[i] = (sigma_u2 * sigma_v2 / sigma2).sqrt();
            }
        }
        IneffBlock::Tn { delta, theta_u } => {
            let z = dm
                .z
                .as_ref()
                .ok_or_else(|| Error::Dimension("truncated-normal family needs Z".to_string()))?;
            let sigma_u2 = theta_u.clamp(THETA_FLOOR, THETA_CEIL).exp();
            let sigma2 = sigma_v2 + sigma_u2;
            let s_star = (sigma_u2 * sigma_v2 / sigma2).sqrt();
            let mu = z * delta;
            for i in 0..n {
                mu_star[i] = (sigma_v2 * mu[i] + sigma_u2 * eps[i]) / sigma2;
                sigma_star[i] = s_star;
            }
        }
    }
    Ok((mu_star, sigma_star, eps))
}

/// Per-household conditional mean inefficiency E[u_i|ε_i].
pub fn jlms(fr: &FitResult, dm: &DesignMatrices) -> Result<DVector<f64>> {
    let (mu_star, sigma_star, _) = conditional_moments(&fr.pv_hat, dm)?;
    Ok(DVector::from_fn(mu_star.len(), |i, _| jlms_kernel(mu_star[i], sigma_star[i])))
}

/// Per-household technical efficiency under the chosen estimator.
pub fn efficiency_scores(
    fr: &FitResult,
    dm: &DesignMatrices,
    estimator: TeEstimator,
) -> Result<DVector<f64>> {
    let (mu_star, sigma_star, _) = conditional_moments(&fr.pv_hat, dm)?;
    Ok(DVector::from_fn(mu_star.len(), |i, _| match estimator {
        TeEstimator::Bc => bc_kernel(mu_star[i], sigma_star[i]),
        TeEstimator::ExpJlms => (-jlms_kernel(mu_star[i], sigma_star[i])).exp(),
    }))
}

/// Frontier prediction in kWh (the minimum consumption the model assigns).
pub fn predict_frontier(fr: &FitResult, dm: &DesignMatrices) -> Result<DVector<f64>> {
    if fr.pv_hat.beta.len() != dm.p() {
        return Err(Error::Dimension(format!(
            "fit has {} frontier coefficients, design has p = {}",
            fr.pv_hat.beta.len(),
            dm.p()
        )));
    }
    let xb = &dm.x * &fr.pv_hat.beta;
    Ok(if dm.log_dependent { xb.map(f64::exp) } else { xb })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoreSummary {
    pub mean: f64,
    /// Sample SD (divisor n−1); absent for a single household.
    pub sd: Option<f64>,
    pub min: f64,
    pub max: f64,
}

/// Mean/SD/min/max of a score vector.
pub fn score_summary(te: &[f64]) -> Result<ScoreSummary> {
    if te.is_empty() {
        return Err(Error::EmptyDataset { rejected: 0 });
    }
    let n = te.len() as f64;
    let mean = te.iter().sum::<f64>() / n;
    let sd = if te.len() >= 2 {
        Some((te.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt())
    } else {
        None
    };
    let min = te.iter().copied().fold(f64::INFINITY, f64::min);
    let max = te.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ScoreSummary { mean, sd, min, max })
}

#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    /// `bins + 1` edges spanning [0, 1].
    pub edges: Vec<f64>,
    /// Right-closed bin counts; they always sum to n.
    pub counts: Vec<usize>,
}

/// Fixed-width, right-closed histogram of scores over (0, 1].
pub fn histogram(te: &[f64], bins: usize) -> Histogram {
    let bins = bins.max(1);
    let mut counts = vec![0usize; bins];
    let b = bins as f64;
    for &v in te {
        let idx = (v * b).ceil() as isize - 1;
        let idx = idx.clamp(0, bins as isize - 1) as usize;
        counts[idx] += 1;
    }
    let edges = (0..=bins).map(|k| k as f64 / b).collect();
    Histogram { edges, counts }
}

#[derive(Debug, Clone, Serialize)]
pub struct OveruseBuckets {
    /// Share of households using at least 20% more than the frontier.
    pub share_ge_20pct: f64,
    /// Share using at least 50% more.
    pub share_ge_50pct: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HouseholdScore {
    pub id: String,
    pub eps: f64,
    pub u_jlms: f64,
    pub te_bc: f64,
    pub te_exp_jlms: f64,
    pub frontier_pred_kwh: f64,
    pub observed_kwh: f64,
    /// observed/frontier − 1.
    pub overuse_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EfficiencyReport {
    pub estimator: TeEstimator,
    pub per_household: Vec<HouseholdScore>,
    /// Summary of the selected estimator's scores.
    pub summary: ScoreSummary,
    pub histogram: Histogram,
    pub overuse: OveruseBuckets,
}

/// Assemble the full per-household report.
pub fn efficiency_report(
    fr: &FitResult,
    dm: &DesignMatrices,
    ds: &Dataset,
    estimator: TeEstimator,
    bins: usize,
) -> Result<EfficiencyReport> {
    if ds.n() != dm.n() {
        return Err(Error::Dimension(format!(
            "dataset has {} records, design has n = {}",
            ds.n(),
            dm.n()
        )));
    }
    let (mu_star, sigma_star, eps) = conditional_moments(&fr.pv_hat, dm)?;
    let frontier = predict_frontier(fr, dm)?;
    let n = dm.n();

    let mut per_household = Vec::with_capacity(n);
    let mut selected = Vec::with_capacity(n);
    let mut ge20 = 0usize;
    let mut ge50 = 0usize;
    for (i, record) in ds.records().iter().enumerate() {
        let u = jlms_kernel(mu_star[i], sigma_star[i]);
        let te_bc = bc_kernel(mu_star[i], sigma_star[i]);
        let te_exp_jlms = (-u).exp();
        let observed = record.annual_kwh;
        let overuse = observed / frontier[i] - 1.0;
        if overuse >= 0.20 {
            ge20 += 1;
        }
        if overuse >= 0.50 {
            ge50 += 1;
        }
        selected.push(match estimator {
            TeEstimator::Bc => te_bc,
            TeEstimator::ExpJlms => te_exp_jlms,
        });
        per_household.push(HouseholdScore {
            id: record.id.clone(),
            eps: eps[i],
            u_jlms: u,
            te_bc,
            te_exp_jlms,
            frontier_pred_kwh: frontier[i],
            observed_kwh: observed,
            overuse_ratio: overuse,
        });
    }

    let summary = score_summary(&selected)?;
    let histogram = histogram(&selected, bins);
    Ok(EfficiencyReport {
        estimator,
        per_household,
        summary,
        histogram,
        overuse: OveruseBuckets {
            share_ge_20pct: ge20 as f64 / n as f64,
            share_ge_50pct: ge50 as f64 / n as f64,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn jlms_kernel_matches_reference() {
        // ε = 0.5, σ_v = 0.3, σ_u = 0.4 → μ* = 0.32, σ* = 0.24.
        let u = jlms_kernel(0.32, 0.24);
        assert!((u - 0.363_313_054_448_543).abs() < 1e-12, "u = {u}");
    }

    #[test]
    fn bc_kernel_matches_reference() {
        let te = bc_kernel(0.32, 0.24);
        assert!((te - 0.709_608_832_658_365_3).abs() < 1e-12, "te = {te}");
    }

    #[test]
    fn deep_tail_kernels_match_reference() {
        // μ*/σ* = −25 with σ* = 0.24: conditional inefficiency nearly zero.
        let u = jlms_kernel(-6.0, 0.24);
        assert!((u - 9.569_522_893_815_02e-3).abs() < 1e-13, "u = {u}");
        let te = bc_kernel(-6.0, 0.24);
        assert!((te - 0.990_521_044_451_341_7).abs() < 1e-12, "te = {te}");
        assert!(u > 0.0 && te > 0.0 && te <= 1.0);
    }

    #[test]
    fn sigma_u_floor_gives_full_efficiency() {
        // σ* at the variance floor: u ≈ 0, te ≈ 1.
        let sigma_star = (THETA_FLOOR / 2.0).exp();
        let u = jlms_kernel(-25.0 * sigma_star, sigma_star);
        assert!(u >= 0.0 && u <= 1e-9, "u = {u}");
        let te = bc_kernel(-25.0 * sigma_star, sigma_star);
        assert!(te > 0.999_999_999 && te <= 1.0);
    }

    #[test]
    fn kernels_are_monotone_in_eps() {
        // Larger residual ⇒ weakly larger u, weakly smaller te.
        let sigma_star = 0.3;
        let mut last_u = f64::NEG_INFINITY;
        let mut last_te = f64::INFINITY;
        for k in -40..=40 {
            let mu_star = 0.1 * f64::from(k);
            let u = jlms_kernel(mu_star, sigma_star);
            let te = bc_kernel(mu_star, sigma_star);
            assert!(u >= last_u - 1e-12);
            assert!(te <= last_te + 1e-12);
            last_u = u;
            last_te = te;
        }
    }

    #[test]
    fn exp_jlms_identity() {
        for &(m, s) in &[(0.3, 0.2), (-1.0, 0.5), (2.0, 0.1)] {
            let u = jlms_kernel(m, s);
            assert_eq!((-u).exp(), (-jlms_kernel(m, s)).exp());
        }
    }

    #[test]
    fn summary_of_constant_vector() {
        let s = score_summary(&[0.9, 0.9, 0.9]).unwrap();
        assert_eq!(s.mean, 0.9);
        assert_eq!(s.sd, Some(0.0));
        assert_eq!(s.min, 0.9);
        assert_eq!(s.max, 0.9);
    }

    #[test]
    fn empty_scores_error() {
        assert!(score_summary(&[]).is_err());
    }

    #[test]
    fn histogram_bins_are_right_closed() {
        let h = histogram(&[0.05, 0.050000001, 1.0, 0.999, 0.0001], 20);
        assert_eq!(h.counts.iter().sum::<usize>(), 5);
        assert_eq!(h.counts[0], 2); // 0.05 and 0.0001 in (0, 0.05]
        assert_eq!(h.counts[1], 1); // 0.050000001 in (0.05, 0.1]
        assert_eq!(h.counts[19], 2); // 0.999 and 1.0 in (0.95, 1]
    }

    proptest! {
        #[test]
        fn histogram_counts_partition_input(values in proptest::collection::vec(1e-6f64..=1.0, 1..200), bins in 1usize..40) {
            let h = histogram(&values, bins);
            prop_assert_eq!(h.counts.iter().sum::<usize>(), values.len());
            prop_assert_eq!(h.edges.len(), h.counts.len() + 1);
        }

        #[test]
        fn kernels_stay_in_range(mu in -30.0f64..5.0, log_s in -6.0f64..1.0) {
            let s = log_s.exp();
            let u = jlms_kernel(mu, s);
            let te = bc_kernel(mu, s);
            prop_assert!(u >= 0.0 && u.is_finite());
            prop_assert!(te > 0.0 && te <= 1.0, "te = {}", te);
            // exp(−u) is also a valid score.
            let te2 = (-u).exp();
            prop_assert!(te2 > 0.0 && te2 <= 1.0);
        }
    }
}
