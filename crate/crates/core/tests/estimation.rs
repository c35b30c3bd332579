//! Estimator-level integration tests: parameter recovery, the nesting
//! chain, equivariance properties, and ladder behavior on synthetic data.

mod common;

use common::{het_dgp, nhn_dgp, tn_dgp};
use nalgebra::DVector;
use sfa::data::Dataset;
use sfa::diagnostics::{derive_ladder_specs, frontier_slope_indices, lr_test, run_ladder, wald_joint};
use sfa::efficiency::{efficiency_scores, TeEstimator};
use sfa::mle::{certify, fit};
use sfa::model::{build, Family, ModelSpec};
use sfa::simulate::{generate, CovariateSpec, DgpSpec, Generator};

#[test]
fn nhn_recovery_within_three_standard_errors() {
    let dgp = nhn_dgp(5000, 20240_1);
    let sim = generate(&dgp).unwrap();
    let spec = dgp.model_spec();
    let dm = build(&spec, &sim.dataset).unwrap();
    let fr = fit(&spec, &dm).unwrap();
    let est = fr.pv_hat.pack();
    let se = fr.se.as_ref().expect("covariance available");
    let truth = dgp.truth_packed();
    for j in 0..truth.len() {
        let gap = (est[j] - truth[j]).abs();
        assert!(
            gap <= 3.0 * se[j],
            "param {j} ({}): estimate {} vs truth {} (|gap| = {gap:.4}, 3se = {:.4})",
            fr.labels[j],
            est[j],
            truth[j],
            3.0 * se[j]
        );
    }
}

#[test]
fn zero_inefficiency_data_collapses_to_the_floor() {
    // Seed chosen so the draw has the negative residual skew that forces
    // the no-inefficiency limit (positive-skew draws legitimately fit an
    // interior lambda under this null).
    let mut dgp = nhn_dgp(1500, 7);
    dgp.sigma_u = Some(0.0);
    let sim = generate(&dgp).unwrap();
    let spec = dgp.model_spec();
    let dm = build(&spec, &sim.dataset).unwrap();
    let fr = fit(&spec, &dm).unwrap();
    assert!(fr.convergence.boundary_collapse);
    assert!(fr.convergence.wrong_skew_warning);
    assert_eq!(
        fr.convergence.message.as_deref(),
        Some("no detectable inefficiency")
    );
    // λ at the floor and the LR against OLS is numerically zero.
    assert!(fr.derived.lambda < 1e-6, "lambda = {}", fr.derived.lambda);
    let ols_spec = ModelSpec { family: Family::Ols, ineff_vars: vec![], ..spec.clone() };
    let ols = fit(&ols_spec, &build(&ols_spec, &sim.dataset).unwrap()).unwrap();
    let lr = lr_test(ols.loglik, fr.loglik, 1).unwrap();
    assert!(lr.lr <= 1e-4, "LR = {}", lr.lr);
    assert!(!lr.reject);
}

#[test]
fn nesting_chain_holds_on_a_common_fixture() {
    // One dataset, all four families; warm starts make the chain monotone.
    let dgp = tn_dgp(1200, 20240_3);
    let sim = generate(&dgp).unwrap();
    let base = ModelSpec {
        family: Family::Tn,
        frontier_vars: dgp.frontier_vars.clone(),
        ineff_vars: dgp.ineff_vars.clone(),
        log_dependent: true,
        include_frontier_intercept: true,
        include_ineff_intercept: true,
        income_quartile_one_hot: false,
    };
    let specs = derive_ladder_specs(&base);
    let mut loglik = Vec::new();
    for spec in &specs {
        let dm = build(spec, &sim.dataset).unwrap();
        let fr = fit(spec, &dm).unwrap();
        certify(&fr, &dm).unwrap();
        loglik.push(fr.loglik);
    }
    let slack = 1e-6;
    assert!(loglik[0] <= loglik[1] + slack, "OLS {} vs NHN {}", loglik[0], loglik[1]);
    assert!(loglik[1] <= loglik[2] + slack, "NHN {} vs HET {}", loglik[1], loglik[2]);
    assert!(loglik[1] <= loglik[3] + slack, "NHN {} vs TN {}", loglik[1], loglik[3]);
    // The LR pair must never trip the nesting-violation clamp.
    assert!(lr_test(loglik[0], loglik[1], 1).is_ok());
}

#[test]
fn scale_equivariance_of_the_full_pipeline() {
    let dgp = nhn_dgp(900, 20240_4);
    let sim = generate(&dgp).unwrap();
    let spec = dgp.model_spec();
    let dm = build(&spec, &sim.dataset).unwrap();
    let fr = fit(&spec, &dm).unwrap();

    let scaled: Vec<_> = sim
        .dataset
        .records()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.annual_kwh *= 3.0;
            r
        })
        .collect();
    let ds3 = Dataset::new("x3", scaled).unwrap();
    let dm3 = build(&spec, &ds3).unwrap();
    let fr3 = fit(&spec, &dm3).unwrap();

    let p = fr.pv_hat.pack();
    let p3 = fr3.pv_hat.pack();
    assert!(
        (p3[0] - p[0] - 3f64.ln()).abs() <= 1e-8,
        "intercept shift {} vs ln 3",
        p3[0] - p[0]
    );
    for j in 1..p.len() {
        assert!((p3[j] - p[j]).abs() <= 1e-8, "coord {j} moved by {}", p3[j] - p[j]);
    }
    for (a, b) in [
        (fr.derived.sigma_v, fr3.derived.sigma_v),
        (fr.derived.sigma_u, fr3.derived.sigma_u),
        (fr.derived.lambda, fr3.derived.lambda),
    ] {
        assert!((a - b).abs() <= 1e-8);
    }
    let te = efficiency_scores(&fr, &dm, TeEstimator::Bc).unwrap();
    let te3 = efficiency_scores(&fr3, &dm3, TeEstimator::Bc).unwrap();
    assert!((te - te3).abs().max() <= 1e-8);
}

#[test]
fn record_permutation_leaves_estimates_unchanged() {
    let dgp = nhn_dgp(700, 20240_5);
    let sim = generate(&dgp).unwrap();
    let spec = dgp.model_spec();
    let dm = build(&spec, &sim.dataset).unwrap();
    let fr = fit(&spec, &dm).unwrap();

    let mut records: Vec<_> = sim.dataset.records().to_vec();
    records.reverse();
    let mid = records.len() / 2;
    records.swap(0, mid);
    let ds2 = Dataset::new("perm", records).unwrap();
    let dm2 = build(&spec, &ds2).unwrap();
    let fr2 = fit(&spec, &dm2).unwrap();

    let diff = (fr.pv_hat.pack() - fr2.pv_hat.pack()).abs().max();
    assert!(diff <= 1e-10, "max parameter drift {diff:.3e}");
}

#[test]
fn certification_catches_tampering() {
    let dgp = nhn_dgp(400, 20240_6);
    let sim = generate(&dgp).unwrap();
    let spec = dgp.model_spec();
    let dm = build(&spec, &sim.dataset).unwrap();
    let mut fr = fit(&spec, &dm).unwrap();
    certify(&fr, &dm).unwrap();

    fr.pv_hat.beta[0] += 0.1;
    let err = certify(&fr, &dm).unwrap_err();
    assert!(err.to_string().contains("loglik") || err.to_string().contains("gradient"));
}

#[test]
fn tn_and_het_recover_their_own_processes() {
    for (dgp, tag) in [(het_dgp(4000, 20240_7), "het"), (tn_dgp(4000, 20240_8), "tn")] {
        let sim = generate(&dgp).unwrap();
        let spec = dgp.model_spec();
        let dm = build(&spec, &sim.dataset).unwrap();
        let fr = fit(&spec, &dm).unwrap();
        certify(&fr, &dm).unwrap();
        let est = fr.pv_hat.pack();
        let truth = dgp.truth_packed();
        let se = fr.se.as_ref().expect("covariance available");
        for j in 0..truth.len() {
            let gap = (est[j] - truth[j]).abs();
            // 4 SEs: single replication, heavier-tailed small-sample
            // distributions for the inefficiency blocks.
            assert!(
                gap <= 4.0 * se[j].max(0.02),
                "{tag} param {j} ({}): {} vs {} (se {})",
                fr.labels[j],
                est[j],
                truth[j],
                se[j]
            );
        }
    }
}

#[test]
fn wald_test_size_on_the_null() {
    // All slopes zero: the joint Wald over the slopes should reject at the
    // 5% level for roughly 5% of replications.
    let base = DgpSpec {
        family: Family::Ols,
        frontier_vars: vec!["hh_size".to_string(), "wfpr".to_string()],
        ineff_vars: vec![],
        include_frontier_intercept: true,
        include_ineff_intercept: true,
        beta_true: vec![7.5, 0.0, 0.0],
        sigma_v: 0.4,
        sigma_u: None,
        delta_true: None,
        n: 120,
        seed: 0,
        covariates: vec![
            CovariateSpec {
                name: "hh_size".to_string(),
                gen: Generator::UniformInt { lo: 2, hi: 9 },
            },
            CovariateSpec {
                name: "wfpr".to_string(),
                gen: Generator::Uniform { lo: 0.0, hi: 1.0 },
            },
        ],
        log_dependent: true,
    };
    let spec = base.model_spec();
    let reps = 500;
    let mut rejections = 0;
    for r in 0..reps {
        let mut dgp = base.clone();
        dgp.seed = sfa::simulate::derive_seed(11_000, r as u64);
        let sim = generate(&dgp).unwrap();
        let dm = build(&spec, &sim.dataset).unwrap();
        let fr = fit(&spec, &dm).unwrap();
        let w = wald_joint(&fr, &frontier_slope_indices(&fr)).unwrap();
        if w.p < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / reps as f64;
    assert!(
        (0.03..=0.07).contains(&rate),
        "null rejection rate {rate} outside [3%, 7%]"
    );
}

#[test]
fn wald_is_invariant_to_subset_reordering() {
    let dgp = nhn_dgp(800, 20240_9);
    let sim = generate(&dgp).unwrap();
    let spec = dgp.model_spec();
    let dm = build(&spec, &sim.dataset).unwrap();
    let fr = fit(&spec, &dm).unwrap();
    let a = wald_joint(&fr, &[1, 2]).unwrap();
    let b = wald_joint(&fr, &[2, 1]).unwrap();
    assert!((a.chi2 - b.chi2).abs() <= 1e-9 * (1.0 + a.chi2.abs()));
    // One-coefficient subset equals the squared z statistic.
    let single = wald_joint(&fr, &[1]).unwrap();
    let z = fr.z.as_ref().unwrap()[1];
    assert!((single.chi2 - z * z).abs() <= 1e-9 * (1.0 + z * z));
}

#[test]
fn ladder_on_inefficient_data_rejects_ols() {
    let dgp = nhn_dgp(1500, 20241_0);
    let sim = generate(&dgp).unwrap();
    let base = ModelSpec {
        family: Family::Nhn,
        frontier_vars: dgp.frontier_vars.clone(),
        ineff_vars: vec!["wfpr".to_string()],
        log_dependent: true,
        include_frontier_intercept: true,
        include_ineff_intercept: true,
        income_quartile_one_hot: false,
    };
    let specs = derive_ladder_specs(&base);
    let report = run_ladder(&sim.dataset, &specs).unwrap();
    let lr = report.lr_ols_vs_nhn.as_ref().expect("both fits succeed");
    assert!(lr.reject, "expected inefficiency detection, LR = {}", lr.lr);
    assert!(matches!(
        report.selected,
        Some(Family::Nhn | Family::NhnHet | Family::Tn)
    ));
    // Log-likelihood ordering inside the report.
    let ll: Vec<f64> = report
        .models
        .iter()
        .map(|m| m.row.as_ref().unwrap().loglik)
        .collect();
    assert!(ll[0] <= ll[1] + 1e-6 && ll[1] <= ll[2] + 1e-6 && ll[1] <= ll[3] + 1e-6);
}

#[test]
fn ladder_on_clean_data_recommends_ols() {
    let mut dgp = nhn_dgp(1200, 20241_1);
    dgp.sigma_u = Some(0.0);
    let sim = generate(&dgp).unwrap();
    let base = ModelSpec {
        family: Family::Nhn,
        frontier_vars: dgp.frontier_vars.clone(),
        ineff_vars: vec!["wfpr".to_string()],
        log_dependent: true,
        include_frontier_intercept: true,
        include_ineff_intercept: true,
        income_quartile_one_hot: false,
    };
    let specs = derive_ladder_specs(&base);
    let report = run_ladder(&sim.dataset, &specs).unwrap();
    let lr = report.lr_ols_vs_nhn.as_ref().expect("both fits succeed");
    assert!(!lr.reject, "LR = {} should not reject", lr.lr);
    assert_eq!(report.selected, Some(Family::Ols));
}

#[test]
fn boundary_pileup_under_the_null_is_documented_behavior() {
    // With σ_u = 0 truth, the MLE lands on the λ = 0 boundary whenever the
    // sample skew is negative, which happens for half of all draws; this
    // seeded sweep documents the pile (31/60 here, reproducible).
    let mut dgp = nhn_dgp(500, 4_4001);
    dgp.sigma_u = Some(0.0);
    let cal = sfa::simulate::monte_carlo(&dgp, 60).unwrap();
    let share = cal.near_zero_lambda as f64 / 60.0;
    assert!(
        share >= 0.5,
        "boundary pileup share {share} below the documented 50%          (hard floor contacts alone: {})",
        cal.boundary_collapses
    );
}

#[test]
fn degenerate_exact_fit_is_rejected_with_a_clear_error() {
    let mut dgp = nhn_dgp(50, 20241_2);
    dgp.sigma_v = 0.0;
    dgp.sigma_u = Some(0.0);
    let sim = generate(&dgp).unwrap();
    let spec = dgp.model_spec();
    let dm = build(&spec, &sim.dataset).unwrap();
    let err = fit(&spec, &dm).unwrap_err();
    assert!(err.to_string().contains("exact linear function"));
}

#[test]
fn covariance_failure_still_returns_estimates() {
    // At the boundary collapse the information matrix is singular in the
    // θ_u direction; estimates must survive with cov marked unavailable.
    let mut dgp = nhn_dgp(1000, 20241_3);
    dgp.sigma_u = Some(0.0);
    let sim = generate(&dgp).unwrap();
    let spec = dgp.model_spec();
    let dm = build(&spec, &sim.dataset).unwrap();
    let fr = fit(&spec, &dm).unwrap();
    assert!(fr.convergence.boundary_collapse);
    if fr.cov.is_none() {
        assert!(fr.se.is_none());
        assert!(fr.loglik.is_finite());
        assert_eq!(fr.pv_hat.beta.len(), dm.p());
    }
    // Either way the point estimates are certified.
    certify(&fr, &dm).unwrap();
}

#[test]
fn nonconvergence_error_carries_the_best_point() {
    // A pathological one-parameter design with two observations cannot
    // satisfy n > dim; the driver reports insufficient data, not a panic.
    let x = nalgebra::DMatrix::from_vec(2, 1, vec![1.0, 1.0]);
    let y = DVector::from_vec(vec![1.0, 2.0]);
    let dm = sfa::model::DesignMatrices {
        y,
        x,
        z: None,
        labels_x: vec!["const".to_string()],
        labels_z: vec![],
        log_dependent: true,
    };
    let spec = ModelSpec::new(Family::Nhn, &[], &[]);
    assert!(matches!(
        fit(&spec, &dm),
        Err(sfa::Error::InsufficientData { .. })
    ));
}
