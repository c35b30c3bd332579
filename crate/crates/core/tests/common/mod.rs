//! Shared test oracles: adaptive quadrature, composed-error densities by
//! numerical integration, conditional-moment integrals, and deterministic
//! pseudo-random draws. Everything here is independent of the library's
//! likelihood/scoring code paths: densities are integrated from their
//! definitions, never from the closed forms under test.

#![allow(dead_code)]

use sfa::model::Family;
use sfa::simulate::{CovariateSpec, DgpSpec, Generator};

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Standard normal pdf, local to the oracle.
pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64 + Copy>(f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64 + Copy>(
        f: F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        let delta = left + right - whole;
        // Once delta reaches the f64 noise floor of the partial sums it
        // stops shrinking, while a naively halved tolerance keeps falling;
        // terminating at the floor prevents runaway recursion.
        let floor = 4.0 * f64::EPSILON * (left.abs() + right.abs());
        if depth == 0 || delta.abs() <= (15.0 * tol).max(floor) {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (lo + hi);
    let (fa, fm, fb) = (f(lo), f(m), f(hi));
    let whole = simpson(lo, hi, fa, fm, fb);
    recurse(f, lo, hi, fa, fm, fb, whole, tol, 24)
}

/// Panel-wise adaptive Simpson: fixed-width panels guarantee that a narrow
/// interior peak cannot hide from the first subdivisions.
pub fn integrate_panels<F: Fn(f64) -> f64 + Copy>(
    f: F,
    lo: f64,
    hi: f64,
    panel_width: f64,
    tol: f64,
) -> f64 {
    let panels = (((hi - lo) / panel_width).ceil() as usize).max(1);
    let step = (hi - lo) / panels as f64;
    let per_panel_tol = tol / panels as f64;
    let mut sum = 0.0;
    for k in 0..panels {
        let a = lo + step * k as f64;
        let b = a + step;
        sum += integrate(f, a, b, per_panel_tol);
    }
    sum
}

/// Composed-error density f(ε) = ∫₀^∞ φ_v(ε−u)·f_u(u) du for one
/// observation, by quadrature from the definition.
pub fn nhn_density_quadrature(eps: f64, sigma_v: f64, sigma_u: f64) -> f64 {
    let f = move |u: f64| {
        phi((eps - u) / sigma_v) / sigma_v * 2.0 * phi(u / sigma_u) / sigma_u
    };
    let sigma2 = sigma_v * sigma_v + sigma_u * sigma_u;
    let mu_star = eps * sigma_u * sigma_u / sigma2;
    let s_star = sigma_u * sigma_v / sigma2.sqrt();
    let lo = (mu_star - 16.0 * s_star).max(0.0);
    let hi = (mu_star.max(0.0) + 16.0 * s_star).max(lo + s_star);
    // Tolerance relative to the integrand's peak, or tiny densities lose
    // all relative accuracy.
    let peak = f(mu_star.clamp(lo, hi));
    integrate(f, lo, hi, (peak * (hi - lo) * 1e-12).max(1e-300))
}

/// As above with a truncated-normal inefficiency N⁺(mu, σ_u²).
pub fn tn_density_quadrature(eps: f64, mu: f64, sigma_v: f64, sigma_u: f64) -> f64 {
    // Φ(mu/σ_u) via the oracle's own integral of φ: Φ(c) = 1 − ∫_c^∞ φ for
    // c ≥ 0 and Φ(c) = ∫_{|c|}^∞ φ by symmetry otherwise.
    let c = mu / sigma_u;
    let tail_mass = if c >= 0.0 {
        1.0 - integrate_panels(phi, c, c + 40.0, 1.0, 1e-15)
    } else {
        integrate_panels(phi, c.abs(), c.abs() + 40.0, 1.0, 1e-15)
    };
    let f = move |u: f64| {
        phi((eps - u) / sigma_v) / sigma_v * phi((u - mu) / sigma_u) / (sigma_u * tail_mass)
    };
    let sigma2 = sigma_v * sigma_v + sigma_u * sigma_u;
    let mu_star = (sigma_v * sigma_v * mu + sigma_u * sigma_u * eps) / sigma2;
    let s_star = sigma_u * sigma_v / sigma2.sqrt();
    let lo = (mu_star - 16.0 * s_star).max(0.0);
    let hi = (mu_star.max(0.0) + 16.0 * s_star).max(lo + s_star);
    let peak = f(mu_star.clamp(lo, hi));
    integrate(f, lo, hi, (peak * (hi - lo) * 1e-12).max(1e-300))
}

/// E[u|ε] and E[e^{−u}|ε] for u|ε ~ N(μ*, σ*²) truncated to [0, ∞), by
/// quadrature on the normalized weight w(s) = exp(b·s − s²/2 − max(0,b²/2)),
/// u = σ*·s. The shift keeps the weight bounded for every b, including the
/// deep left tail.
pub fn conditional_moments_quadrature(mu_star: f64, sigma_star: f64) -> (f64, f64) {
    let b = mu_star / sigma_star;
    // Shift so the exponent's maximum over s ≥ 0 is zero: the peak sits at
    // s = b when b > 0 and at s = 0 otherwise.
    let shift = if b > 0.0 { b * b / 2.0 } else { 0.0 };
    let w = move |s: f64| (b * s - s * s / 2.0 - shift).exp();
    let lo = (b - 14.0).max(0.0);
    let hi = b.max(0.0) + 14.0;
    let tol = 1e-13;
    let mass = integrate_panels(w, lo, hi, 0.5, tol);
    let num_u = integrate_panels(move |s| s * w(s), lo, hi, 0.5, tol);
    let num_te =
        integrate_panels(move |s| (-sigma_star * s).exp() * w(s), lo, hi, 0.5, tol);
    (sigma_star * num_u / mass, num_te / mass)
}

/// Small deterministic generator for test draws (SplitMix64).
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0);
        lo + (hi - lo) * u
    }
}

/// Reference NHN data-generating process shared across suites.
pub fn nhn_dgp(n: usize, seed: u64) -> DgpSpec {
    DgpSpec {
        family: Family::Nhn,
        frontier_vars: vec!["hh_size".to_string(), "wfpr".to_string()],
        ineff_vars: vec![],
        include_frontier_intercept: true,
        include_ineff_intercept: true,
        beta_true: vec![8.0, 0.25, -0.10],
        sigma_v: 0.3,
        sigma_u: Some(0.5),
        delta_true: None,
        n,
        seed,
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
    }
}

/// Heteroskedastic variant: ln σ_{u,i}² = δ₀ + δ₁·wfpr.
pub fn het_dgp(n: usize, seed: u64) -> DgpSpec {
    let mut dgp = nhn_dgp(n, seed);
    dgp.family = Family::NhnHet;
    dgp.ineff_vars = vec!["wfpr".to_string()];
    dgp.sigma_u = None;
    dgp.delta_true = Some(vec![-2.0, 0.8]);
    dgp
}

/// Truncated-normal variant: μ_i = δ₀ + δ₁·wfpr.
pub fn tn_dgp(n: usize, seed: u64) -> DgpSpec {
    let mut dgp = nhn_dgp(n, seed);
    dgp.family = Family::Tn;
    dgp.ineff_vars = vec!["wfpr".to_string()];
    dgp.sigma_u = Some(0.4);
    dgp.delta_true = Some(vec![0.2, -0.3]);
    dgp
}
