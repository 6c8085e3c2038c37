//! Fast property checks run by `gstg-sbl selfcheck`: prior normalization,
//! the Laplace special case, cubic root consistency, and solver invariants on
//! small seeded problems.

use crate::cubic::{real_roots, Cubic, RootClass};
use crate::error::Result;
use crate::prior::{marginal_pdf, stg_pdf, Hyperparams};
use crate::problem::{Ensemble, Noise, ProblemSpec, SensingProblem};
use crate::quadrature::{integrate, integrate_to_infinity, Tolerance};
use crate::solver::em::recover_em;
use crate::solver::greedy::{check_selection_condition, run_greedy};
use crate::solver::{EmOptions, EM_INITIAL_ETA};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

/// Integral of the STG density over `[0, inf)`.
pub fn stg_total_mass(h: &Hyperparams) -> Result<f64> {
    let f = |a: f64| stg_pdf(a, h).unwrap_or(f64::NAN);
    let knee = 1.0 / h.eta;
    let mut breaks = vec![h.tau, 1e3 * h.tau];
    breaks.retain(|b| *b > 0.0 && *b < knee);
    let tol = Tolerance {
        rel: 1e-10,
        ..Tolerance::default()
    };
    let head = integrate(f, 0.0, knee, &breaks, tol);
    let tail = integrate_to_infinity(f, knee, tol);
    Ok(head.value + tail.value)
}

fn prior_normalization() -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for tau in [1e-8, 1e-2, 1.0] {
        for eps in [0.01, 0.5, 1.0] {
            for eta in [0.1, 10.0] {
                let h = Hyperparams::new(tau, eps, eta, 1.0)?;
                worst = worst.max((stg_total_mass(&h)? - 1.0).abs());
            }
        }
    }
    Ok(outcome("prior normalization", worst <= 1e-6, format!("max |mass - 1| = {worst:.2e}")))
}

fn laplace_marginal() -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for eta in [0.5, 2.0] {
        let h = Hyperparams::new(0.3, 1.0, eta, 1.0)?;
        for i in 1..=10 {
            let x = 0.25 * i as f64;
            let exact = (eta / 2.0).sqrt() * (-(2.0 * eta).sqrt() * x).exp();
            worst = worst.max((marginal_pdf(x, &h)? / exact - 1.0).abs());
        }
    }
    Ok(outcome("laplace marginal", worst <= 1e-7, format!("max relative error = {worst:.2e}")))
}

fn cubic_consistency() -> Result<CheckOutcome> {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let mut failures = 0;
    for _ in 0..2000 {
        let mut coef = [0.0; 4];
        for c in coef.iter_mut() {
            *c = rng.random_range(-10.0..10.0);
        }
        if coef[0] == 0.0 {
            continue;
        }
        let cubic = Cubic::new(coef[0], coef[1], coef[2], coef[3]);
        let roots = real_roots(&cubic)?;
        let expected = match cubic.classify() {
            RootClass::ThreeDistinct => 3,
            RootClass::OneReal => 1,
            RootClass::Multiple => roots.len(),
        };
        let residual_ok = roots
            .iter()
            .all(|&r| cubic.eval(r).abs() <= 1e-9 * cubic.term_scale(r).max(1e-300));
        if roots.len() != expected || !residual_ok {
            failures += 1;
        }
    }
    Ok(outcome("cubic roots", failures == 0, format!("{failures} of 2000 inconsistent")))
}

fn monotone(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs())
}

fn solver_invariants() -> Result<CheckOutcome> {
    let mut issues = Vec::new();
    for seed in 0..20u64 {
        let spec = ProblemSpec::new(48, 128, 8, Ensemble::Gaussian, Noise::SnrDb(25.0), seed);
        let problem = SensingProblem::generate(&spec)?;
        let h = Hyperparams::recommended(&problem, 0.01)?;
        let run = run_greedy(&problem, &h, &EmOptions::default())?;
        if !monotone(&run.result.logl_trace) {
            issues.push(format!("seed {seed}: greedy likelihood decreased"));
        }
        if run.result.support.len() > problem.m() {
            issues.push(format!("seed {seed}: greedy support exceeds M"));
        }
        if run.result.converged && !check_selection_condition(&run.state, &run.hyper).iter().all(|b| *b) {
            issues.push(format!("seed {seed}: selection condition violated"));
        }
        if run.result.drift_checks.iter().any(|d| *d > 1e-8) {
            issues.push(format!("seed {seed}: bookkeeping deviation above 1e-8"));
        }
        if seed < 5 {
            let em = recover_em(&problem, &h.with_eta(EM_INITIAL_ETA), &EmOptions::default())?;
            if !monotone(&em.logl_trace) {
                issues.push(format!("seed {seed}: EM likelihood decreased"));
            }
        }
    }
    let detail = if issues.is_empty() { "20 problems".to_string() } else { issues.join("; ") };
    Ok(outcome("solver invariants", issues.is_empty(), detail))
}

/// Runs every check; an error inside a check counts as a failure.
pub fn run_selfcheck() -> Vec<CheckOutcome> {
    let checks: [(&'static str, fn() -> Result<CheckOutcome>); 4] = [
        ("prior normalization", prior_normalization),
        ("laplace marginal", laplace_marginal),
        ("cubic roots", cubic_consistency),
        ("solver invariants", solver_invariants),
    ];
    checks
        .iter()
        .map(|(name, check)| check().unwrap_or_else(|e| outcome(name, false, e.to_string())))
        .collect()
}
