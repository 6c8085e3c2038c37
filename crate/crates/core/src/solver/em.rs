//! Iterative evidence maximization: alternate the Gaussian posterior, the
//! per-coordinate variance updates and the rate update until the variances
//! settle.

use super::greedy::single_basis_objective;
use super::{support_of, EmOptions, RecoveryResult};
use crate::error::Result;
use crate::model::{log_likelihood, posterior_stats, update_alpha_em, update_eta, PosteriorStats};
use crate::prior::Hyperparams;
use crate::problem::SensingProblem;
use nalgebra::DVector;
use std::time::Instant;

/// Matched-filter start `alpha_i = (a_i'y)^2 / |a_i|^4`, floored at `tau`.
pub fn initial_alpha(problem: &SensingProblem, tau: f64) -> DVector<f64> {
    let corr = problem.a.tr_mul(&problem.y);
    DVector::from_iterator(
        problem.n(),
        problem.a.column_iter().zip(corr.iter()).map(|(col, c)| {
            let norm2 = col.norm_squared();
            if norm2 == 0.0 {
                0.0
            } else {
                (c * c / (norm2 * norm2)).max(tau)
            }
        }),
    )
}

/// Coordinates whose removal is a candidate for pruning.
fn prune_candidates(stats: &PosteriorStats, alpha: &DVector<f64>, h: &Hyperparams, opts: &EmOptions) -> Vec<usize> {
    let max_alpha = alpha.max();
    let mut out = Vec::new();
    for (k, &i) in stats.active.iter().enumerate() {
        let a = alpha[i];
        if a < opts.prune_rel * max_alpha {
            out.push(i);
            continue;
        }
        if opts.prune_decaying && a < h.tau {
            let sii = stats.sigma[(k, k)];
            if !(sii > 0.0) {
                continue;
            }
            // Leave-one-out statistics from the posterior of coordinate i.
            let s = 1.0 / sii - 1.0 / a;
            let q = stats.mu[i] / sii;
            if s > 0.0 {
                if let Ok(gain) = single_basis_objective(a, s, q, h) {
                    if gain < 0.0 {
                        out.push(i);
                    }
                }
            }
        }
    }
    out
}

/// Result of an EM solve together with the final variances.
#[derive(Debug, Clone)]
pub struct EmRun {
    pub result: RecoveryResult,
    pub alpha: DVector<f64>,
    /// Hyperparameters with the final rate.
    pub hyper: Hyperparams,
}

/// Runs EM from the matched-filter start with rate `h.eta`.
pub fn run_em(problem: &SensingProblem, h: &Hyperparams, opts: &EmOptions) -> Result<EmRun> {
    let start = Instant::now();
    problem.validate()?;
    h.validate()?;
    opts.validate()?;
    let (a, y, sigma2) = (&problem.a, &problem.y, h.sigma2);
    let mut h = *h;
    let mut alpha = initial_alpha(problem, h.tau);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    if y.iter().all(|v| *v == 0.0) {
        alpha.fill(0.0);
        converged = true;
    }

    let mut stats = posterior_stats(a, y, &alpha, sigma2)?;
    loop {
        let mut logl = log_likelihood(&stats, &alpha, &h)?;
        let candidates = prune_candidates(&stats, &alpha, &h, opts);
        if !candidates.is_empty() {
            let mut pruned = alpha.clone();
            for &i in &candidates {
                pruned[i] = 0.0;
            }
            let pruned_stats = posterior_stats(a, y, &pruned, sigma2)?;
            let pruned_logl = log_likelihood(&pruned_stats, &pruned, &h)?;
            if pruned_logl >= logl {
                alpha = pruned;
                stats = pruned_stats;
                logl = pruned_logl;
            }
        }
        trace.push(logl);
        if converged || iterations >= opts.max_iters || stats.active.is_empty() {
            converged |= stats.active.is_empty();
            break;
        }

        iterations += 1;
        let ex2 = stats.second_moments();
        let mut next = alpha.clone();
        for &i in &stats.active {
            next[i] = update_alpha_em(ex2[i], &h)?;
        }
        if !opts.fix_eta && iterations % opts.update_eta_every == 0 {
            h.eta = update_eta(&next, &h)?;
        }
        let scale = next.max();
        let change = next
            .iter()
            .zip(alpha.iter())
            .fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
        converged = scale == 0.0 || change <= opts.tol * scale;
        alpha = next;
        stats = posterior_stats(a, y, &alpha, sigma2)?;
    }

    let x_hat = stats.mu;
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!("EM stopped at the iteration cap ({})", opts.max_iters));
    }
    let result = RecoveryResult {
        support: support_of(&x_hat),
        x_hat,
        iterations,
        logl_trace: trace,
        wall_time: start.elapsed().as_secs_f64(),
        eta_final: Some(h.eta),
        converged,
        drift_checks: Vec::new(),
        warnings,
    };
    Ok(EmRun { result, alpha, hyper: h })
}

/// Runs EM and returns only the recovery summary.
pub fn recover_em(problem: &SensingProblem, h: &Hyperparams, opts: &EmOptions) -> Result<RecoveryResult> {
    run_em(problem, h, opts).map(|run| run.result)
}
