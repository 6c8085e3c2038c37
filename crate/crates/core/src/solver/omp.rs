//! Orthogonal matching pursuit, the non-Bayesian comparator.

use super::{support_of, RecoveryResult};
use crate::error::{Result, SblError};
use crate::problem::SensingProblem;
use nalgebra::DVector;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmpOptions {
    /// Largest support; at most `M`.
    pub max_support: usize,
    /// Added to the stopping level `M sigma^2`.
    pub residual_tol: f64,
}

impl OmpOptions {
    /// Support capped at `M`, stopping purely on the discrepancy level.
    pub fn for_problem(problem: &SensingProblem) -> Self {
        Self {
            max_support: problem.m(),
            residual_tol: 0.0,
        }
    }
}

/// Greedy column selection by normalized correlation with the residual and a
/// least-squares refit, until `|r|^2 <= M sigma^2 + residual_tol`.
pub fn recover_omp(problem: &SensingProblem, opts: &OmpOptions) -> Result<RecoveryResult> {
    let start = Instant::now();
    problem.validate()?;
    let (m, n) = problem.a.shape();
    if opts.max_support > m {
        return Err(SblError::InvalidParameter(format!(
            "max_support {} exceeds M = {m}",
            opts.max_support
        )));
    }
    if !(opts.residual_tol >= 0.0) {
        return Err(SblError::InvalidParameter("residual_tol must be >= 0".into()));
    }
    let a = &problem.a;
    let y = &problem.y;
    let level = m as f64 * problem.sigma2 + opts.residual_tol;
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();

    let mut selected: Vec<usize> = Vec::new();
    let mut coef = DVector::zeros(0);
    let mut resid = y.clone();
    let mut resid2 = resid.norm_squared();
    let mut warnings = Vec::new();

    while selected.len() < opts.max_support && resid2 > level {
        let corr = a.tr_mul(&resid);
        let mut pick = None;
        let mut best = 0.0;
        for j in 0..n {
            if norms[j] == 0.0 || selected.contains(&j) {
                continue;
            }
            let c = corr[j].abs() / norms[j];
            if c > best {
                best = c;
                pick = Some(j);
            }
        }
        let Some(j) = pick else { break };
        let mut trial = selected.clone();
        trial.push(j);
        let sub = a.select_columns(trial.iter());
        let qr = sub.clone().qr();
        let r = qr.r();
        let diag_max = r.diagonal().iter().fold(0.0f64, |mx, v| mx.max(v.abs()));
        let diag_min = r.diagonal().iter().fold(f64::INFINITY, |mn, v| mn.min(v.abs()));
        if !(diag_min > 1e-12 * diag_max) {
            warnings.push(format!("rank-deficient active set at column {j}; stopped"));
            break;
        }
        let qty = qr.q().tr_mul(y);
        let Some(fit) = r.solve_upper_triangular(&qty) else {
            warnings.push("least-squares refit failed; stopped".into());
            break;
        };
        let new_resid = y - &sub * &fit;
        let new_resid2 = new_resid.norm_squared();
        if new_resid2 >= resid2 {
            warnings.push("residual stopped decreasing; stopped".into());
            break;
        }
        selected = trial;
        coef = fit;
        resid = new_resid;
        resid2 = new_resid2;
    }

    let mut x_hat = DVector::zeros(n);
    for (k, &j) in selected.iter().enumerate() {
        x_hat[j] = coef[k];
    }
    Ok(RecoveryResult {
        support: support_of(&x_hat),
        x_hat,
        iterations: selected.len(),
        logl_trace: Vec::new(),
        wall_time: start.elapsed().as_secs_f64(),
        eta_final: None,
        converged: resid2 <= level,
        drift_checks: Vec::new(),
        warnings,
    })
}
