//! Signal recovery: the EM solver, the fast greedy solver and an OMP
//! baseline. All three report a [`RecoveryResult`].

pub mod em;
pub mod greedy;
pub mod omp;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Starting rate of the greedy solver. Small, so the first additions are
/// driven by the data rather than by the prior.
pub const GREEDY_INITIAL_ETA: f64 = 1e-6;

/// Starting rate of the EM solver.
pub const EM_INITIAL_ETA: f64 = 1.0;

/// Iteration controls shared by the EM and greedy solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmOptions {
    /// Iteration cap (EM sweeps, or greedy actions).
    pub max_iters: usize,
    /// EM: largest relative change of `alpha` accepted as converged.
    /// Greedy: largest likelihood gain accepted as converged.
    pub tol: f64,
    /// Update `eta` every this many iterations.
    pub update_eta_every: usize,
    /// EM: variances below `prune_rel * max(alpha)` are set to zero.
    pub prune_rel: f64,
    /// EM: also remove variances below `tau` whose removal raises the
    /// likelihood. Their iterates only approach zero at a rate of `1/k`.
    pub prune_decaying: bool,
    /// Greedy: actions between dense recomputations of the bookkeeping.
    pub refresh_every: usize,
    /// Keep `eta` at its initial value.
    pub fix_eta: bool,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            tol: 1e-8,
            update_eta_every: 1,
            prune_rel: 1e-10,
            prune_decaying: true,
            refresh_every: 50,
            fix_eta: false,
        }
    }
}

impl EmOptions {
    pub fn validate(&self) -> crate::Result<()> {
        if self.max_iters == 0 {
            return Err(crate::SblError::InvalidParameter("max_iters must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(crate::SblError::InvalidParameter("tol must be > 0".into()));
        }
        if self.update_eta_every == 0 || self.refresh_every == 0 {
            return Err(crate::SblError::InvalidParameter(
                "update_eta_every and refresh_every must be >= 1".into(),
            ));
        }
        if !(self.prune_rel >= 0.0) {
            return Err(crate::SblError::InvalidParameter("prune_rel must be >= 0".into()));
        }
        Ok(())
    }
}

/// Outcome of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub x_hat: DVector<f64>,
    /// `{i : x_hat[i] != 0}` in ascending order.
    pub support: Vec<usize>,
    pub iterations: usize,
    /// Objective after every iteration, starting with the initial model.
    /// Empty for OMP.
    pub logl_trace: Vec<f64>,
    /// Seconds of monotonic time spent in the solver.
    pub wall_time: f64,
    /// Final rate; `None` for OMP.
    pub eta_final: Option<f64>,
    pub converged: bool,
    /// Greedy: normwise deviation found at each dense verification.
    pub drift_checks: Vec<f64>,
    pub warnings: Vec<String>,
}

pub(crate) fn support_of(x: &DVector<f64>) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| i)
        .collect()
}
