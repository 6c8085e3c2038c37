//! Recovery metrics and Monte Carlo sweeps over problem sizes, noise levels
//! and solver settings.

mod config;
mod plotdata;
mod sweep;

pub use config::{preset, ExperimentConfig, SolverKind, SolverSpec, PRESETS};
pub use plotdata::write_plotdata;
pub use sweep::{
    read_metrics_csv, resolve_jobs, run_sweep, run_sweep_with_jobs, run_trial, write_metrics_csv, MetricsRow,
    TrialOutcome, SCHEMA_VERSION,
};

use crate::error::{Result, SblError};
use nalgebra::DVector;

/// Relative squared error `|x_hat - x|^2 / |x|^2`.
pub fn rmse(x_hat: &DVector<f64>, x_true: &DVector<f64>) -> Result<f64> {
    if x_hat.len() != x_true.len() {
        return Err(SblError::DimensionMismatch(format!(
            "estimate has length {} but the truth has {}",
            x_hat.len(),
            x_true.len()
        )));
    }
    let denom = x_true.norm_squared();
    if denom == 0.0 {
        return Err(SblError::ZeroTruth);
    }
    Ok((x_hat - x_true).norm_squared() / denom)
}
