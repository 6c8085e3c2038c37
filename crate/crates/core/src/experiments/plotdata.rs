use super::sweep::MetricsRow;
use crate::error::Result;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Serialize)]
struct PlotPoint<'a> {
    figure: &'a str,
    solver: &'a str,
    m: usize,
    snr_db: f64,
    theta: f64,
    eps: f64,
    metric: &'static str,
    mean: f64,
    std: f64,
}

/// Writes `dir/<figure>.csv` in long format: one line per
/// (solver, M, SNR, metric) with the metric's mean and standard deviation.
pub fn write_plotdata(dir: &Path, figure: &str, rows: &[MetricsRow]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{figure}.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    for row in rows {
        let metrics = [
            ("rmse", row.rmse_mean, row.rmse_std),
            ("support", row.support_mean, row.support_std),
            ("iterations", row.iterations_mean, row.iterations_std),
            ("time", row.time_mean, row.time_std),
        ];
        for (metric, mean, std) in metrics {
            w.serialize(PlotPoint {
                figure,
                solver: &row.solver,
                m: row.m,
                snr_db: row.snr_db,
                theta: row.theta,
                eps: row.eps,
                metric,
                mean,
                std,
            })?;
        }
    }
    w.flush()?;
    Ok(path)
}
