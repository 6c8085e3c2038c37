use super::config::{ExperimentConfig, SolverKind, SolverSpec};
use super::rmse;
use crate::error::{Result, SblError};
use crate::prior::Hyperparams;
use crate::problem::{default_tau, Noise, ProblemSpec, SensingProblem};
use crate::solver::em::recover_em;
use crate::solver::greedy::recover_greedy;
use crate::solver::omp::{recover_omp, OmpOptions};
use crate::solver::{EmOptions, RecoveryResult, EM_INITIAL_ETA, GREEDY_INITIAL_ETA};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Version written in the first column of every metrics row.
pub const SCHEMA_VERSION: u32 = 1;

/// Aggregates of one (solver, M, SNR) cell. Means and standard deviations
/// are over the trials that succeeded; `failures` counts the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub schema_version: u32,
    pub solver: String,
    pub ensemble: String,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub snr_db: f64,
    pub theta: f64,
    pub eps: f64,
    pub trials: usize,
    pub failures: usize,
    pub rmse_mean: f64,
    pub rmse_std: f64,
    pub support_mean: f64,
    pub support_std: f64,
    pub iterations_mean: f64,
    pub iterations_std: f64,
    pub time_mean: f64,
    pub time_std: f64,
}

/// Metrics of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub rmse: f64,
    pub support: usize,
    pub iterations: usize,
    pub wall_time: f64,
}

/// Number of worker threads: `SBL_JOBS` when set, else the requested
/// count, else the number of CPUs.
pub fn resolve_jobs(requested: Option<usize>) -> Result<usize> {
    if let Ok(text) = std::env::var("SBL_JOBS") {
        let jobs: usize = text
            .trim()
            .parse()
            .map_err(|_| SblError::InvalidParameter(format!("SBL_JOBS must be a positive integer, got {text:?}")))?;
        if jobs == 0 {
            return Err(SblError::InvalidParameter("SBL_JOBS must be >= 1".into()));
        }
        return Ok(jobs);
    }
    match requested {
        Some(0) => Err(SblError::InvalidParameter("--jobs must be >= 1".into())),
        Some(j) => Ok(j),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn solve(problem: &SensingProblem, spec: &SolverSpec) -> Result<RecoveryResult> {
    let tau = spec.theta * default_tau(problem.m(), problem.n(), problem.sigma2)?;
    match spec.kind {
        SolverKind::Greedy => {
            let h = Hyperparams::new(tau, spec.eps, GREEDY_INITIAL_ETA, problem.sigma2)?;
            recover_greedy(problem, &h, &EmOptions::default())
        }
        SolverKind::Em => {
            let h = Hyperparams::new(tau, spec.eps, EM_INITIAL_ETA, problem.sigma2)?;
            recover_em(problem, &h, &EmOptions::default())
        }
        SolverKind::Omp => recover_omp(problem, &OmpOptions::for_problem(problem)),
    }
}

/// Generates the problem of one trial and runs every solver on it.
pub fn run_trial(cfg: &ExperimentConfig, m: usize, snr_db: f64, trial: usize) -> Result<Vec<Result<TrialOutcome>>> {
    let spec = ProblemSpec::new(
        m,
        cfg.n,
        cfg.k,
        cfg.ensemble,
        Noise::SnrDb(snr_db),
        cfg.base_seed.wrapping_add(trial as u64),
    );
    let problem = SensingProblem::generate(&spec)?;
    let truth = problem.x_true.as_ref().expect("generated problems carry the truth");
    Ok(cfg
        .solvers
        .iter()
        .map(|s| {
            let r = solve(&problem, s)?;
            Ok(TrialOutcome {
                rmse: rmse(&r.x_hat, truth)?,
                support: r.support.len(),
                iterations: r.iterations,
                wall_time: r.wall_time,
            })
        })
        .collect())
}

/// Neumaier-compensated sum, taken in slice order.
fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Mean and sample standard deviation; NaN for no values, std 0 for one.
fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = compensated_sum(values) / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (mean, (compensated_sum(&dev) / (n - 1.0)).sqrt())
}

/// [`run_sweep_with_jobs`] with the thread count from [`resolve_jobs`].
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    run_sweep_with_jobs(cfg, resolve_jobs(None)?)
}

/// Runs every cell of the sweep on `jobs` threads and writes the table to
/// `cfg.output_path` when set. Seeds are `base_seed + trial`, so all solvers
/// of a trial see the same problem. Per-trial results are collected by index
/// and reduced in a fixed order, so the aggregates do not depend on `jobs`.
pub fn run_sweep_with_jobs(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    let cells: Vec<(usize, f64)> = cfg
        .m_list
        .iter()
        .flat_map(|&m| cfg.snr_list.iter().map(move |&s| (m, s)))
        .collect();
    let work: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SblError::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Vec<Result<TrialOutcome>>> = pool.install(|| {
        work.par_iter()
            .map(|&(c, t)| {
                let (m, snr) = cells[c];
                run_trial(cfg, m, snr, t)
                    .unwrap_or_else(|e| cfg.solvers.iter().map(|_| Err(clone_error(&e))).collect())
            })
            .collect()
    });

    let mut rows = Vec::new();
    for (c, &(m, snr)) in cells.iter().enumerate() {
        let block = &outcomes[c * cfg.trials..(c + 1) * cfg.trials];
        for (si, spec) in cfg.solvers.iter().enumerate() {
            let ok: Vec<TrialOutcome> = block.iter().filter_map(|t| t[si].as_ref().ok().copied()).collect();
            let column = |f: fn(&TrialOutcome) -> f64| mean_std(&ok.iter().map(f).collect::<Vec<_>>());
            let (rmse_mean, rmse_std) = column(|o| o.rmse);
            let (support_mean, support_std) = column(|o| o.support as f64);
            let (iterations_mean, iterations_std) = column(|o| o.iterations as f64);
            let (time_mean, time_std) = column(|o| o.wall_time);
            rows.push(MetricsRow {
                schema_version: SCHEMA_VERSION,
                solver: spec.id(),
                ensemble: cfg.ensemble.to_string(),
                n: cfg.n,
                k: cfg.k,
                m,
                snr_db: snr,
                theta: spec.theta,
                eps: spec.eps,
                trials: cfg.trials,
                failures: cfg.trials - ok.len(),
                rmse_mean,
                rmse_std,
                support_mean,
                support_std,
                iterations_mean,
                iterations_std,
                time_mean,
                time_std,
            });
        }
    }
    if let Some(path) = &cfg.output_path {
        write_metrics_csv(std::fs::File::create(path)?, &rows)?;
    }
    Ok(rows)
}

fn clone_error(e: &SblError) -> SblError {
    SblError::Divergent(format!("problem generation failed: {e}"))
}

pub fn write_metrics_csv<W: Write>(out: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<std::result::Result<Vec<MetricsRow>, _>>()?;
    if let Some(row) = rows.iter().find(|r| r.schema_version != SCHEMA_VERSION) {
        return Err(SblError::Parse(format!("unsupported schema_version {}", row.schema_version)));
    }
    Ok(rows)
}
