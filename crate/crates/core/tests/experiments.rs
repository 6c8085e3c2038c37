mod common;

use gstg_sbl::experiments::{
    preset, read_metrics_csv, run_sweep_with_jobs, run_trial, write_metrics_csv, write_plotdata, ExperimentConfig,
    MetricsRow, SolverKind, SolverSpec, SCHEMA_VERSION,
};
use gstg_sbl::prelude::*;
use gstg_sbl::solver::GREEDY_INITIAL_ETA;
use nalgebra::DVector;

fn small_config(trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        n: 64,
        k: 4,
        m_list: vec![24, 32],
        snr_list: vec![20.0, 30.0],
        trials,
        ensemble: Ensemble::Gaussian,
        solvers: vec![
            SolverSpec::new(SolverKind::Greedy, 0.01, 1.0),
            SolverSpec::new(SolverKind::Greedy, 1.0, 1.0),
            SolverSpec::new(SolverKind::Em, 0.01, 1.0),
            SolverSpec::new(SolverKind::Omp, 0.01, 1.0),
        ],
        base_seed: 40,
        output_path: None,
        figure: None,
    }
}

#[test]
fn rmse_examples() {
    let x = DVector::from_vec(vec![0.3, -1.0, 0.0, 2.0]);
    assert_eq!(rmse(&x, &x).unwrap(), 0.0);
    assert_eq!(rmse(&DVector::zeros(4), &x).unwrap(), 1.0);
    assert!((rmse(&(&x * 2.0), &x).unwrap() - 1.0).abs() < 1e-15);
    assert!(matches!(rmse(&x, &DVector::zeros(4)), Err(SblError::ZeroTruth)));
}

#[test]
fn one_cell_gives_one_row() {
    let mut cfg = small_config(1);
    cfg.m_list = vec![24];
    cfg.snr_list = vec![20.0];
    cfg.solvers.truncate(1);
    let rows = run_sweep_with_jobs(&cfg, 1).unwrap();
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert_eq!((r.schema_version, r.trials, r.failures, r.m), (SCHEMA_VERSION, 1, 0, 24));
    assert_eq!(r.rmse_std, 0.0);
}

#[test]
fn solvers_in_a_trial_share_the_problem() {
    let cfg = small_config(3);
    for trial in 0..3 {
        let outcomes = run_trial(&cfg, 32, 20.0, trial).unwrap();
        let spec = ProblemSpec::new(32, 64, 4, Ensemble::Gaussian, Noise::SnrDb(20.0), cfg.base_seed + trial as u64);
        let p = SensingProblem::generate(&spec).unwrap();
        for (idx, eps) in [(0, 0.01), (1, 1.0)] {
            let tau = p.m() as f64 / p.n() as f64 * p.sigma2;
            let h = Hyperparams::new(tau, eps, GREEDY_INITIAL_ETA, p.sigma2).unwrap();
            let r = recover_greedy(&p, &h, &EmOptions::default()).unwrap();
            let o = outcomes[idx].as_ref().unwrap();
            assert_eq!(o.support, r.support.len());
            assert_eq!(o.iterations, r.iterations);
            assert_eq!(o.rmse, rmse(&r.x_hat, p.x_true.as_ref().unwrap()).unwrap());
        }
    }
}

#[test]
fn threshold_preset_grid() {
    let cfg = preset("fig2").unwrap();
    let thetas: Vec<f64> = cfg.solvers.iter().map(|s| s.theta).collect();
    assert_eq!(thetas, vec![1e-4, 1e-2, 1e-1, 1.0, 10.0, 100.0]);
    assert!(cfg.solvers.iter().all(|s| s.kind == SolverKind::Greedy && s.eps == 0.01));
    assert_eq!(cfg.m_list, (40..=140).step_by(5).collect::<Vec<_>>());
    assert_eq!((cfg.n, cfg.k, cfg.trials), (512, 20, 100));
    for name in ["fig3", "fig4", "fig5"] {
        preset(name).unwrap().validate().unwrap();
    }
    assert!(preset("fig9").is_err());
}

#[test]
fn config_round_trip_and_validation() {
    let cfg = small_config(2);
    let text = cfg.to_toml_string().unwrap();
    assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    assert!(ExperimentConfig::from_toml_str(&text.replace("trials = 2", "trials = 0")).is_err());
    assert!(ExperimentConfig::from_toml_str(&format!("{text}\nunknown_key = 1\n")).is_err());
    let mut bad = cfg.clone();
    bad.m_list = vec![64];
    assert!(bad.validate().is_err());
}

#[test]
fn parallel_matches_serial() {
    let cfg = small_config(6);
    let serial = run_sweep_with_jobs(&cfg, 1).unwrap();
    let parallel = run_sweep_with_jobs(&cfg, 4).unwrap();
    assert_eq!(serial.len(), 2 * 2 * 4);
    let strip = |rows: &[MetricsRow]| -> Vec<Vec<u64>> {
        rows.iter()
            .map(|r| {
                [r.rmse_mean, r.rmse_std, r.support_mean, r.support_std, r.iterations_mean, r.iterations_std]
                    .iter()
                    .map(|v| v.to_bits())
                    .collect()
            })
            .collect()
    };
    assert_eq!(strip(&serial), strip(&parallel));
    assert!(serial.iter().all(|r| r.rmse_std >= 0.0 && r.support_std >= 0.0 && r.time_std >= 0.0));
}

fn bits(r: &MetricsRow) -> Vec<u64> {
    [
        r.snr_db, r.theta, r.eps, r.rmse_mean, r.rmse_std, r.support_mean, r.support_std, r.iterations_mean,
        r.iterations_std, r.time_mean, r.time_std,
    ]
    .iter()
    .map(|v| v.to_bits())
    .collect()
}

#[test]
fn metrics_csv_round_trip() {
    let mut rows = run_sweep_with_jobs(&small_config(2), 2).unwrap();
    rows[0].failures = 2;
    rows[0].rmse_mean = f64::NAN;
    rows[0].rmse_std = f64::NAN;
    rows[1].time_mean = 1.0 / 3.0;
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, &rows).unwrap();
    let header = String::from_utf8(buf.clone()).unwrap();
    assert!(header.starts_with("schema_version,"));
    let back = read_metrics_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), rows.len());
    for (a, b) in rows.iter().zip(&back) {
        assert_eq!((&a.solver, &a.ensemble, a.n, a.k, a.m, a.trials, a.failures), (&b.solver, &b.ensemble, b.n, b.k, b.m, b.trials, b.failures));
        assert_eq!(bits(a), bits(b));
    }
}

#[test]
fn sweep_writes_output_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(2);
    cfg.output_path = Some(dir.path().join("metrics.csv"));
    cfg.figure = Some("demo".into());
    let rows = run_sweep_with_jobs(&cfg, 2).unwrap();
    let back = read_metrics_csv(std::fs::File::open(dir.path().join("metrics.csv")).unwrap()).unwrap();
    assert_eq!(back.len(), rows.len());
    let path = write_plotdata(dir.path(), "demo", &rows).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "figure,solver,m,snr_db,theta,eps,metric,mean,std");
    assert_eq!(lines.count(), rows.len() * 4);
}
