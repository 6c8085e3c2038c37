use clap::{Args, Parser, Subcommand, ValueEnum};
use gstg_sbl::experiments::{preset, resolve_jobs, run_sweep_with_jobs, write_metrics_csv, write_plotdata, ExperimentConfig, PRESETS};
use gstg_sbl::prior::Hyperparams;
use gstg_sbl::problem::{default_tau, Ensemble, Noise, ProblemSpec, SensingProblem};
use gstg_sbl::selfcheck::run_selfcheck;
use gstg_sbl::solver::em::recover_em;
use gstg_sbl::solver::greedy::recover_greedy;
use gstg_sbl::solver::omp::{recover_omp, OmpOptions};
use gstg_sbl::solver::{EmOptions, RecoveryResult, EM_INITIAL_ETA, GREEDY_INITIAL_ETA};
use gstg_sbl::{experiments::rmse, SblError};
use std::path::PathBuf;
use std::process::ExitCode;

/// Sparse signal recovery with the G-STG prior.
#[derive(Parser)]
#[command(name = "gstg-sbl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover one signal, from a problem CSV or a generated problem.
    Recover(RecoverArgs),
    /// Run a Monte Carlo sweep and write the metrics table.
    Sweep(SweepArgs),
    /// Run the built-in property checks.
    Selfcheck,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Greedy,
    Em,
    Omp,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnsembleArg {
    Gaussian,
    UniformSpherical,
}

#[derive(Args)]
struct RecoverArgs {
    /// Problem CSV; when absent a problem is generated from the flags below.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long = "N", default_value_t = 512)]
    n: usize,
    #[arg(long = "M", default_value_t = 120)]
    m: usize,
    #[arg(long = "K", default_value_t = 20)]
    k: usize,
    /// SNR in dB.
    #[arg(long, default_value_t = 25.0, allow_negative_numbers = true)]
    snr: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    ensemble: EnsembleArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "greedy")]
    solver: SolverArg,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// Threshold multiplier: tau = theta (M/N) sigma^2.
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// Write the generated problem to this CSV.
    #[arg(long)]
    save_problem: Option<PathBuf>,
    /// Write the estimate, one value per line.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML experiment file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment: fig2, fig3, fig4 or fig5.
    #[arg(long)]
    preset: Option<String>,
    /// Override the number of trials per cell.
    #[arg(long)]
    trials: Option<usize>,
    /// Metrics CSV (overrides the config's output_path).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads; the SBL_JOBS environment variable takes precedence.
    #[arg(long)]
    jobs: Option<usize>,
    /// Also write long-format plot data into this directory.
    #[arg(long)]
    emit_plotdata: Option<PathBuf>,
}

fn exit_code(e: &SblError) -> ExitCode {
    if e.is_numerical() {
        ExitCode::from(3)
    } else {
        ExitCode::from(2)
    }
}

fn report(result: &RecoveryResult, problem: &SensingProblem) -> Result<(), SblError> {
    println!("support_size\t{}", result.support.len());
    println!("iterations\t{}", result.iterations);
    println!("converged\t{}", result.converged);
    println!("wall_time_s\t{:.6}", result.wall_time);
    if let Some(eta) = result.eta_final {
        println!("eta\t{eta:.6e}");
    }
    if let Some(l) = result.logl_trace.last() {
        println!("log_likelihood\t{l:.10e}");
    }
    if let Some(x) = &problem.x_true {
        println!("rmse\t{:.6e}", rmse(&result.x_hat, x)?);
    }
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn recover(args: RecoverArgs) -> Result<(), SblError> {
    let problem = match &args.input {
        Some(path) => SensingProblem::read_csv(std::fs::File::open(path)?)?,
        None => {
            let ensemble = match args.ensemble {
                EnsembleArg::Gaussian => Ensemble::Gaussian,
                EnsembleArg::UniformSpherical => Ensemble::UniformSpherical,
            };
            let spec = ProblemSpec::new(args.m, args.n, args.k, ensemble, Noise::SnrDb(args.snr), args.seed);
            SensingProblem::generate(&spec)?
        }
    };
    if let Some(path) = &args.save_problem {
        problem.write_csv(std::fs::File::create(path)?)?;
    }
    if !(args.theta > 0.0) || !args.theta.is_finite() {
        return Err(SblError::InvalidParameter("theta must be finite and > 0".into()));
    }
    let tau = args.theta * default_tau(problem.m(), problem.n(), problem.sigma2)?;
    let result = match args.solver {
        SolverArg::Greedy => {
            let h = Hyperparams::new(tau, args.eps, GREEDY_INITIAL_ETA, problem.sigma2)?;
            recover_greedy(&problem, &h, &EmOptions::default())?
        }
        SolverArg::Em => {
            let h = Hyperparams::new(tau, args.eps, EM_INITIAL_ETA, problem.sigma2)?;
            recover_em(&problem, &h, &EmOptions::default())?
        }
        SolverArg::Omp => recover_omp(&problem, &OmpOptions::for_problem(&problem))?,
    };
    report(&result, &problem)?;
    if let Some(path) = &args.output {
        let text: String = result.x_hat.iter().map(|v| format!("{v}\n")).collect();
        std::fs::write(path, text)?;
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), SblError> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => ExperimentConfig::from_file(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => {
            return Err(SblError::InvalidParameter(format!(
                "give --config or --preset (one of {PRESETS:?})"
            )))
        }
    };
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(out) = &args.output {
        cfg.output_path = Some(out.clone());
    }
    let jobs = resolve_jobs(args.jobs)?;
    let rows = run_sweep_with_jobs(&cfg, jobs)?;
    if cfg.output_path.is_none() {
        write_metrics_csv(std::io::stdout().lock(), &rows)?;
    }
    if let Some(dir) = &args.emit_plotdata {
        let figure = cfg.figure.clone().unwrap_or_else(|| "sweep".to_string());
        let path = write_plotdata(dir, &figure, &rows)?;
        eprintln!("plot data written to {}", path.display());
    }
    let failures: usize = rows.iter().map(|r| r.failures).sum();
    if failures > 0 {
        eprintln!("warning: {failures} solver runs failed and were excluded from the means");
    }
    Ok(())
}

fn selfcheck() -> ExitCode {
    let outcomes = run_selfcheck();
    for o in &outcomes {
        println!("{}\t{}\t{}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    if outcomes.iter().all(|o| o.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Recover(args) => recover(args),
        Command::Sweep(args) => sweep(args),
        Command::Selfcheck => return selfcheck(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
