use crate::error::{Result, SblError};
use crate::problem::Ensemble;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Greedy,
    Em,
    Omp,
}

/// One solver column of a sweep. `theta` scales the recommended threshold,
/// `tau = theta (M/N) sigma^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub kind: SolverKind,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

fn default_eps() -> f64 {
    0.01
}

fn default_theta() -> f64 {
    1.0
}

impl SolverSpec {
    pub fn new(kind: SolverKind, eps: f64, theta: f64) -> Self {
        Self {
            kind,
            eps,
            theta,
            label: None,
        }
    }

    /// Column identifier used in the metrics table.
    pub fn id(&self) -> String {
        if let Some(label) = &self.label {
            return label.clone();
        }
        match self.kind {
            SolverKind::Omp => "omp".to_string(),
            SolverKind::Greedy => format!("greedy(eps={},theta={})", self.eps, self.theta),
            SolverKind::Em => format!("em(eps={},theta={})", self.eps, self.theta),
        }
    }
}

fn default_ensemble() -> Ensemble {
    Ensemble::Gaussian
}

/// A Monte Carlo sweep, read from TOML:
///
/// ```toml
/// n = 512
/// k = 20
/// m_list = [80, 120]
/// snr_list = [25.0]
/// trials = 100
/// ensemble = "gaussian"      # or "uniform_spherical"
/// base_seed = 1
/// output_path = "metrics.csv"
///
/// [[solvers]]
/// kind = "greedy"            # "greedy", "em" or "omp"
/// eps = 0.01
/// theta = 1.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub m_list: Vec<usize>,
    pub snr_list: Vec<f64>,
    pub trials: usize,
    #[serde(default = "default_ensemble")]
    pub ensemble: Ensemble,
    pub solvers: Vec<SolverSpec>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    /// Name used for plot data files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SblError::InvalidParameter(msg));
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.k == 0 || self.k > self.n {
            return bad(format!("need 1 <= K <= N, got K={}, N={}", self.k, self.n));
        }
        if self.m_list.is_empty() || self.snr_list.is_empty() || self.solvers.is_empty() {
            return bad("m_list, snr_list and solvers must be nonempty".into());
        }
        if let Some(&m) = self.m_list.iter().find(|&&m| m >= self.n || m == 0) {
            return bad(format!("every M must satisfy 1 <= M < N, got M={m}"));
        }
        if self.snr_list.iter().any(|s| !s.is_finite()) {
            return bad("SNR values must be finite".into());
        }
        for s in &self.solvers {
            if !(0.0..=1.0).contains(&s.eps) {
                return bad(format!("solver {}: eps must lie in [0, 1]", s.id()));
            }
            if !(s.theta > 0.0) || !s.theta.is_finite() {
                return bad(format!("solver {}: theta must be finite and > 0", s.id()));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| SblError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SblError::Parse(e.to_string()))
    }
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 4] = ["fig2", "fig3", "fig4", "fig5"];

fn m_grid() -> Vec<usize> {
    (40..=140).step_by(5).collect()
}

/// The synthetic experiments at `N = 512`, `K = 20`, 100 trials:
///
/// * `fig2`: threshold multipliers `theta` at `eps = 0.01`, `M` from 40 to 140,
/// * `fig3`: shapes `eps` at the recommended threshold,
/// * `fig4`: greedy with `eps = 0.01`, greedy with `eps = 1` (Laplace) and
///   OMP over `M`,
/// * `fig5`: the same solvers over SNR from 0 to 50 dB at `M = 120`.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let greedy = |eps: f64, theta: f64| SolverSpec::new(SolverKind::Greedy, eps, theta);
    let comparison = vec![
        greedy(0.01, 1.0),
        SolverSpec {
            label: Some("laplace".into()),
            ..greedy(1.0, 1.0)
        },
        SolverSpec::new(SolverKind::Omp, 1.0, 1.0),
    ];
    let (m_list, snr_list, solvers) = match name {
        "fig2" => (
            m_grid(),
            vec![25.0],
            [1e-4, 1e-2, 1e-1, 1.0, 10.0, 100.0].iter().map(|&t| greedy(0.01, t)).collect(),
        ),
        "fig3" => (
            m_grid(),
            vec![25.0],
            [0.0, 0.01, 0.1, 0.5, 1.0].iter().map(|&e| greedy(e, 1.0)).collect(),
        ),
        "fig4" => (m_grid(), vec![25.0], comparison),
        "fig5" => (vec![120], (0..=10).map(|i| 5.0 * i as f64).collect(), comparison),
        other => {
            return Err(SblError::InvalidParameter(format!(
                "unknown preset {other:?}; expected one of {PRESETS:?}"
            )))
        }
    };
    Ok(ExperimentConfig {
        n: 512,
        k: 20,
        m_list,
        snr_list,
        trials: 100,
        ensemble: Ensemble::Gaussian,
        solvers,
        base_seed: 0,
        output_path: None,
        figure: Some(name.to_string()),
    })
}
