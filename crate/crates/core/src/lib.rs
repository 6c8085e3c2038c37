//! Sparse Bayesian learning for compressed sensing with the Gaussian
//! shifted-truncated-gamma (G-STG) prior.
//!
//! The crate provides
//!
//! * [`prior`]: the STG density, the upper incomplete gamma function, the
//!   marginal signal prior and prior sampling,
//! * [`cubic`]: real-root analysis of cubic polynomials,
//! * [`model`]: posterior statistics, the evidence objective and the
//!   per-coordinate `alpha` / `eta` updates,
//! * [`solver`]: the EM solver, the fast greedy solver and an OMP baseline,
//! * [`problem`]: seeded generation of sensing problems,
//! * [`experiments`]: metrics and Monte Carlo sweeps.
//!
//! ```
//! use gstg_sbl::prelude::*;
//!
//! let spec = ProblemSpec::new(64, 256, 8, Ensemble::Gaussian, Noise::SnrDb(25.0), 7);
//! let problem = SensingProblem::generate(&spec).unwrap();
//! let h = Hyperparams::recommended(&problem, 0.01).unwrap();
//! let result = recover_greedy(&problem, &h, &EmOptions::default()).unwrap();
//! assert!(result.support.len() <= 64);
//! ```

pub mod cubic;
pub mod error;
pub mod experiments;
pub mod model;
pub mod prior;
pub mod problem;
pub mod quadrature;
pub mod selfcheck;
pub mod solver;

pub use error::{Result, SblError};

pub mod prelude {
    pub use crate::cubic::Cubic;
    pub use crate::error::{Result, SblError};
    pub use crate::experiments::{rmse, run_sweep, ExperimentConfig, MetricsRow, SolverSpec};
    pub use crate::model::{posterior_stats, PosteriorStats};
    pub use crate::prior::Hyperparams;
    pub use crate::problem::{Ensemble, Noise, ProblemSpec, SensingProblem};
    pub use crate::solver::em::recover_em;
    pub use crate::solver::greedy::recover_greedy;
    pub use crate::solver::omp::{recover_omp, OmpOptions};
    pub use crate::solver::{EmOptions, RecoveryResult};
}
