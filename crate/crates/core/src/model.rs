//! Posterior statistics, the evidence objective, and the per-coordinate
//! updates of `alpha` and `eta` shared by the solvers.
//!
//! The objective is
//!
//! ```text
//! L(alpha, eta) = -1/2 log|C| - 1/2 y' C^-1 y
//!                 + (eps-1) Σ log(alpha_i + tau) - eta Σ (alpha_i + tau)
//!                 + (N eps + c) log eta - N log Γ(eps, eta tau) - d eta
//! ```
//!
//! with `C = sigma2 I + A diag(alpha) A'`. The additive constant
//! `-(M/2) log 2π` is dropped; only differences of `L` are ever compared.

use crate::cubic::{unique_positive_root, Cubic};
use crate::error::{Result, SblError};
use crate::prior::{ln_upper_incomplete_gamma, Hyperparams};
use nalgebra::{DMatrix, DVector};

/// Largest accepted condition estimate of the factorized active-set system.
pub const MAX_CONDITION: f64 = 1e14;

/// Gaussian posterior of the signal given `alpha`, restricted to the active
/// set `{i : alpha_i > 0}`.
#[derive(Debug, Clone)]
pub struct PosteriorStats {
    /// Active indices in ascending order.
    pub active: Vec<usize>,
    /// Posterior mean, full length `N` (zero off the active set).
    pub mu: DVector<f64>,
    /// Posterior covariance over the active set, ordered as `active`.
    pub sigma: DMatrix<f64>,
    /// `log |C|`.
    pub log_det_c: f64,
    /// `y' C^-1 y`.
    pub quad_form: f64,
}

impl PosteriorStats {
    /// `E[x_i^2] = mu_i^2 + Sigma_ii` for every coordinate.
    pub fn second_moments(&self) -> DVector<f64> {
        let mut out = self.mu.map(|m| m * m);
        for (k, &i) in self.active.iter().enumerate() {
            out[i] += self.sigma[(k, k)].max(0.0);
        }
        out
    }

    /// Covariance embedded in an `N x N` matrix.
    pub fn sigma_full(&self) -> DMatrix<f64> {
        let n = self.mu.len();
        let mut full = DMatrix::zeros(n, n);
        for (r, &i) in self.active.iter().enumerate() {
            for (c, &j) in self.active.iter().enumerate() {
                full[(i, j)] = self.sigma[(r, c)];
            }
        }
        full
    }
}

pub(crate) fn check_problem(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if a.nrows() != y.len() {
        return Err(SblError::DimensionMismatch(format!(
            "A has {} rows but y has length {}",
            a.nrows(),
            y.len()
        )));
    }
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(SblError::DimensionMismatch("empty sensing matrix".into()));
    }
    Ok(())
}

fn condition_from_cholesky(l: &DMatrix<f64>) -> f64 {
    let diag = l.diagonal();
    let max = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    (max / min).powi(2)
}

fn columns(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    a.select_columns(idx.iter())
}

/// Posterior mean and covariance for the active set together with `log|C|`
/// and `y' C^-1 y`.
///
/// With at most `M` active columns the `K x K` system
/// `B = I + sigma^-2 D Φ'Φ D`, `D = diag(sqrt(alpha))`, is factorized; then
/// `Σ = D B^-1 D`, `log|C| = M log sigma2 + log|B|` and
/// `y'C^-1 y = sigma^-2 |y - Φμ|^2 + μ' Λ^-1 μ`. With more than `M` active
/// columns the `M x M` matrix `C` is factorized instead.
pub fn posterior_stats(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: &DVector<f64>,
    sigma2: f64,
) -> Result<PosteriorStats> {
    check_problem(a, y)?;
    let (m, n) = a.shape();
    if alpha.len() != n {
        return Err(SblError::DimensionMismatch(format!(
            "alpha has length {} but A has {} columns",
            alpha.len(),
            n
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(SblError::InvalidParameter("sigma2 must be > 0".into()));
    }
    if alpha.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(SblError::InvalidParameter("alpha entries must be finite and >= 0".into()));
    }
    let active: Vec<usize> = (0..n).filter(|&i| alpha[i] > 0.0).collect();
    let k = active.len();
    let beta = 1.0 / sigma2;
    let mut mu = DVector::zeros(n);

    if k == 0 {
        return Ok(PosteriorStats {
            active,
            mu,
            sigma: DMatrix::zeros(0, 0),
            log_det_c: m as f64 * sigma2.ln(),
            quad_form: beta * y.norm_squared(),
        });
    }

    let phi = columns(a, &active);
    let alpha_act = DVector::from_iterator(k, active.iter().map(|&i| alpha[i]));

    if k <= m {
        let root = alpha_act.map(f64::sqrt);
        let mut b = phi.tr_mul(&phi) * beta;
        for r in 0..k {
            for c in 0..k {
                b[(r, c)] *= root[r] * root[c];
            }
            b[(r, r)] += 1.0;
        }
        let chol = b.cholesky().ok_or(SblError::Singular { condition: f64::INFINITY })?;
        let condition = condition_from_cholesky(&chol.l());
        if condition > MAX_CONDITION {
            return Err(SblError::Singular { condition });
        }
        let log_det_b = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let mut sigma = chol.inverse();
        for r in 0..k {
            for c in 0..k {
                sigma[(r, c)] *= root[r] * root[c];
            }
        }
        let mu_act = &sigma * (phi.tr_mul(y) * beta);
        let resid = y - &phi * &mu_act;
        let penalty: f64 = mu_act.iter().zip(alpha_act.iter()).map(|(u, a)| u * u / a).sum();
        for (r, &i) in active.iter().enumerate() {
            mu[i] = mu_act[r];
        }
        Ok(PosteriorStats {
            active,
            mu,
            sigma,
            log_det_c: m as f64 * sigma2.ln() + log_det_b,
            quad_form: beta * resid.norm_squared() + penalty,
        })
    } else {
        let mut scaled = phi.clone();
        for (c, mut col) in scaled.column_iter_mut().enumerate() {
            col *= alpha_act[c];
        }
        let mut cmat = &scaled * phi.transpose();
        for d in 0..m {
            cmat[(d, d)] += sigma2;
        }
        let chol = cmat.cholesky().ok_or(SblError::Singular { condition: f64::INFINITY })?;
        let condition = condition_from_cholesky(&chol.l());
        if condition > MAX_CONDITION {
            return Err(SblError::Singular { condition });
        }
        let log_det_c = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let cinv_y = chol.solve(y);
        let cinv_phi = chol.solve(&phi);
        let inner = phi.tr_mul(&cinv_phi);
        let mut sigma = DMatrix::zeros(k, k);
        for r in 0..k {
            for c in 0..k {
                sigma[(r, c)] = -alpha_act[r] * inner[(r, c)] * alpha_act[c];
            }
            sigma[(r, r)] += alpha_act[r];
        }
        let proj = phi.tr_mul(&cinv_y);
        for (r, &i) in active.iter().enumerate() {
            mu[i] = alpha_act[r] * proj[r];
        }
        Ok(PosteriorStats {
            active,
            mu,
            sigma,
            log_det_c,
            quad_form: y.dot(&cinv_y),
        })
    }
}

/// The `alpha`/`eta` dependent part of the objective (everything except the
/// data terms `-1/2 log|C| - 1/2 y'C^-1 y`).
///
/// Returns `+inf` when `tau = 0`, `eps < 1` and some `alpha_i = 0`: the STG
/// density is unbounded at the origin in that case.
pub fn prior_terms(alpha: &DVector<f64>, h: &Hyperparams) -> Result<f64> {
    let n = alpha.len() as f64;
    let mut log_sum = 0.0;
    let mut sum = 0.0;
    for &a in alpha.iter() {
        let shifted = a + h.tau;
        sum += shifted;
        if h.eps != 1.0 {
            if shifted == 0.0 {
                return Ok(f64::INFINITY);
            }
            log_sum += shifted.ln();
        }
    }
    let log_tail = ln_upper_incomplete_gamma(h.eps, h.eta * h.tau)?;
    Ok((h.eps - 1.0) * log_sum - h.eta * sum + (n * h.eps + h.c) * h.eta.ln()
        - n * log_tail
        - h.d * h.eta)
}

/// Evidence objective `L` at `(alpha, h.eta)`.
pub fn log_likelihood(stats: &PosteriorStats, alpha: &DVector<f64>, h: &Hyperparams) -> Result<f64> {
    Ok(-0.5 * stats.log_det_c - 0.5 * stats.quad_form + prior_terms(alpha, h)?)
}

/// `f(t) = 2 eta t^3 + (3 - 2eps + 2 eta tau) t^2 + (tau - E) t - tau E`,
/// whose positive root is the EM update of one `alpha_i` given
/// `E = E[x_i^2]`.
pub fn em_cubic(ex2: f64, h: &Hyperparams) -> Cubic {
    Cubic::new(
        2.0 * h.eta,
        3.0 - 2.0 * h.eps + 2.0 * h.eta * h.tau,
        h.tau - ex2,
        -h.tau * ex2,
    )
}

/// Per-coordinate EM objective
/// `-1/2 log t - E/(2t) + (eps-1) log(t + tau) - eta t`.
pub fn em_coordinate_objective(t: f64, ex2: f64, h: &Hyperparams) -> f64 {
    let prior = if h.eps == 1.0 { 0.0 } else { (h.eps - 1.0) * (t + h.tau).ln() };
    -0.5 * t.ln() - ex2 / (2.0 * t) + prior - h.eta * t
}

/// `dL/d alpha_i = -f(alpha_i) / (2 alpha_i^2 (alpha_i + tau))`.
pub fn alpha_gradient(alpha_i: f64, ex2: f64, h: &Hyperparams) -> f64 {
    -em_cubic(ex2, h).eval(alpha_i) / (2.0 * alpha_i * alpha_i * (alpha_i + h.tau))
}

/// EM update of one variance: the maximizer of the coordinate objective.
pub fn update_alpha_em(ex2: f64, h: &Hyperparams) -> Result<f64> {
    if !(ex2 > 0.0) || !ex2.is_finite() {
        return Err(SblError::Domain(format!("E[x^2] must be positive, got {ex2}")));
    }
    if h.tau > 0.0 {
        return unique_positive_root(&em_cubic(ex2, h));
    }
    // tau = 0: f(t) = t (2 eta t^2 + (3 - 2 eps) t - E)
    let b = 3.0 - 2.0 * h.eps;
    Ok(2.0 * ex2 / (b + (b * b + 8.0 * h.eta * ex2).sqrt()))
}

/// The part of `L` that depends on `theta = log eta`.
#[derive(Debug, Clone, Copy)]
pub struct EtaObjective {
    n: f64,
    eps: f64,
    c: f64,
    tau: f64,
    /// `Σ (alpha_i + tau) + d`
    rate_sum: f64,
}

impl EtaObjective {
    pub fn new(alpha: &DVector<f64>, h: &Hyperparams) -> Self {
        let n = alpha.len() as f64;
        Self {
            n,
            eps: h.eps,
            c: h.c,
            tau: h.tau,
            rate_sum: alpha.sum() + n * h.tau + h.d,
        }
    }

    /// `r(x) = x^eps e^-x / Γ(eps, x)` at `x = eta tau`.
    fn tail_ratio(&self, eta: f64) -> Result<f64> {
        let x = eta * self.tau;
        if x == 0.0 {
            return Ok(0.0);
        }
        Ok((self.eps * x.ln() - x - ln_upper_incomplete_gamma(self.eps, x)?).exp())
    }

    /// `(N eps + c) theta - e^theta (Σ(alpha_i + tau) + d) - N log Γ(eps, e^theta tau)`.
    pub fn value(&self, theta: f64) -> Result<f64> {
        let eta = theta.exp();
        Ok((self.n * self.eps + self.c) * theta - eta * self.rate_sum
            - self.n * ln_upper_incomplete_gamma(self.eps, eta * self.tau)?)
    }

    pub fn gradient(&self, theta: f64) -> Result<f64> {
        let eta = theta.exp();
        Ok(self.n * self.eps + self.c - eta * self.rate_sum + self.n * self.tail_ratio(eta)?)
    }

    pub fn hessian(&self, theta: f64) -> Result<f64> {
        let eta = theta.exp();
        let r = self.tail_ratio(eta)?;
        Ok(-eta * self.rate_sum + self.n * r * (self.eps - eta * self.tau + r))
    }
}

/// Bounds of the search over `theta = log eta`.
pub const LOG_ETA_BOUNDS: (f64, f64) = (-40.0, 40.0);
const THETA_TOL: f64 = 1e-10;

/// Maximizes `L` over `eta` with `alpha` held fixed, never returning a rate
/// with a lower objective than `h.eta`.
pub fn update_eta(alpha: &DVector<f64>, h: &Hyperparams) -> Result<f64> {
    let (lo_bound, hi_bound) = LOG_ETA_BOUNDS;
    let obj = EtaObjective::new(alpha, h);
    if h.tau == 0.0 {
        if h.eps == 0.0 && h.c == 0.0 {
            return Err(SblError::Divergent("Γ(0, 0) in the eta update".into()));
        }
        // Γ(eps, 0) no longer depends on eta: stationary point in closed form.
        let theta = ((alpha.len() as f64 * h.eps + h.c) / obj.rate_sum).ln();
        return Ok(theta.clamp(lo_bound, hi_bound).exp());
    }

    let theta0 = h.eta.ln().clamp(lo_bound, hi_bound);
    let f0 = obj.value(theta0)?;
    let g0 = obj.gradient(theta0)?;
    if g0 == 0.0 {
        return Ok(theta0.exp());
    }

    // Walk uphill with doubling steps until the gradient changes sign.
    let dir = g0.signum();
    let mut near = theta0;
    let mut step = 1.0;
    let far = loop {
        let cand = (theta0 + dir * step).clamp(lo_bound, hi_bound);
        let g = obj.gradient(cand)?;
        if g.signum() != dir {
            break Some(cand);
        }
        if cand == lo_bound || cand == hi_bound {
            break None;
        }
        near = cand;
        step *= 2.0;
    };
    let candidate = match far {
        None => {
            if dir > 0.0 {
                hi_bound
            } else {
                lo_bound
            }
        }
        Some(far) => {
            let (lo, hi) = if dir > 0.0 { (near, far) } else { (far, near) };
            newton_in_bracket(&obj, lo, hi)?
        }
    };
    if obj.value(candidate)? >= f0 {
        return Ok(candidate.exp());
    }
    let golden = golden_section(&obj, lo_bound, hi_bound)?;
    if obj.value(golden)? >= f0 {
        Ok(golden.exp())
    } else {
        Ok(theta0.exp())
    }
}

/// Root of the gradient inside `[lo, hi]` where `g(lo) > 0 > g(hi)`.
fn newton_in_bracket(obj: &EtaObjective, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut theta = 0.5 * (lo + hi);
    for _ in 0..200 {
        let g = obj.gradient(theta)?;
        if g > 0.0 {
            lo = theta;
        } else if g < 0.0 {
            hi = theta;
        } else {
            return Ok(theta);
        }
        let hess = obj.hessian(theta)?;
        let newton = theta - g / hess;
        let next = if hess < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - theta).abs() <= THETA_TOL || hi - lo <= THETA_TOL {
            return Ok(next);
        }
        theta = next;
    }
    Ok(theta)
}

fn golden_section(obj: &EtaObjective, mut lo: f64, mut hi: f64) -> Result<f64> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = obj.value(x1)?;
    let mut f2 = obj.value(x2)?;
    while hi - lo > THETA_TOL {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = obj.value(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = obj.value(x1)?;
        }
    }
    Ok(0.5 * (lo + hi))
}
