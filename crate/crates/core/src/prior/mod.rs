//! The shifted-truncated-gamma (STG) law on signal variances and the
//! resulting marginal prior on the signal.
//!
//! For a variance `alpha >= 0` the STG density is
//!
//! ```text
//! p(alpha) = eta^eps / Γ(eps, eta*tau) * (alpha + tau)^(eps-1) * exp(-eta (alpha + tau))
//! ```
//!
//! i.e. `alpha + tau` is a gamma variable truncated to `[tau, inf)`. With
//! `eps = 1` the law is exponential with rate `eta` and the marginal signal
//! prior is Laplace. With `tau = 0` it is the ordinary gamma law, whose
//! marginal has the Bessel-K form
//! `2^(3/4-eps/2) / (sqrt(pi) Γ(eps)) eta^((2eps+1)/4) |x|^(eps-1/2) K_(eps-1/2)(sqrt(2 eta)|x|)`;
//! that form is not evaluated here, quadrature covers every case.

mod incomplete_gamma;

pub use incomplete_gamma::{ln_upper_incomplete_gamma, upper_incomplete_gamma};

use crate::error::{Result, SblError};
use crate::quadrature::{integrate, integrate_to_infinity, Tolerance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Prior and noise parameters.
///
/// `c` and `d` parameterize the gamma hyperprior on `eta`; both default to 0,
/// which is the scale-invariant (uniform in `log eta`) limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub tau: f64,
    pub eps: f64,
    pub eta: f64,
    pub sigma2: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub d: f64,
}

impl Hyperparams {
    pub fn new(tau: f64, eps: f64, eta: f64, sigma2: f64) -> Result<Self> {
        let h = Self {
            tau,
            eps,
            eta,
            sigma2,
            c: 0.0,
            d: 0.0,
        };
        h.validate()?;
        Ok(h)
    }

    /// Threshold `tau = (M/N) sigma^2`, the given shape, and the greedy
    /// solver's starting rate.
    pub fn recommended(problem: &crate::problem::SensingProblem, eps: f64) -> Result<Self> {
        let (m, n) = problem.a.shape();
        let tau = crate::problem::default_tau(m, n, problem.sigma2)?;
        Self::new(tau, eps, crate::solver::GREEDY_INITIAL_ETA, problem.sigma2)
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(SblError::InvalidParameter(what.to_string()));
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return bad("tau must be finite and >= 0");
        }
        // Shapes above one stop promoting sparsity; they are rejected rather
        // than given an ad hoc meaning.
        if !(0.0..=1.0).contains(&self.eps) {
            return bad("eps must lie in [0, 1]");
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return bad("eta must be finite and > 0");
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return bad("sigma2 must be finite and > 0");
        }
        if !(self.c >= 0.0) || !(self.d >= 0.0) {
            return bad("hyperprior parameters c, d must be >= 0");
        }
        Ok(())
    }
}

/// Log-density of the STG law with the normalizer precomputed.
#[derive(Debug, Clone, Copy)]
pub struct StgDensity {
    tau: f64,
    eps: f64,
    eta: f64,
    log_norm: f64,
}

impl StgDensity {
    pub fn new(h: &Hyperparams) -> Result<Self> {
        h.validate()?;
        let log_norm = if h.eps == 1.0 {
            h.eta.ln()
        } else {
            h.eps * h.eta.ln() - ln_upper_incomplete_gamma(h.eps, h.eta * h.tau)?
        };
        Ok(Self {
            tau: h.tau,
            eps: h.eps,
            eta: h.eta,
            log_norm,
        })
    }

    pub fn ln_pdf(&self, alpha: f64) -> f64 {
        if self.eps == 1.0 {
            // exp(eta tau) from the normalizer cancels the shift exactly
            return self.log_norm - self.eta * alpha;
        }
        let shifted = alpha + self.tau;
        self.log_norm + (self.eps - 1.0) * shifted.ln() - self.eta * shifted
    }

    pub fn pdf(&self, alpha: f64) -> f64 {
        self.ln_pdf(alpha).exp()
    }
}

/// STG density at `alpha`.
pub fn stg_pdf(alpha: f64, h: &Hyperparams) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(SblError::Domain(format!("STG density needs alpha >= 0, got {alpha}")));
    }
    Ok(StgDensity::new(h)?.pdf(alpha))
}

/// Analytic mean of the STG law,
/// `E[alpha] = Γ(eps + 1, eta tau) / (eta Γ(eps, eta tau)) - tau`.
pub fn stg_mean(h: &Hyperparams) -> Result<f64> {
    h.validate()?;
    let x = h.eta * h.tau;
    let ratio = (ln_upper_incomplete_gamma(h.eps + 1.0, x)? - ln_upper_incomplete_gamma(h.eps, x)?).exp();
    Ok(ratio / h.eta - h.tau)
}

/// Marginal signal prior `p(x) = ∫ N(x | 0, alpha) p(alpha) d alpha`.
///
/// Integrated in `u = sqrt(alpha)`, which removes the `alpha^(-1/2)`
/// singularity of the Gaussian at `x = 0`; the range is split at
/// `sqrt(tau)`, `|x|` and the prior scale `1/sqrt(eta)`.
pub fn marginal_pdf(x: f64, h: &Hyperparams) -> Result<f64> {
    if !x.is_finite() {
        return Err(SblError::Domain(format!("marginal density needs finite x, got {x}")));
    }
    h.validate()?;
    if x == 0.0 && h.tau == 0.0 && h.eps <= 0.5 {
        return Err(SblError::Divergent(
            "marginal density is infinite at x = 0 when tau = 0 and eps <= 1/2".into(),
        ));
    }
    let density = StgDensity::new(h)?;
    let coef = (2.0 / std::f64::consts::PI).sqrt();
    let half_x2 = 0.5 * x * x;
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let alpha = u * u;
        let v = coef * (-half_x2 / alpha + density.ln_pdf(alpha)).exp();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };

    let mut breaks = vec![h.tau.sqrt(), x.abs(), 1.0 / h.eta.sqrt()];
    breaks.retain(|b| *b > 0.0 && b.is_finite());
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let last = *breaks.last().expect("prior scale is always positive");
    let tol = Tolerance {
        rel: 1e-11,
        abs: 1e-300,
        max_segments: 4000,
    };
    let head = integrate(integrand, 0.0, last, &breaks, tol);
    let tail = integrate_to_infinity(integrand, last, tol);
    Ok(head.value + tail.value)
}

/// Draws `n` signal values from the marginal prior.
///
/// Each draw takes one uniform for the variance, inverted through the
/// truncated-gamma CDF by bisection, then one standard normal.
pub fn sample_prior(n: usize, h: &Hyperparams, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(SblError::InvalidParameter("sample size must be >= 1".into()));
    }
    h.validate()?;
    let log_tail_at_tau = ln_upper_incomplete_gamma(h.eps, h.eta * h.tau)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let alpha = invert_stg_cdf(u, h, log_tail_at_tau)?;
        let z: f64 = rng.sample(StandardNormal);
        out.push(alpha.sqrt() * z);
    }
    Ok(out)
}

/// Solves `P(alpha <= a) = u` by bisection on `beta = alpha + tau`.
fn invert_stg_cdf(u: f64, h: &Hyperparams, log_tail_at_tau: f64) -> Result<f64> {
    // survival S(beta) = Γ(eps, eta beta) / Γ(eps, eta tau); solve ln S = ln(1-u)
    let target = (-u).ln_1p();
    let log_survival = |beta: f64| -> Result<f64> {
        Ok(ln_upper_incomplete_gamma(h.eps, h.eta * beta)? - log_tail_at_tau)
    };
    let mut lo = h.tau;
    let mut width = 1.0 / h.eta;
    let mut hi = lo + width;
    while log_survival(hi)? > target {
        lo = hi;
        width *= 2.0;
        hi = lo + width;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if log_survival(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok((0.5 * (lo + hi) - h.tau).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(tau: f64, eps: f64, eta: f64) -> Hyperparams {
        Hyperparams::new(tau, eps, eta, 1.0).unwrap()
    }

    #[test]
    fn exponential_reduction() {
        assert_eq!(stg_pdf(0.0, &hp(2.0, 1.0, 2.0)).unwrap(), 2.0);
        for &tau in &[0.0, 1e-8, 1.0, 37.0] {
            for &alpha in &[0.0, 0.1, 2.5, 10.0] {
                let v = stg_pdf(alpha, &hp(tau, 1.0, 1.7)).unwrap();
                assert!((v - 1.7 * (-1.7 * alpha).exp()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn large_threshold_tends_to_exponential() {
        for &eta in &[0.1, 1.0, 10.0] {
            for &alpha in &[0.0, 0.5, 3.0] {
                let v = stg_pdf(alpha, &hp(1e6, 0.3, eta)).unwrap();
                assert!((v - eta * (-eta * alpha).exp()).abs() <= 1e-3, "eta={eta} alpha={alpha}");
            }
        }
    }

    #[test]
    fn negative_variance_rejected() {
        assert!(matches!(stg_pdf(-1.0, &hp(1.0, 0.5, 1.0)), Err(SblError::Domain(_))));
    }

    #[test]
    fn shape_above_one_rejected() {
        assert!(Hyperparams::new(1.0, 1.5, 1.0, 1.0).is_err());
        assert!(Hyperparams::new(-1.0, 0.5, 1.0, 1.0).is_err());
        assert!(Hyperparams::new(1.0, 0.5, 0.0, 1.0).is_err());
        assert!(Hyperparams::new(1.0, 0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn laplace_marginal_at_origin() {
        let v = marginal_pdf(0.0, &hp(0.3, 1.0, 2.0)).unwrap();
        assert!((v - 1.0).abs() < 1e-7, "{v}");
    }

    #[test]
    fn laplace_marginal_off_origin() {
        let expected = 0.5f64.sqrt() * (-(2f64.sqrt()) * 1.3).exp();
        for &tau in &[0.0, 0.5, 20.0] {
            let v = marginal_pdf(1.3, &hp(tau, 1.0, 1.0)).unwrap();
            assert!(((v - expected) / expected).abs() < 1e-7, "tau={tau}: {v}");
        }
    }

    #[test]
    fn marginal_is_even() {
        let h = hp(1e-3, 0.2, 1.5);
        for &x in &[0.01, 0.4, 2.0] {
            let a = marginal_pdf(x, &h).unwrap();
            let b = marginal_pdf(-x, &h).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn marginal_divergence_at_origin() {
        let h = hp(0.0, 0.5, 1.0);
        assert!(matches!(marginal_pdf(0.0, &h), Err(SblError::Divergent(_))));
        assert!(marginal_pdf(0.0, &hp(0.0, 0.8, 1.0)).unwrap().is_finite());
    }

    #[test]
    fn sampling_contract() {
        let h = hp(0.5, 0.3, 1.7);
        assert!(sample_prior(0, &h, 1).is_err());
        assert_eq!(sample_prior(1, &h, 1).unwrap().len(), 1);
        let a = sample_prior(64, &h, 9).unwrap();
        let b = sample_prior(64, &h, 9).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_ne!(a, sample_prior(64, &h, 10).unwrap());
    }

    #[test]
    fn exponential_mean() {
        let m = stg_mean(&hp(3.0, 1.0, 2.0)).unwrap();
        assert!((m - 0.5).abs() < 1e-12);
    }
}
