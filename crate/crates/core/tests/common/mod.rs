//! Test-side oracles, written independently of the library's numerics.
#![allow(dead_code)]

use gstg_sbl::prelude::*;
use nalgebra::{DMatrix, DVector};

/// Adaptive Simpson quadrature.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Simpson over consecutive panels `[p0, p1], [p1, p2], ...`.
pub fn simpson_panels<F: Fn(f64) -> f64>(f: &F, points: &[f64], tol: f64) -> f64 {
    points.windows(2).map(|w| simpson(f, w[0], w[1], tol)).sum()
}

fn ln_gamma_oracle(a: f64) -> f64 {
    // Lanczos (g = 7, n = 9), independent of statrs' coefficients.
    const C: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if a < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * a).sin()).ln() - ln_gamma_oracle(1.0 - a);
    }
    let a = a - 1.0;
    let mut x = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        x += c / (a + i as f64);
    }
    let t = a + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (a + 0.5) * t.ln() - t + x.ln()
}

/// `Γ(a, x)` by Simpson quadrature in `u = ln t` (`a > 0`, or `x > 0`).
pub fn upper_gamma_oracle(a: f64, x: f64) -> f64 {
    let f = |u: f64| (a * u - u.exp()).exp();
    let lo = if x > 0.0 { x.ln() } else { -745.0 / a.max(1e-3) };
    let hi = (x.max(1.0) + 80.0).ln();
    let mut pts = vec![lo];
    let n = 400;
    for i in 1..=n {
        pts.push(lo + (hi - lo) * i as f64 / n as f64);
    }
    simpson_panels(&f, &pts, 1e-16)
}

pub fn gamma_oracle(a: f64) -> f64 {
    ln_gamma_oracle(a).exp()
}

/// All real roots of `l1 t^3 + l2 t^2 + l3 t + l4` by bisection between the
/// critical points.
pub fn cubic_roots_oracle(l: [f64; 4]) -> Vec<f64> {
    let g = |t: f64| ((l[0] * t + l[1]) * t + l[2]) * t + l[3];
    // Cauchy bound on root magnitude.
    let bound = 1.0 + (l[1].abs().max(l[2].abs()).max(l[3].abs())) / l[0].abs();
    let mut knots = vec![-bound];
    let (a, b, c) = (3.0 * l[0], 2.0 * l[1], l[2]);
    let disc = b * b - 4.0 * a * c;
    if disc > 0.0 {
        let r = disc.sqrt();
        let mut crit = [(-b - r) / (2.0 * a), (-b + r) / (2.0 * a)];
        crit.sort_by(|x, y| x.partial_cmp(y).unwrap());
        knots.extend(crit.iter().filter(|t| t.abs() < bound));
    }
    knots.push(bound);
    let mut roots = Vec::new();
    for w in knots.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (glo, ghi) = (g(lo), g(hi));
        if glo == 0.0 {
            roots.push(lo);
            continue;
        }
        if glo.signum() == ghi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if g(mid).signum() == glo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    if g(bound) == 0.0 {
        roots.push(bound);
    }
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    roots
}

/// Golden-section maximum of a unimodal `f` on `[lo, hi]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// `C = sigma2 I + A diag(alpha) A'`.
pub fn dense_c(a: &DMatrix<f64>, alpha: &DVector<f64>, sigma2: f64) -> DMatrix<f64> {
    let m = a.nrows();
    let mut c = DMatrix::identity(m, m) * sigma2;
    for (j, &al) in alpha.iter().enumerate() {
        if al > 0.0 {
            let col = a.column(j);
            c += &col * col.transpose() * al;
        }
    }
    c
}

/// Leave-one-out `(s_j, q_j)` from an explicit inverse of `C_-j`.
pub fn leave_one_out_oracle(a: &DMatrix<f64>, y: &DVector<f64>, alpha: &DVector<f64>, sigma2: f64, j: usize) -> (f64, f64) {
    let mut without = alpha.clone();
    without[j] = 0.0;
    let inv = dense_c(a, &without, sigma2).try_inverse().expect("C is invertible");
    let aj = a.column(j);
    ((aj.transpose() * &inv * aj)[(0, 0)], (aj.transpose() * &inv * y)[(0, 0)])
}

/// Objective `L` from dense `C`: `-1/2 log|C| - 1/2 y'C^-1 y + prior terms`.
pub fn dense_log_likelihood(a: &DMatrix<f64>, y: &DVector<f64>, alpha: &DVector<f64>, h: &Hyperparams) -> f64 {
    let c = dense_c(a, alpha, h.sigma2);
    let lu = c.clone().lu();
    let log_det = lu.determinant().ln();
    let quad = y.dot(&lu.solve(y).unwrap());
    let n = alpha.len() as f64;
    let mut prior = 0.0;
    for &al in alpha.iter() {
        prior += (h.eps - 1.0) * (al + h.tau).ln() - h.eta * (al + h.tau);
    }
    prior += n * h.eps * h.eta.ln() - n * upper_gamma_oracle(h.eps, h.eta * h.tau).ln();
    -0.5 * log_det - 0.5 * quad + prior
}

pub fn seeded_problem(m: usize, n: usize, k: usize, snr_db: f64, seed: u64) -> SensingProblem {
    SensingProblem::generate(&ProblemSpec::new(m, n, k, Ensemble::Gaussian, Noise::SnrDb(snr_db), seed)).unwrap()
}

pub fn noiseless_problem(m: usize, n: usize, k: usize, sigma2: f64, seed: u64) -> SensingProblem {
    SensingProblem::generate(&ProblemSpec::new(m, n, k, Ensemble::Gaussian, Noise::Noiseless { sigma2 }, seed)).unwrap()
}

pub fn true_support(p: &SensingProblem) -> Vec<usize> {
    let x = p.x_true.as_ref().unwrap();
    (0..x.len()).filter(|&i| x[i] != 0.0).collect()
}

/// Nondecreasing up to `slack` relative.
pub fn is_monotone(trace: &[f64], slack: f64) -> bool {
    trace.windows(2).all(|w| w[1] >= w[0] - slack * w[0].abs())
}
