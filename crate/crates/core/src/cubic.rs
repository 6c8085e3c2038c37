//! Real roots of cubic polynomials `l1 t^3 + l2 t^2 + l3 t + l4`.
//!
//! Roots come from the closed form (trigonometric when the discriminant is
//! positive, Cardano when it is negative, the double/triple-root formulas
//! when it is exactly zero) and are then polished by Newton steps on the
//! original polynomial.

use crate::error::{Result, SblError};
use std::f64::consts::PI;

/// Roots closer than `MERGE_TOL * (1 + |r|)` are reported once.
pub const MERGE_TOL: f64 = 1e-8;

const POLISH_STEPS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cubic {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
}

/// Sign class of the discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootClass {
    /// `Δ > 0`: three distinct real roots.
    ThreeDistinct,
    /// `Δ = 0`: a multiple root, all roots real.
    Multiple,
    /// `Δ < 0`: one real root and a complex-conjugate pair.
    OneReal,
}

impl Cubic {
    pub fn new(l1: f64, l2: f64, l3: f64, l4: f64) -> Self {
        Self { l1, l2, l3, l4 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        ((self.l1 * t + self.l2) * t + self.l3) * t + self.l4
    }

    pub fn derivative(&self, t: f64) -> f64 {
        (3.0 * self.l1 * t + 2.0 * self.l2) * t + self.l3
    }

    /// Magnitude of the largest term at `t`; the natural yardstick for a
    /// residual `|g(t)|` evaluated in floating point.
    pub fn term_scale(&self, t: f64) -> f64 {
        let t = t.abs();
        (self.l1.abs() * t * t * t)
            .max(self.l2.abs() * t * t)
            .max(self.l3.abs() * t)
            .max(self.l4.abs())
    }

    /// The same polynomial scaled by a power of two so that its largest
    /// coefficient lies in `[1, 2)`. The scaling is exact.
    pub fn normalized(&self) -> Self {
        let s = self
            .l1
            .abs()
            .max(self.l2.abs())
            .max(self.l3.abs())
            .max(self.l4.abs());
        if s == 0.0 || !s.is_finite() {
            return *self;
        }
        let k = s.log2().floor() as i32;
        let scale = 2f64.powi(-k);
        Self::new(self.l1 * scale, self.l2 * scale, self.l3 * scale, self.l4 * scale)
    }

    pub fn discriminant(&self) -> f64 {
        discriminant(self)
    }

    /// Classification by the sign of the discriminant, computed on the
    /// normalized polynomial to keep the fourth-degree products in range.
    pub fn classify(&self) -> RootClass {
        let d = discriminant(&self.normalized());
        if d > 0.0 {
            RootClass::ThreeDistinct
        } else if d < 0.0 {
            RootClass::OneReal
        } else {
            RootClass::Multiple
        }
    }
}

/// `Δ = 18 l1 l2 l3 l4 - 4 l2^3 l4 + l2^2 l3^2 - 4 l1 l3^3 - 27 l1^2 l4^2`.
pub fn discriminant(c: &Cubic) -> f64 {
    let Cubic { l1, l2, l3, l4 } = *c;
    18.0 * l1 * l2 * l3 * l4 - 4.0 * l2.powi(3) * l4 + l2 * l2 * l3 * l3
        - 4.0 * l1 * l3.powi(3)
        - 27.0 * l1 * l1 * l4 * l4
}

fn polish(c: &Cubic, mut t: f64) -> f64 {
    let mut g = c.eval(t);
    for _ in 0..POLISH_STEPS {
        let dg = c.derivative(t);
        if g == 0.0 || dg == 0.0 || !dg.is_finite() {
            break;
        }
        let next = t - g / dg;
        let g_next = c.eval(next);
        if !(g_next.abs() < g.abs()) {
            break;
        }
        t = next;
        g = g_next;
    }
    t
}

fn closed_form(c: &Cubic) -> Vec<f64> {
    let a = c.l2 / c.l1;
    let b = c.l3 / c.l1;
    let d = c.l4 / c.l1;
    let shift = a / 3.0;
    // depressed cubic s^3 + p s + q with t = s - a/3
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + d;

    match c.classify() {
        RootClass::ThreeDistinct => {
            let r = 2.0 * (-p / 3.0).sqrt();
            let arg = (3.0 * q / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
            let phi = arg.acos() / 3.0;
            (0..3)
                .map(|k| r * (phi - 2.0 * PI * k as f64 / 3.0).cos() - shift)
                .collect()
        }
        RootClass::OneReal => {
            let disc = q * q / 4.0 + p * p * p / 27.0;
            let u = (-q / 2.0 - q.signum() * disc.max(0.0).sqrt()).cbrt();
            let s = if u == 0.0 { 0.0 } else { u - p / (3.0 * u) };
            vec![s - shift]
        }
        RootClass::Multiple => {
            let Cubic { l1, l2, l3, l4 } = *c;
            let denom = l2 * l2 - 3.0 * l1 * l3;
            if denom == 0.0 {
                vec![-l2 / (3.0 * l1)]
            } else {
                let double = (9.0 * l1 * l4 - l2 * l3) / (2.0 * denom);
                let simple = (4.0 * l1 * l2 * l3 - 9.0 * l1 * l1 * l4 - l2 * l2 * l2) / (l1 * denom);
                vec![double, simple]
            }
        }
    }
}

/// Real roots in ascending order, near-coincident roots merged.
pub fn real_roots(c: &Cubic) -> Result<Vec<f64>> {
    if c.l1 == 0.0 {
        return Err(SblError::DegenerateLeading);
    }
    if ![c.l1, c.l2, c.l3, c.l4].iter().all(|v| v.is_finite()) {
        return Err(SblError::Domain("cubic coefficients must be finite".into()));
    }
    let mut roots: Vec<f64> = closed_form(c).into_iter().map(|t| polish(c, t)).collect();
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut merged: Vec<f64> = Vec::with_capacity(roots.len());
    for r in roots {
        match merged.last() {
            Some(&prev) if (r - prev).abs() <= MERGE_TOL * (1.0 + r.abs()) => {}
            _ => merged.push(r),
        }
    }
    Ok(merged)
}

/// The single root on `(0, inf)` guaranteed when `l1 > 0`, `l2 > 0` and
/// `l4 < 0` (the polynomial is negative at 0, its stationary points cannot
/// both be positive).
pub fn unique_positive_root(c: &Cubic) -> Result<f64> {
    if !(c.l1 > 0.0 && c.l2 > 0.0 && c.l4 < 0.0) || !c.l3.is_finite() {
        return Err(SblError::Precondition(format!(
            "unique positive root needs l1 > 0, l2 > 0, l4 < 0; got {c:?}"
        )));
    }
    let guess = real_roots(c)?
        .into_iter()
        .fold(f64::NAN, |best, r| if r > 0.0 && !(r <= best) { r } else { best });

    // Bracket [lo, hi] with g(lo) < 0 < g(hi), then safeguarded Newton.
    let mut lo = 0.0;
    let mut hi = if guess > 0.0 { guess } else { 1.0 };
    let mut grow = 1.0 + 1e-12;
    while c.eval(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0 * grow;
        grow = 1.0;
    }
    let mut t = if guess > 0.0 { guess } else { 0.5 * (lo + hi) };
    if !(t > lo && t <= hi) {
        t = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let g = c.eval(t);
        if g == 0.0 {
            return Ok(t);
        }
        if g < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let dg = c.derivative(t);
        let newton = t - g / dg;
        let next = if dg > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - t).abs() <= 4.0 * f64::EPSILON * t.abs() || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(next);
        }
        t = next;
    }
    Ok(t)
}
