//! Seeded generation of compressed-sensing test problems.
//!
//! Every generator is a pure function of its dimensions and seed. Randomness
//! comes from ChaCha20 (`rand_chacha`), a counter-based generator whose output
//! is fixed by the algorithm rather than by platform; each generator draws
//! from its own stream of the seeded key, so the sensing matrix, the signal
//! and the noise of one problem are independent yet reproducible from a
//! single recorded seed.

use crate::error::{Result, SblError};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

const MATRIX_STREAM: u64 = 1;
const SIGNAL_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    /// i.i.d. `N(0, 1/M)` entries.
    Gaussian,
    /// Columns i.i.d. uniform on the unit sphere.
    UniformSpherical,
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ensemble::Gaussian => "gaussian",
            Ensemble::UniformSpherical => "uniform_spherical",
        })
    }
}

impl FromStr for Ensemble {
    type Err = SblError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Ensemble::Gaussian),
            "uniform_spherical" | "spherical" | "use" => Ok(Ensemble::UniformSpherical),
            other => Err(SblError::Parse(format!("unknown ensemble {other:?}"))),
        }
    }
}

/// How measurement noise is produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    /// AWGN calibrated to the given SNR (dB).
    SnrDb(f64),
    /// AWGN with the given variance.
    Variance(f64),
    /// No noise is added; `sigma2` is the variance the solvers assume.
    Noiseless { sigma2: f64 },
}

/// Dimensions, ensemble, noise model and seed of a synthetic problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub ensemble: Ensemble,
    pub noise: Noise,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn new(m: usize, n: usize, k: usize, ensemble: Ensemble, noise: Noise, seed: u64) -> Self {
        Self { m, n, k, ensemble, noise, seed }
    }
}

/// `y = A x + e` together with the assumed noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingProblem {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
    pub x_true: Option<DVector<f64>>,
    pub sigma2: f64,
    pub seed: u64,
    pub ensemble: Ensemble,
}

impl SensingProblem {
    pub fn generate(spec: &ProblemSpec) -> Result<Self> {
        let ProblemSpec { m, n, k, ensemble, noise, seed } = *spec;
        if m >= n {
            return Err(SblError::InvalidParameter(format!(
                "compressed sensing needs M < N, got M={m}, N={n}"
            )));
        }
        let a = match ensemble {
            Ensemble::Gaussian => gen_gaussian_ensemble(m, n, seed)?,
            Ensemble::UniformSpherical => gen_uniform_spherical(m, n, seed)?,
        };
        let x = gen_sparse_signal(n, k, seed)?;
        let clean = &a * &x;
        let (sigma2, added) = match noise {
            Noise::SnrDb(db) => {
                let s2 = noise_variance_for_snr(k, m, db)?;
                (s2, s2)
            }
            Noise::Variance(s2) => (s2, s2),
            Noise::Noiseless { sigma2 } => (sigma2, 0.0),
        };
        if !(sigma2 > 0.0) {
            return Err(SblError::InvalidParameter("assumed noise variance must be > 0".into()));
        }
        let y = add_noise(&clean, added, seed)?;
        Ok(Self {
            a,
            y,
            x_true: Some(x),
            sigma2,
            seed,
            ensemble,
        })
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        crate::model::check_problem(&self.a, &self.y)?;
        if let Some(x) = &self.x_true {
            if x.len() != self.n() {
                return Err(SblError::DimensionMismatch(format!(
                    "x_true has length {} but A has {} columns",
                    x.len(),
                    self.n()
                )));
            }
        }
        if !(self.sigma2 > 0.0) {
            return Err(SblError::InvalidParameter("sigma2 must be > 0".into()));
        }
        Ok(())
    }

    /// Writes the problem as CSV.
    ///
    /// Line 1 is the header `M,N,sigma2,seed,ensemble` and line 2 its values.
    /// Then follow `M` lines holding the rows of `A` (`N` values each), one
    /// line with `y` (`M` values) and, if known, one line with `x_true`
    /// (`N` values). Numbers use the shortest representation that parses back
    /// to the identical `f64`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(["M", "N", "sigma2", "seed", "ensemble"])?;
        w.write_record([
            self.m().to_string(),
            self.n().to_string(),
            self.sigma2.to_string(),
            self.seed.to_string(),
            self.ensemble.to_string(),
        ])?;
        for row in self.a.row_iter() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.write_record(self.y.iter().map(|v| v.to_string()))?;
        if let Some(x) = &self.x_true {
            w.write_record(x.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .flexible(true)
            .has_headers(true)
            .from_reader(input);
        let header = r.headers()?.clone();
        let expected = ["M", "N", "sigma2", "seed", "ensemble"];
        if header.iter().map(str::trim).ne(expected.iter().copied()) {
            return Err(SblError::Parse(format!("unexpected problem header {header:?}")));
        }
        let mut records = r.records();
        let meta = records
            .next()
            .ok_or_else(|| SblError::Parse("missing problem metadata line".into()))??;
        let field = |i: usize| meta.get(i).map(str::trim).unwrap_or("");
        let parse_err = |what: &str| SblError::Parse(format!("bad {what} in problem header"));
        let m: usize = field(0).parse().map_err(|_| parse_err("M"))?;
        let n: usize = field(1).parse().map_err(|_| parse_err("N"))?;
        let sigma2: f64 = field(2).parse().map_err(|_| parse_err("sigma2"))?;
        let seed: u64 = field(3).parse().map_err(|_| parse_err("seed"))?;
        let ensemble: Ensemble = field(4).parse()?;

        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in records {
            let rec = rec?;
            let values = rec
                .iter()
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| SblError::Parse(format!("bad number in problem body: {e}")))?;
            rows.push(values);
        }
        if rows.len() != m + 1 && rows.len() != m + 2 {
            return Err(SblError::Parse(format!(
                "expected {} or {} data lines after the header, found {}",
                m + 1,
                m + 2,
                rows.len()
            )));
        }
        for (i, row) in rows.iter().take(m).enumerate() {
            if row.len() != n {
                return Err(SblError::Parse(format!("row {i} of A has {} values, expected {n}", row.len())));
            }
        }
        let a = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
        if rows[m].len() != m {
            return Err(SblError::Parse(format!("y has {} values, expected {m}", rows[m].len())));
        }
        let y = DVector::from_vec(rows[m].clone());
        let x_true = match rows.get(m + 1) {
            Some(x) if x.len() == n => Some(DVector::from_vec(x.clone())),
            Some(x) => {
                return Err(SblError::Parse(format!("x_true has {} values, expected {n}", x.len())))
            }
            None => None,
        };
        let problem = Self { a, y, x_true, sigma2, seed, ensemble };
        problem.validate()?;
        Ok(problem)
    }
}

/// `M x N` matrix with i.i.d. `N(0, 1/M)` entries, filled column by column.
pub fn gen_gaussian_ensemble(m: usize, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if m == 0 || n == 0 {
        return Err(SblError::InvalidParameter("matrix dimensions must be >= 1".into()));
    }
    let mut rng = stream_rng(seed, MATRIX_STREAM);
    let scale = 1.0 / (m as f64).sqrt();
    let mut a = DMatrix::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            let z: f64 = rng.sample(StandardNormal);
            a[(i, j)] = z * scale;
        }
    }
    Ok(a)
}

/// `M x N` matrix whose columns are independent uniform draws on the unit
/// sphere (normalized Gaussian columns).
pub fn gen_uniform_spherical(m: usize, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if m < 2 {
        return Err(SblError::InvalidParameter("the spherical ensemble needs M >= 2".into()));
    }
    let mut a = gen_gaussian_ensemble(m, n, seed)?;
    for mut col in a.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
    Ok(a)
}

/// Length-`N` signal with exactly `K` nonzeros at uniformly chosen positions
/// (partial Fisher-Yates) and standard normal amplitudes.
pub fn gen_sparse_signal(n: usize, k: usize, seed: u64) -> Result<DVector<f64>> {
    if k == 0 || k > n {
        return Err(SblError::InvalidParameter(format!("need 1 <= K <= N, got K={k}, N={n}")));
    }
    let mut rng = stream_rng(seed, SIGNAL_STREAM);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut x = DVector::zeros(n);
    for &i in &idx[..k] {
        let mut v: f64 = rng.sample(StandardNormal);
        while v == 0.0 {
            v = rng.sample(StandardNormal);
        }
        x[i] = v;
    }
    Ok(x)
}

/// `sigma^2 = (K/M) 10^(-SNR/10)`.
pub fn noise_variance_for_snr(k: usize, m: usize, snr_db: f64) -> Result<f64> {
    if k == 0 || m == 0 {
        return Err(SblError::InvalidParameter("K and M must be >= 1".into()));
    }
    if snr_db.is_nan() {
        return Err(SblError::InvalidParameter("SNR must not be NaN".into()));
    }
    Ok(k as f64 / m as f64 * 10f64.powf(-snr_db / 10.0))
}

/// Recommended threshold `tau = (M/N) sigma^2`.
pub fn default_tau(m: usize, n: usize, sigma2: f64) -> Result<f64> {
    if m > n || n == 0 {
        return Err(SblError::InvalidParameter(format!("need M <= N, got M={m}, N={n}")));
    }
    if !(sigma2 >= 0.0) {
        return Err(SblError::InvalidParameter("sigma2 must be >= 0".into()));
    }
    Ok(m as f64 / n as f64 * sigma2)
}

/// `y_clean + e` with `e ~ N(0, sigma2 I)`.
pub fn add_noise(y_clean: &DVector<f64>, sigma2: f64, seed: u64) -> Result<DVector<f64>> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(SblError::InvalidParameter("noise variance must be finite and >= 0".into()));
    }
    if sigma2 == 0.0 {
        return Ok(y_clean.clone());
    }
    let mut rng = stream_rng(seed, NOISE_STREAM);
    let sd = sigma2.sqrt();
    Ok(y_clean.map(|v| {
        let z: f64 = rng.sample(StandardNormal);
        v + sd * z
    }))
}
