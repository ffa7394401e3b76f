//! Synthetic data from a piecewise-constant linear model.
//!
//! Covariate rows are i.i.d. `N(0, Sigma)`, drawn as `L z` with `L` the
//! Cholesky factor of `Sigma` and `z` standard normal. Responses are
//! `y_i = x_i^T beta0(j) + sigma * eps_i` where `j` is the true segment of
//! row `i`.
//!
//! Randomness comes from ChaCha20 seeded with `seed_from_u64(seed)`: stream
//! 0 feeds the covariates (row by row, `p` draws per row) and stream 1 the
//! noise. Normals use the ziggurat sampler of `rand_distr::StandardNormal`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ShapeBuilder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Alpha, Dataset, Interval};

pub const COVARIATE_STREAM: u64 = 0;
pub const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CovarianceSpec {
    /// `Sigma_ij = 1{i = j}`.
    Identity,
    /// `Sigma_ij = rho^|i - j|`.
    Toeplitz { rho: f64 },
    /// `Sigma_ij = 1 - c * 1{i != j}`.
    Equicorr { c: f64 },
}

impl CovarianceSpec {
    fn validate(&self) -> Result<()> {
        match *self {
            CovarianceSpec::Identity => Ok(()),
            CovarianceSpec::Toeplitz { rho } if rho.abs() < 1.0 => Ok(()),
            CovarianceSpec::Toeplitz { rho } => Err(Error::InvalidConfig(format!(
                "toeplitz parameter must satisfy |rho| < 1, got {rho}"
            ))),
            CovarianceSpec::Equicorr { c } if (0.0..1.0).contains(&c) => Ok(()),
            CovarianceSpec::Equicorr { c } => Err(Error::InvalidConfig(format!(
                "equicorrelation parameter must satisfy 0 <= c < 1, got {c}"
            ))),
        }
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        match *self {
            CovarianceSpec::Identity => f64::from(u8::from(i == j)),
            CovarianceSpec::Toeplitz { rho } => rho.powi(i.abs_diff(j) as i32),
            CovarianceSpec::Equicorr { c } => {
                if i == j {
                    1.0
                } else {
                    1.0 - c
                }
            }
        }
    }
}

impl fmt::Display for CovarianceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovarianceSpec::Identity => write!(f, "identity"),
            CovarianceSpec::Toeplitz { rho } => write!(f, "toeplitz:{rho}"),
            CovarianceSpec::Equicorr { c } => write!(f, "equicorr:{c}"),
        }
    }
}

impl FromStr for CovarianceSpec {
    type Err = Error;

    /// `identity`, `toeplitz:<rho>` or `equicorr:<c>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, param) = match s.split_once(':') {
            Some((k, v)) => (k, Some(v)),
            None => (s, None),
        };
        let value = |name: &str| -> Result<f64> {
            param
                .ok_or_else(|| Error::InvalidConfig(format!("{name} needs a parameter, e.g. {name}:0.8")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("bad {name} parameter: {e}")))
        };
        let spec = match kind.trim() {
            "identity" if param.is_none() => CovarianceSpec::Identity,
            "toeplitz" => CovarianceSpec::Toeplitz { rho: value("toeplitz")? },
            "equicorr" => CovarianceSpec::Equicorr { c: value("equicorr")? },
            other => return Err(Error::InvalidConfig(format!("unknown covariance spec '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn covariance_matrix(spec: &CovarianceSpec, p: usize) -> Result<Array2<f64>> {
    if p == 0 {
        return Err(Error::InvalidConfig("p must be >= 1".into()));
    }
    spec.validate()?;
    Ok(Array2::from_shape_fn((p, p), |(i, j)| spec.entry(i, j)))
}

/// Lower-triangular `L` with `L L^T = a`. Fails on the first leading minor
/// (1-based) that is not positive.
pub fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let p = a.nrows();
    if a.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: a.ncols(),
        });
    }
    let mut l = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { minor: j + 1 });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..p {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// True change fractions, per-segment coefficients, design covariance and
/// noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthModel {
    pub alpha0: Vec<f64>,
    pub betas0: Vec<Vec<f64>>,
    pub cov: CovarianceSpec,
    pub sigma: f64,
    pub p: usize,
}

impl GroundTruthModel {
    pub fn new(alpha0: Vec<f64>, betas0: Vec<Vec<f64>>, cov: CovarianceSpec, sigma: f64) -> Result<Self> {
        let p = betas0.first().map_or(0, Vec::len);
        let model = Self {
            alpha0,
            betas0,
            cov,
            sigma,
            p,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.alpha0;
        if a.len() < 2 || a[0] != 0.0 || a[a.len() - 1] != 1.0 || a.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(format!(
                "alpha0 must satisfy 0 = a_0 < ... < a_k = 1, got {a:?}"
            )));
        }
        if self.betas0.len() != a.len() - 1 {
            return Err(Error::InvalidConfig(format!(
                "{} segments need {} coefficient vectors, got {}",
                a.len() - 1,
                a.len() - 1,
                self.betas0.len()
            )));
        }
        if self.p == 0 {
            return Err(Error::InvalidConfig("p must be >= 1".into()));
        }
        if let Some(b) = self.betas0.iter().find(|b| b.len() != self.p) {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: b.len(),
            });
        }
        if self.betas0.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("coefficients must be finite".into()));
        }
        for (j, pair) in self.betas0.windows(2).enumerate() {
            let diff: f64 = pair[0].iter().zip(&pair[1]).map(|(x, y)| (x - y).abs()).sum();
            if diff == 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "segments {} and {} share the same coefficients",
                    j + 1,
                    j + 2
                )));
            }
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        self.cov.validate()
    }

    /// `alpha0 = (0, 0.5, 1)`, `beta0(1) = (1, 1, 0, ..., 0)`,
    /// `beta0(2) = (0, ..., 0, 1, 1)`.
    pub fn two_segment(p: usize, cov: CovarianceSpec, sigma: f64) -> Result<Self> {
        let (first, second) = canonical_betas(p)?;
        Self::new(vec![0.0, 0.5, 1.0], vec![first, second], cov, sigma)
    }

    /// `alpha0 = (0, 0.3, 0.7, 1)` with `beta0(3) = beta0(1)`.
    pub fn three_segment(p: usize, cov: CovarianceSpec, sigma: f64) -> Result<Self> {
        let (first, second) = canonical_betas(p)?;
        Self::new(vec![0.0, 0.3, 0.7, 1.0], vec![first.clone(), second, first], cov, sigma)
    }

    pub fn k0(&self) -> usize {
        self.betas0.len()
    }

    /// True change points on the grid of size `n`, rounded to the nearest
    /// grid row (halves away from zero).
    pub fn alpha_on_grid(&self, n: usize) -> Result<Alpha> {
        let rows: Vec<usize> = self.alpha0.iter().map(|a| (a * n as f64).round() as usize).collect();
        Alpha::from_rows(rows, n).map_err(|_| {
            Error::InvalidConfig(format!(
                "n = {n} is too small to separate the {} true segments",
                self.k0()
            ))
        })
    }
}

fn canonical_betas(p: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if p < 3 {
        return Err(Error::InvalidConfig(format!(
            "the canned models need p >= 3 so that segments differ, got {p}"
        )));
    }
    let mut first = vec![0.0; p];
    first[0] = 1.0;
    first[1] = 1.0;
    let mut second = vec![0.0; p];
    second[p - 2] = 1.0;
    second[p - 1] = 1.0;
    Ok((first, second))
}

/// Draws `n` rows from `truth`. Identical `(truth, n, seed)` give a
/// bit-identical dataset.
pub fn sample_dataset(truth: &GroundTruthModel, n: usize, seed: u64) -> Result<Dataset> {
    truth.validate()?;
    let alpha = truth.alpha_on_grid(n)?;
    let p = truth.p;
    let sigma_matrix = covariance_matrix(&truth.cov, p)?;
    let factor = match truth.cov {
        CovarianceSpec::Identity => None,
        _ => Some(cholesky(&sigma_matrix)?),
    };

    let mut x_rng = ChaCha20Rng::seed_from_u64(seed);
    x_rng.set_stream(COVARIATE_STREAM);
    let mut eps_rng = ChaCha20Rng::seed_from_u64(seed);
    eps_rng.set_stream(NOISE_STREAM);

    let sparse: Vec<Vec<(usize, f64)>> = truth
        .betas0
        .iter()
        .map(|b| b.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect())
        .collect();

    let mut x = Array2::<f64>::zeros((n, p).f());
    let mut y = Vec::with_capacity(n);
    let mut z = vec![0.0; p];
    let mut row = vec![0.0; p];
    let mut segment = 0;
    for i in 0..n {
        while i + 1 > alpha.rows()[segment + 1] {
            segment += 1;
        }
        for v in z.iter_mut() {
            *v = x_rng.sample(StandardNormal);
        }
        match &factor {
            None => row.copy_from_slice(&z),
            Some(l) => {
                for (j, out) in row.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for k in 0..=j {
                        acc += l[(j, k)] * z[k];
                    }
                    *out = acc;
                }
            }
        }
        for (j, &v) in row.iter().enumerate() {
            x[(i, j)] = v;
        }
        let signal = sparse[segment].iter().fold(0.0, |acc, &(j, b)| acc + row[j] * b);
        let eps: f64 = eps_rng.sample(StandardNormal);
        y.push(signal + truth.sigma * eps);
    }
    Dataset::new(y, x)
}

/// Overlap weights `|(u, v] ∩ (a_{j-1}, a_j]| / (v - u)` of an interval with
/// each true segment.
pub fn overlap_weights(truth: &GroundTruthModel, u: f64, v: f64) -> Vec<f64> {
    let width = v - u;
    truth
        .alpha0
        .windows(2)
        .map(|w| (v.min(w[1]) - u.max(w[0])).max(0.0) / width)
        .collect()
}

/// Population-best coefficient on `iv`: the overlap-weighted convex
/// combination of the true segment coefficients.
pub fn oracle_beta_star(truth: &GroundTruthModel, iv: Interval) -> Vec<f64> {
    let weights = overlap_weights(truth, iv.u(), iv.v());
    let mut out = vec![0.0; truth.p];
    for (w, beta) in weights.iter().zip(&truth.betas0) {
        for (o, b) in out.iter_mut().zip(beta) {
            *o += w * b;
        }
    }
    out
}
