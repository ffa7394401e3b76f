//! Domain types shared by the solvers and detectors.
//!
//! Change points live on the grid `{i/n}`. Internally every boundary is an
//! integer row count `i`; fractions only appear at the API boundary.

use std::fmt;

use ndarray::{Array2, ArrayView1, ShapeBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::lasso::{self, FitSettings, SegmentFit};

const GRID_EPS: f64 = 1e-9;

/// Ordered sample of `(y_i, x_i)` rows. Row order carries the change-point
/// structure.
///
/// The design is stored column-major so that a contiguous run of rows of one
/// covariate is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    x: Array2<f64>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, x: Array2<f64>) -> Result<Self> {
        let (n, p) = x.dim();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
        if n < 2 {
            return Err(Error::InvalidData(format!("need at least 2 rows, got {n}")));
        }
        if p == 0 {
            return Err(Error::InvalidData("need at least one covariate".into()));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite response at row {}", i + 1)));
        }
        if let Some(((i, j), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite covariate at row {}, column {}",
                i + 1,
                j + 1
            )));
        }
        let x = if x.t().is_standard_layout() {
            x
        } else {
            let mut fortran = Array2::zeros((n, p).f());
            fortran.assign(&x);
            fortran
        };
        Ok(Self { y, x })
    }

    /// Builds a dataset from row-major covariate rows.
    pub fn from_rows(y: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let mut x = Array2::zeros((rows.len(), p).f());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                x[(i, j)] = v;
            }
        }
        Self::new(y, x)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    /// All rows of covariate `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        let all = self
            .x
            .as_slice_memory_order()
            .expect("design is stored contiguously");
        &all[j * n..(j + 1) * n]
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }

    /// New dataset made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        let p = self.p();
        let mut x = Array2::zeros((rows.len(), p).f());
        let mut y = Vec::with_capacity(rows.len());
        for (k, &i) in rows.iter().enumerate() {
            y.push(self.y[i]);
            x.row_mut(k).assign(&self.x.row(i));
        }
        Dataset::new(y, x)
    }

    /// Subtracts the column means from every covariate and from the response.
    pub fn centered(&self) -> Dataset {
        let n = self.n() as f64;
        let y_mean = self.y.iter().sum::<f64>() / n;
        let y = self.y.iter().map(|v| v - y_mean).collect();
        let mut x = self.x.clone();
        for mut col in x.columns_mut() {
            let mean = col.sum() / n;
            col.mapv_inplace(|v| v - mean);
        }
        Dataset { y, x }
    }
}

/// Half-open run of rows `(start, end]`, i.e. the grid interval
/// `(start/n, end/n]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    start: usize,
    end: usize,
    n: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize, n: usize) -> Result<Self> {
        if start >= end || end > n {
            return Err(Error::InvalidInterval { start, end, n });
        }
        Ok(Self { start, end, n })
    }

    pub fn from_fractions(u: f64, v: f64, n: usize) -> Result<Self> {
        let start = grid_index(u, n).ok_or_else(|| off_grid(u, n))?;
        let end = grid_index(v, n).ok_or_else(|| off_grid(v, n))?;
        Self::new(start, end, n)
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of observations, `(v - u) n`.
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn u(&self) -> f64 {
        self.start as f64 / self.n as f64
    }

    pub fn v(&self) -> f64 {
        self.end as f64 / self.n as f64
    }

    /// Interval length as a fraction of the sample, `v - u`.
    pub fn width(&self) -> f64 {
        self.len() as f64 / self.n as f64
    }
}

fn off_grid(value: f64, n: usize) -> Error {
    Error::InvalidConfig(format!("{value} is not on the grid {{i/{n}}}"))
}

/// Returns `i` when `value == i/n` up to rounding.
pub fn grid_index(value: f64, n: usize) -> Option<usize> {
    let scaled = value * n as f64;
    let rounded = scaled.round();
    if (scaled - rounded).abs() <= GRID_EPS * (n as f64).max(1.0) && rounded >= 0.0 {
        Some(rounded as usize)
    } else {
        None
    }
}

/// Smallest admissible segment length in rows: the least integer `m` with
/// `m / n >= delta`.
pub fn min_segment_rows(delta: f64, n: usize) -> usize {
    ((delta * n as f64) - GRID_EPS).ceil().max(0.0) as usize
}

/// First violated invariant of a candidate change-point vector.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlphaViolation {
    #[error("needs at least two points, got {len}")]
    TooShort { len: usize },
    #[error("first point must be 0, got {value}")]
    BadStart { value: f64 },
    #[error("last point must be 1, got {value}")]
    BadEnd { value: f64 },
    #[error("point {index} ({value}) is not on the grid {{i/{n}}}")]
    OffGrid { index: usize, value: f64, n: usize },
    #[error("not increasing at index {index} ({prev} >= {value})")]
    NotIncreasing { index: usize, prev: f64, value: f64 },
    #[error("r(alpha)={spacing} < delta={delta} (segment {segment})")]
    SpacingBelowDelta {
        segment: usize,
        spacing: f64,
        delta: f64,
    },
}

/// Checks `points` against the change-point invariants on the grid of size
/// `n`, including the minimal spacing `r(alpha) >= delta`.
pub fn validate_alpha(points: &[f64], n: usize, delta: f64) -> Result<(), AlphaViolation> {
    let rows = grid_rows(points, n)?;
    let min_rows = min_segment_rows(delta, n);
    for (segment, pair) in rows.windows(2).enumerate() {
        if pair[1] - pair[0] < min_rows {
            return Err(AlphaViolation::SpacingBelowDelta {
                segment: segment + 1,
                spacing: (pair[1] - pair[0]) as f64 / n as f64,
                delta,
            });
        }
    }
    Ok(())
}

fn grid_rows(points: &[f64], n: usize) -> Result<Vec<usize>, AlphaViolation> {
    if points.len() < 2 {
        return Err(AlphaViolation::TooShort { len: points.len() });
    }
    if points[0] != 0.0 {
        return Err(AlphaViolation::BadStart { value: points[0] });
    }
    let last = points[points.len() - 1];
    if (last - 1.0).abs() > GRID_EPS {
        return Err(AlphaViolation::BadEnd { value: last });
    }
    let mut rows = Vec::with_capacity(points.len());
    for (index, &value) in points.iter().enumerate() {
        match grid_index(value, n) {
            Some(i) if i <= n => rows.push(i),
            _ => return Err(AlphaViolation::OffGrid { index, value, n }),
        }
    }
    for index in 1..rows.len() {
        if rows[index] <= rows[index - 1] {
            return Err(AlphaViolation::NotIncreasing {
                index,
                prev: points[index - 1],
                value: points[index],
            });
        }
    }
    Ok(rows)
}

/// Change-point vector `0 = alpha_0 < ... < alpha_k = 1` on the grid of size
/// `n`, held as row counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alpha {
    n: usize,
    rows: Vec<usize>,
}

impl Alpha {
    pub fn from_rows(rows: Vec<usize>, n: usize) -> Result<Self> {
        let points: Vec<f64> = rows.iter().map(|&r| r as f64 / n as f64).collect();
        if rows.len() < 2 {
            return Err(AlphaViolation::TooShort { len: rows.len() }.into());
        }
        if rows[0] != 0 {
            return Err(AlphaViolation::BadStart { value: points[0] }.into());
        }
        if rows[rows.len() - 1] != n {
            return Err(AlphaViolation::BadEnd {
                value: points[rows.len() - 1],
            }
            .into());
        }
        for index in 1..rows.len() {
            if rows[index] <= rows[index - 1] {
                return Err(AlphaViolation::NotIncreasing {
                    index,
                    prev: points[index - 1],
                    value: points[index],
                }
                .into());
            }
        }
        Ok(Self { n, rows })
    }

    /// Grid-valid vector from fractions. Does not check the delta spacing.
    pub fn from_fractions(points: &[f64], n: usize) -> Result<Self> {
        let rows = grid_rows(points, n)?;
        Ok(Self { n, rows })
    }

    pub fn single(n: usize) -> Self {
        Self { n, rows: vec![0, n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Number of segments, `l(alpha)`.
    pub fn k(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|&r| r as f64 / self.n as f64)
            .collect()
    }

    /// Internal change points `alpha_1..alpha_{k-1}` as fractions.
    pub fn change_points(&self) -> Vec<f64> {
        let f = self.fractions();
        f[1..f.len() - 1].to_vec()
    }

    /// `I_j(alpha) = (alpha_{j-1}, alpha_j]` for `j = 1..k`.
    pub fn intervals(&self) -> impl Iterator<Item = Interval> + '_ {
        self.rows.windows(2).map(move |w| Interval {
            start: w[0],
            end: w[1],
            n: self.n,
        })
    }

    /// `r(alpha)`, the smallest segment width.
    pub fn min_spacing(&self) -> f64 {
        self.intervals().map(|iv| iv.width()).fold(f64::INFINITY, f64::min)
    }

    /// Shortest segment in rows.
    pub fn min_segment_rows(&self) -> usize {
        self.intervals().map(|iv| iv.len()).min().unwrap_or(0)
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.fractions().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

pub const DEFAULT_SOLVER_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

/// Tuning parameters of the joint estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Sparsity penalty.
    pub lambda: f64,
    /// Additive penalty per segment.
    pub gamma: f64,
    /// Minimal segment width as a fraction of the sample.
    pub delta: f64,
    pub solver_tol: f64,
    pub solver_max_sweeps: usize,
}

impl DetectorConfig {
    pub fn new(lambda: f64, gamma: f64, delta: f64) -> Self {
        Self {
            lambda,
            gamma,
            delta,
            solver_tol: DEFAULT_SOLVER_TOL,
            solver_max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }

    pub fn with_solver(mut self, tol: f64, max_sweeps: usize) -> Self {
        self.solver_tol = tol;
        self.solver_max_sweeps = max_sweeps;
        self
    }

    pub fn fit_settings(&self) -> FitSettings {
        FitSettings {
            lambda: self.lambda,
            delta: self.delta,
            tol: self.solver_tol,
            max_sweeps: self.solver_max_sweeps,
        }
    }

    /// Checks the parameters against a sample of size `n` and resolves the
    /// integer segment constraints.
    pub fn validate(&self, n: usize) -> Result<SegmentGrid> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return Err(Error::InvalidConfig(format!(
                "delta must lie in (0, 0.5], got {}",
                self.delta
            )));
        }
        if !(self.solver_tol.is_finite() && self.solver_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "solver tolerance must be positive, got {}",
                self.solver_tol
            )));
        }
        if self.solver_max_sweeps == 0 {
            return Err(Error::InvalidConfig("solver_max_sweeps must be >= 1".into()));
        }
        SegmentGrid::new(n, self.delta)
    }
}

/// Integer form of the spacing constraint for one sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentGrid {
    pub n: usize,
    /// Fewest rows a segment may hold.
    pub min_len: usize,
    /// Upper bound on the number of segments.
    pub kmax: usize,
}

impl SegmentGrid {
    pub fn new(n: usize, delta: f64) -> Result<Self> {
        if (delta * n as f64 + GRID_EPS).floor() < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "floor(delta * n) must be >= 1 (delta = {delta}, n = {n})"
            )));
        }
        let min_len = min_segment_rows(delta, n).max(1);
        if min_len > n {
            return Err(Error::Infeasible(format!(
                "no segment of width >= {delta} fits in n = {n}"
            )));
        }
        let kmax = ((1.0 / delta + GRID_EPS).floor() as usize).min(n / min_len).max(1);
        Ok(Self { n, min_len, kmax })
    }
}

/// Segmentation algorithm that produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dp,
    Bs,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Dp => "dp",
            Method::Bs => "bs",
        })
    }
}

/// A change-point vector with its per-segment Lasso fits and the penalized
/// objective `G(alpha)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedModel {
    pub alpha: Alpha,
    pub fits: Vec<SegmentFit>,
    pub objective: f64,
    pub method: Method,
}

impl SegmentedModel {
    pub fn k(&self) -> usize {
        self.alpha.k()
    }

    pub fn per_segment_loss(&self) -> Vec<f64> {
        self.fits.iter().map(|f| f.loss).collect()
    }

    /// Dense coefficient vectors, one per segment.
    pub fn betas(&self) -> Vec<Vec<f64>> {
        self.fits.iter().map(|f| f.beta.to_dense()).collect()
    }

    /// `sum_j L_n(I_j, beta_j) + gamma * k` rebuilt from the stored fits.
    pub fn recompute_objective(&self, gamma: f64) -> f64 {
        penalized_sum(self.fits.iter().map(|f| f.loss), gamma)
    }
}

/// Accumulates `((acc + loss_j) + gamma)` left to right. Every objective in
/// the crate is summed in this order so that equal segmentations produce
/// bit-identical values.
pub(crate) fn penalized_sum(losses: impl IntoIterator<Item = f64>, gamma: f64) -> f64 {
    losses.into_iter().fold(0.0, |acc, loss| (acc + loss) + gamma)
}

/// `L_n(iv, beta) = ||Y_iv - X_iv beta||^2 / n`. The divisor is the full
/// sample size, not the interval length.
pub fn segment_loss(data: &Dataset, iv: Interval, beta: &[f64]) -> Result<f64> {
    check_interval(data, iv)?;
    if beta.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: beta.len(),
        });
    }
    let nonzero = beta
        .iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(j, &b)| (j, b));
    let rss = lasso::residual_sum_of_squares(data, iv, nonzero);
    Ok(rss / data.n() as f64)
}

pub(crate) fn check_interval(data: &Dataset, iv: Interval) -> Result<()> {
    if iv.n() != data.n() || iv.end() > data.n() {
        return Err(Error::InvalidInterval {
            start: iv.start(),
            end: iv.end(),
            n: data.n(),
        });
    }
    Ok(())
}

/// `G(alpha) = sum_j L_n(I_j(alpha), beta_hat_{I_j}) + gamma * l(alpha)`.
///
/// Only grid validity is required of `alpha`; segments narrower than delta
/// are allowed and fitted with the `sqrt(delta)` penalty floor.
pub fn objective_g(data: &Dataset, alpha: &Alpha, cfg: &DetectorConfig) -> Result<f64> {
    if alpha.n() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            found: alpha.n(),
        });
    }
    let settings = cfg.fit_settings();
    let losses = alpha
        .intervals()
        .map(|iv| lasso::interval_fit(data, iv, &settings).map(|fit| fit.loss))
        .collect::<Result<Vec<_>>>()?;
    Ok(penalized_sum(losses, cfg.gamma))
}
