//! Lasso fits on sub-intervals of the sample.
//!
//! For rows `(u, v]` the fitted coefficient minimizes
//!
//! ```text
//! ||Y_(u,v] - X_(u,v] b||^2 / ((v - u) n) + lambda / sqrt(max(v - u, delta)) * ||b||_1
//! ```
//!
//! The solver is cyclic coordinate descent with covariance updates over a
//! working set. Columns enter the working set when they violate the KKT
//! conditions at the current iterate; a solve ends only once the full
//! gradient, recomputed from an exact residual, satisfies them.

use ndarray::{Array2, ArrayView1, ArrayView2, ShapeBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_interval, Dataset, Interval, DEFAULT_MAX_SWEEPS, DEFAULT_SOLVER_TOL};

/// Sparse coefficient vector of dimension `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    p: usize,
    entries: Vec<(usize, f64)>,
}

impl Coefficients {
    pub fn zeros(p: usize) -> Self {
        Self {
            p,
            entries: Vec::new(),
        }
    }

    pub fn from_dense(beta: &[f64]) -> Self {
        let entries = beta
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, &b)| (j, b))
            .collect();
        Self {
            p: beta.len(),
            entries,
        }
    }

    /// Builds from `(index, value)` pairs; zero values are dropped.
    pub fn from_entries(p: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.retain(|(_, v)| *v != 0.0);
        entries.sort_by_key(|(j, _)| *j);
        if let Some(&(j, _)) = entries.iter().find(|(j, _)| *j >= p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: j + 1,
            });
        }
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidData("duplicate coefficient index".into()));
        }
        Ok(Self { p, entries })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    /// Nonzero `(index, value)` pairs in increasing index order.
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn support(&self) -> Vec<usize> {
        self.entries.iter().map(|(j, _)| *j).collect()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        for &(j, v) in &self.entries {
            out[j] = v;
        }
        out
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v.abs()).sum()
    }

    /// `x^T beta` for one covariate row.
    pub fn dot_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        self.entries.iter().fold(0.0, |acc, &(j, v)| acc + row[j] * v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Convergence tolerance on coordinate changes and on the scaled KKT
    /// residual.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_SOLVER_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

/// Output of [`lasso_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub beta: Vec<f64>,
    /// `X^T (y - X beta)` at the returned iterate.
    pub gradient: Vec<f64>,
    /// `||y - X beta||^2`.
    pub rss: f64,
    /// Largest per-coordinate KKT residual on the `2 X^T r / normalizer`
    /// scale.
    pub stationarity: f64,
    pub sweeps: usize,
    /// False when `max_sweeps` ran out; `beta` is then the last iterate.
    pub converged: bool,
    /// Set for unpenalized problems with more columns than rows.
    pub non_unique: bool,
    /// All-zero columns; their coefficients are pinned to zero.
    pub pinned: Vec<usize>,
}

/// Minimizes `||y - X b||^2 / normalizer + weight * ||b||_1`.
///
/// `normalizer` is `(v - u) n`, the number of rows in the block, when called
/// for an interval fit. A warm start only changes the path taken, the result
/// still satisfies the KKT conditions to `opts.tol`.
pub fn lasso_solve(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    weight: f64,
    normalizer: f64,
    opts: &SolverOptions,
    warm_start: Option<&[f64]>,
) -> Result<LassoSolution> {
    let (m, p) = x.dim();
    if m == 0 {
        return Err(Error::InvalidData("empty block".into()));
    }
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: y.len(),
        });
    }
    if !(weight.is_finite() && weight >= 0.0) {
        return Err(Error::InvalidConfig(format!("weight must be >= 0, got {weight}")));
    }
    if !(normalizer.is_finite() && normalizer > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "normalizer must be > 0, got {normalizer}"
        )));
    }
    if let Some(w) = warm_start {
        if w.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: w.len(),
            });
        }
    }
    let owned;
    let x = if (0..p).all(|j| x.column(j).as_slice().is_some()) {
        x
    } else {
        let mut f = Array2::zeros((m, p).f());
        f.assign(&x);
        owned = f;
        owned.view()
    };
    let cols: Vec<&[f64]> = (0..p)
        .map(|j| x.column(j).to_slice().expect("column-major block"))
        .collect();
    let y = y.to_vec();
    Ok(solve_columns(&cols, &y, weight, normalizer, opts, warm_start))
}

const MIN_WORKING_SET_GROWTH: usize = 32;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (xa, xb) in ca.zip(cb) {
        acc[0] += xa[0] * xb[0];
        acc[1] += xa[1] * xb[1];
        acc[2] += xa[2] * xb[2];
        acc[3] += xa[3] * xb[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y - sum_j b_j x_j` over the given nonzero coefficients, in the order
/// supplied.
fn residual<'a>(cols: impl Fn(usize) -> &'a [f64], y: &[f64], nonzero: impl Iterator<Item = (usize, f64)>) -> Vec<f64> {
    let mut r = y.to_vec();
    for (j, b) in nonzero {
        for (ri, xi) in r.iter_mut().zip(cols(j)) {
            *ri -= b * xi;
        }
    }
    r
}

pub(crate) fn residual_sum_of_squares(
    data: &Dataset,
    iv: Interval,
    nonzero: impl Iterator<Item = (usize, f64)>,
) -> f64 {
    let (s, e) = (iv.start(), iv.end());
    let r = residual(|j| &data.column(j)[s..e], &data.y()[s..e], nonzero);
    dot(&r, &r)
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// KKT residual of one coordinate; `g` is `x_j^T r`.
fn coordinate_stationarity(g: f64, b: f64, weight: f64, scale: f64) -> f64 {
    let s = scale * g;
    if b > 0.0 {
        (s - weight).abs()
    } else if b < 0.0 {
        (s + weight).abs()
    } else {
        (s.abs() - weight).max(0.0)
    }
}

fn solve_columns(
    cols: &[&[f64]],
    y: &[f64],
    weight: f64,
    normalizer: f64,
    opts: &SolverOptions,
    warm_start: Option<&[f64]>,
) -> LassoSolution {
    let p = cols.len();
    let m = y.len();
    let scale = 2.0 / normalizer;
    let thresh = 0.5 * weight * normalizer;

    let sq_norms: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
    let xty: Vec<f64> = cols.iter().map(|c| dot(c, y)).collect();
    let xty_inf = xty.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let kkt_tol = opts.tol * 1.0f64.max(xty_inf / normalizer);
    let pinned: Vec<usize> = (0..p).filter(|&j| sq_norms[j] == 0.0).collect();

    let mut beta = match warm_start {
        Some(w) => w.to_vec(),
        None => vec![0.0; p],
    };
    for &j in &pinned {
        beta[j] = 0.0;
    }

    let mut active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
    let mut in_active = vec![false; p];
    for &j in &active {
        in_active[j] = true;
    }
    // gram[a][b] = x_{active[a]} . x_{active[b]}
    let mut gram: Vec<Vec<f64>> = Vec::new();
    extend_gram(cols, &active, 0, &mut gram);

    let refresh = |beta: &[f64], active: &[usize]| -> (Vec<f64>, Vec<f64>) {
        let mut support: Vec<usize> = active.iter().copied().filter(|&j| beta[j] != 0.0).collect();
        support.sort_unstable();
        let r = residual(|j| cols[j], y, support.iter().map(|&j| (j, beta[j])));
        let g = cols.iter().map(|c| dot(c, &r)).collect();
        (r, g)
    };

    let (mut r, mut grad) = if active.is_empty() {
        (y.to_vec(), xty.clone())
    } else {
        refresh(&beta, &active)
    };

    let yty = dot(y, y);
    let mut sweeps = 0usize;
    let mut converged = false;
    let mut stationarity;

    'outer: loop {
        stationarity = (0..p)
            .map(|j| coordinate_stationarity(grad[j], beta[j], weight, scale))
            .fold(0.0f64, f64::max);
        if stationarity <= kkt_tol {
            converged = true;
            break;
        }

        // Strongest violators first; the working set at most doubles per round.
        let before = active.len();
        let mut violators: Vec<usize> = (0..p)
            .filter(|&j| !in_active[j] && sq_norms[j] > 0.0 && grad[j].abs() > thresh)
            .collect();
        violators.sort_by(|&a, &b| grad[b].abs().total_cmp(&grad[a].abs()).then(a.cmp(&b)));
        violators.truncate(before.max(MIN_WORKING_SET_GROWTH));
        for j in violators {
            in_active[j] = true;
            active.push(j);
        }
        extend_gram(cols, &active, before, &mut gram);

        let mut g_act: Vec<f64> = active.iter().map(|&j| grad[j]).collect();
        let mut objective = debug_objective(yty, &xty, &gram, &active, &beta, weight, normalizer);
        loop {
            if sweeps >= opts.max_sweeps {
                break 'outer;
            }
            sweeps += 1;
            let mut max_delta = 0.0f64;
            for a in 0..active.len() {
                let j = active[a];
                let q = sq_norms[j];
                let old = beta[j];
                let new = soft_threshold(g_act[a] + q * old, thresh) / q;
                let d = new - old;
                if d != 0.0 {
                    beta[j] = new;
                    for (g, gjk) in g_act.iter_mut().zip(&gram[a]) {
                        *g -= gjk * d;
                    }
                    max_delta = max_delta.max(d.abs());
                }
            }
            if cfg!(debug_assertions) {
                let next = debug_objective(yty, &xty, &gram, &active, &beta, weight, normalizer);
                let slack = 1e-9 * (1.0 + yty / normalizer);
                debug_assert!(
                    next <= objective + slack,
                    "coordinate sweep increased the objective: {objective} -> {next}"
                );
                objective = next;
            }
            let inner = active
                .iter()
                .zip(&g_act)
                .map(|(&j, &g)| coordinate_stationarity(g, beta[j], weight, scale))
                .fold(0.0f64, f64::max);
            if max_delta == 0.0 || (max_delta < opts.tol && inner <= 0.5 * kkt_tol) {
                break;
            }
        }
        (r, grad) = refresh(&beta, &active);
    }

    if !converged {
        (r, grad) = refresh(&beta, &active);
        stationarity = (0..p)
            .map(|j| coordinate_stationarity(grad[j], beta[j], weight, scale))
            .fold(0.0f64, f64::max);
    }

    LassoSolution {
        rss: dot(&r, &r),
        beta,
        gradient: grad,
        stationarity,
        sweeps,
        converged,
        non_unique: weight == 0.0 && p > m,
        pinned,
    }
}

fn extend_gram(cols: &[&[f64]], active: &[usize], before: usize, gram: &mut Vec<Vec<f64>>) {
    for a in 0..before {
        let ca = cols[active[a]];
        for &k in &active[before..] {
            gram[a].push(dot(ca, cols[k]));
        }
    }
    for a in before..active.len() {
        let ca = cols[active[a]];
        gram.push(active.iter().map(|&k| dot(ca, cols[k])).collect());
    }
}

/// Objective restricted to the working set; coefficients outside it are
/// zero. Only evaluated when debug assertions are on.
fn debug_objective(
    yty: f64,
    xty: &[f64],
    gram: &[Vec<f64>],
    active: &[usize],
    beta: &[f64],
    weight: f64,
    normalizer: f64,
) -> f64 {
    if !cfg!(debug_assertions) {
        return 0.0;
    }
    let mut quad = 0.0;
    let mut lin = 0.0;
    let mut l1 = 0.0;
    for (a, &j) in active.iter().enumerate() {
        lin += beta[j] * xty[j];
        l1 += beta[j].abs();
        for (b, &k) in active.iter().enumerate() {
            quad += beta[j] * gram[a][b] * beta[k];
        }
    }
    (yty - 2.0 * lin + quad) / normalizer + weight * l1
}

/// Solver settings for interval fits. Two fits with equal settings on the
/// same data are bit-identical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub lambda: f64,
    pub delta: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl FitSettings {
    pub fn new(lambda: f64, delta: f64) -> Self {
        Self {
            lambda,
            delta,
            tol: DEFAULT_SOLVER_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::InvalidConfig(format!("delta must be > 0, got {}", self.delta)));
        }
        if !(self.tol > 0.0) || self.max_sweeps == 0 {
            return Err(Error::InvalidConfig("solver tolerance and sweep budget must be positive".into()));
        }
        Ok(())
    }
}

/// `lambda / sqrt(max(v - u, delta))`.
pub fn penalty_scale(lambda: f64, width: f64, delta: f64) -> f64 {
    lambda / width.max(delta).sqrt()
}

/// One interval's Lasso solution and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFit {
    pub interval: Interval,
    pub beta: Coefficients,
    /// `L_n(iv, beta)`, divided by the full sample size.
    pub loss: f64,
    pub penalty_scale: f64,
    pub kkt_gap: f64,
    pub sweeps_used: usize,
    pub non_unique: bool,
    pub pinned: Vec<usize>,
}

/// Lasso fit on `iv` with penalty scale `lambda / sqrt(max(v - u, delta))`.
pub fn interval_fit(data: &Dataset, iv: Interval, settings: &FitSettings) -> Result<SegmentFit> {
    check_interval(data, iv)?;
    settings.validate()?;
    let (s, e) = (iv.start(), iv.end());
    let cols: Vec<&[f64]> = (0..data.p()).map(|j| &data.column(j)[s..e]).collect();
    let weight = penalty_scale(settings.lambda, iv.width(), settings.delta);
    let opts = SolverOptions {
        tol: settings.tol,
        max_sweeps: settings.max_sweeps,
    };
    let sol = solve_columns(&cols, &data.y()[s..e], weight, iv.len() as f64, &opts, None);
    if !sol.converged {
        return Err(Error::NotConverged {
            start: s,
            end: e,
            sweeps: sol.sweeps,
            stationarity: sol.stationarity,
        });
    }
    let n = data.n() as f64;
    Ok(SegmentFit {
        interval: iv,
        kkt_gap: gap_from_gradient(&sol.gradient, iv, settings.lambda, settings.delta),
        beta: Coefficients::from_dense(&sol.beta),
        loss: sol.rss / n,
        penalty_scale: weight,
        sweeps_used: sol.sweeps,
        non_unique: sol.non_unique,
        pinned: sol.pinned,
    })
}

fn gap_from_gradient(gradient: &[f64], iv: Interval, lambda: f64, delta: f64) -> f64 {
    let n = iv.n() as f64;
    let width = iv.width();
    let bound = lambda * width / width.max(delta).sqrt();
    gradient
        .iter()
        .map(|g| (2.0 * g.abs() / n - bound).max(0.0))
        .fold(0.0, f64::max)
}

/// Excess of `||2 X_iv^T (Y_iv - X_iv beta) / n||_inf` over
/// `lambda (v - u) / sqrt(max(v - u, delta))`. Zero certifies that `beta`
/// satisfies the Lasso stationarity bound on `iv`.
pub fn kkt_gap(data: &Dataset, iv: Interval, beta: &[f64], lambda: f64, delta: f64) -> Result<f64> {
    check_interval(data, iv)?;
    if beta.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: beta.len(),
        });
    }
    let (s, e) = (iv.start(), iv.end());
    let nonzero = beta.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(j, &b)| (j, b));
    let r = residual(|j| &data.column(j)[s..e], &data.y()[s..e], nonzero);
    let gradient: Vec<f64> = (0..data.p()).map(|j| dot(&data.column(j)[s..e], &r)).collect();
    Ok(gap_from_gradient(&gradient, iv, lambda, delta))
}
