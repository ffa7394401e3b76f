//! Exact minimization of `G(alpha)` by dynamic programming over the grid.
//!
//! `F_1(v) = L_n((0, v]) + gamma` and
//! `F_k(v) = min_u F_{k-1}(u) + L_n((u, v]) + gamma`, with every segment at
//! least `min_len` rows long. Only right endpoints that can still be followed
//! by a full segment (or that equal `n`) are tabulated.

use crate::error::{Error, Result};
use crate::model::{penalized_sum, Alpha, Dataset, DetectorConfig, Method, SegmentGrid, SegmentedModel};

use super::FitCache;

/// Filled `F_k(v)` table with argmin back-pointers.
pub(crate) struct DpTable {
    grid: SegmentGrid,
    gamma: f64,
    /// `f[k - 1][v]`, `+inf` where no feasible segmentation exists.
    f: Vec<Vec<f64>>,
    arg: Vec<Vec<usize>>,
}

impl DpTable {
    pub(crate) fn build(data: &Dataset, cfg: &DetectorConfig, cache: &mut FitCache) -> Result<Self> {
        let grid = cfg.validate(data.n())?;
        let SegmentGrid { n, min_len, kmax } = grid;

        // Right endpoints worth tabulating, ascending; `n` is always last.
        let mut ends: Vec<usize> = (min_len..=n.saturating_sub(min_len)).collect();
        ends.push(n);
        // Left endpoints: 0 plus every interior end.
        let starts: Vec<usize> = std::iter::once(0).chain(ends[..ends.len() - 1].iter().copied()).collect();

        let mut keys = Vec::new();
        let mut offsets = Vec::with_capacity(ends.len());
        for &v in &ends {
            offsets.push(keys.len());
            keys.extend(starts.iter().copied().take_while(|&u| u + min_len <= v).map(|u| (u, v)));
        }
        let losses = cache.losses(data, &cfg.fit_settings(), &keys)?;

        let gamma = cfg.gamma;
        let mut f = vec![vec![f64::INFINITY; n + 1]; kmax];
        let mut arg = vec![vec![usize::MAX; n + 1]; kmax];
        for (e, &v) in ends.iter().enumerate() {
            // First key for each end has u = 0.
            f[0][v] = penalized_sum([losses[offsets[e]]], gamma);
            arg[0][v] = 0;
        }
        for k in 1..kmax {
            for (e, &v) in ends.iter().enumerate() {
                let count = if e + 1 < ends.len() { offsets[e + 1] } else { keys.len() } - offsets[e];
                let mut best = f64::INFINITY;
                let mut best_u = usize::MAX;
                for i in 1..count {
                    let u = keys[offsets[e] + i].0;
                    let prev = f[k - 1][u];
                    if prev.is_infinite() {
                        continue;
                    }
                    let value = (prev + losses[offsets[e] + i]) + gamma;
                    if value < best {
                        best = value;
                        best_u = u;
                    }
                }
                f[k][v] = best;
                arg[k][v] = best_u;
            }
        }
        Ok(Self { grid, gamma, f, arg })
    }

    pub(crate) fn kmax(&self) -> usize {
        self.grid.kmax
    }

    /// `F_k(1)`.
    pub(crate) fn value(&self, k: usize) -> f64 {
        self.f[k - 1][self.grid.n]
    }

    /// Smallest `k` attaining `min_k F_k(1)`.
    pub(crate) fn best_k(&self) -> usize {
        let mut best = 1;
        for k in 2..=self.kmax() {
            if self.value(k) < self.value(best) {
                best = k;
            }
        }
        best
    }

    pub(crate) fn backtrack(&self, k: usize) -> Option<Alpha> {
        if k == 0 || k > self.kmax() || self.value(k).is_infinite() {
            return None;
        }
        let n = self.grid.n;
        let mut rows = vec![n];
        let mut v = n;
        for level in (1..k).rev() {
            v = self.arg[level][v];
            rows.push(v);
        }
        rows.push(0);
        rows.reverse();
        Alpha::from_rows(rows, n).ok()
    }

    pub(crate) fn gamma(&self) -> f64 {
        self.gamma
    }
}

pub(crate) fn assemble(
    data: &Dataset,
    cfg: &DetectorConfig,
    cache: &mut FitCache,
    alpha: Alpha,
    method: Method,
) -> Result<SegmentedModel> {
    let settings = cfg.fit_settings();
    let fits = alpha
        .intervals()
        .map(|iv| cache.fit(data, &settings, (iv.start(), iv.end())))
        .collect::<Result<Vec<_>>>()?;
    let objective = penalized_sum(fits.iter().map(|f| f.loss), cfg.gamma);
    Ok(SegmentedModel {
        alpha,
        fits,
        objective,
        method,
    })
}

/// Global minimizer of `G(alpha)` over grid vectors with `r(alpha) >= delta`
/// and at most `kmax` segments. Ties go to the smallest `k`, then the
/// smallest change points from the right.
pub fn dp_detect(data: &Dataset, cfg: &DetectorConfig) -> Result<SegmentedModel> {
    dp_detect_cached(data, cfg, &mut FitCache::new())
}

pub fn dp_detect_cached(data: &Dataset, cfg: &DetectorConfig, cache: &mut FitCache) -> Result<SegmentedModel> {
    let table = DpTable::build(data, cfg, cache)?;
    let k = table.best_k();
    let alpha = table
        .backtrack(k)
        .ok_or_else(|| Error::Infeasible("no segmentation satisfies the spacing constraint".into()))?;
    let model = assemble(data, cfg, cache, alpha, Method::Dp)?;
    debug_assert_eq!(model.objective.to_bits(), table.value(k).to_bits());
    Ok(model)
}

/// Best segmentation with exactly `k` segments. The reported objective is
/// `sum_j L_n + gamma * k` with the configured `gamma`; use `gamma = 0` for
/// the plain residual loss.
pub fn dp_fixed_k(data: &Dataset, cfg: &DetectorConfig, k: usize) -> Result<SegmentedModel> {
    dp_fixed_k_cached(data, cfg, k, &mut FitCache::new())
}

pub fn dp_fixed_k_cached(
    data: &Dataset,
    cfg: &DetectorConfig,
    k: usize,
    cache: &mut FitCache,
) -> Result<SegmentedModel> {
    let grid = cfg.validate(data.n())?;
    if k == 0 || k > grid.kmax || k * grid.min_len > grid.n {
        return Err(Error::Infeasible(format!(
            "k = {k} is infeasible (kmax = {}, min segment = {} rows, n = {})",
            grid.kmax, grid.min_len, grid.n
        )));
    }
    let table = DpTable::build(data, cfg, cache)?;
    let alpha = table
        .backtrack(k)
        .ok_or_else(|| Error::Infeasible(format!("no segmentation with k = {k}")))?;
    assemble(data, cfg, cache, alpha, Method::Dp)
}

/// Optimal segmentation for every `k = 1..=kmax` from a single table;
/// `None` where `k` is infeasible.
pub fn dp_all_k(data: &Dataset, cfg: &DetectorConfig, cache: &mut FitCache) -> Result<Vec<Option<SegmentedModel>>> {
    let table = DpTable::build(data, cfg, cache)?;
    debug_assert_eq!(table.gamma(), cfg.gamma);
    (1..=table.kmax())
        .map(|k| match table.backtrack(k) {
            Some(alpha) => assemble(data, cfg, cache, alpha, Method::Dp).map(Some),
            None => Ok(None),
        })
        .collect()
}
