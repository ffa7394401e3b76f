//! Binary segmentation: split each node at its best single change point
//! until no split lowers `H(u, s) + H(s, v)` below `H(u, v)`.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Alpha, Dataset, DetectorConfig, Method, SegmentedModel};

use super::dp::assemble;
use super::FitCache;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BsNode {
    /// Rows `(start, end]`.
    pub start: usize,
    pub end: usize,
    pub parent: Option<usize>,
    pub children: Option<(usize, usize)>,
}

impl BsNode {
    pub fn is_terminal(&self) -> bool {
        self.children.is_none()
    }
}

/// Splitting tree; node 0 is the root `(0, n]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BsTree {
    pub n: usize,
    pub nodes: Vec<BsNode>,
}

impl BsTree {
    /// Terminal intervals ordered left to right.
    pub fn terminals(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<_> = self
            .nodes
            .iter()
            .filter(|n| n.is_terminal())
            .map(|n| (n.start, n.end))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn alpha(&self) -> Result<Alpha> {
        let mut rows = vec![0];
        rows.extend(self.terminals().into_iter().map(|(_, e)| e));
        Alpha::from_rows(rows, self.n)
    }
}

/// `H(u, v) = L_n((u, v], beta_hat) + gamma` for a nonempty interval, else 0.
/// Arguments are grid rows.
pub fn h_cost(data: &Dataset, start: usize, end: usize, cfg: &DetectorConfig, cache: &mut FitCache) -> Result<f64> {
    if end < start || end > data.n() {
        return Err(Error::InvalidInterval {
            start,
            end,
            n: data.n(),
        });
    }
    if end == start {
        return Ok(0.0);
    }
    let loss = cache.losses(data, &cfg.fit_settings(), &[(start, end)])?[0];
    Ok(loss + cfg.gamma)
}

/// Minimizer of `H(u, s) + H(s, v)` over `s` in `{u}` and the grid rows of
/// `[u + delta, v - delta]`. Returns `start` when no split is strictly
/// worth less than leaving the interval whole; among splits the smallest
/// row wins ties.
pub fn best_split(data: &Dataset, start: usize, end: usize, cfg: &DetectorConfig, cache: &mut FitCache) -> Result<usize> {
    let grid = cfg.validate(data.n())?;
    if end <= start || end > data.n() {
        return Err(Error::InvalidInterval {
            start,
            end,
            n: data.n(),
        });
    }
    let lo = start + grid.min_len;
    let hi = end.saturating_sub(grid.min_len);
    if lo > hi {
        return Ok(start);
    }
    let mut keys = vec![(start, end)];
    for s in lo..=hi {
        keys.push((start, s));
        keys.push((s, end));
    }
    let losses = cache.losses(data, &cfg.fit_settings(), &keys)?;
    let gamma = cfg.gamma;
    let whole = losses[0] + gamma;

    let mut best = f64::INFINITY;
    let mut best_s = start;
    for (i, s) in (lo..=hi).enumerate() {
        let value = (losses[1 + 2 * i] + gamma) + (losses[2 + 2 * i] + gamma);
        if value < best {
            best = value;
            best_s = s;
        }
    }
    Ok(if whole < best { start } else { best_s })
}

/// Grows the binary segmentation tree breadth-first.
pub fn bs_tree(data: &Dataset, cfg: &DetectorConfig, cache: &mut FitCache) -> Result<BsTree> {
    cfg.validate(data.n())?;
    let n = data.n();
    let mut nodes = vec![BsNode {
        start: 0,
        end: n,
        parent: None,
        children: None,
    }];
    let mut queue = VecDeque::from([0usize]);
    while let Some(id) = queue.pop_front() {
        let (start, end) = (nodes[id].start, nodes[id].end);
        let s = best_split(data, start, end, cfg, cache)?;
        if s > start {
            let left = nodes.len();
            nodes.push(BsNode {
                start,
                end: s,
                parent: Some(id),
                children: None,
            });
            nodes.push(BsNode {
                start: s,
                end,
                parent: Some(id),
                children: None,
            });
            nodes[id].children = Some((left, left + 1));
            queue.push_back(left);
            queue.push_back(left + 1);
        }
    }
    Ok(BsTree { n, nodes })
}

/// Binary-segmentation approximation of the global estimator, refit on the
/// terminal intervals. Its objective is never below that of [`super::dp_detect`].
pub fn bs_detect(data: &Dataset, cfg: &DetectorConfig) -> Result<SegmentedModel> {
    bs_detect_cached(data, cfg, &mut FitCache::new()).map(|(model, _)| model)
}

pub fn bs_detect_cached(data: &Dataset, cfg: &DetectorConfig, cache: &mut FitCache) -> Result<(SegmentedModel, BsTree)> {
    let tree = bs_tree(data, cfg, cache)?;
    let alpha = tree.alpha()?;
    let model = assemble(data, cfg, cache, alpha, Method::Bs)?;
    Ok((model, tree))
}
