use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lasso::{interval_fit, FitSettings, SegmentFit};
use crate::model::{Dataset, Interval};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub hits: u64,
    /// Number of Lasso solves performed.
    pub misses: u64,
    pub entries: usize,
}

/// Memoized interval fits keyed by row pair `(start, end)`.
///
/// A cache belongs to one dataset and one set of [`FitSettings`]; it records
/// the settings on first use and rejects requests made with others. A
/// disabled cache computes every request afresh, which yields the same
/// values since fits are deterministic.
#[derive(Debug, Clone)]
pub struct FitCache {
    enabled: bool,
    settings: Option<FitSettings>,
    entries: HashMap<(usize, usize), SegmentFit>,
    hits: u64,
    misses: u64,
}

impl Default for FitCache {
    fn default() -> Self {
        Self::new()
    }
}

impl FitCache {
    pub fn new() -> Self {
        Self {
            enabled: true,
            settings: None,
            entries: HashMap::new(),
            hits: 0,
            misses: 0,
        }
    }

    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::new()
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits,
            misses: self.misses,
            entries: self.entries.len(),
        }
    }

    /// Stored fits in increasing `(start, end)` order.
    pub fn fits(&self) -> Vec<&SegmentFit> {
        let mut keys: Vec<_> = self.entries.keys().copied().collect();
        keys.sort_unstable();
        keys.iter().map(|k| &self.entries[k]).collect()
    }

    fn bind(&mut self, settings: &FitSettings) -> Result<()> {
        match &self.settings {
            Some(s) if s != settings => Err(Error::CacheMismatch),
            Some(_) => Ok(()),
            None => {
                self.settings = Some(*settings);
                Ok(())
            }
        }
    }

    /// Fit for rows `(start, end]`.
    pub fn fit(
        &mut self,
        data: &Dataset,
        settings: &FitSettings,
        key: (usize, usize),
    ) -> Result<SegmentFit> {
        self.bind(settings)?;
        if let Some(fit) = self.entries.get(&key) {
            self.hits += 1;
            return Ok(fit.clone());
        }
        let fit = interval_fit(data, Interval::new(key.0, key.1, data.n())?, settings)?;
        self.misses += 1;
        if self.enabled {
            self.entries.insert(key, fit.clone());
        }
        Ok(fit)
    }

    /// Losses `L_n` for a batch of row pairs, in request order. Missing fits
    /// are computed in parallel; results do not depend on the thread count.
    pub fn losses(
        &mut self,
        data: &Dataset,
        settings: &FitSettings,
        keys: &[(usize, usize)],
    ) -> Result<Vec<f64>> {
        self.bind(settings)?;
        let mut missing: Vec<(usize, usize)> = keys
            .iter()
            .copied()
            .filter(|k| !self.entries.contains_key(k))
            .collect();
        if self.enabled {
            missing.sort_unstable();
            missing.dedup();
        }
        let computed: Vec<Result<SegmentFit>> = missing
            .par_iter()
            .map(|&(s, e)| interval_fit(data, Interval::new(s, e, data.n())?, settings))
            .collect();
        self.misses += computed.len() as u64;
        self.hits += (keys.len() - missing.len()) as u64;

        if !self.enabled {
            return computed.into_iter().map(|r| r.map(|fit| fit.loss)).collect();
        }
        for (key, fit) in missing.into_iter().zip(computed) {
            self.entries.insert(key, fit?);
        }
        Ok(keys.iter().map(|k| self.entries[k].loss).collect())
    }
}
