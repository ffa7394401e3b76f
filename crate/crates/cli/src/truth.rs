//! JSON form of a ground-truth model.

use segreg::simulate::{CovarianceSpec, GroundTruthModel};
use segreg::Coefficients;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// One nonzero coefficient; `index` is 1-based and matches the CSV column
/// `x<index>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseEntry {
    pub index: usize,
    pub value: f64,
}

pub fn sparse(beta: &Coefficients) -> Vec<SparseEntry> {
    beta.entries()
        .iter()
        .map(|&(j, value)| SparseEntry { index: j + 1, value })
        .collect()
}

pub fn dense(p: usize, entries: &[SparseEntry]) -> Result<Vec<f64>> {
    let pairs = entries
        .iter()
        .map(|e| {
            e.index
                .checked_sub(1)
                .map(|j| (j, e.value))
                .ok_or_else(|| CliError::Config("coefficient indices are 1-based".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Coefficients::from_entries(p, pairs)?.to_dense())
}

/// Truth file written by `simulate`. The same schema, without the sample
/// fields, describes a custom model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub alpha0: Vec<f64>,
    pub betas0: Vec<Vec<SparseEntry>>,
    pub cov: CovarianceSpec,
    pub sigma: f64,
    pub p: usize,
    /// True change points as grid rows of the simulated sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0_rows: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl TruthFile {
    pub fn from_model(model: &GroundTruthModel) -> Self {
        Self {
            alpha0: model.alpha0.clone(),
            betas0: model.betas0.iter().map(|b| sparse(&Coefficients::from_dense(b))).collect(),
            cov: model.cov,
            sigma: model.sigma,
            p: model.p,
            alpha0_rows: None,
            n: None,
            seed: None,
        }
    }

    pub fn model(&self) -> Result<GroundTruthModel> {
        let betas = self
            .betas0
            .iter()
            .map(|b| dense(self.p, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(GroundTruthModel::new(self.alpha0.clone(), betas, self.cov, self.sigma)?)
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
