//! Ordered-data cross-validation over `(lambda, k)` and evaluation against a
//! known ground truth.

use rayon::prelude::*;
use serde::Serialize;

use crate::detect::{dp_all_k, FitCache};
use crate::error::{Error, Result};
use crate::lasso::{Coefficients, SolverOptions};
use crate::model::{Alpha, Dataset, DetectorConfig, SegmentedModel};
use crate::simulate::GroundTruthModel;

/// `sqrt(log(p) / (delta n))`, the default sparsity penalty of the
/// simulation harness.
pub fn theory_lambda(p: usize, n: usize, delta: f64) -> f64 {
    ((p as f64).ln() / (delta * n as f64)).sqrt()
}

/// Seed of replication `rep` under a master seed.
pub fn replication_seed(master: u64, rep: usize) -> u64 {
    master.wrapping_add(rep as u64)
}

/// Splits rows into odd positions (train) and even positions (test), 1-based,
/// both in original order. Needs `n >= 4` so that each half is a valid
/// dataset.
pub fn ordered_split(data: &Dataset) -> Result<(Dataset, Dataset)> {
    if data.n() < 4 {
        return Err(Error::InvalidData(format!(
            "ordered split needs at least 4 rows, got {}",
            data.n()
        )));
    }
    let train: Vec<usize> = (0..data.n()).step_by(2).collect();
    let test: Vec<usize> = (1..data.n()).step_by(2).collect();
    Ok((data.select_rows(&train)?, data.select_rows(&test)?))
}

/// Test residual sum of squares of a segmented fit. Test row `i` (1-based)
/// belongs to segment `j` iff `i / n_test` lies in `(alpha_{j-1}, alpha_j]`.
pub fn predict_rss(alpha: &Alpha, betas: &[Coefficients], test: &Dataset) -> Result<f64> {
    if betas.len() != alpha.k() {
        return Err(Error::DimensionMismatch {
            expected: alpha.k(),
            found: betas.len(),
        });
    }
    if let Some(b) = betas.iter().find(|b| b.dim() != test.p()) {
        return Err(Error::DimensionMismatch {
            expected: test.p(),
            found: b.dim(),
        });
    }
    let n_alpha = alpha.n();
    let n_test = test.n();
    let ends = &alpha.rows()[1..];
    let mut segment = 0;
    let mut rss = 0.0;
    for i in 0..n_test {
        // (i + 1) / n_test <= ends[j] / n_alpha, in integers
        while (i + 1) * n_alpha > ends[segment] * n_test {
            segment += 1;
        }
        let r = test.y()[i] - betas[segment].dot_row(test.row(i));
        rss += r * r;
    }
    Ok(rss)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvCell {
    pub lambda: f64,
    pub k: usize,
    /// `None` when no segmentation with `k` segments fits the training split.
    pub test_rss: Option<f64>,
    pub alpha: Option<Alpha>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    /// Cells in `(lambda, k)` grid order.
    pub cells: Vec<CvCell>,
    /// Index into `cells` of the smallest test RSS; ties go to the smallest
    /// `k`, then the smallest `lambda`.
    pub best: usize,
}

impl CvResult {
    pub fn best_cell(&self) -> &CvCell {
        &self.cells[self.best]
    }

    pub fn cell(&self, lambda: f64, k: usize) -> Option<&CvCell> {
        self.cells.iter().find(|c| c.lambda == lambda && c.k == k)
    }
}

/// Fits every `(lambda, k)` cell on the odd rows with the exact fixed-`k`
/// optimizer and scores it on the even rows.
pub fn cv_grid(
    data: &Dataset,
    lambdas: &[f64],
    ks: &[usize],
    delta: f64,
    solver: SolverOptions,
) -> Result<CvResult> {
    if lambdas.is_empty() || ks.is_empty() {
        return Err(Error::InvalidConfig("lambda and k grids must be nonempty".into()));
    }
    if ks.contains(&0) {
        return Err(Error::InvalidConfig("k values must be >= 1".into()));
    }
    let (train, test) = ordered_split(data)?;
    for &lambda in lambdas {
        DetectorConfig::new(lambda, 0.0, delta).validate(train.n())?;
    }

    let per_lambda: Vec<Result<Vec<CvCell>>> = lambdas
        .par_iter()
        .map(|&lambda| {
            let cfg = DetectorConfig::new(lambda, 0.0, delta).with_solver(solver.tol, solver.max_sweeps);
            let models = dp_all_k(&train, &cfg, &mut FitCache::new())?;
            ks.iter()
                .map(|&k| score_cell(lambda, k, models.get(k - 1).and_then(Option::as_ref), &test))
                .collect()
        })
        .collect();
    let mut cells = Vec::with_capacity(lambdas.len() * ks.len());
    for row in per_lambda {
        cells.extend(row?);
    }

    let mut best: Option<usize> = None;
    for (i, cell) in cells.iter().enumerate() {
        let Some(rss) = cell.test_rss else { continue };
        let better = match best {
            None => true,
            Some(b) => {
                let cur = &cells[b];
                let cur_rss = cur.test_rss.unwrap_or(f64::INFINITY);
                rss < cur_rss
                    || (rss == cur_rss && (cell.k, cell.lambda) < (cur.k, cur.lambda))
            }
        };
        if better {
            best = Some(i);
        }
    }
    let best = best.ok_or_else(|| Error::Infeasible("no feasible (lambda, k) cell".into()))?;
    Ok(CvResult { cells, best })
}

fn score_cell(lambda: f64, k: usize, model: Option<&SegmentedModel>, test: &Dataset) -> Result<CvCell> {
    Ok(match model {
        Some(m) => {
            let betas: Vec<Coefficients> = m.fits.iter().map(|f| f.beta.clone()).collect();
            CvCell {
                lambda,
                k,
                test_rss: Some(predict_rss(&m.alpha, &betas, test)?),
                alpha: Some(m.alpha.clone()),
            }
        }
        None => CvCell {
            lambda,
            k,
            test_rss: None,
            alpha: None,
        },
    })
}

/// Accuracy of an estimated segmentation against the truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub k_hat: usize,
    pub alpha_hat: Vec<f64>,
    /// `||alpha_hat - alpha0||_1`, only when the segment counts agree.
    pub alpha_l1_error: Option<f64>,
    pub k_match: bool,
    /// `|alpha_hat_1 - alpha0_1|`, absent for a single estimated segment.
    pub first_cp_error: Option<f64>,
}

pub fn evaluate(estimated: &SegmentedModel, truth: &GroundTruthModel) -> EvalReport {
    let alpha_hat = estimated.alpha.fractions();
    let k_hat = estimated.k();
    let k_match = k_hat == truth.k0();
    let alpha_l1_error = k_match.then(|| {
        alpha_hat
            .iter()
            .zip(&truth.alpha0)
            .map(|(a, b)| (a - b).abs())
            .sum()
    });
    let first_cp_error = (k_hat >= 2 && truth.k0() >= 2).then(|| (alpha_hat[1] - truth.alpha0[1]).abs());
    EvalReport {
        k_hat,
        alpha_hat,
        alpha_l1_error,
        k_match,
        first_cp_error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lasso::SegmentFit;
    use crate::model::{Interval, Method};
    use crate::simulate::CovarianceSpec;

    fn rows(n: usize) -> Dataset {
        let y: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let x: Vec<Vec<f64>> = (1..=n).map(|i| vec![10.0 * i as f64]).collect();
        Dataset::from_rows(y, &x).unwrap()
    }

    #[test]
    fn split_examples() {
        let (train, test) = ordered_split(&rows(4)).unwrap();
        assert_eq!(train.y(), &[1.0, 3.0]);
        assert_eq!(test.y(), &[2.0, 4.0]);
        assert_eq!(train.column(0), &[10.0, 30.0]);
        let (train, test) = ordered_split(&rows(5)).unwrap();
        assert_eq!((train.n(), test.n()), (3, 2));
        let (train, test) = ordered_split(&rows(319)).unwrap();
        assert_eq!((train.n(), test.n()), (160, 159));
        assert!(ordered_split(&rows(3)).is_err());
    }

    #[test]
    fn predict_rss_hand_example() {
        // rows 1-2 -> segment 1 (beta = 1), rows 3-4 -> segment 2 (beta = 2)
        let test = Dataset::from_rows(vec![1.0, 3.0, 5.0, 9.0], &[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]).unwrap();
        let alpha = Alpha::from_fractions(&[0.0, 0.5, 1.0], 10).unwrap();
        let betas = vec![
            Coefficients::from_dense(&[1.0]),
            Coefficients::from_dense(&[2.0]),
        ];
        // (1-1)^2 + (3-2)^2 + (5-6)^2 + (9-8)^2
        assert_eq!(predict_rss(&alpha, &betas, &test).unwrap(), 3.0);
        let single = Alpha::single(7);
        let rss = predict_rss(&single, &betas[..1], &test).unwrap();
        assert_eq!(rss, 0.0 + 1.0 + 4.0 + 25.0);
        assert!(predict_rss(&alpha, &betas[..1], &test).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let truth = GroundTruthModel::two_segment(3, CovarianceSpec::Identity, 1.0).unwrap();
        let model = |points: &[f64]| {
            let alpha = Alpha::from_fractions(points, 20).unwrap();
            let fits = alpha
                .intervals()
                .map(|iv: Interval| SegmentFit {
                    interval: iv,
                    beta: Coefficients::zeros(3),
                    loss: 0.0,
                    penalty_scale: 0.0,
                    kkt_gap: 0.0,
                    sweeps_used: 0,
                    non_unique: false,
                    pinned: vec![],
                })
                .collect();
            SegmentedModel {
                alpha,
                fits,
                objective: 0.0,
                method: Method::Dp,
            }
        };
        let exact = evaluate(&model(&[0.0, 0.5, 1.0]), &truth);
        assert_eq!(exact.alpha_l1_error, Some(0.0));
        assert!(exact.k_match);
        let single = evaluate(&model(&[0.0, 1.0]), &truth);
        assert_eq!(single.first_cp_error, None);
        assert_eq!(single.alpha_l1_error, None);
        assert!(!single.k_match);
        let off = evaluate(&model(&[0.0, 0.45, 1.0]), &truth);
        assert!((off.alpha_l1_error.unwrap() - 0.05).abs() < 1e-12);
        assert!((off.first_cp_error.unwrap() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn single_cell_grid() {
        let truth = GroundTruthModel::two_segment(4, CovarianceSpec::Identity, 0.5).unwrap();
        let data = crate::simulate::sample_dataset(&truth, 80, 1).unwrap();
        let cv = cv_grid(&data, &[0.1], &[2], 0.1, SolverOptions::default()).unwrap();
        assert_eq!(cv.cells.len(), 1);
        assert_eq!(cv.best, 0);
    }

    #[test]
    fn infeasible_cells_are_marked() {
        let truth = GroundTruthModel::two_segment(4, CovarianceSpec::Identity, 0.5).unwrap();
        let data = crate::simulate::sample_dataset(&truth, 80, 1).unwrap();
        let cv = cv_grid(&data, &[0.1], &[1, 4, 5], 0.25, SolverOptions::default()).unwrap();
        assert!(cv.cell(0.1, 4).unwrap().test_rss.is_some());
        assert!(cv.cell(0.1, 5).unwrap().test_rss.is_none());
        assert!(cv_grid(&data, &[], &[1], 0.25, SolverOptions::default()).is_err());
    }

    #[test]
    fn theory_lambda_value() {
        let l = theory_lambda(800, 400, 0.25);
        assert!((l - (800f64.ln() / 100.0).sqrt()).abs() < 1e-15);
        assert_eq!(replication_seed(10, 3), 13);
    }
}
