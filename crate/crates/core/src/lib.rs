//! Joint estimation of change points and per-segment sparse regression
//! coefficients in high-dimensional linear models.
//!
//! The estimator minimizes
//!
//! ```text
//! G(alpha) = sum_j L_n(I_j(alpha), beta_hat_j) + gamma * l(alpha)
//! ```
//!
//! over change-point vectors whose segments are all at least `delta` wide,
//! with `beta_hat_j` a Lasso fit on segment `j`. [`detect::dp_detect`]
//! computes the exact minimizer; [`detect::bs_detect`] approximates it by
//! binary segmentation at a fraction of the cost.

pub mod detect;
pub mod error;
pub mod lasso;
pub mod model;
pub mod simulate;
pub mod tuning;

pub use detect::{bs_detect, dp_detect, dp_fixed_k, FitCache};
pub use error::{Error, Result};
pub use lasso::{interval_fit, kkt_gap, lasso_solve, Coefficients, FitSettings, SegmentFit, SolverOptions};
pub use model::{objective_g, segment_loss, validate_alpha, Alpha, Dataset, DetectorConfig, Interval, Method, SegmentedModel};
pub use simulate::{sample_dataset, CovarianceSpec, GroundTruthModel};
