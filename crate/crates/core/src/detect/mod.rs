//! Change-point detectors sharing a memoized interval-fit cache.

mod bs;
mod cache;
mod dp;

pub use bs::{best_split, bs_detect, bs_detect_cached, bs_tree, h_cost, BsNode, BsTree};
pub use cache::{CacheStats, FitCache};
pub use dp::{dp_all_k, dp_detect, dp_detect_cached, dp_fixed_k, dp_fixed_k_cached};
