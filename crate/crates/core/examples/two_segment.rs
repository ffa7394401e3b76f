//! Simulates a two-segment sample and compares the DP and BS detectors.

use segreg::detect::{bs_detect_cached, dp_detect_cached, FitCache};
use segreg::simulate::{sample_dataset, CovarianceSpec, GroundTruthModel};
use segreg::tuning::theory_lambda;
use segreg::DetectorConfig;

fn main() -> Result<(), segreg::Error> {
    let (n, p) = (200, 100);
    let truth = GroundTruthModel::two_segment(p, CovarianceSpec::Identity, 1.0)?;
    let data = sample_dataset(&truth, n, 1)?;
    let lambda = theory_lambda(p, n, 0.25);
    let cfg = DetectorConfig::new(lambda, 0.25 * lambda, 0.25);

    let mut cache = FitCache::new();
    let dp = dp_detect_cached(&data, &cfg, &mut cache)?;
    println!("dp: alpha {} objective {:.6} fits {}", dp.alpha, dp.objective, cache.stats().misses);

    let mut cache = FitCache::new();
    let (bs, _) = bs_detect_cached(&data, &cfg, &mut cache)?;
    println!("bs: alpha {} objective {:.6} fits {}", bs.alpha, bs.objective, cache.stats().misses);
    Ok(())
}
