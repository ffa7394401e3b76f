//! Seeded statistical checks on simulated data.

use approx::assert_abs_diff_eq;
use segreg::detect::{best_split, bs_detect_cached};
use segreg::simulate::{covariance_matrix, oracle_beta_star, sample_dataset, CovarianceSpec, GroundTruthModel};
use segreg::tuning::theory_lambda;
use segreg::{interval_fit, DetectorConfig, FitCache, FitSettings, Interval};

const N: usize = 400;
const P: usize = 800;
const DELTA: f64 = 0.25;

fn theory_config(p: usize, n: usize) -> DetectorConfig {
    let lambda = theory_lambda(p, n, DELTA);
    DetectorConfig::new(lambda, 0.25 * lambda, DELTA)
}

#[test]
fn first_half_fit_recovers_the_true_support() {
    let truth = GroundTruthModel::two_segment(P, CovarianceSpec::Identity, 1.0).unwrap();
    let cfg = theory_config(P, N);
    let reps = 40;
    let mut hits = 0;
    for seed in 0..reps {
        let data = sample_dataset(&truth, N, seed).unwrap();
        let fit = interval_fit(&data, Interval::new(0, N / 2, N).unwrap(), &cfg.fit_settings()).unwrap();
        let support = fit.beta.support();
        if support.contains(&0) && support.contains(&1) {
            hits += 1;
        }
    }
    assert!(hits as f64 >= 0.95 * reps as f64, "{hits}/{reps}");
}

#[test]
fn best_split_lands_near_the_break() {
    let truth = GroundTruthModel::two_segment(P, CovarianceSpec::Identity, 1.0).unwrap();
    let cfg = theory_config(P, N);
    for seed in 0..5 {
        let data = sample_dataset(&truth, N, 100 + seed).unwrap();
        let s = best_split(&data, 0, N, &cfg, &mut FitCache::new()).unwrap();
        let frac = s as f64 / N as f64;
        assert!((frac - 0.5).abs() <= 0.05, "seed {seed}: split at {frac}");
    }
}

#[test]
fn bs_finds_three_segments_in_most_runs() {
    let truth = GroundTruthModel::three_segment(P, CovarianceSpec::Identity, 1.0).unwrap();
    let cfg = theory_config(P, N);
    let reps = 11;
    let mut hits = 0;
    for seed in 0..reps {
        let data = sample_dataset(&truth, N, 200 + seed).unwrap();
        let (model, _) = bs_detect_cached(&data, &cfg, &mut FitCache::new()).unwrap();
        if model.k() == 3 {
            hits += 1;
        }
    }
    assert!(2 * hits > reps, "{hits}/{reps}");
}

#[test]
fn sample_covariance_matches_toeplitz() {
    let p = 5;
    let cov = CovarianceSpec::Toeplitz { rho: 0.8 };
    let truth = GroundTruthModel::new(vec![0.0, 1.0], vec![vec![0.0; p]], cov, 1.0).unwrap();
    let n = 100_000;
    let data = sample_dataset(&truth, n, 42).unwrap();
    let sigma = covariance_matrix(&cov, p).unwrap();
    for a in 0..p {
        for b in 0..p {
            let s: f64 = data.column(a).iter().zip(data.column(b)).map(|(x, y)| x * y).sum::<f64>() / n as f64;
            assert_abs_diff_eq!(s, sigma[(a, b)], epsilon = 0.02);
        }
    }
}

#[test]
fn straddling_fit_approaches_the_oracle_combination() {
    let p = 5;
    let n = 20_000;
    let truth = GroundTruthModel::two_segment(p, CovarianceSpec::Identity, 0.5).unwrap();
    let data = sample_dataset(&truth, n, 3).unwrap();
    let iv = Interval::from_fractions(0.25, 0.75, n).unwrap();
    let fit = interval_fit(&data, iv, &FitSettings::new(1e-4, DELTA)).unwrap();
    let oracle = oracle_beta_star(&truth, iv);
    let expected: Vec<f64> = truth.betas0[0].iter().zip(&truth.betas0[1]).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
    for (o, e) in oracle.iter().zip(&expected) {
        assert_abs_diff_eq!(o, e, epsilon = 1e-12);
    }
    for (b, o) in fit.beta.to_dense().iter().zip(&oracle) {
        assert_abs_diff_eq!(b, o, epsilon = 0.05);
    }
}
