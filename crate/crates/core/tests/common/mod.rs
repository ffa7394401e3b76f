#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use segreg::{interval_fit, Dataset, DetectorConfig, Interval};

/// Every row vector `[0, r_1, .., n]` whose segments hold at least
/// `min_len` rows and number at most `kmax`.
pub fn all_segmentations(n: usize, min_len: usize, kmax: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, min_len: usize, kmax: usize, out: &mut Vec<Vec<usize>>) {
        let last = *prefix.last().unwrap();
        let segments = prefix.len() - 1;
        if n - last >= min_len && segments < kmax {
            let mut done = prefix.clone();
            done.push(n);
            out.push(done);
        }
        if segments + 1 >= kmax {
            return;
        }
        for next in last + min_len..=n.saturating_sub(min_len) {
            prefix.push(next);
            grow(prefix, n, min_len, kmax, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut vec![0], n, min_len, kmax, &mut out);
    out
}

/// Objective of a row vector, fitting each segment from scratch and summing
/// as `((L_1 + gamma) + L_2) + gamma ...`.
pub fn brute_objective(data: &Dataset, rows: &[usize], cfg: &DetectorConfig) -> f64 {
    let settings = cfg.fit_settings();
    rows.windows(2).fold(0.0, |acc, w| {
        let iv = Interval::new(w[0], w[1], data.n()).unwrap();
        let fit = interval_fit(data, iv, &settings).unwrap();
        (acc + fit.loss) + cfg.gamma
    })
}

/// Enumerated minimizer. Among exact ties: fewest segments, then the
/// smallest change points compared from the right.
pub fn brute_force(data: &Dataset, cfg: &DetectorConfig, k: Option<usize>) -> Option<(Vec<usize>, f64)> {
    let grid = cfg.validate(data.n()).unwrap();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for rows in all_segmentations(data.n(), grid.min_len, grid.kmax) {
        if k.is_some_and(|k| rows.len() - 1 != k) {
            continue;
        }
        let g = brute_objective(data, &rows, cfg);
        let better = match &best {
            None => true,
            Some((b, bg)) => {
                g < *bg
                    || (g == *bg
                        && (rows.len(), rows.iter().rev().collect::<Vec<_>>())
                            < (b.len(), b.iter().rev().collect::<Vec<_>>()))
            }
        };
        if better {
            best = Some((rows, g));
        }
    }
    best
}

/// Small random instance with a planted break in the middle.
pub fn random_instance(seed: u64) -> (Dataset, DetectorConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=12);
    let p = rng.random_range(1..=3);
    let delta = if rng.random_bool(0.5) { 0.25 } else { 1.0 / 3.0 };
    let shift = rng.random_range(0..=n);
    let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let x: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let sign = if i < shift { 1.0 } else { -1.0 };
        let signal: f64 = x.iter().zip(&beta).map(|(a, b)| a * b * sign).sum();
        let noise: f64 = rng.sample(StandardNormal);
        y.push(signal + 0.3 * noise);
        rows.push(x);
    }
    let lambda = rng.random_range(0.005..0.3);
    let gamma = rng.random_range(0.0..0.5);
    (Dataset::from_rows(y, &rows).unwrap(), DetectorConfig::new(lambda, gamma, delta))
}
