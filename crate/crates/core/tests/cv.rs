use segreg::simulate::{sample_dataset, CovarianceSpec, GroundTruthModel};
use segreg::tuning::{cv_grid, ordered_split, predict_rss};
use segreg::{dp_fixed_k, DetectorConfig, SolverOptions};

fn two_segment_data(seed: u64) -> segreg::Dataset {
    let truth = GroundTruthModel::two_segment(10, CovarianceSpec::Identity, 0.3).unwrap();
    sample_dataset(&truth, 200, seed).unwrap()
}

#[test]
fn homogeneous_data_selects_one_segment() {
    let beta = vec![1.5, -1.0, 0.0, 0.0, 2.0, 0.0];
    let truth = GroundTruthModel::new(vec![0.0, 1.0], vec![beta], CovarianceSpec::Identity, 0.3).unwrap();
    let data = sample_dataset(&truth, 200, 8).unwrap();
    let cv = cv_grid(&data, &[0.02, 0.05, 0.1], &[1, 2, 3, 4], 0.1, SolverOptions::default()).unwrap();
    assert_eq!(cv.best_cell().k, 1);
}

#[test]
fn clear_break_prefers_two_segments() {
    let data = two_segment_data(4);
    let lambdas = [0.02, 0.05, 0.1];
    let cv = cv_grid(&data, &lambdas, &[1, 2, 3], 0.1, SolverOptions::default()).unwrap();
    for &lambda in &lambdas {
        let one = cv.cell(lambda, 1).unwrap().test_rss.unwrap();
        let two = cv.cell(lambda, 2).unwrap().test_rss.unwrap();
        assert!(two < one, "lambda {lambda}: {two} >= {one}");
    }
    assert_eq!(cv.best_cell().k, 2);
}

#[test]
fn cells_can_be_recomputed_independently() {
    let data = two_segment_data(5);
    let cv = cv_grid(&data, &[0.03, 0.3], &[1, 2, 3], 0.1, SolverOptions::default()).unwrap();
    let (train, test) = ordered_split(&data).unwrap();
    for cell in &cv.cells {
        let cfg = DetectorConfig::new(cell.lambda, 0.0, 0.1);
        let model = dp_fixed_k(&train, &cfg, cell.k).unwrap();
        let betas: Vec<_> = model.fits.iter().map(|f| f.beta.clone()).collect();
        let rss = predict_rss(&model.alpha, &betas, &test).unwrap();
        assert_eq!(Some(rss.to_bits()), cell.test_rss.map(f64::to_bits));
        assert_eq!(Some(&model.alpha), cell.alpha.as_ref());
    }
}
