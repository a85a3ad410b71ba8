//! Swendsen-Wang sampling and the partition-function estimators against
//! exact enumeration.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use stoqmc_core::instances::random_ferro_ising;
use stoqmc_core::ising::{
    energy, estimate_partition, estimate_partition_with, estimate_tim_partition, partition_exact_enum, sw_sweep,
    ClassicalIsingModel, EstimatorConfig, Reference,
};
use stoqmc_core::model::TimModel;
use stoqmc_core::rng::stream;
use stoqmc_core::trotter::tim_partition_exact;

fn relative_error(log_est: f64, log_exact: f64) -> f64 {
    ((log_est - log_exact).exp() - 1.0).abs()
}

#[test]
fn swendsen_wang_samples_the_gibbs_measure() {
    let model = ClassicalIsingModel::new(
        4,
        vec![(0, 1, 0.6), (1, 2, 0.4), (2, 3, 0.8), (0, 3, 0.3), (0, 2, 0.5)],
        0.0,
    )
    .unwrap();
    let scale = 0.7;
    let states = 16usize;
    let spins_of = |s: usize| -> Vec<i8> { (0..4).map(|i| if (s >> i) & 1 == 0 { 1 } else { -1 }).collect() };
    let weights: Vec<f64> = (0..states)
        .map(|s| (scale * energy(&model, &spins_of(s)).unwrap()).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut counts = vec![0u64; states];
    let mut rng = stream(31, 0);
    let mut spins = vec![1i8; 4];
    for _ in 0..100 {
        sw_sweep(&model, scale, &mut spins, &mut rng).unwrap();
    }
    let samples = 20_000u64;
    for _ in 0..samples {
        for _ in 0..3 {
            sw_sweep(&model, scale, &mut spins, &mut rng).unwrap();
        }
        let s = spins.iter().enumerate().fold(0usize, |acc, (i, &v)| acc | (usize::from(v < 0) << i));
        counts[s] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .zip(&weights)
        .map(|(&c, &w)| {
            let expected = samples as f64 * w / total;
            (c as f64 - expected).powi(2) / expected
        })
        .sum();
    let p_value = 1.0 - ChiSquared::new((states - 1) as f64).unwrap().cdf(chi2);
    assert!(p_value > 1e-3, "χ² = {chi2}, p = {p_value}");
}

#[test]
fn estimator_tracks_enumeration() {
    let delta = 0.1;
    for (i, spins) in [6usize, 10, 14].into_iter().enumerate() {
        let model = random_ferro_ising(spins, 0.4, 1.0, &mut stream(32, i as u64)).unwrap();
        let exact = partition_exact_enum(&model).unwrap();
        let hits = (0..9)
            .filter(|&s| relative_error(estimate_partition(&model, delta, s).unwrap().log_value, exact) <= delta)
            .count();
        assert!(hits >= 6, "N = {spins}: {hits}/9 within δ");
    }
}

#[test]
fn uniform_reference_also_converges() {
    let model = random_ferro_ising(8, 0.5, 0.8, &mut stream(33, 0)).unwrap();
    let exact = partition_exact_enum(&model).unwrap();
    let mut cfg = EstimatorConfig::new(0.1, 4);
    cfg.reference = Reference::Uniform;
    let est = estimate_partition_with(&model, &cfg).unwrap();
    assert!(relative_error(est.log_value, exact) <= 0.1);
    assert_eq!(est.diagnostics.annealed_edges, model.edges().len());
}

#[test]
fn forests_are_exact() {
    // A tree is its own reference: nothing is annealed.
    let tree = ClassicalIsingModel::new(5, vec![(0, 1, 0.9), (1, 2, 0.2), (1, 3, 1.4), (3, 4, 0.5)], 0.25).unwrap();
    let est = estimate_partition(&tree, 0.05, 1).unwrap();
    assert_eq!(est.confidence, Some(1.0));
    assert!((est.log_value - partition_exact_enum(&tree).unwrap()).abs() < 1e-12);
}

#[test]
fn single_qubit_tim_pipeline() {
    let tim = TimModel::new(1, vec![], vec![1.0]).unwrap();
    let exact = tim_partition_exact(&tim).unwrap().log_z;
    let est = estimate_tim_partition(&tim, 0.1, 9).unwrap();
    assert!(relative_error(est.log_value(), exact) <= 0.1);
    assert!(est.floor.is_none());
}

#[test]
fn zero_field_tim_within_combined_tolerance() {
    let tim = TimModel::new(2, vec![(0, 1, 1.0)], vec![0.0, 0.0]).unwrap();
    let exact = (2.0 * 1f64.exp() + 2.0 * (-1f64).exp()).ln();
    let est = estimate_tim_partition(&tim, 0.1, 12).unwrap();
    let floor = est.floor.as_ref().expect("fields were raised");
    assert!((floor.floor - 0.05).abs() < 1e-15);
    assert!(relative_error(est.log_value(), exact) <= est.combined_tolerance);
}
