//! End-to-end checks across sampling, measurement and moments.

use std::f64::consts::PI;

use kostlan::harness::{run_experiment, Experiment, ExperimentConfig};
use kostlan::kac_rice::expected_volume;
use kostlan::kss::{KssSystem, MonomialBasis};
use kostlan::numeric::mean_and_variance;
use kostlan::sphere::icosphere;
use kostlan::volume::{count_roots_circle, zero_length_marching};

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let (m, v) = mean_and_variance(xs);
    (m, (v / xs.len() as f64).sqrt())
}

#[test]
fn marching_mean_matches_closed_form() {
    for (d, level) in [(16u32, 5u32), (64, 6)] {
        let basis = MonomialBasis::new(2, d).unwrap();
        let mesh = icosphere(level).unwrap();
        let xs: Vec<f64> = (0..150u64)
            .map(|s| zero_length_marching(&KssSystem::sample_with_basis(&basis, 1, 1000 + s).unwrap(), &mesh).unwrap().0.value)
            .collect();
        let (m, se) = mean_se(&xs);
        let e = expected_volume(2, 1, d).unwrap();
        assert!((m - e).abs() < 3.5 * se, "d = {d}: {m} +- {se} vs {e}");
    }
}

// The restriction of a KSS system to a great circle is a KSS polynomial in
// two variables, so pi times the mean root count on the equator t_2 = 0 is an
// independent route to the mean length.
#[test]
fn crofton_route_to_first_moment() {
    let d = 16;
    let basis = MonomialBasis::new(1, d).unwrap();
    let counts: Vec<f64> = (0..3000u64)
        .map(|s| count_roots_circle(&KssSystem::sample_with_basis(&basis, 1, s).unwrap()).unwrap() as f64)
        .collect();
    let (m, se) = mean_se(&counts);
    let e = expected_volume(2, 1, d).unwrap();
    assert!((PI * m - e).abs() < 3.5 * PI * se, "{} +- {} vs {e}", PI * m, PI * se);
}

#[test]
fn serialized_system_measures_identically() {
    let sys = KssSystem::sample(2, 12, 1, 77).unwrap();
    let back = KssSystem::from_json(&sys.to_json().unwrap()).unwrap();
    let mesh = icosphere(5).unwrap();
    let a = zero_length_marching(&sys, &mesh).unwrap().0;
    let b = zero_length_marching(&back, &mesh).unwrap().0;
    assert_eq!(a.value, b.value);
}

#[test]
fn mean_experiment_report_is_consistent() {
    let config = ExperimentConfig {
        experiment: Experiment::Mean,
        d_grid: Some(vec![9, 16]),
        replicates: 40,
        seed: 5,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&config).unwrap();
    assert_eq!(report.degrees.len(), 2);
    for s in &report.degrees {
        let vals: Vec<f64> = report.replicates.iter().filter(|r| r.d == Some(s.d)).map(|r| r.value).collect();
        assert_eq!(vals.len(), 40);
        let (m, _) = mean_and_variance(&vals);
        assert!((m - s.sample_mean).abs() < 1e-12);
        assert!((s.theoretical_mean - expected_volume(2, 1, s.d).unwrap()).abs() < 1e-12);
    }
    let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    assert_eq!(json["replicates"].as_array().unwrap().len(), 80);
}
