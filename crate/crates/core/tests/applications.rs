mod common;

use mirror_ot_core::applications::{correlation_bound, neyman_bound};
use mirror_ot_core::synthetic::{generate, Preset, SynthConfig};
use mirror_ot_core::{EstimatorOptions, EtaGrid, ObservedSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn grid(values: &[f64]) -> EtaGrid {
    EtaGrid::new(values.to_vec()).unwrap()
}

#[test]
fn constant_effect_is_recovered_when_covariate_is_the_outcome() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let rows: Vec<(u8, [f64; 1], [f64; 1])> = (0..300)
        .map(|i| {
            let y0: f64 = r.sample(StandardNormal);
            let w = (i % 2) as u8;
            let y = if w == 1 { y0 + 2.0 } else { y0 };
            (w, [y], [y0])
        })
        .collect();
    let sample = ObservedSample::from_rows(rows).unwrap();
    let report = neyman_bound(&sample, &grid(&[0.0, 1e4]), &EstimatorOptions::default()).unwrap();
    let last = report.rows.last().unwrap();
    assert!(last.s_tau_lb < 0.05, "{}", last.s_tau_lb);
    assert!((report.tau_hat[0] - 2.0).abs() < 0.3);
}

#[test]
fn missing_zero_still_serves_as_baseline() {
    let sample = generate(&SynthConfig {
        model: Preset::Scale.model(),
        n: 60,
        m: 50,
        seed: 4,
    })
    .unwrap();
    let report = neyman_bound(&sample, &grid(&[1.0, 10.0]), &EstimatorOptions::default()).unwrap();
    let with_zero = neyman_bound(&sample, &grid(&[0.0, 1.0, 10.0]), &EstimatorOptions::default()).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.rows[0].eta, 1.0);
    assert_eq!(with_zero.rows[0].relative_sample_size, 1.0);
    assert_eq!(report.rows, with_zero.rows[1..]);
    assert!(report.rows.iter().all(|row| row.relative_sample_size <= 1.0 + 1e-12));
}

#[test]
fn vector_outcomes_use_squared_norms() {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let rows: Vec<(u8, Vec<f64>, Vec<f64>)> = (0..120)
        .map(|i| {
            let z: f64 = r.sample(StandardNormal);
            let w = (i % 3 == 0) as u8;
            let e: [f64; 2] = [r.sample(StandardNormal), r.sample(StandardNormal)];
            (w, vec![z + e[0], 0.5 * z + e[1] + w as f64], vec![z])
        })
        .collect();
    let sample = ObservedSample::from_rows(rows).unwrap();
    let report = neyman_bound(&sample, &grid(&[0.0, 1.0, 10.0]), &EstimatorOptions::default()).unwrap();
    assert_eq!(report.tau_hat.len(), 2);
    for w in report.rows.windows(2) {
        assert!(w[1].v_estimate <= w[0].v_estimate + 1e-9);
    }
}

#[test]
fn identical_arms_are_perfectly_correlated_at_most() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let ys: Vec<f64> = (0..80).map(|_| r.sample(StandardNormal)).collect();
    let rows = ys
        .iter()
        .flat_map(|&y| [(0u8, [y], [y]), (1u8, [y], [y])])
        .collect::<Vec<_>>();
    let sample = ObservedSample::from_rows(rows).unwrap();
    let report = correlation_bound(&sample, &grid(&[0.0, 100.0]), &EstimatorOptions::default(), false).unwrap();
    // Sample variances use n − 1, coupling moments use 1/n.
    let top = 79.0 / 80.0;
    for row in &report.rows {
        assert!((row.rho_upper - top).abs() < 1e-9, "{}", row.rho_upper);
    }
    assert!((report.rows[1].rho_lower - top).abs() < 1e-6, "{}", report.rows[1].rho_lower);
}

#[test]
fn unpenalized_product_bounds_are_sorted_couplings() {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let n = r.random_range(5..80);
        let a: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
        let b: Vec<f64> = a.iter().map(|v| -v).collect();
        let rows = a
            .iter()
            .map(|&y| (0u8, [y], [0.0]))
            .chain(b.iter().map(|&y| (1u8, [y], [0.0])))
            .collect::<Vec<_>>();
        let sample = ObservedSample::from_rows(rows).unwrap();
        let report = correlation_bound(&sample, &grid(&[0.0]), &EstimatorOptions::default(), false).unwrap();
        let row = &report.rows[0];
        assert!((row.product_lower - common::sorted_coupling(&a, &b, false)).abs() < 1e-9);
        assert!((row.product_upper - common::sorted_coupling(&a, &b, true)).abs() < 1e-9);
        let top = (n - 1) as f64 / n as f64;
        assert!((row.rho_lower + top).abs() < 1e-9, "{}", row.rho_lower);
        assert!(row.rho_upper <= top + 1e-9);
    }
}

#[test]
fn shifting_outcomes_keeps_correlation() {
    let sample = generate(&SynthConfig {
        model: Preset::QuadraticLocation.model(),
        n: 70,
        m: 60,
        seed: 8,
    })
    .unwrap();
    let c = 3.5;
    let shifted = ObservedSample::from_rows(sample.rows().map(|(w, y, z)| (w, [y[0] + c], z.to_vec()))).unwrap();
    let g = grid(&[0.0, 2.0, 20.0]);
    let opts = EstimatorOptions::default();
    let a = correlation_bound(&sample, &g, &opts, false).unwrap();
    let b = correlation_bound(&shifted, &g, &opts, false).unwrap();
    let offset = c * (a.mean0 + a.mean1) + c * c;
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert!((y.product_lower - x.product_lower - offset).abs() < 1e-8);
        assert!((y.product_upper - x.product_upper - offset).abs() < 1e-8);
        assert!((y.rho_lower - x.rho_lower).abs() < 1e-8);
        assert!((y.rho_upper - x.rho_upper).abs() < 1e-8);
    }
}

#[test]
fn vector_outcomes_rejected_for_correlation() {
    let rows = vec![(0u8, [1.0, 2.0], [0.0]), (1u8, [0.0, 1.0], [1.0])];
    let sample = ObservedSample::from_rows(rows).unwrap();
    assert!(correlation_bound(&sample, &grid(&[0.0]), &EstimatorOptions::default(), true).is_err());
}

#[test]
fn reports_render_tables() {
    let sample = generate(&SynthConfig {
        model: Preset::LinearLocation.model(),
        n: 30,
        m: 30,
        seed: 1,
    })
    .unwrap();
    let g = grid(&[0.0, 1.0]);
    let text = neyman_bound(&sample, &g, &EstimatorOptions::default()).unwrap().to_table();
    assert_eq!(text.lines().count(), 4);
    let text = correlation_bound(&sample, &g, &EstimatorOptions::default(), true).unwrap().to_table();
    assert_eq!(text.lines().count(), 3);
}
