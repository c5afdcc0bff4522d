//! Self-tests of the harness estimators on synthetic data, plus the
//! determinism contract of the runner.

use hperc::harness::{
    empirical_factorial_moment, run_experiment, summarize, tv_distance_to_poisson, wilson_interval,
    ExperimentConfig, ExperimentKind, GridSpec, MuRule, WILSON_Z,
};
use hperc::rng::{derive_seed, Xoshiro256PlusPlus};

/// Poisson draw by inversion; fine for the small rates used here.
fn poisson_draw(rng: &mut Xoshiro256PlusPlus, mu: f64) -> u64 {
    let target = rng.next_unit();
    let mut k = 0u64;
    let mut pmf = libm::exp(-mu);
    let mut cum = pmf;
    while target >= cum && k < 500 {
        k += 1;
        pmf *= mu / k as f64;
        cum += pmf;
    }
    k
}

#[test]
fn wilson_coverage_matches_nominal() {
    // 10^4 synthetic Bernoulli experiments of 400 draws each, at p in
    // {0.1, 0.5, 0.9}. Wilson's exact coverage oscillates a few 1e-3
    // around the nominal level (0.9893..0.9910 at 400 draws), so the
    // empirical coverage is required to reach nominal within 3 standard
    // errors of the estimate.
    let runs = 10_000u64;
    let draws = 400u64;
    let se = (0.99f64 * 0.01 / runs as f64).sqrt();
    for (pi, p) in [0.1f64, 0.5, 0.9].into_iter().enumerate() {
        let mut covered = 0u64;
        for i in 0..runs {
            let mut rng = Xoshiro256PlusPlus::from_seed_u64(derive_seed(0xA1, &[pi as u64, i]));
            let successes = (0..draws).filter(|_| rng.next_unit() < p).count() as u64;
            let (lo, hi) = wilson_interval(successes, draws, WILSON_Z).unwrap();
            if lo <= p && p <= hi {
                covered += 1;
            }
        }
        let coverage = covered as f64 / runs as f64;
        assert!(
            coverage >= 0.99 - 3.0 * se,
            "p={p}: coverage {coverage} below nominal"
        );
    }
}

#[test]
fn tv_distance_vanishes_on_true_poisson_draws() {
    // 10^5 exact Poisson(1) draws: the empirical distribution is within
    // TV distance 0.01 of the reference.
    let mut rng = Xoshiro256PlusPlus::from_seed_u64(0xA2);
    let draws: Vec<u64> = (0..100_000).map(|_| poisson_draw(&mut rng, 1.0)).collect();
    let tv = tv_distance_to_poisson(&draws, 1.0).unwrap();
    assert!(tv <= 0.01, "TV distance {tv} above 0.01");
}

#[test]
fn factorial_moment_estimator_recovers_poisson_moments() {
    // Poisson factorial moments are mu^r; at mu = 1 every order gives 1.
    let mut rng = Xoshiro256PlusPlus::from_seed_u64(0xA3);
    let draws: Vec<u64> = (0..10_000).map(|_| poisson_draw(&mut rng, 1.0)).collect();
    let est = empirical_factorial_moment(&draws, 3).unwrap();
    // Standard error from the sample itself.
    let values: Vec<f64> = draws
        .iter()
        .map(|&y| hperc::theory::falling_factorial(y, 3))
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var =
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() as f64 - 1.0);
    let se = (var / values.len() as f64).sqrt();
    assert!(
        (est - 1.0).abs() <= 3.0 * se,
        "estimate {est} vs 1 (se {se})"
    );
}

#[test]
fn summaries_match_hand_aggregation() {
    let mut config = ExperimentConfig::new(
        ExperimentKind::PoissonCheck,
        2,
        10,
        GridSpec::Window(vec![-0.5, 0.5]),
    );
    config.replications = 64;
    config.master_seed = 7;
    let records = run_experiment(&config).unwrap();
    let rows = summarize(&records, MuRule::WindowLimit).unwrap();
    assert_eq!(rows.len(), 2);
    for (g, row) in rows.iter().enumerate() {
        let group: Vec<_> = records
            .iter()
            .filter(|r| r.grid_index == g as u64)
            .collect();
        assert_eq!(row.num_records, 64);
        let connected = group
            .iter()
            .filter(|r| r.is_connected == Some(true))
            .count() as u64;
        assert_eq!(row.connected, connected);
        let mean_y = group
            .iter()
            .map(|r| r.num_isolated.unwrap() as f64)
            .sum::<f64>()
            / 64.0;
        assert!((row.mean_isolated - mean_y).abs() < 1e-12);
        assert!((row.mu - libm::exp(-row.t)).abs() < 1e-12);
        assert!(row.wilson_low <= row.p_connected && row.p_connected <= row.wilson_high);
        // Empirical pmf masses sum to one.
        let total: f64 = row.y_pmf.iter().sum::<f64>() + row.y_tail;
        assert!((total - 1.0).abs() < 1e-12);
    }
    // The exact-mean rule plugs in n^d (1-p)^m instead.
    let rows_exact = summarize(&records, MuRule::ExactMean).unwrap();
    for row in &rows_exact {
        let params = hperc::graph::GraphParams::new(2, 10).unwrap();
        let exact = hperc::theory::expected_isolated(params, row.lambda).unwrap();
        assert!((row.mu - exact).abs() < 1e-12);
    }
}

#[test]
fn connectivity_regression_at_reference_point() {
    // d=2, n=100 at the window center: a 1000-replication run's own 99%
    // Wilson interval must contain the reference connectivity value
    // 0.4493 +- 0.0011, frozen from a 2x10^5-replication pilot.
    const REFERENCE: f64 = 0.4493;
    let mut config = ExperimentConfig::new(
        ExperimentKind::ConnectivitySweep,
        2,
        100,
        GridSpec::Window(vec![0.0]),
    );
    config.replications = 1000;
    config.master_seed = 0xA4;
    let records = run_experiment(&config).unwrap();
    let rows = summarize(&records, MuRule::WindowLimit).unwrap();
    assert!(
        rows[0].wilson_low <= REFERENCE && REFERENCE <= rows[0].wilson_high,
        "interval [{}, {}] misses the reference {REFERENCE}",
        rows[0].wilson_low,
        rows[0].wilson_high
    );
}

#[test]
fn mixed_guard_and_valid_points_summarize() {
    // Two instances, one over the vertex guard: its records become error
    // records, the other instance still summarizes; conservation holds.
    let mut config = ExperimentConfig::new(
        ExperimentKind::ConnectivitySweep,
        1,
        6,
        GridSpec::Retention(vec![0.5]),
    );
    config
        .instances
        .push(hperc::harness::Instance { d: 2, n: 4000 });
    config.replications = 10;
    config.max_vertices = 1_000_000;
    let records = run_experiment(&config).unwrap();
    assert_eq!(records.len(), 20);
    let errors = records.iter().filter(|r| r.error.is_some()).count();
    assert_eq!(errors, 10);
    assert!(records
        .iter()
        .filter(|r| r.grid_index == 1)
        .all(|r| r.error.is_some()));
    // Summarize fails loudly because one grid point has nothing valid.
    assert!(summarize(&records, MuRule::WindowLimit).is_err());
    // Dropping the dead grid point summarizes cleanly.
    let alive: Vec<_> = records
        .iter()
        .filter(|r| r.grid_index == 0)
        .cloned()
        .collect();
    let rows = summarize(&alive, MuRule::WindowLimit).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].num_errors, 0);
}
