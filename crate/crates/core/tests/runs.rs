use rrsa_core::{
    bias_curve, compute_weights, fine_grid_factor, run_crude, run_rr, run_rr_observed, stats,
    Coupling, Gbm, ProjectionBox, QuantileField, RngStream, RrConfig, SaConfig, ScalarSde,
    StepSchedule,
};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

fn gbm() -> Gbm {
    Gbm::new(100.0, 0.05, 0.4, 1.0).unwrap()
}

fn field() -> QuantileField {
    QuantileField::new(0.7).unwrap()
}

fn blind_gain() -> StepSchedule {
    StepSchedule::new(39.0625, 1.0, Some(0.0256)).unwrap()
}

#[test]
fn deterministic_field_contracts_to_its_root() {
    let model = ScalarSde::new(0.0, 1.0, |_| 0.0, |_| 0.0).unwrap();
    let cfg = SaConfig::new(1, 10_000, StepSchedule::new(1.0, 1.0, None).unwrap());
    let rec = run_crude(
        &|theta: f64, _x: f64| theta - 1.0,
        &model,
        &cfg,
        0.0,
        &mut RngStream::new(0, 0),
    )
    .unwrap();
    assert!((rec.estimator - 1.0).abs() < 1e-3);
}

#[test]
fn crude_benchmark_lands_near_the_quantile() {
    let cfg = SaConfig::new(100, 1_000_000, StepSchedule::new(60.0, 1.0, None).unwrap());
    let rec = run_crude(&field(), &gbm(), &cfg, 100.0, &mut RngStream::new(1, 0)).unwrap();
    let target = gbm().quantile(0.7).unwrap();
    assert!((rec.estimator - target).abs() < 0.5, "{}", rec.estimator);
}

#[test]
fn projection_keeps_iterates_in_the_box() {
    let schedule = StepSchedule::new(60.0, 1.0, None).unwrap();
    let steps = 100_000;
    let cfg = SaConfig::new(20, steps, schedule)
        .with_projection(ProjectionBox::new(100.0, 110.0).unwrap());
    let mut on_face_late = 0;
    let rec = run_rr_observed(
        &field(),
        &gbm(),
        &cfg,
        &RrConfig::new(1),
        &[100.0],
        &mut RngStream::new(2, 0),
        |p, theta| {
            assert!((100.0..=110.0).contains(&theta[0]));
            if p > steps - 100 && theta[0] == 110.0 {
                on_face_late += 1;
            }
        },
    )
    .unwrap();
    // the root lies above the box: every upward step is clamped to the face,
    // and only the downward steps since the last clamp separate θ_M from it
    assert!(on_face_late > 10);
    let last_gain = schedule.gamma(steps).unwrap();
    assert!(
        rec.estimator >= 110.0 - 20.0 * last_gain,
        "{}",
        rec.estimator
    );
}

#[test]
fn single_level_rr_is_crude() {
    let cfg = SaConfig::new(10, 20_000, blind_gain());
    let crude = run_crude(&field(), &gbm(), &cfg, 100.0, &mut RngStream::new(3, 4)).unwrap();
    let rr = run_rr(
        &field(),
        &gbm(),
        &cfg,
        &RrConfig::new(1),
        &[100.0],
        &mut RngStream::new(3, 4),
    )
    .unwrap();
    assert_eq!(crude, rr);
}

#[test]
fn every_level_reaches_a_constant_state() {
    let model = ScalarSde::new(100.0, 1.0, |_| 0.0, |_| 0.0).unwrap();
    let cfg = SaConfig::new(3, 5_000, StepSchedule::new(1.0, 1.0, None).unwrap());
    let rec = run_rr(
        &|theta: f64, x: f64| theta - x,
        &model,
        &cfg,
        &RrConfig::new(3),
        &[0.0; 3],
        &mut RngStream::new(0, 0),
    )
    .unwrap();
    for t in &rec.per_level_final {
        assert!((t - 100.0).abs() < 1e-9);
    }
    assert!((rec.estimator - 100.0).abs() < 1e-9);
}

#[test]
fn estimator_is_the_weighted_sum_and_counters_match() {
    for coupling in [Coupling::Shared, Coupling::Independent] {
        for levels in 1..=4 {
            let (n, steps) = (3usize, 2_000u64);
            let cfg = SaConfig::new(n, steps, blind_gain());
            let rr = RrConfig::new(levels).with_coupling(coupling);
            let rec = run_rr(
                &field(),
                &gbm(),
                &cfg,
                &rr,
                &vec![100.0; levels],
                &mut RngStream::new(9, 1),
            )
            .unwrap();
            let w = compute_weights(levels, 1.0).unwrap();
            assert_eq!(
                rec.estimator.to_bits(),
                w.combine(&rec.per_level_final).to_bits()
            );
            assert_eq!(rec.coupled_samples, steps);
            let per_step = match coupling {
                Coupling::Shared => fine_grid_factor(levels).unwrap(),
                Coupling::Independent => levels * (levels + 1) / 2,
            };
            assert_eq!(rec.fine_increments, steps * (n * per_step) as u64);

            let again = run_rr(
                &field(),
                &gbm(),
                &cfg,
                &rr,
                &vec![100.0; levels],
                &mut RngStream::new(9, 1),
            )
            .unwrap();
            assert_eq!(rec, again);
        }
    }
}

/// One-sided F-test p-value for `var(b) > var(a)`.
fn f_test(a: &[f64], b: &[f64]) -> f64 {
    let f = stats::sample_variance(b) / stats::sample_variance(a);
    let dist = FisherSnedecor::new((b.len() - 1) as f64, (a.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(f)
}

#[test]
fn shared_coupling_has_smaller_variance() {
    let cfg = SaConfig::new(20, 100_000, blind_gain());
    for levels in [2usize, 3] {
        let mut by_coupling = Vec::new();
        for coupling in [Coupling::Shared, Coupling::Independent] {
            let rr = RrConfig::new(levels).with_coupling(coupling);
            let est: Vec<f64> = (0..20)
                .map(|i| {
                    run_rr(
                        &field(),
                        &gbm(),
                        &cfg,
                        &rr,
                        &vec![100.0; levels],
                        &mut RngStream::new(500, i),
                    )
                    .unwrap()
                    .estimator
                })
                .collect();
            by_coupling.push(est);
        }
        let p = f_test(&by_coupling[0], &by_coupling[1]);
        assert!(p < 0.05, "R={levels}: p = {p}");
    }
}

#[test]
fn single_level_curve_hits_the_noise_floor_at_large_n() {
    let cfg = SaConfig::new(1, 1_000_000, blind_gain());
    let target = gbm().quantile(0.7).unwrap();
    let pts = bias_curve(
        &field(),
        &gbm(),
        &[1],
        &[200],
        &cfg,
        &RrConfig::new(1),
        100.0,
        target,
        4,
    )
    .unwrap();
    // Euler bias ≈ 0.05 at n = 200, noise sd ≈ 0.06 at M = 10⁶
    assert!(pts[0].residual.abs() < 0.25, "{}", pts[0].residual);
}

#[test]
fn three_levels_at_four_steps() {
    let cfg = SaConfig::new(1, 10_000_000, blind_gain());
    let target = gbm().quantile(0.7).unwrap();
    let pts = bias_curve(
        &field(),
        &gbm(),
        &[3],
        &[4],
        &cfg,
        &RrConfig::new(3),
        100.0,
        target,
        0,
    )
    .unwrap();
    assert!(pts[0].residual.abs() < 0.1, "{}", pts[0].residual);
}
