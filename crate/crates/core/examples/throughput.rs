//! Times single crude and RR runs on the GBM quantile benchmark.
//!
//! `cargo run --release -p rrsa-core --example throughput`

use std::time::Instant;

use rrsa_core::{
    run_rr, Coupling, Gbm, QuantileField, RngStream, RrConfig, SaConfig, StepSchedule,
};

fn main() {
    let model = Gbm::new(100.0, 0.05, 0.4, 1.0).unwrap();
    let field = QuantileField::new(0.7).unwrap();
    let schedule = StepSchedule::new(39.0625, 1.0, Some(0.0256)).unwrap();
    let theta_star = model.quantile(0.7).unwrap();
    for (levels, n, steps, coupling) in [
        (1, 235, 200_000u64, Coupling::Shared),
        (2, 20, 500_000, Coupling::Shared),
        (3, 5, 500_000, Coupling::Shared),
        (3, 5, 500_000, Coupling::Independent),
    ] {
        let cfg = SaConfig::new(n, steps, schedule);
        let rr = RrConfig::new(levels).with_coupling(coupling);
        let t = Instant::now();
        let rec = run_rr(
            &field,
            &model,
            &cfg,
            &rr,
            &vec![100.0; levels],
            &mut RngStream::new(1, 0),
        )
        .unwrap();
        let secs = t.elapsed().as_secs_f64();
        println!(
            "R={levels} n={n} M={steps} {coupling:?}: {:.3}s, {:.2} ns/increment, residual {:+.4}",
            secs,
            secs * 1e9 / rec.fine_increments as f64,
            rec.estimator - theta_star
        );
    }
}
