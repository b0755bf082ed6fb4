//! Robbins-Monro recursions: the crude single-level estimator and the
//! `R`-level Richardson-Romberg estimator.
//!
//! The RR estimator runs `R` chains
//!
//! ```text
//! θ^{rn}_{p+1} = θ^{rn}_p - γ_{p+1} H(θ^{rn}_p, X^{rn}_T(p+1)),   r = 1..R
//! ```
//!
//! with one gain sequence, and returns `Σ_r w_r θ^{rn}_M`. In shared mode
//! all chains read the same coupled sample at each step.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extrapolation::compute_weights;
use crate::innovation::{CoupledSampler, Coupling, RngStream};
use crate::model::{SaField, SdeModel};
use crate::schedule::StepSchedule;

/// Multiplier of `|x₀|` used as the default divergence bound.
pub const DEFAULT_DIVERGENCE_FACTOR: f64 = 1e6;

/// Closed interval `[lower, upper]` the iterates are projected onto.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionBox {
    lower: f64,
    upper: f64,
}

impl ProjectionBox {
    /// Either end may be infinite.
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::invalid(
                "projection",
                format!("need lower < upper, got [{lower}, {upper}]"),
            ));
        }
        Ok(ProjectionBox { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    #[inline]
    pub fn project(&self, theta: f64) -> f64 {
        theta.clamp(self.lower, self.upper)
    }
}

/// Parameters shared by crude and RR runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SaConfig {
    /// Base number of Euler steps `n`.
    pub n: usize,
    /// Number of SA iterations `M`.
    pub steps: u64,
    pub schedule: StepSchedule,
    pub projection: Option<ProjectionBox>,
    /// Abort once `|θ|` exceeds this. Defaults to `10⁶ · max(|x₀|, 1)`.
    pub divergence_bound: Option<f64>,
}

impl SaConfig {
    pub fn new(n: usize, steps: u64, schedule: StepSchedule) -> Self {
        SaConfig {
            n,
            steps,
            schedule,
            projection: None,
            divergence_bound: None,
        }
    }

    pub fn with_projection(mut self, projection: ProjectionBox) -> Self {
        self.projection = Some(projection);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps", "M must be at least 1"));
        }
        self.schedule.validate()?;
        if let Some(b) = self.divergence_bound {
            if !(b > 0.0) {
                return Err(Error::invalid("divergence_bound", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrConfig {
    pub levels: usize,
    pub weak_order: f64,
    pub coupling: Coupling,
}

impl RrConfig {
    /// Euler weak order 1, shared coupling.
    pub fn new(levels: usize) -> Self {
        RrConfig {
            levels,
            weak_order: 1.0,
            coupling: Coupling::Shared,
        }
    }

    pub fn with_coupling(mut self, coupling: Coupling) -> Self {
        self.coupling = coupling;
        self
    }
}

/// Outcome of one SA or RR run.
///
/// Equality ignores `elapsed_secs`.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    /// `Σ_r w_r θ^{rn}_M` (equal to `θ^n_M` for a crude run).
    pub estimator: f64,
    pub per_level_final: Vec<f64>,
    pub weights: Vec<f64>,
    pub steps_used: u64,
    pub n: usize,
    pub levels: usize,
    pub seed: u64,
    pub stream_id: u64,
    pub coupled_samples: u64,
    pub fine_increments: u64,
    pub elapsed_secs: f64,
}

impl PartialEq for RunRecord {
    fn eq(&self, other: &Self) -> bool {
        self.estimator.to_bits() == other.estimator.to_bits()
            && self.per_level_final == other.per_level_final
            && self.weights == other.weights
            && self.steps_used == other.steps_used
            && self.n == other.n
            && self.levels == other.levels
            && self.seed == other.seed
            && self.stream_id == other.stream_id
            && self.coupled_samples == other.coupled_samples
            && self.fine_increments == other.fine_increments
    }
}

/// Crude SA estimator `θ^n_M` with `n` Euler steps per innovation.
pub fn run_crude<F, M>(
    field: &F,
    model: &M,
    cfg: &SaConfig,
    theta0: f64,
    rng: &mut RngStream,
) -> Result<RunRecord>
where
    F: SaField + ?Sized,
    M: SdeModel + ?Sized,
{
    run_rr_observed(
        field,
        model,
        cfg,
        &RrConfig::new(1),
        &[theta0],
        rng,
        |_, _| {},
    )
}

/// `R`-level Richardson-Romberg SA estimator.
pub fn run_rr<F, M>(
    field: &F,
    model: &M,
    cfg: &SaConfig,
    rr: &RrConfig,
    theta0: &[f64],
    rng: &mut RngStream,
) -> Result<RunRecord>
where
    F: SaField + ?Sized,
    M: SdeModel + ?Sized,
{
    run_rr_observed(field, model, cfg, rr, theta0, rng, |_, _| {})
}

/// [`run_rr`] that calls `observer(p, θ_p)` after every iteration `p ≥ 1`
/// with the current per-level iterates.
pub fn run_rr_observed<F, M, O>(
    field: &F,
    model: &M,
    cfg: &SaConfig,
    rr: &RrConfig,
    theta0: &[f64],
    rng: &mut RngStream,
    mut observer: O,
) -> Result<RunRecord>
where
    F: SaField + ?Sized,
    M: SdeModel + ?Sized,
    O: FnMut(u64, &[f64]),
{
    cfg.validate()?;
    let weights = compute_weights(rr.levels, rr.weak_order)?;
    if theta0.len() != rr.levels {
        return Err(Error::invalid(
            "theta0",
            format!(
                "expected {} initial values, got {}",
                rr.levels,
                theta0.len()
            ),
        ));
    }
    let bound = cfg
        .divergence_bound
        .unwrap_or(DEFAULT_DIVERGENCE_FACTOR * model.monitored_initial().abs().max(1.0));

    let started = Instant::now();
    let mut sampler = CoupledSampler::new(cfg.n, rr.levels, rr.coupling)?;
    let mut theta: Vec<f64> = match cfg.projection {
        Some(b) => theta0.iter().map(|&t| b.project(t)).collect(),
        None => theta0.to_vec(),
    };

    for p in 1..=cfg.steps {
        let gamma = cfg.schedule.gamma_unchecked(p);
        let terminal = sampler.sample(model, rng)?;
        for (level, (t, &x)) in theta.iter_mut().zip(terminal).enumerate() {
            let mut next = *t - gamma * field.value(*t, x);
            if let Some(b) = cfg.projection {
                next = b.project(next);
            }
            // `!(a <= b)` also catches NaN
            if !(next.abs() <= bound) {
                return Err(Error::Divergence {
                    level: level + 1,
                    iteration: p,
                    value: next.abs(),
                    bound,
                });
            }
            *t = next;
        }
        observer(p, &theta);
    }

    Ok(RunRecord {
        estimator: weights.combine(&theta),
        per_level_final: theta,
        weights: weights.weights().to_vec(),
        steps_used: cfg.steps,
        n: cfg.n,
        levels: rr.levels,
        seed: rng.seed(),
        stream_id: rng.stream_id(),
        coupled_samples: sampler.samples_drawn(),
        fine_increments: sampler.increments_drawn(),
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

/// One row of a bias curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasPoint {
    pub levels: usize,
    pub n: usize,
    /// `Σ_r w_r θ^{rn}_M - θ*`.
    pub residual: f64,
}

/// Signed residual `Σ_r w_r θ^{rn}_M - θ*` on a grid of `(R, n)`.
///
/// Every row at a given `n` uses the stream `(seed, n)`, so rows for
/// different `R` are driven by common random numbers. Rows are computed in
/// parallel on the current rayon pool and returned in `(R, n)` order.
#[allow(clippy::too_many_arguments)]
pub fn bias_curve<F, M>(
    field: &F,
    model: &M,
    levels_list: &[usize],
    n_list: &[usize],
    template: &SaConfig,
    rr: &RrConfig,
    theta0: f64,
    target: f64,
    seed: u64,
) -> Result<Vec<BiasPoint>>
where
    F: SaField + ?Sized,
    M: SdeModel + ?Sized,
{
    let grid: Vec<(usize, usize)> = levels_list
        .iter()
        .flat_map(|&r| n_list.iter().map(move |&n| (r, n)))
        .collect();
    grid.par_iter()
        .map(|&(levels, n)| {
            let cfg = SaConfig {
                n,
                ..template.clone()
            };
            let rr = RrConfig { levels, ..*rr };
            let mut rng = RngStream::new(seed, n as u64);
            let rec = run_rr(field, model, &cfg, &rr, &vec![theta0; levels], &mut rng)?;
            Ok(BiasPoint {
                levels,
                n,
                residual: rec.estimator - target,
            })
        })
        .collect()
}
