//! Experiment orchestration: JSON configuration, repeated runs over seeds,
//! `L¹` error aggregation and CSV emission.
//!
//! Repetition `i` always draws from the stream `(base_seed, base_seed + i)`
//! and results are reduced in index order, so reports do not depend on the
//! number of worker threads.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{self, BiasPoint, ProjectionBox, RrConfig, RunRecord, SaConfig};
use crate::error::{Error, Result};
use crate::extrapolation::MAX_LEVELS;
use crate::innovation::{Coupling, RngStream};
use crate::model::{estimate_density, Gbm, QuantileField};
use crate::planner::{plan_rr, BudgetPlan, PlannerConstants};
use crate::schedule::StepSchedule;
use crate::stats;

/// Pilot settings for estimating `Dh(θ*)` when no override is given.
pub const DENSITY_PILOT_STEPS: usize = 100;
pub const DENSITY_PILOT_SAMPLES: u64 = 1000;
pub const DENSITY_PILOT_EPS: f64 = 0.1;

/// Stream reserved for the density pilot.
const PILOT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelConfig {
    Gbm {
        x0: f64,
        rate: f64,
        sigma: f64,
        horizon: f64,
        level: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dh_override: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Defaults to `1/λ̲`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    #[serde(default = "one")]
    pub beta: f64,
    /// Defaults to the `Dh(θ*)` estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_lower: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Crude,
    #[default]
    Rr,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Crude => "crude",
            Mode::Rr => "rr",
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_levels() -> usize {
    2
}

fn default_repetitions() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub mode: Mode,
    /// Number of RR levels; ignored in crude mode.
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub coupling: Coupling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "one")]
    pub cost_unit: f64,
    #[serde(default = "one")]
    pub weak_order: f64,
    #[serde(default = "one")]
    pub c_tilde: f64,
    /// Initial iterate for every level; defaults to `x₀`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence_bound: Option<f64>,
    /// Reference root for `L¹` errors; defaults to the analytic quantile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
}

impl ExperimentConfig {
    /// The geometric Brownian motion benchmark (`x₀ = 100`, `r = 0.05`,
    /// `σ = 0.4`, `T = 1`, `ℓ = 0.7`) with `Dh(θ*)` pinned to `2.56e-2` and
    /// the blind gain `γ₀ = 1/Dh`.
    pub fn benchmark() -> Self {
        ExperimentConfig {
            model: ModelConfig::Gbm {
                x0: 100.0,
                rate: 0.05,
                sigma: 0.4,
                horizon: 1.0,
                level: 0.7,
                dh_override: Some(2.56e-2),
            },
            schedule: ScheduleConfig {
                gamma0: None,
                beta: 1.0,
                lambda_lower: None,
            },
            mode: Mode::Rr,
            levels: 2,
            epsilon: Some(0.5),
            n: None,
            steps: None,
            repetitions: default_repetitions(),
            base_seed: 0,
            coupling: Coupling::Shared,
            output: None,
            cost_unit: 1.0,
            weak_order: 1.0,
            c_tilde: 1.0,
            theta0: None,
            projection: None,
            divergence_bound: None,
            reference: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        match (self.epsilon, self.n, self.steps) {
            (Some(e), None, None) => {
                if !(e > 0.0) || !e.is_finite() {
                    return Err(Error::Config(format!("epsilon must be positive, got {e}")));
                }
            }
            (None, Some(n), Some(m)) => {
                if n == 0 || m == 0 {
                    return Err(Error::Config("n and steps must be at least 1".into()));
                }
            }
            _ => {
                return Err(Error::Config(
                    "give exactly one of `epsilon` or both `n` and `steps`".into(),
                ))
            }
        }
        if self.mode == Mode::Rr && (self.levels == 0 || self.levels > MAX_LEVELS) {
            return Err(Error::Config(format!(
                "levels must be in 1..={MAX_LEVELS}, got {}",
                self.levels
            )));
        }
        let ModelConfig::Gbm { level, .. } = self.model;
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Config(format!(
                "level must lie in (0, 1), got {level}"
            )));
        }
        Ok(())
    }

    /// Levels actually simulated.
    pub fn effective_levels(&self) -> usize {
        match self.mode {
            Mode::Crude => 1,
            Mode::Rr => self.levels,
        }
    }
}

/// Everything needed to launch runs, derived from an [`ExperimentConfig`].
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub model: Gbm,
    pub field: QuantileField,
    pub sa: SaConfig,
    pub rr: RrConfig,
    pub theta0: f64,
    pub reference: f64,
    pub dh: Option<f64>,
    pub plan: Option<BudgetPlan>,
    pub warnings: Vec<String>,
}

fn config_err(e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => {
            Error::Config(format!("invalid `{name}`: {reason}"))
        }
        other => other,
    }
}

/// Resolves model, schedule and budget. `Dh(θ*)` is only estimated when the
/// planner or the default gain needs it.
pub fn resolve(cfg: &ExperimentConfig) -> Result<ResolvedExperiment> {
    cfg.validate()?;
    let ModelConfig::Gbm {
        x0,
        rate,
        sigma,
        horizon,
        level,
        dh_override,
    } = cfg.model;
    let model = Gbm::new(x0, rate, sigma, horizon).map_err(config_err)?;
    let field = QuantileField::new(level).map_err(config_err)?;
    let reference = match cfg.reference {
        Some(r) => r,
        None => model.quantile(level).map_err(config_err)?,
    };
    let mut warnings = Vec::new();

    let needs_dh = cfg.epsilon.is_some()
        || cfg.schedule.gamma0.is_none()
        || cfg.schedule.lambda_lower.is_none();
    let dh = if !needs_dh {
        None
    } else if let Some(d) = dh_override {
        Some(d)
    } else if cfg.epsilon.is_none() && cfg.schedule.gamma0.is_some() {
        // only λ̲ is missing; leave it unknown rather than pay for a pilot
        None
    } else {
        let mut rng = RngStream::new(cfg.base_seed, PILOT_STREAM);
        let est = estimate_density(
            &model,
            reference,
            DENSITY_PILOT_STEPS,
            DENSITY_PILOT_SAMPLES,
            DENSITY_PILOT_EPS,
            &mut rng,
        )?;
        if est.value <= 0.0 {
            return Err(Error::Config(
                "pilot density estimate is zero; set `dh_override`".into(),
            ));
        }
        let dh = est.value / (1.0 - level);
        info!(
            "estimated Dh(θ*) = {dh:.4e} (density {:.4e} ± {:.1e})",
            est.value, est.std_error
        );
        Some(dh)
    };

    let lambda_lower = cfg.schedule.lambda_lower.or(dh);
    let gamma0 = match (cfg.schedule.gamma0, lambda_lower) {
        (Some(g), _) => g,
        (None, Some(l)) => 1.0 / l,
        (None, None) => return Err(Error::Config("cannot default gamma0 without Dh".into())),
    };
    let schedule =
        StepSchedule::new(gamma0, cfg.schedule.beta, lambda_lower).map_err(config_err)?;
    warnings.extend(schedule.validate()?.into_iter().map(|w| w.to_string()));

    let levels = cfg.effective_levels();
    let (n, steps, plan) = match cfg.epsilon {
        Some(eps) => {
            let dh = dh.expect("Dh resolved whenever epsilon is set");
            let pc = PlannerConstants {
                weak_order: cfg.weak_order,
                beta: schedule.beta,
                gamma0,
                lambda_lower: lambda_lower.unwrap_or(dh),
                c_tilde: cfg.c_tilde,
                dh,
                level,
                cost_unit: cfg.cost_unit,
            };
            let plan = plan_rr(&pc, levels, eps).map_err(config_err)?;
            (plan.n as usize, plan.steps, Some(plan))
        }
        None => (cfg.n.unwrap(), cfg.steps.unwrap(), None),
    };

    let mut sa = SaConfig::new(n, steps, schedule);
    if let Some([lo, hi]) = cfg.projection {
        sa.projection = Some(ProjectionBox::new(lo, hi).map_err(config_err)?);
    }
    sa.divergence_bound = cfg.divergence_bound;
    let rr = RrConfig {
        levels,
        weak_order: cfg.weak_order,
        coupling: cfg.coupling,
    };
    for w in &warnings {
        warn!("{w}");
    }
    Ok(ResolvedExperiment {
        model,
        field,
        sa,
        rr,
        theta0: cfg.theta0.unwrap_or(x0),
        reference,
        dh,
        plan,
        warnings,
    })
}

/// Worker pool for repetitions.
pub struct Executor {
    pool: rayon::ThreadPool,
}

impl Executor {
    /// `None` uses the hardware parallelism.
    pub fn new(threads: Option<usize>) -> Result<Self> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            if t == 0 {
                return Err(Error::Config("threads must be at least 1".into()));
            }
            builder = builder.num_threads(t);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Executor { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn install<R: Send>(&self, op: impl FnOnce() -> R + Send) -> R {
        self.pool.install(op)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub index: usize,
    pub seed: u64,
    pub stream_id: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record: Option<RunRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub mode: Mode,
    pub levels: usize,
    pub n: usize,
    pub steps: u64,
    pub coupling: Coupling,
    pub repetitions: usize,
    pub base_seed: u64,
    pub reference: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<BudgetPlan>,
    pub runs: Vec<RunOutcome>,
    pub completed: usize,
    /// Mean `|Θ - θ*|` over completed runs.
    pub l1_error: f64,
    /// Standard error of `l1_error`.
    pub l1_std_error: f64,
    pub mean_elapsed_secs: f64,
    pub total_fine_increments: u64,
    /// Some run aborted.
    pub partial: bool,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn estimators(&self) -> Vec<f64> {
        self.runs
            .iter()
            .filter_map(|r| r.record.as_ref().map(|rec| rec.estimator))
            .collect()
    }

    /// Per-run CSV: one row per repetition, no wall-clock columns.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "run".to_string(),
            "seed".into(),
            "stream_id".into(),
            "status".into(),
            "estimator".into(),
            "abs_error".into(),
            "fine_increments".into(),
        ];
        header.extend((1..=self.levels).map(|r| format!("theta_{r}")));
        header.push("error".into());
        w.write_record(&header)?;
        for run in &self.runs {
            let mut row = vec![
                run.index.to_string(),
                run.seed.to_string(),
                run.stream_id.to_string(),
            ];
            match &run.record {
                Some(rec) => {
                    row.push("ok".into());
                    row.push(rec.estimator.to_string());
                    row.push((rec.estimator - self.reference).abs().to_string());
                    row.push(rec.fine_increments.to_string());
                    row.extend(rec.per_level_final.iter().map(f64::to_string));
                    row.push(String::new());
                }
                None => {
                    row.push("aborted".into());
                    row.extend(std::iter::repeat_n(String::new(), 3 + self.levels));
                    row.push(run.error.clone().unwrap_or_default());
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Runs `cfg.repetitions` independent repetitions and aggregates them. Run
/// aborts are recorded per repetition and flag the report as partial. The
/// per-run CSV is written to `cfg.output` when set.
pub fn run_experiment(cfg: &ExperimentConfig, exec: &Executor) -> Result<ExperimentReport> {
    let res = resolve(cfg)?;
    let levels = res.rr.levels;
    let theta0 = vec![res.theta0; levels];

    let runs: Vec<RunOutcome> = exec.install(|| {
        (0..cfg.repetitions)
            .into_par_iter()
            .map(|i| {
                let stream_id = cfg.base_seed.wrapping_add(i as u64);
                let mut rng = RngStream::new(cfg.base_seed, stream_id);
                let result =
                    engine::run_rr(&res.field, &res.model, &res.sa, &res.rr, &theta0, &mut rng);
                let (record, error) = match result {
                    Ok(rec) => (Some(rec), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                RunOutcome {
                    index: i,
                    seed: cfg.base_seed,
                    stream_id,
                    record,
                    error,
                }
            })
            .collect()
    });

    let abs_errors: Vec<f64> = runs
        .iter()
        .filter_map(|r| r.record.as_ref())
        .map(|rec| (rec.estimator - res.reference).abs())
        .collect();
    let completed = abs_errors.len();
    let elapsed: Vec<f64> = runs
        .iter()
        .filter_map(|r| r.record.as_ref().map(|rec| rec.elapsed_secs))
        .collect();
    let total_fine_increments = runs
        .iter()
        .filter_map(|r| r.record.as_ref().map(|rec| rec.fine_increments))
        .sum();
    for r in runs.iter().filter(|r| r.error.is_some()) {
        warn!(
            "run {} aborted: {}",
            r.index,
            r.error.as_deref().unwrap_or("")
        );
    }

    let report = ExperimentReport {
        mode: cfg.mode,
        levels,
        n: res.sa.n,
        steps: res.sa.steps,
        coupling: cfg.coupling,
        repetitions: cfg.repetitions,
        base_seed: cfg.base_seed,
        reference: res.reference,
        dh: res.dh,
        plan: res.plan,
        completed,
        l1_error: stats::mean(&abs_errors),
        l1_std_error: if completed > 1 {
            stats::std_error(&abs_errors)
        } else {
            0.0
        },
        mean_elapsed_secs: stats::mean(&elapsed),
        total_fine_increments,
        partial: completed < cfg.repetitions,
        warnings: res.warnings,
        runs,
    };

    if let Some(path) = &cfg.output {
        report.write_csv(fs::File::create(path)?)?;
    }
    Ok(report)
}

/// One row of an accuracy table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub mode: Mode,
    pub epsilon: f64,
    pub l1_error: f64,
    pub time_s: f64,
    pub levels: usize,
    pub n: usize,
    pub steps: u64,
    pub predicted_cost: f64,
    pub fine_increments: u64,
}

/// Runs one experiment per `(mode, epsilon)`, with `(n, M)` from the planner.
/// `rr_levels[i]`, when given, is the RR order used at `epsilons[i]`;
/// otherwise `base.levels` is used throughout.
pub fn table_report(
    base: &ExperimentConfig,
    epsilons: &[f64],
    rr_levels: Option<&[usize]>,
    modes: &[Mode],
    exec: &Executor,
) -> Result<Vec<TableRow>> {
    if let Some(l) = rr_levels {
        if l.len() != epsilons.len() {
            return Err(Error::Config(format!(
                "{} levels given for {} epsilons",
                l.len(),
                epsilons.len()
            )));
        }
    }
    let mut rows = Vec::new();
    for &mode in modes {
        for (i, &eps) in epsilons.iter().enumerate() {
            let mut cfg = base.clone();
            cfg.mode = mode;
            cfg.epsilon = Some(eps);
            cfg.n = None;
            cfg.steps = None;
            cfg.output = None;
            if let Some(l) = rr_levels {
                cfg.levels = l[i];
            }
            let report = run_experiment(&cfg, exec)?;
            let plan = report.plan.expect("planned from epsilon");
            rows.push(TableRow {
                mode,
                epsilon: eps,
                l1_error: report.l1_error,
                time_s: report.mean_elapsed_secs,
                levels: report.levels,
                n: report.n,
                steps: report.steps,
                predicted_cost: plan.predicted_cost,
                fine_increments: report.total_fine_increments,
            });
        }
    }
    Ok(rows)
}

/// `epsilon,l1_error,time_s,R,n,M`. `time_s` is the mean wall-clock time of a
/// single run and is the only machine-dependent column.
pub fn write_table_csv<W: Write>(rows: &[TableRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epsilon", "l1_error", "time_s", "R", "n", "M"])?;
    for r in rows {
        w.write_record([
            r.epsilon.to_string(),
            r.l1_error.to_string(),
            r.time_s.to_string(),
            r.levels.to_string(),
            r.n.to_string(),
            r.steps.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Bias curve `Σ w_r θ^{rn}_M - θ*` over `levels_list × n_list` using the
/// model and schedule of `cfg` and `steps` iterations per point.
pub fn emit_bias_curve(
    cfg: &ExperimentConfig,
    levels_list: &[usize],
    n_list: &[usize],
    steps: u64,
    exec: &Executor,
) -> Result<Vec<BiasPoint>> {
    let mut probe = cfg.clone();
    probe.epsilon = None;
    probe.n = Some(1);
    probe.steps = Some(steps);
    let res = resolve(&probe)?;
    exec.install(|| {
        engine::bias_curve(
            &res.field,
            &res.model,
            levels_list,
            n_list,
            &res.sa,
            &res.rr,
            res.theta0,
            res.reference,
            cfg.base_seed,
        )
    })
}

/// `R,n,residual`.
pub fn write_bias_csv<W: Write>(points: &[BiasPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["R", "n", "residual"])?;
    for p in points {
        w.write_record([
            p.levels.to_string(),
            p.n.to_string(),
            p.residual.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceComparison {
    pub levels: usize,
    pub n: usize,
    pub steps: u64,
    pub shared: Vec<f64>,
    pub independent: Vec<f64>,
    pub var_shared: f64,
    pub var_independent: f64,
    /// Seeds whose squared deviation from the mode mean is larger under
    /// independent coupling than under shared coupling.
    pub independent_wins: usize,
    /// One-sided sign-test p-value for `independent_wins`.
    pub sign_test_p: f64,
}

/// Runs the RR estimator under both couplings for `seeds` paired seeds and
/// compares the sample variances of `Θ_M`.
pub fn variance_compare(
    cfg: &ExperimentConfig,
    levels: usize,
    n: usize,
    steps: u64,
    seeds: usize,
    exec: &Executor,
) -> Result<VarianceComparison> {
    if seeds < 2 {
        return Err(Error::Config(
            "need at least 2 seeds to compare variances".into(),
        ));
    }
    let mut probe = cfg.clone();
    probe.mode = Mode::Rr;
    probe.levels = levels;
    probe.epsilon = None;
    probe.n = Some(n);
    probe.steps = Some(steps);
    probe.repetitions = seeds;
    probe.output = None;

    let mut estimates = Vec::with_capacity(2);
    for coupling in [Coupling::Shared, Coupling::Independent] {
        probe.coupling = coupling;
        let report = run_experiment(&probe, exec)?;
        if report.partial {
            return Err(report
                .runs
                .iter()
                .find_map(|r| r.error.clone())
                .map(|e| Error::Config(format!("run aborted: {e}")))
                .unwrap_or_else(|| Error::Config("run aborted".into())));
        }
        estimates.push(report.estimators());
    }
    let independent = estimates.pop().unwrap();
    let shared = estimates.pop().unwrap();

    let (ms, mi) = (stats::mean(&shared), stats::mean(&independent));
    let independent_wins = shared
        .iter()
        .zip(&independent)
        .filter(|(s, i)| (*i - mi).powi(2) > (*s - ms).powi(2))
        .count();
    Ok(VarianceComparison {
        levels,
        n,
        steps,
        var_shared: stats::sample_variance(&shared),
        var_independent: stats::sample_variance(&independent),
        sign_test_p: stats::sign_test_p_value(independent_wins, seeds),
        independent_wins,
        shared,
        independent,
    })
}

/// `row_type,coupling,run,value`: `2·seeds` estimator rows followed by two
/// variance rows.
pub fn write_variance_csv<W: Write>(cmp: &VarianceComparison, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row_type", "coupling", "run", "value"])?;
    for (name, values) in [("shared", &cmp.shared), ("independent", &cmp.independent)] {
        for (i, v) in values.iter().enumerate() {
            w.write_record(["estimator", name, &i.to_string(), &v.to_string()])?;
        }
    }
    w.write_record(["variance", "shared", "", &cmp.var_shared.to_string()])?;
    w.write_record([
        "variance",
        "independent",
        "",
        &cmp.var_independent.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}
