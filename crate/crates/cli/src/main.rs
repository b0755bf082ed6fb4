use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use rrsa_core::harness::{
    emit_bias_curve, resolve, run_experiment, table_report, variance_compare, write_bias_csv,
    write_table_csv, write_variance_csv, Executor, ExperimentConfig, Mode,
};
use rrsa_core::{compute_weights, vandermonde_residual, BudgetPlan, Error};

const EXIT_CONFIG: u8 = 2;
const EXIT_ABORT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "rrsa",
    version,
    about = "Richardson-Romberg extrapolated stochastic approximation"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; the GBM quantile benchmark when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output CSV path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; hardware parallelism when omitted.
    #[arg(long, global = true, env = "RRSA_THREADS")]
    threads: Option<usize>,
    /// Repetitions, overriding the config.
    #[arg(long, global = true)]
    repetitions: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Extrapolation weights for R levels.
    Weights {
        #[arg(long)]
        levels: usize,
        #[arg(long, default_value_t = 1.0)]
        weak_order: f64,
        #[arg(long)]
        json: bool,
    },
    /// Budget (n, M) for a target accuracy.
    Plan {
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 2)]
        levels: usize,
        /// Plan the single-level estimator.
        #[arg(long, conflicts_with = "compare")]
        crude: bool,
        /// Plan every level count from 1 to `--levels`, cheapest first.
        #[arg(long)]
        compare: bool,
    },
    /// Repeated runs of one configuration; per-run CSV plus a JSON summary.
    Run,
    /// Accuracy table over several epsilons.
    Table {
        /// Comma-separated target accuracies.
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        /// RR level count per epsilon; the config's levels when omitted.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', default_values = ["rr", "crude"])]
        modes: Vec<ModeArg>,
    },
    /// Residual of the combined estimator over a grid of (R, n).
    BiasCurve {
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
        /// Coarse step counts, as a list `2,3,5` or a range `2..15`.
        #[arg(long, value_parser = parse_steps_list)]
        n: StepsList,
        /// SA iterations per point.
        #[arg(long)]
        steps: u64,
    },
    /// Estimator variance under shared and independent coupling.
    VarianceCompare {
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        steps: u64,
        #[arg(long, default_value_t = 20)]
        seeds: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Rr,
    Crude,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Rr => Mode::Rr,
            ModeArg::Crude => Mode::Crude,
        }
    }
}

#[derive(Clone, Debug)]
struct StepsList(Vec<usize>);

fn parse_steps_list(s: &str) -> Result<StepsList, String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    let list = if let Some((a, b)) = s.split_once("..") {
        let (lo, hi) = (parse(a)?, parse(b.trim_start_matches('='))?);
        if lo > hi {
            return Err(format!("empty range {s}"));
        }
        (lo..=hi).collect()
    } else {
        s.split(',').map(parse).collect::<Result<Vec<_>, _>>()?
    };
    Ok(StepsList(list))
}

/// Failure categories mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Abort(anyhow::Error),
    Other(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_run_abort() {
            Failure::Abort(e.into())
        } else if matches!(
            e,
            Error::Config(_) | Error::InvalidParameter { .. } | Error::Json(_)
        ) {
            Failure::Config(e.into())
        } else {
            Failure::Other(e.into())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::benchmark(),
    };
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    if let Some(k) = common.repetitions {
        cfg.repetitions = k;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn executor(common: &Common) -> Result<Executor, Failure> {
    Ok(Executor::new(common.threads)?)
}

/// Writes through `f` to `--out` or stdout.
fn emit(
    out: Option<&Path>,
    f: impl FnOnce(&mut dyn Write) -> Result<(), Error>,
) -> Result<(), Failure> {
    match out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = io::BufWriter::new(file);
            f(&mut w)?;
            w.flush().context("flushing output")?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
        }
    }
    Ok(())
}

fn plan_json(p: &BudgetPlan) -> serde_json::Value {
    json!({
        "R": p.levels,
        "epsilon": p.epsilon,
        "n": p.n,
        "M": p.steps,
        "predicted_cost": p.predicted_cost,
        "n_exact": p.n_exact,
        "M_exact": p.steps_exact,
    })
}

fn weights(levels: usize, weak_order: f64, as_json: bool) -> Result<(), Failure> {
    let w = compute_weights(levels, weak_order)?;
    if as_json {
        let value = json!({
            "levels": levels,
            "weak_order": weak_order,
            "weights": w.weights(),
            "damped": w.damped(),
            "residual": vandermonde_residual(&w),
        });
        println!("{}", serde_json::to_string_pretty(&value).context("json")?);
    } else {
        for (r, v) in w.weights().iter().enumerate() {
            println!("w_{} = {v}", r + 1);
        }
        println!("damped = {}", w.damped());
    }
    Ok(())
}

fn plan(
    mut cfg: ExperimentConfig,
    epsilon: f64,
    levels: usize,
    crude: bool,
    compare: bool,
) -> Result<(), Failure> {
    cfg.epsilon = Some(epsilon);
    cfg.n = None;
    cfg.steps = None;
    let level_list: Vec<usize> = if crude {
        vec![1]
    } else if compare {
        (1..=levels).collect()
    } else {
        vec![levels]
    };
    let mut plans = Vec::with_capacity(level_list.len());
    for r in level_list {
        cfg.mode = if r == 1 { Mode::Crude } else { Mode::Rr };
        cfg.levels = r;
        let res = resolve(&cfg)?;
        plans.push(res.plan.ok_or_else(|| anyhow!("no plan for epsilon"))?);
    }
    plans.sort_by(|a, b| a.predicted_cost.total_cmp(&b.predicted_cost));
    let value = if plans.len() == 1 {
        plan_json(&plans[0])
    } else {
        plans.iter().map(plan_json).collect()
    };
    println!("{}", serde_json::to_string_pretty(&value).context("json")?);
    Ok(())
}

fn run(mut cfg: ExperimentConfig, common: &Common) -> Result<(), Failure> {
    cfg.output = common.out.clone().or(cfg.output);
    let exec = executor(common)?;
    info!(
        "running {} repetitions on {} threads",
        cfg.repetitions,
        exec.threads()
    );
    let report = run_experiment(&cfg, &exec)?;
    if cfg.output.is_none() {
        print!("{}", report.to_csv_string()?);
    }
    let summary = json!({
        "mode": report.mode.as_str(),
        "R": report.levels,
        "n": report.n,
        "M": report.steps,
        "repetitions": report.repetitions,
        "completed": report.completed,
        "l1_error": report.l1_error,
        "l1_std_error": report.l1_std_error,
        "reference": report.reference,
        "dh": report.dh,
        "total_fine_increments": report.total_fine_increments,
        "mean_elapsed_secs": report.mean_elapsed_secs,
        "plan": report.plan.as_ref().map(plan_json),
        "partial": report.partial,
        "warnings": report.warnings,
    });
    eprintln!(
        "{}",
        serde_json::to_string_pretty(&summary).context("json")?
    );
    if report.partial {
        let first = report
            .runs
            .iter()
            .find_map(|r| r.error.clone())
            .unwrap_or_default();
        return Err(Failure::Abort(anyhow!(
            "{} of {} runs aborted; first: {first}",
            report.repetitions - report.completed,
            report.repetitions
        )));
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let common = &cli.common;
    match cli.command {
        Command::Weights {
            levels,
            weak_order,
            json,
        } => weights(levels, weak_order, json),
        Command::Plan {
            epsilon,
            levels,
            crude,
            compare,
        } => plan(load_config(common)?, epsilon, levels, crude, compare),
        Command::Run => run(load_config(common)?, common),
        Command::Table {
            epsilons,
            levels,
            modes,
        } => {
            let cfg = load_config(common)?;
            let modes: Vec<Mode> = modes.into_iter().map(Mode::from).collect();
            let rows = table_report(
                &cfg,
                &epsilons,
                levels.as_deref(),
                &modes,
                &executor(common)?,
            )?;
            emit(common.out.as_deref(), |w| write_table_csv(&rows, w))
        }
        Command::BiasCurve { levels, n, steps } => {
            let cfg = load_config(common)?;
            let pts = emit_bias_curve(&cfg, &levels, &n.0, steps, &executor(common)?)?;
            emit(common.out.as_deref(), |w| write_bias_csv(&pts, w))
        }
        Command::VarianceCompare {
            levels,
            n,
            steps,
            seeds,
        } => {
            let cfg = load_config(common)?;
            let cmp = variance_compare(&cfg, levels, n, steps, seeds, &executor(common)?)?;
            eprintln!(
                "var_shared = {:e}, var_independent = {:e}, sign test p = {:.4}",
                cmp.var_shared, cmp.var_independent, cmp.sign_test_p
            );
            emit(common.out.as_deref(), |w| write_variance_csv(&cmp, w))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Abort(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ABORT)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
