use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use mpcert::certificate::{alpha_closed_form, CertificateQuery};
use mpcert::format::round12;
use mpcert::netcheck::certify_up_to;
use mpcert::sim::{
    dropout_schedule, measured_alpha, mpc_run, LqModel, MpcSettings, Pendulum, Schedule,
    SolverSettings, SystemModel,
};
use mpcert::{run_network_experiment, ExperimentSpec, GammaSequence, NetworkExperiment};

use crate::output::{config_comment, write_json, write_with, Target};
use crate::{GammaArgs, ModelKind};

pub fn lq_model(kind: ModelKind) -> Result<Option<LqModel>> {
    Ok(match kind {
        ModelKind::LqScalar => Some(LqModel::scalar(2.0, 1.0, 1.0, 1.0)?),
        ModelKind::LqDoubleIntegrator => Some(LqModel::double_integrator(0.5, 0.1)?),
        ModelKind::Pendulum => None,
    })
}

fn build_model(kind: ModelKind) -> Result<Box<dyn SystemModel>> {
    Ok(match lq_model(kind)? {
        Some(lq) => Box::new(lq),
        None => Box::new(Pendulum::default()),
    })
}

fn default_x0(kind: ModelKind) -> Vec<f64> {
    match kind {
        ModelKind::LqScalar => vec![1.0],
        ModelKind::LqDoubleIntegrator => vec![1.0, 0.0],
        ModelKind::Pendulum => vec![std::f64::consts::PI + 1.4, 0.0, 0.0, 0.0],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Constant { m: usize },
    Dropout { p: f64, m_star: usize },
}

/// Run configuration file; flags override its entries.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelKind>,
    #[serde(rename = "N")]
    pub horizon: Option<usize>,
    pub schedule: Option<ScheduleSpec>,
    pub x0: Option<Vec<f64>>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub startup: Option<usize>,
    pub solver: Option<SolverSettings>,
}

#[derive(Debug, Clone, Serialize)]
struct ResolvedRun {
    model: ModelKind,
    #[serde(rename = "N")]
    horizon: usize,
    schedule: ScheduleSpec,
    x0: Vec<f64>,
    steps: usize,
    seed: u64,
    epsilon: f64,
    startup: usize,
    solver: SolverSettings,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub horizon: Option<usize>,
    /// Constant control horizon.
    #[arg(long, conflicts_with = "mstar")]
    pub m: Option<usize>,
    /// Dropout schedule capped at m*; needs `--p`.
    #[arg(long, requires = "p")]
    pub mstar: Option<usize>,
    /// Packet loss probability.
    #[arg(long, requires = "mstar")]
    pub p: Option<f64>,
    /// Seed of the dropout channel.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x0: Option<Vec<f64>>,
    /// Closed-loop steps after startup.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Steps with m = 1 before the schedule starts.
    #[arg(long)]
    pub startup: Option<usize>,
    /// Cost floor for the measured alpha.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Trace CSV path.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn resolve(args: &SimulateArgs) -> Result<ResolvedRun> {
    let file: RunConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    let model = args.model.or(file.model).context("--model is required")?;
    let horizon = args.horizon.or(file.horizon).context("--N is required")?;
    let schedule = match (args.m, args.mstar, args.p) {
        (Some(m), _, _) => ScheduleSpec::Constant { m },
        (None, Some(m_star), Some(p)) => ScheduleSpec::Dropout { p, m_star },
        _ => file.schedule.context("give --m, or --mstar with --p")?,
    };
    Ok(ResolvedRun {
        model,
        horizon,
        schedule,
        x0: args
            .x0
            .clone()
            .or(file.x0)
            .unwrap_or_else(|| default_x0(model)),
        steps: args.steps.or(file.steps).unwrap_or(30),
        seed: args.seed.or(file.seed).unwrap_or(0),
        epsilon: args.epsilon.or(file.epsilon).unwrap_or(0.0),
        startup: args.startup.or(file.startup).unwrap_or(0),
        solver: file.solver.unwrap_or_default(),
    })
}

#[derive(Serialize)]
struct SimulateReport {
    model: String,
    updates: usize,
    steps: usize,
    unconverged_updates: usize,
    horizons: Vec<usize>,
    final_state: Vec<f64>,
    final_value: Option<f64>,
    values_finite: bool,
    min_stage_cost: Option<f64>,
    realized_cost: f64,
    measured_alpha: Option<f64>,
    certified_alpha: Option<f64>,
    failure: Option<String>,
}

fn riccati_certificate(
    lq: &LqModel,
    horizon: usize,
    schedule: ScheduleSpec,
) -> Result<Option<f64>> {
    let gamma = lq.riccati_gamma(horizon)?;
    Ok(match schedule {
        ScheduleSpec::Constant { m } => {
            Some(alpha_closed_form(&CertificateQuery::new(&gamma, horizon, m)?)?.alpha)
        }
        ScheduleSpec::Dropout { m_star, .. } => Some(certify_up_to(&gamma, horizon, m_star)?),
    })
}

pub fn simulate(args: &SimulateArgs, out_dir: Option<&Path>) -> Result<()> {
    let run = resolve(args)?;
    let cfg = json!({ "command": "simulate", "run": serde_json::to_value(&run)? });
    let model = build_model(run.model)?;
    let schedule = match run.schedule {
        ScheduleSpec::Constant { m } => Schedule::constant_covering(m, run.steps)?,
        ScheduleSpec::Dropout { p, m_star } => dropout_schedule(p, m_star, run.steps, run.seed)?,
    };
    let settings = MpcSettings {
        solver: run.solver,
        startup_steps: run.startup,
    };
    let trace = mpc_run(
        model.as_ref(),
        run.horizon,
        &schedule,
        &run.x0,
        run.steps,
        &settings,
    )?;

    if args.trace.is_some() || out_dir.is_some() {
        let target = Target::resolve(args.trace.as_deref(), out_dir, "trace.csv");
        write_with(&target, |out| trace.write_csv(out, &config_comment(&cfg)))?;
    }

    let measured = match run.schedule {
        ScheduleSpec::Constant { m } => measured_alpha(&trace, m, run.epsilon).ok(),
        ScheduleSpec::Dropout { .. } => None,
    };
    let certified = match lq_model(run.model)? {
        Some(lq) => riccati_certificate(&lq, run.horizon, run.schedule)?,
        None => None,
    };
    let values_finite = trace.updates.iter().all(|u| u.value.is_finite())
        && trace.final_value.is_some_and(f64::is_finite);
    let report = SimulateReport {
        model: trace.model.clone(),
        updates: trace.updates.len(),
        steps: trace.steps.len(),
        unconverged_updates: trace.updates.iter().filter(|u| !u.converged).count(),
        horizons: trace
            .updates
            .iter()
            .filter(|u| !u.startup)
            .map(|u| u.horizon)
            .collect(),
        final_state: trace.final_state.iter().copied().map(round12).collect(),
        final_value: trace.final_value.map(round12),
        values_finite,
        min_stage_cost: trace
            .steps
            .iter()
            .map(|s| s.stage_cost)
            .reduce(f64::min)
            .map(round12),
        realized_cost: round12(trace.realized_cost()),
        measured_alpha: measured.map(round12),
        certified_alpha: certified.map(round12),
        failure: trace.failure.clone(),
    };
    write_json(
        &Target::resolve(args.output.as_deref(), out_dir, "simulate.json"),
        &cfg,
        &report,
    )?;
    if let Some(f) = &trace.failure {
        bail!("closed loop stopped early: {f}");
    }
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct NetworkArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub horizon: usize,
    #[arg(long)]
    pub mstar: usize,
    /// Packet loss probability.
    #[arg(long, default_value_t = 0.0)]
    pub p: f64,
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    #[arg(long, default_value_t = 30)]
    pub steps: usize,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x0: Option<Vec<f64>>,
    /// First channel seed; run i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Audit against this alpha instead of the certified one.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Certificate gamma; defaults to the Riccati gamma of LQ models.
    #[command(flatten)]
    #[serde(flatten)]
    pub gamma: GammaArgs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn network(args: &NetworkArgs, out_dir: Option<&Path>) -> Result<()> {
    let cfg = json!({ "command": "network", "args": serde_json::to_value(args)? });
    let model = build_model(args.model)?;
    let gamma: GammaSequence = if args.gamma.is_given() {
        args.gamma.source()?.sequence(args.horizon)?
    } else {
        match lq_model(args.model)? {
            Some(lq) => lq.riccati_gamma(args.horizon)?,
            None => bail!(
                "{:?} needs a certificate gamma (--C/--sigma, --M or --gamma)",
                args.model
            ),
        }
    };
    let spec = ExperimentSpec {
        horizon: args.horizon,
        m_star: args.mstar,
        dropout: args.p,
        seeds: args.seeds,
        steps: args.steps,
        x0: args.x0.clone().unwrap_or_else(|| default_x0(args.model)),
        base_seed: args.seed,
        settings: MpcSettings::default(),
    };
    let mut experiment = NetworkExperiment::new(model.as_ref(), &gamma, spec)?;
    if let Some(a) = args.alpha {
        experiment = experiment.with_alpha(a)?;
    }
    let report = run_network_experiment(&experiment)?;
    write_json(
        &Target::resolve(args.output.as_deref(), out_dir, "network.json"),
        &cfg,
        &report,
    )?;
    if report.failures > 0 {
        bail!("{} of {} runs stopped early", report.failures, args.seeds);
    }
    Ok(())
}
