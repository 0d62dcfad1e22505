//! Networked MPC under packet dropouts: certify `alpha_star` over all control
//! horizons up to `m_star`, then audit dropout-scheduled closed loops.

use rayon::prelude::*;
use serde::Serialize;

use crate::certificate::{alpha_closed_form, CertificateQuery};
use crate::controllability::GammaSequence;
use crate::error::{Error, Result};
use crate::format::{ser_round12, ser_round12_opt};
use crate::sim::{
    dropout_schedule, expected_horizon, mpc_run, verify_relaxed_lyapunov, MpcSettings, SystemModel,
};

/// Absolute slack on the relaxed Lyapunov inequality.
pub const LYAPUNOV_TOLERANCE: f64 = 1e-6;

/// `min_{m = 1..m_star} alpha_{N,m}` by the closed form.
pub fn certify_up_to(gamma: &GammaSequence, horizon: usize, m_star: usize) -> Result<f64> {
    if m_star == 0 || m_star >= horizon {
        return Err(Error::param(
            "m_star",
            format!("need 1 <= m_star <= N-1, got {m_star} with N={horizon}"),
        ));
    }
    Ok(certify_profile(gamma, horizon, m_star)?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

/// `alpha_{N,m}` for `m = 1..=m_star`.
pub fn certify_profile(gamma: &GammaSequence, horizon: usize, m_star: usize) -> Result<Vec<f64>> {
    (1..=m_star)
        .map(|m| Ok(alpha_closed_form(&CertificateQuery::new(gamma, horizon, m)?)?.alpha))
        .collect()
}

pub struct NetworkExperiment<'a> {
    model: &'a dyn SystemModel,
    horizon: usize,
    m_star: usize,
    dropout: f64,
    seeds: usize,
    steps: usize,
    x0: Vec<f64>,
    base_seed: u64,
    settings: MpcSettings,
    certified: f64,
    alpha_star: f64,
}

impl std::fmt::Debug for NetworkExperiment<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NetworkExperiment")
            .field("model", &self.model.name())
            .field("horizon", &self.horizon)
            .field("m_star", &self.m_star)
            .field("dropout", &self.dropout)
            .field("seeds", &self.seeds)
            .field("alpha_star", &self.alpha_star)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub horizon: usize,
    pub m_star: usize,
    pub dropout: f64,
    pub seeds: usize,
    pub steps: usize,
    pub x0: Vec<f64>,
    pub base_seed: u64,
    pub settings: MpcSettings,
}

impl<'a> NetworkExperiment<'a> {
    /// Certifies `alpha_star` from `gamma`; fails unless it is positive.
    pub fn new(
        model: &'a dyn SystemModel,
        gamma: &GammaSequence,
        spec: ExperimentSpec,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&spec.dropout) {
            return Err(Error::param(
                "p",
                format!("must lie in [0,1), got {}", spec.dropout),
            ));
        }
        if spec.seeds == 0 || spec.steps == 0 {
            return Err(Error::param("seeds", "need at least one seed and one step"));
        }
        let certified = certify_up_to(gamma, spec.horizon, spec.m_star)?;
        if !(certified > 0.0) {
            return Err(Error::param(
                "alpha_star",
                format!(
                    "certificate {certified} is not positive for N={}, m_star={}",
                    spec.horizon, spec.m_star
                ),
            ));
        }
        Ok(Self {
            model,
            horizon: spec.horizon,
            m_star: spec.m_star,
            dropout: spec.dropout,
            seeds: spec.seeds,
            steps: spec.steps,
            x0: spec.x0,
            base_seed: spec.base_seed,
            settings: spec.settings,
            certified,
            alpha_star: certified,
        })
    }

    /// Audits against `alpha` instead of the certified value.
    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::param(
                "alpha",
                format!("must lie in (0,1], got {alpha}"),
            ));
        }
        self.alpha_star = alpha;
        Ok(self)
    }

    pub fn alpha_star(&self) -> f64 {
        self.alpha_star
    }

    pub fn certified_alpha(&self) -> f64 {
        self.certified
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedReport {
    pub seed: u64,
    pub updates: usize,
    #[serde(serialize_with = "ser_round12")]
    pub mean_horizon: f64,
    pub violations: usize,
    #[serde(serialize_with = "ser_round12")]
    pub worst_margin: f64,
    #[serde(serialize_with = "ser_round12")]
    pub realized_cost: f64,
    #[serde(serialize_with = "ser_round12")]
    pub cost_bound: f64,
    #[serde(serialize_with = "ser_round12")]
    pub cost_ratio: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationRecord {
    pub seed: u64,
    pub update: usize,
    pub instant: usize,
    pub horizon: usize,
    #[serde(serialize_with = "ser_round12")]
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkReport {
    #[serde(serialize_with = "ser_round12")]
    pub alpha_star: f64,
    #[serde(serialize_with = "ser_round12")]
    pub certified_alpha: f64,
    #[serde(serialize_with = "ser_round12")]
    pub expected_horizon: f64,
    pub tolerance: f64,
    pub seeds: Vec<SeedReport>,
    pub violations: Vec<ViolationRecord>,
    #[serde(serialize_with = "ser_round12_opt")]
    pub worst_margin: Option<f64>,
    /// `max realized / (V_N(x0) / alpha_star)`
    #[serde(serialize_with = "ser_round12_opt")]
    pub cost_ratio_max: Option<f64>,
    pub failures: usize,
}

impl NetworkReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
            && self.failures == 0
            && self.cost_ratio_max.is_some_and(|r| r <= 1.0)
    }
}

/// Runs one closed loop per seed `base_seed + i` and aggregates the audit.
pub fn run_network_experiment(e: &NetworkExperiment<'_>) -> Result<NetworkReport> {
    let per_seed = (0..e.seeds)
        .into_par_iter()
        .map(|i| run_seed(e, e.base_seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;

    let mut seeds = Vec::with_capacity(per_seed.len());
    let mut violations = Vec::new();
    for (report, v) in per_seed {
        violations.extend(v);
        seeds.push(report);
    }
    let audited = seeds.iter().filter(|s| s.failure.is_none());
    let worst_margin = audited.clone().map(|s| s.worst_margin).reduce(f64::min);
    let cost_ratio_max = audited.map(|s| s.cost_ratio).reduce(f64::max);
    Ok(NetworkReport {
        alpha_star: e.alpha_star,
        certified_alpha: e.certified,
        expected_horizon: expected_horizon(e.dropout, e.m_star),
        tolerance: LYAPUNOV_TOLERANCE,
        failures: seeds.iter().filter(|s| s.failure.is_some()).count(),
        seeds,
        violations,
        worst_margin,
        cost_ratio_max,
    })
}

fn run_seed(e: &NetworkExperiment<'_>, seed: u64) -> Result<(SeedReport, Vec<ViolationRecord>)> {
    // every m_k >= 1, so `steps` updates always cover the run
    let schedule = dropout_schedule(e.dropout, e.m_star, e.steps, seed)?;
    let trace = mpc_run(e.model, e.horizon, &schedule, &e.x0, e.steps, &e.settings)?;
    let audit = verify_relaxed_lyapunov(&trace, e.alpha_star, LYAPUNOV_TOLERANCE)?;
    let used: Vec<usize> = trace
        .updates
        .iter()
        .filter(|u| !u.startup)
        .map(|u| u.horizon)
        .collect();
    let mean_horizon = used.iter().sum::<usize>() as f64 / used.len().max(1) as f64;
    let cost_ratio = if audit.cost_bound > 0.0 {
        audit.realized_cost / audit.cost_bound
    } else {
        0.0
    };
    let violations = audit
        .violations
        .iter()
        .map(|v| ViolationRecord {
            seed,
            update: v.update,
            instant: v.instant,
            horizon: v.horizon,
            margin: v.margin,
        })
        .collect();
    Ok((
        SeedReport {
            seed,
            updates: used.len(),
            mean_horizon,
            violations: audit.violations.len(),
            worst_margin: audit.worst_margin,
            realized_cost: audit.realized_cost,
            cost_bound: audit.cost_bound,
            cost_ratio,
            failure: trace.failure,
        },
        violations,
    ))
}
