//! Multistep MPC closed loop and the trajectory-based suboptimality checks.
//!
//! At each update instant `sigma(k)` the N-step problem is solved from the
//! current state, the first `m_k` controls are applied open loop, and
//! `sigma(k+1) = sigma(k) + m_k`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::schedule::Schedule;
use super::shooting::{solve_finite_horizon, ShootingProblem, SolverSettings};
use super::SystemModel;
use crate::error::{Error, Result};
use crate::format::{ser_round12, sig12};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MpcSettings {
    pub solver: SolverSettings,
    /// Closed-loop steps with `m = 1` run before the schedule starts.
    pub startup_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub n: usize,
    pub state: Vec<f64>,
    pub control: Vec<f64>,
    /// `lambda_n = l(x(n), u(n))`
    pub stage_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpdateRecord {
    pub k: usize,
    /// `sigma(k)`
    pub instant: usize,
    /// `m_k`, possibly shortened at the end of the run.
    pub horizon: usize,
    /// `V_N(x(sigma(k)))`
    pub value: f64,
    pub open_loop: Vec<f64>,
    pub converged: bool,
    pub startup: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedLoopTrace {
    pub model: String,
    pub horizon: usize,
    pub state_dim: usize,
    pub control_dim: usize,
    pub steps: Vec<StepRecord>,
    pub updates: Vec<UpdateRecord>,
    pub final_state: Vec<f64>,
    /// `V_N` at the final state, closing the last update window.
    pub final_value: Option<f64>,
    /// Set when an optimization failed; the trace ends at that update.
    pub failure: Option<String>,
}

impl ClosedLoopTrace {
    /// `V_N` at the instant that ends update `k`'s window.
    fn value_after(&self, k: usize) -> Option<f64> {
        match self.updates.get(k + 1) {
            Some(u) => Some(u.value),
            None => self.final_value,
        }
    }

    /// `phi(n)`: the last update instant at or before step `n`.
    pub fn last_update_at(&self, n: usize) -> Option<usize> {
        self.updates
            .iter()
            .map(|u| u.instant)
            .take_while(|&s| s <= n)
            .last()
            .filter(|_| n < self.steps.len())
    }

    /// Sum of stage costs after the startup phase.
    pub fn realized_cost(&self) -> f64 {
        let start = self.schedule_start();
        self.steps[start..].iter().map(|s| s.stage_cost).sum()
    }

    fn schedule_start(&self) -> usize {
        self.updates
            .iter()
            .find(|u| !u.startup)
            .map_or(self.steps.len(), |u| u.instant)
    }

    /// Trace CSV: `n,x0..,u0..,lambda,update_flag,m_k,V_N`.
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(out, "#{c}")?;
        }
        let mut header = vec!["n".to_string()];
        header.extend((0..self.state_dim).map(|i| format!("x{i}")));
        header.extend((0..self.control_dim).map(|i| format!("u{i}")));
        header.extend(["lambda", "update_flag", "m_k", "V_N"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        let mut next_update = self.updates.iter().peekable();
        for s in &self.steps {
            let mut row = vec![s.n.to_string()];
            row.extend(s.state.iter().map(|v| sig12(*v)));
            row.extend(s.control.iter().map(|v| sig12(*v)));
            row.push(sig12(s.stage_cost));
            match next_update.next_if(|u| u.instant == s.n) {
                Some(u) => {
                    row.push("1".into());
                    row.push(u.horizon.to_string());
                    row.push(sig12(u.value));
                }
                None => row.extend(["0".to_string(), String::new(), String::new()]),
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn bad(name: &'static str, reason: String) -> Error {
    Error::InvalidParameter { name, reason }
}

/// Runs the multistep MPC loop for `total_steps` steps after
/// `settings.startup_steps` startup steps with `m = 1`.
///
/// Input errors are returned as `Err`; optimizer failures end the trace early
/// with `failure` set.
pub fn mpc_run(
    model: &dyn SystemModel,
    horizon: usize,
    schedule: &Schedule,
    x0: &[f64],
    total_steps: usize,
    settings: &MpcSettings,
) -> Result<ClosedLoopTrace> {
    if horizon < 2 {
        return Err(bad(
            "N",
            format!("prediction horizon must be >= 2, got {horizon}"),
        ));
    }
    if schedule.cap() >= horizon {
        return Err(bad(
            "m",
            format!("control horizons must be <= N-1 = {}", horizon - 1),
        ));
    }
    if schedule.span() < total_steps {
        return Err(bad(
            "schedule",
            format!("covers {} steps, {total_steps} requested", schedule.span()),
        ));
    }
    if x0.len() != model.state_dim() {
        return Err(bad(
            "x0",
            format!("expected dimension {}", model.state_dim()),
        ));
    }

    let du = model.control_dim();
    let (_, u_eq) = model.equilibrium();
    let mut guess: Vec<f64> = u_eq.iter().copied().cycle().take(horizon * du).collect();
    let mut trace = ClosedLoopTrace {
        model: model.name().to_string(),
        horizon,
        state_dim: model.state_dim(),
        control_dim: du,
        steps: Vec::new(),
        updates: Vec::new(),
        final_state: x0.to_vec(),
        final_value: None,
        failure: None,
    };

    let startup = settings.startup_steps;
    let plan = std::iter::repeat_n((1, true), startup)
        .chain(schedule.horizons().iter().map(|&m| (m, false)));
    let end = startup + total_steps;
    let mut x = x0.to_vec();
    let mut n = 0;

    for (k, (m, is_startup)) in plan.enumerate() {
        if n >= end {
            break;
        }
        let m = m.min(end - n);
        let sol = match solve_finite_horizon(&ShootingProblem {
            model,
            x0: x.clone(),
            horizon,
            guess: guess.clone(),
            settings: settings.solver,
        }) {
            Ok(sol) => sol,
            Err(e) => {
                trace.failure = Some(format!("update {k} at n={n}: {e}"));
                trace.final_state = x;
                return Ok(trace);
            }
        };
        trace.updates.push(UpdateRecord {
            k,
            instant: n,
            horizon: m,
            value: sol.value,
            open_loop: sol.controls.clone(),
            converged: sol.converged,
            startup: is_startup,
        });
        for j in 0..m {
            let u = sol.control(j, du).to_vec();
            let (next, cost) = match model.step(&x, &u) {
                Ok(r) => r,
                Err(e) => {
                    trace.failure = Some(format!("step n={n}: {e}"));
                    trace.final_state = x;
                    return Ok(trace);
                }
            };
            trace.steps.push(StepRecord {
                n,
                state: x,
                control: u,
                stage_cost: cost,
            });
            x = next;
            n += 1;
        }
        // Shift by m slots and pad with the last control.
        let tail = &sol.controls[m * du..];
        let last = &sol.controls[(horizon - 1) * du..];
        guess = tail
            .iter()
            .chain(last.iter().cycle().take(m * du))
            .copied()
            .collect();
    }

    match solve_finite_horizon(&ShootingProblem {
        model,
        x0: x.clone(),
        horizon,
        guess,
        settings: settings.solver,
    }) {
        Ok(sol) => trace.final_value = Some(sol.value),
        Err(e) => trace.failure = Some(format!("final evaluation at n={n}: {e}")),
    }
    trace.final_state = x;
    Ok(trace)
}

/// Windows usable for auditing: `(update index, V before, V after, sum lambda)`.
fn windows(trace: &ClosedLoopTrace) -> impl Iterator<Item = (usize, f64, f64, f64)> + '_ {
    trace.updates.iter().enumerate().filter_map(move |(k, u)| {
        let after = trace.value_after(k)?;
        let end = u.instant + u.horizon;
        if u.startup || end > trace.steps.len() {
            return None;
        }
        let cost = trace.steps[u.instant..end]
            .iter()
            .map(|s| s.stage_cost)
            .sum();
        Some((k, u.value, after, cost))
    })
}

/// Minimum over update instants of the local suboptimality degree
/// `(V_N(x(n)) - V_N(x(n+m))) / sum_{j<m} (lambda_{n+j} - epsilon)`; a window
/// whose denominator is not strictly positive contributes 1.
///
/// Only full windows of length `m` after startup are used.
pub fn measured_alpha(trace: &ClosedLoopTrace, m: usize, epsilon: f64) -> Result<f64> {
    if epsilon < 0.0 {
        return Err(bad("epsilon", format!("must be >= 0, got {epsilon}")));
    }
    let mut alpha: Option<f64> = None;
    for (k, before, after, cost) in windows(trace) {
        let horizon = trace.updates[k].horizon;
        if horizon != m {
            let is_last = k + 1 == trace.updates.len();
            if is_last && horizon < m {
                continue;
            }
            return Err(bad(
                "trace",
                format!("update {k} uses m_k = {horizon}, expected constant m = {m}"),
            ));
        }
        let denom = cost - epsilon * m as f64;
        let local = if denom > 0.0 {
            (before - after) / denom
        } else {
            1.0
        };
        alpha = Some(alpha.map_or(local, |a: f64| a.min(local)));
    }
    alpha.ok_or_else(|| Error::TraceTooShort(format!("no complete update window of length {m}")))
}

/// Outer minimum over several initial states.
pub fn measured_alpha_over(traces: &[ClosedLoopTrace], m: usize, epsilon: f64) -> Result<f64> {
    let mut alpha = f64::INFINITY;
    for t in traces {
        alpha = alpha.min(measured_alpha(t, m, epsilon)?);
    }
    if traces.is_empty() {
        return Err(Error::TraceTooShort("no traces supplied".into()));
    }
    Ok(alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub update: usize,
    pub instant: usize,
    pub horizon: usize,
    /// `V(sigma(k)) - V(sigma(k+1)) - alpha * sum lambda`; negative here.
    #[serde(serialize_with = "ser_round12")]
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    #[serde(serialize_with = "ser_round12")]
    pub alpha: f64,
    pub tolerance: f64,
    pub windows_checked: usize,
    pub violations: Vec<Violation>,
    #[serde(serialize_with = "ser_round12")]
    pub worst_margin: f64,
    #[serde(serialize_with = "ser_round12")]
    pub realized_cost: f64,
    /// `V_N(x0) / alpha`
    #[serde(serialize_with = "ser_round12")]
    pub cost_bound: f64,
    pub cost_within_bound: bool,
}

impl LyapunovReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.cost_within_bound
    }
}

/// Checks `V_N(x(sigma(k))) - V_N(x(sigma(k+1))) >= alpha * sum lambda - tol`
/// on every window and the accumulated cost against `V_N(x0) / alpha`.
pub fn verify_relaxed_lyapunov(
    trace: &ClosedLoopTrace,
    alpha: f64,
    tolerance: f64,
) -> Result<LyapunovReport> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(bad("alpha", format!("must lie in (0,1], got {alpha}")));
    }
    let mut violations = Vec::new();
    let mut worst = f64::INFINITY;
    let mut checked = 0;
    for (k, before, after, cost) in windows(trace) {
        let margin = before - after - alpha * cost;
        worst = worst.min(margin);
        checked += 1;
        if margin < -tolerance {
            let u = &trace.updates[k];
            violations.push(Violation {
                update: k,
                instant: u.instant,
                horizon: u.horizon,
                margin,
            });
        }
    }
    let v0 = trace
        .updates
        .iter()
        .find(|u| !u.startup)
        .map_or(0.0, |u| u.value);
    let realized = trace.realized_cost();
    let bound = v0 / alpha;
    Ok(LyapunovReport {
        alpha,
        tolerance,
        windows_checked: checked,
        violations,
        worst_margin: if checked == 0 { 0.0 } else { worst },
        realized_cost: realized,
        cost_bound: bound,
        cost_within_bound: realized <= bound + tolerance,
    })
}
