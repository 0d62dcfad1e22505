//! Finite-horizon optimal control and closed-loop MPC simulation.

pub mod closed_loop;
pub mod integrate;
pub mod lq;
pub mod pendulum;
pub mod schedule;
pub mod shooting;

use crate::error::Result;

pub use closed_loop::{
    measured_alpha, measured_alpha_over, mpc_run, verify_relaxed_lyapunov, ClosedLoopTrace,
    LyapunovReport, MpcSettings, StepRecord, UpdateRecord, Violation,
};
pub use integrate::{integrate_sampled, ContinuousDynamics};
pub use lq::LqModel;
pub use pendulum::{pendulum_stage_cost, Pendulum};
pub use schedule::{dropout_schedule, dropout_schedule_from, expected_horizon, Schedule};
pub use shooting::{solve_finite_horizon, ShootingProblem, ShootingSolution, SolverSettings};

/// Weight of the squared state-box violation in the shooting objective.
pub const STATE_PENALTY_WEIGHT: f64 = 1e6;

/// Componentwise box; infinite entries leave a coordinate free.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len(), "box bounds of unequal length");
        Self { lower, upper }
    }

    pub fn project(&self, v: &mut [f64]) {
        for ((x, lo), hi) in v.iter_mut().zip(&self.lower).zip(&self.upper) {
            *x = x.clamp(*lo, *hi);
        }
    }

    pub fn squared_violation(&self, v: &[f64]) -> f64 {
        v.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .map(|((x, lo), hi)| {
                let d = (lo - x).max(0.0) + (x - hi).max(0.0);
                d * d
            })
            .sum()
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        self.squared_violation(v) == 0.0
    }
}

/// Discrete-time plant `x+ = f(x, u)` with stage cost `l(x, u) >= 0`.
pub trait SystemModel: Sync {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;

    /// Successor state and the stage cost of applying `u` at `x`.
    fn step(&self, x: &[f64], u: &[f64]) -> Result<(Vec<f64>, f64)>;

    /// `(x*, u*)` with `f(x*, u*) = x*` and `l(x*, u*) = 0`.
    fn equilibrium(&self) -> (Vec<f64>, Vec<f64>);

    fn control_box(&self) -> Option<&BoxBounds> {
        None
    }

    fn state_box(&self) -> Option<&BoxBounds> {
        None
    }
}
