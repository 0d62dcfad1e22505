//! Direct single shooting for `V_N(x) = min_u sum_{n<N} l(x_u(n), u(n))`.
//!
//! The decision vector stacks `u(0)..u(N-1)`. Descent is BFGS on the
//! inverse Hessian with central finite-difference gradients, projected onto
//! the control box, and an Armijo backtracking line search. State boxes enter
//! the objective as a quadratic penalty.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{SystemModel, STATE_PENALTY_WEIGHT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    /// Stop when the projected gradient satisfies `|g|_inf <= tol * sqrt(J)`.
    pub gradient_tolerance: f64,
    /// Stop when two full quasi-Newton steps in a row lower `J` by less than
    /// this and the gradient is within a factor 1e3 of `gradient_tolerance`.
    pub decrease_tolerance: f64,
    pub max_iterations: usize,
    /// Relative central-difference step: `h_i = step * max(|u_i|, 1)`.
    pub fd_step: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-9,
            decrease_tolerance: 1e-10,
            max_iterations: 500,
            fd_step: 1e-6,
        }
    }
}

const STALL_GRADIENT_FACTOR: f64 = 1e3;

pub struct ShootingProblem<'a> {
    pub model: &'a dyn SystemModel,
    pub x0: Vec<f64>,
    pub horizon: usize,
    /// Stacked initial controls, length `horizon * control_dim`.
    pub guess: Vec<f64>,
    pub settings: SolverSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShootingSolution {
    /// Stacked controls `u(0)..u(N-1)`.
    pub controls: Vec<f64>,
    /// `J_N(x, u)` without the state penalty.
    pub value: f64,
    pub penalty: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl ShootingSolution {
    pub fn control(&self, n: usize, control_dim: usize) -> &[f64] {
        &self.controls[n * control_dim..(n + 1) * control_dim]
    }
}

/// `(J_N, state penalty)` for stacked controls from `x0`.
pub fn rollout_cost(model: &dyn SystemModel, x0: &[f64], controls: &[f64]) -> Result<(f64, f64)> {
    let du = model.control_dim();
    let mut x = x0.to_vec();
    let mut cost = 0.0;
    let mut penalty = 0.0;
    for u in controls.chunks(du.max(1)) {
        let (next, l) = model.step(&x, u)?;
        cost += l;
        if let Some(b) = model.state_box() {
            penalty += STATE_PENALTY_WEIGHT * b.squared_violation(&next);
        }
        x = next;
    }
    Ok((cost, penalty))
}

struct Objective<'a> {
    model: &'a dyn SystemModel,
    x0: &'a [f64],
    fd_step: f64,
    evaluations: usize,
}

impl Objective<'_> {
    fn value(&mut self, u: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        let (c, p) = rollout_cost(self.model, self.x0, u)?;
        Ok(c + p)
    }

    fn gradient(&mut self, u: &[f64]) -> Result<DVector<f64>> {
        let mut work = u.to_vec();
        let mut g = DVector::zeros(u.len());
        for i in 0..u.len() {
            let h = self.fd_step * u[i].abs().max(1.0);
            work[i] = u[i] + h;
            let plus = self.value(&work)?;
            work[i] = u[i] - h;
            let minus = self.value(&work)?;
            work[i] = u[i];
            g[i] = (plus - minus) / (2.0 * h);
        }
        Ok(g)
    }
}

/// Gradient with components pinned at an active bound zeroed.
fn projected_gradient(model: &dyn SystemModel, u: &[f64], g: &DVector<f64>) -> DVector<f64> {
    let mut pg = g.clone();
    if let Some(b) = model.control_box() {
        let du = b.lower.len();
        for (i, v) in pg.iter_mut().enumerate() {
            let (lo, hi) = (b.lower[i % du], b.upper[i % du]);
            if (u[i] <= lo && *v > 0.0) || (u[i] >= hi && *v < 0.0) {
                *v = 0.0;
            }
        }
    }
    pg
}

fn project(model: &dyn SystemModel, u: &mut [f64]) {
    if let Some(b) = model.control_box() {
        for chunk in u.chunks_mut(b.lower.len()) {
            b.project(chunk);
        }
    }
}

pub fn solve_finite_horizon(p: &ShootingProblem<'_>) -> Result<ShootingSolution> {
    let du = p.model.control_dim();
    if p.horizon < 1 {
        return Err(Error::param("N", "horizon must be >= 1"));
    }
    if p.guess.len() != p.horizon * du {
        return Err(Error::param(
            "guess",
            format!("expected {} entries, got {}", p.horizon * du, p.guess.len()),
        ));
    }
    if p.x0.len() != p.model.state_dim() {
        return Err(Error::param(
            "x0",
            format!("expected dimension {}", p.model.state_dim()),
        ));
    }
    let s = p.settings;
    let mut obj = Objective {
        model: p.model,
        x0: &p.x0,
        fd_step: s.fd_step,
        evaluations: 0,
    };

    let n = p.guess.len();
    let mut u = p.guess.clone();
    project(p.model, &mut u);
    let mut f = obj.value(&u)?;
    let mut g = obj.gradient(&u)?;
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut fresh_hessian = true;
    let mut converged = false;
    let mut iterations = 0;
    let mut stalled = 0;

    while iterations < s.max_iterations {
        let pg = projected_gradient(p.model, &u, &g);
        if pg.amax() <= s.gradient_tolerance * f.max(0.0).sqrt() {
            converged = true;
            break;
        }
        iterations += 1;

        let mut dir = -(&h_inv * &g);
        if dir.dot(&g) >= 0.0 {
            h_inv = DMatrix::identity(n, n);
            fresh_hessian = true;
            dir = -g.clone();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = u
                .iter()
                .zip(dir.iter())
                .map(|(a, d)| a + step * d)
                .collect();
            project(p.model, &mut trial);
            let moved: f64 = trial
                .iter()
                .zip(&u)
                .zip(g.iter())
                .map(|((t, a), gi)| (t - a) * gi)
                .sum();
            if let Ok(ft) = obj.value(&trial) {
                if ft.is_finite() && ft <= f + 1e-4 * moved && ft <= f {
                    accepted = Some((trial, ft, step));
                    break;
                }
            }
            step *= 0.5;
        }

        let Some((u_new, f_new, taken)) = accepted else {
            if fresh_hessian {
                break;
            }
            h_inv = DMatrix::identity(n, n);
            fresh_hessian = true;
            continue;
        };

        let g_new = obj.gradient(&u_new)?;
        let sv = DVector::from_iterator(n, u_new.iter().zip(&u).map(|(a, b)| a - b));
        let yv = &g_new - &g;
        let sy = sv.dot(&yv);
        if sy > 1e-14 * sv.norm() * yv.norm() && sy > 0.0 {
            if fresh_hessian {
                h_inv = DMatrix::identity(n, n) * (sy / yv.dot(&yv));
            }
            let rho = 1.0 / sy;
            let hy = &h_inv * &yv;
            let yhy = yv.dot(&hy);
            h_inv += (sv.clone() * sv.transpose()) * (rho * rho * yhy + rho)
                - (hy.clone() * sv.transpose() + sv.clone() * hy.transpose()) * rho;
            fresh_hessian = false;
        }

        let decrease = f - f_new;
        u = u_new;
        g = g_new;
        // a backtracked step says the model is off, not that J has flattened
        stalled = if decrease <= s.decrease_tolerance && taken == 1.0 {
            stalled + 1
        } else {
            0
        };
        f = f_new;
        // on stiff problems quasi-Newton can crawl with a large gradient left
        let near = projected_gradient(p.model, &u, &g).amax()
            <= STALL_GRADIENT_FACTOR * s.gradient_tolerance * f.max(0.0).sqrt();
        if stalled >= 2 && near && !fresh_hessian {
            converged = true;
            break;
        }
    }

    let (value, penalty) = rollout_cost(p.model, &p.x0, &u)?;
    Ok(ShootingSolution {
        controls: u,
        value,
        penalty,
        converged,
        iterations,
    })
}
