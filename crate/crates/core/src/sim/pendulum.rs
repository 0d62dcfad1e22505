//! Sampled-data inverted pendulum on a cart.
//!
//! `x1` is the angle with `x1 = 0` upright, `x2` its rate, `x3`, `x4` cart
//! position and velocity; the control is the cart acceleration.

use std::f64::consts::PI;

use super::integrate::{rk4_nodes, simpson, ContinuousDynamics, SUBSTEPS};
use super::{BoxBounds, SystemModel};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Pendulum {
    pub gravity: f64,
    pub length: f64,
    /// Rotational friction `k_R`.
    pub rotational_friction: f64,
    /// Air friction `k_A`.
    pub air_friction: f64,
    pub sample_time: f64,
    state_box: BoxBounds,
}

impl Default for Pendulum {
    fn default() -> Self {
        Self {
            gravity: 9.81,
            length: 10.0,
            rotational_friction: 0.01,
            air_friction: 0.01,
            sample_time: 0.05,
            state_box: BoxBounds::new(
                vec![
                    -2.0 * PI + 0.01,
                    f64::NEG_INFINITY,
                    f64::NEG_INFINITY,
                    f64::NEG_INFINITY,
                ],
                vec![2.0 * PI - 0.01, f64::INFINITY, f64::INFINITY, f64::INFINITY],
            ),
        }
    }
}

/// `sgn` with `sgn(0) = 0`.
fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl ContinuousDynamics for Pendulum {
    fn state_dim(&self) -> usize {
        4
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn derivative(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        let (g, l) = (self.gravity, self.length);
        // sin(x1 + pi) = -sin(x1), cos(x1 + pi) = -cos(x1); adding pi in
        // floating point would leave x* = 0 off equilibrium by ~1e-16
        let (s, c) = x[0].sin_cos();
        dx[0] = x[1];
        dx[1] = g / l * s - self.air_friction / l * x[1] * x[1].abs() + u[0] * c
            - self.rotational_friction * sgn(x[1]);
        dx[2] = x[3];
        dx[3] = u[0];
    }
}

/// Running cost integrand.
pub fn running_cost(x: &[f64], u: &[f64]) -> f64 {
    let (s, c) = x[0].sin_cos();
    let swing = (1.0 - c) * (1.0 + x[1].cos().powi(2));
    let bracket = 3.51 * s * s
        + 4.82 * x[1] * s
        + 2.31 * x[1] * x[1]
        + 0.01 * x[2] * x[2]
        + 2.0 * swing * swing
        + 0.1 * x[3] * x[3];
    1e-4 * u[0] * u[0] + bracket * bracket
}

impl Pendulum {
    /// Successor state and the Simpson-integrated running cost along the same
    /// RK4 substeps.
    pub fn step_with_cost(&self, x: &[f64], u: &[f64], duration: f64) -> Result<(Vec<f64>, f64)> {
        let nodes = rk4_nodes(self, x, u, duration, SUBSTEPS)?;
        let samples: Vec<f64> = nodes.iter().map(|n| running_cost(n, u)).collect();
        let cost = simpson(&samples, duration);
        Ok((nodes.last().expect("nodes").clone(), cost))
    }
}

/// `l(x, u) = integral_0^T` of the running cost along `Phi(t; x, u)`.
pub fn pendulum_stage_cost(model: &Pendulum, x: &[f64], u: &[f64], duration: f64) -> Result<f64> {
    Ok(model.step_with_cost(x, u, duration)?.1)
}

impl SystemModel for Pendulum {
    fn name(&self) -> &str {
        "pendulum"
    }

    fn state_dim(&self) -> usize {
        4
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn step(&self, x: &[f64], u: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.step_with_cost(x, u, self.sample_time)
    }

    fn equilibrium(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; 4], vec![0.0])
    }

    fn state_box(&self) -> Option<&BoxBounds> {
        Some(&self.state_box)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::integrate::integrate_sampled;
    use approx::assert_abs_diff_eq;

    #[test]
    fn upright_target_has_zero_cost() {
        let p = Pendulum::default();
        assert_eq!(
            pendulum_stage_cost(&p, &[0.0; 4], &[0.0], 0.05).unwrap(),
            0.0
        );
        let (x, _) = p.step(&[0.0; 4], &[0.0]).unwrap();
        assert!(x.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn hanging_equilibrium_is_stationary() {
        let p = Pendulum::default();
        let x0 = [PI, 0.0, 0.0, 0.0];
        let mut dx = [0.0; 4];
        p.derivative(&x0, &[0.0], &mut dx);
        assert!(dx.iter().all(|v| v.abs() < 1e-8));
        // sin(PI) = 1.2e-16 starts a velocity that the Coulomb term then
        // flips every stage; the flow chatters at the k_R * h^2 scale
        let x = integrate_sampled(&p, &x0, &[0.0], 0.05).unwrap();
        for (a, b) in x.iter().zip(x0) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-4);
        }
    }

    #[test]
    fn upright_flow_is_exactly_stationary() {
        let p = Pendulum::default();
        for _ in 0..3 {
            let x = integrate_sampled(&p, &[0.0; 4], &[0.0], 0.05).unwrap();
            assert_eq!(x, vec![0.0; 4]);
        }
    }

    #[test]
    fn control_only_cost() {
        let p = Pendulum::default();
        let u = 0.01;
        let c = pendulum_stage_cost(&p, &[0.0; 4], &[u], 0.05).unwrap();
        assert_abs_diff_eq!(c, 0.05 * 1e-4 * u * u, epsilon = 1e-8);
    }

    #[test]
    fn cost_is_nonnegative() {
        let p = Pendulum::default();
        for k in 0..50 {
            let t = k as f64 * 0.37;
            let x = [t.sin() * 5.0, t.cos() * 2.0, t - 9.0, 0.5 * t];
            let c = pendulum_stage_cost(&p, &x, &[3.0 * (1.3 * t).sin()], 0.05).unwrap();
            assert!(c >= 0.0);
        }
    }

    #[test]
    fn sign_convention_at_zero() {
        assert_eq!(sgn(0.0), 0.0);
        assert_eq!(sgn(-0.0), 0.0);
        assert_eq!(sgn(2.0), 1.0);
    }
}
