//! Fixed-step RK4 for sampled-data models.

use crate::error::{Error, Result};

/// Substeps per sampling interval.
pub const SUBSTEPS: usize = 20;

/// `x' = f(x, u)` with `u` held constant.
pub trait ContinuousDynamics {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn derivative(&self, x: &[f64], u: &[f64], dx: &mut [f64]);
}

/// States at the `substeps + 1` RK4 nodes over `[0, duration]`, first node `x`.
pub fn rk4_nodes<D: ContinuousDynamics + ?Sized>(
    dynamics: &D,
    x: &[f64],
    u: &[f64],
    duration: f64,
    substeps: usize,
) -> Result<Vec<Vec<f64>>> {
    if !(duration > 0.0) {
        return Err(Error::param(
            "T",
            format!("duration must be > 0, got {duration}"),
        ));
    }
    let n = x.len();
    let h = duration / substeps as f64;
    let mut nodes = Vec::with_capacity(substeps + 1);
    nodes.push(x.to_vec());
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut cur = x.to_vec();
    for step in 0..substeps {
        dynamics.derivative(&cur, u, &mut k1);
        for i in 0..n {
            tmp[i] = cur[i] + 0.5 * h * k1[i];
        }
        dynamics.derivative(&tmp, u, &mut k2);
        for i in 0..n {
            tmp[i] = cur[i] + 0.5 * h * k2[i];
        }
        dynamics.derivative(&tmp, u, &mut k3);
        for i in 0..n {
            tmp[i] = cur[i] + h * k3[i];
        }
        dynamics.derivative(&tmp, u, &mut k4);
        for i in 0..n {
            cur[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!(
                "non-finite state after substep {} of {substeps}",
                step + 1
            )));
        }
        nodes.push(cur.clone());
    }
    Ok(nodes)
}

/// `Phi(T; x, u)` by RK4 with step `T / 20`.
pub fn integrate_sampled<D: ContinuousDynamics + ?Sized>(
    dynamics: &D,
    x: &[f64],
    u: &[f64],
    duration: f64,
) -> Result<Vec<f64>> {
    let mut nodes = rk4_nodes(dynamics, x, u, duration, SUBSTEPS)?;
    Ok(nodes.pop().expect("at least one node"))
}

/// Composite Simpson rule over equally spaced samples (even interval count).
pub fn simpson(samples: &[f64], duration: f64) -> f64 {
    let intervals = samples.len() - 1;
    debug_assert!(intervals >= 2 && intervals.is_multiple_of(2));
    let h = duration / intervals as f64;
    let inner: f64 = samples[1..intervals]
        .iter()
        .enumerate()
        .map(|(k, v)| if k % 2 == 0 { 4.0 * v } else { 2.0 * v })
        .sum();
    h / 3.0 * (samples[0] + inner + samples[intervals])
}
