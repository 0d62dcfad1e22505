//! Linear-quadratic plants and their exact finite-horizon values.
//!
//! With `l(x, u) = x'Qx + u'Ru` and no constraints, `V_N(x) = x' P_N x` where
//! `P_1 = Q` and `P_{k+1} = Q + A'P_kA - A'P_kB (R + B'P_kB)^{-1} B'P_kA`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::SystemModel;
use crate::controllability::GammaSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LqModel {
    name: String,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl LqModel {
    pub fn new(
        name: impl Into<String>,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) {
            return Err(Error::param("A", "inconsistent state dimensions"));
        }
        let m = b.ncols();
        if r.shape() != (m, m) {
            return Err(Error::param("R", "inconsistent control dimensions"));
        }
        if q.clone().cholesky().is_none() {
            return Err(Error::param("Q", "must be symmetric positive definite"));
        }
        if SymmetricEigen::new(r.clone())
            .eigenvalues
            .iter()
            .any(|&e| e < 0.0)
        {
            return Err(Error::param("R", "must be positive semidefinite"));
        }
        Ok(Self {
            name: name.into(),
            a,
            b,
            q,
            r,
        })
    }

    pub fn scalar(a: f64, b: f64, q: f64, r: f64) -> Result<Self> {
        let one = |v| DMatrix::from_element(1, 1, v);
        Self::new("lq-scalar", one(a), one(b), one(q), one(r))
    }

    /// Sampled double integrator with period `dt`, `Q = I`, `R = r`.
    pub fn double_integrator(dt: f64, r: f64) -> Result<Self> {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, dt, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.5 * dt * dt, dt]);
        Self::new(
            "lq-double-integrator",
            a,
            b,
            DMatrix::identity(2, 2),
            DMatrix::from_element(1, 1, r),
        )
    }

    /// `P_1..P_horizon`.
    pub fn riccati_matrices(&self, horizon: usize) -> Result<Vec<DMatrix<f64>>> {
        if horizon < 1 {
            return Err(Error::param("N", "horizon must be >= 1"));
        }
        let mut ps = Vec::with_capacity(horizon);
        let mut p = self.q.clone();
        ps.push(p.clone());
        for _ in 1..horizon {
            let at_p = self.a.transpose() * &p;
            let gain_rhs = self.b.transpose() * &p * &self.a;
            let s = &self.r + self.b.transpose() * &p * &self.b;
            let k = s
                .lu()
                .solve(&gain_rhs)
                .ok_or_else(|| Error::param("R", "R + B'PB is singular"))?;
            let next = &self.q + &at_p * &self.a - &at_p * &self.b * k;
            p = 0.5 * (&next + next.transpose());
            ps.push(p.clone());
        }
        Ok(ps)
    }

    /// `V_N(x) = x' P_N x`.
    pub fn riccati_value(&self, horizon: usize, x: &[f64]) -> Result<f64> {
        let p = self.riccati_matrices(horizon)?.pop().expect("nonempty");
        let x = DVector::from_column_slice(x);
        Ok((x.transpose() * p * &x)[(0, 0)])
    }

    /// Tight controllability bounds `gamma_i = sup_x V_i(x) / V_1(x)`, the
    /// largest eigenvalue of `Q^{-1/2} P_i Q^{-1/2}`.
    pub fn riccati_gamma(&self, horizon: usize) -> Result<GammaSequence> {
        let l = self.q.clone().cholesky().expect("validated").l();
        let l_inv = l
            .try_inverse()
            .ok_or_else(|| Error::param("Q", "Cholesky factor is singular"))?;
        let mut values = self
            .riccati_matrices(horizon.max(2))?
            .into_iter()
            .map(|p| {
                let m = &l_inv * p * l_inv.transpose();
                let m = 0.5 * (&m + m.transpose());
                SymmetricEigen::new(m).eigenvalues.max()
            })
            .collect::<Vec<_>>();
        // P_1 = Q and P_i is nondecreasing; clamp away the round-off
        values[0] = 1.0;
        for i in 1..values.len() {
            values[i] = values[i].max(values[i - 1]);
        }
        GammaSequence::new(values)
    }
}

impl SystemModel for LqModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    fn step(&self, x: &[f64], u: &[f64]) -> Result<(Vec<f64>, f64)> {
        let xv = DVector::from_column_slice(x);
        let uv = DVector::from_column_slice(u);
        let next = &self.a * &xv + &self.b * &uv;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence("linear state overflowed".into()));
        }
        let cost = xv.dot(&(&self.q * &xv)) + uv.dot(&(&self.r * &uv));
        Ok((next.as_slice().to_vec(), cost))
    }

    fn equilibrium(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.state_dim()], vec![0.0; self.control_dim()])
    }
}
