//! Dense two-phase simplex for small linear programs
//! `min c'x  s.t.  rows (<=, >=, =),  x >= 0`.
//!
//! The tableau only selects the basis. Once a basis is reported optimal its
//! primal point and duals are recomputed from the original data by LU
//! factorization, and optimality is accepted only if every reduced cost is at
//! least `-TOLERANCE` and every row holds to within `TOLERANCE`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Feasibility and optimality tolerance.
pub const TOLERANCE: f64 = 1e-9;

/// Pivot elements smaller than this are treated as zero.
const PIVOT_EPS: f64 = 1e-12;

/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub kind: RowKind,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal objective value; NaN unless `status` is optimal.
    pub value: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, kind: RowKind, rhs: f64) {
        self.constraints.push(Constraint { coeffs, kind, rhs });
    }

    /// Largest violation of any row or sign bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            match c.kind {
                RowKind::Le => (lhs - c.rhs).max(0.0),
                RowKind::Ge => (c.rhs - lhs).max(0.0),
                RowKind::Eq => (lhs - c.rhs).abs(),
            }
        });
        let bounds = x.iter().map(|v| (-v).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if n == 0 {
            return Err(Error::Lp("has no variables".into()));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::Lp(format!(
                    "row {i} has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::Lp(format!("row {i} has non-finite entries")));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::Lp("objective has non-finite entries".into()));
        }
        Ok(())
    }
}

/// Standard form `A z = b, z >= 0, b >= 0` with slack/surplus and artificial
/// columns appended after the structural ones.
struct StandardForm {
    a: DMatrix<f64>,
    b: DVector<f64>,
    cost: DVector<f64>,
    n_structural: usize,
    first_artificial: usize,
    initial_basis: Vec<usize>,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m = lp.constraints.len();
        let rows: Vec<(Vec<f64>, RowKind, f64)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let kind = match c.kind {
                        RowKind::Le => RowKind::Ge,
                        RowKind::Ge => RowKind::Le,
                        RowKind::Eq => RowKind::Eq,
                    };
                    (c.coeffs.iter().map(|a| -a).collect(), kind, -c.rhs)
                } else {
                    (c.coeffs.clone(), c.kind, c.rhs)
                }
            })
            .collect();
        let n_slack = rows.iter().filter(|r| r.1 != RowKind::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != RowKind::Le).count();
        let first_artificial = n + n_slack;
        let cols = first_artificial + n_art;

        let mut a = DMatrix::zeros(m, cols);
        let mut b = DVector::zeros(m);
        let mut basis = vec![0; m];
        let (mut slack, mut art) = (n, first_artificial);
        for (i, (coeffs, kind, rhs)) in rows.iter().enumerate() {
            for (j, v) in coeffs.iter().enumerate() {
                a[(i, j)] = *v;
            }
            b[i] = *rhs;
            match kind {
                RowKind::Le => {
                    a[(i, slack)] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                RowKind::Ge => {
                    a[(i, slack)] = -1.0;
                    slack += 1;
                    a[(i, art)] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                RowKind::Eq => {
                    a[(i, art)] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        let mut cost = DVector::zeros(cols);
        for (j, c) in lp.objective.iter().enumerate() {
            cost[j] = *c;
        }
        Self {
            a,
            b,
            cost,
            n_structural: n,
            first_artificial,
            initial_basis: basis,
        }
    }
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Tableau {
    /// `m` constraint rows followed by the reduced-cost row; last column is the rhs.
    t: DMatrix<f64>,
    basis: Vec<usize>,
    iterations: usize,
    cap: usize,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.basis.len()
    }

    fn rhs_col(&self) -> usize {
        self.t.ncols() - 1
    }

    /// Recomputes the reduced-cost row for `cost` under the current basis.
    fn price(&mut self, cost: &DVector<f64>) {
        let m = self.rows();
        let rhs = self.rhs_col();
        for j in 0..=rhs {
            let mut d = if j < rhs { cost[j] } else { 0.0 };
            for i in 0..m {
                d -= cost[self.basis[i]] * self.t[(i, j)];
            }
            self.t[(m, j)] = d;
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[(row, col)];
        let width = self.t.ncols();
        for j in 0..width {
            self.t[(row, j)] /= p;
        }
        for i in 0..self.t.nrows() {
            if i == row {
                continue;
            }
            let f = self.t[(i, col)];
            if f != 0.0 {
                for j in 0..width {
                    let v = self.t[(row, j)];
                    self.t[(i, j)] -= f * v;
                }
            }
        }
        self.basis[row] = col;
    }

    fn run(&mut self, allowed: usize) -> PhaseOutcome {
        let m = self.rows();
        let rhs = self.rhs_col();
        let mut degenerate = 0usize;
        loop {
            let bland = degenerate >= DEGENERATE_STREAK;
            let mut entering = None;
            let mut best = -TOLERANCE;
            for j in 0..allowed {
                let d = self.t[(m, j)];
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(col) = entering else {
                return PhaseOutcome::Optimal;
            };
            if self.iterations >= self.cap {
                return PhaseOutcome::IterationLimit;
            }
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[(i, col)];
                if a > PIVOT_EPS {
                    let ratio = self.t[(i, rhs)].max(0.0) / a;
                    let better = match leaving {
                        None => true,
                        Some((r, best_ratio)) => {
                            ratio < best_ratio - PIVOT_EPS
                                || (ratio <= best_ratio + PIVOT_EPS
                                    && self.basis[i] < self.basis[r])
                        }
                    };
                    if better {
                        leaving = Some((i, ratio));
                    }
                }
            }
            let Some((row, ratio)) = leaving else {
                return PhaseOutcome::Unbounded;
            };
            degenerate = if ratio <= PIVOT_EPS {
                degenerate + 1
            } else {
                0
            };
            self.pivot(row, col);
            self.iterations += 1;
        }
    }
}

/// Solves `lp`. Returns `Err` only for malformed programs or when the final
/// basis fails its independent optimality check.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let sf = StandardForm::build(lp);
    let m = sf.a.nrows();
    let cols = sf.a.ncols();
    let n = sf.n_structural;

    if m == 0 {
        // Only sign bounds: optimal at zero unless some cost is negative.
        return Ok(if lp.objective.iter().any(|c| *c < -TOLERANCE) {
            failure(LpStatus::Unbounded, 0)
        } else {
            LpSolution {
                status: LpStatus::Optimal,
                value: 0.0,
                x: vec![0.0; n],
                iterations: 0,
            }
        });
    }

    let mut t = DMatrix::zeros(m + 1, cols + 1);
    t.view_mut((0, 0), (m, cols)).copy_from(&sf.a);
    for i in 0..m {
        t[(i, cols)] = sf.b[i];
    }
    let mut tab = Tableau {
        t,
        basis: sf.initial_basis.clone(),
        iterations: 0,
        cap: 10 * (m + cols),
    };

    if sf.first_artificial < cols {
        let mut phase1 = DVector::zeros(cols);
        for j in sf.first_artificial..cols {
            phase1[j] = 1.0;
        }
        tab.price(&phase1);
        match tab.run(cols) {
            PhaseOutcome::Optimal => {}
            PhaseOutcome::IterationLimit => {
                return Ok(failure(LpStatus::IterationLimit, tab.iterations))
            }
            PhaseOutcome::Unbounded => {
                return Err(Error::Lp("phase 1 reported unbounded".into()));
            }
        }
        let infeasibility: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= sf.first_artificial)
            .map(|i| tab.t[(i, cols)])
            .sum();
        let scale = sf.b.amax().max(1.0);
        if infeasibility > TOLERANCE * scale {
            return Ok(failure(LpStatus::Infeasible, tab.iterations));
        }
        // Drive remaining zero-level artificials out where possible; rows that
        // keep one are redundant and stay pinned at zero.
        for i in 0..m {
            if tab.basis[i] >= sf.first_artificial {
                if let Some(j) = (0..sf.first_artificial).find(|&j| tab.t[(i, j)].abs() > 1e-9) {
                    tab.pivot(i, j);
                }
            }
        }
    }

    tab.price(&sf.cost);
    match tab.run(sf.first_artificial) {
        PhaseOutcome::Optimal => {}
        PhaseOutcome::Unbounded => return Ok(failure(LpStatus::Unbounded, tab.iterations)),
        PhaseOutcome::IterationLimit => {
            return Ok(failure(LpStatus::IterationLimit, tab.iterations))
        }
    }

    certify(lp, &sf, &tab.basis, tab.iterations)
}

fn failure(status: LpStatus, iterations: usize) -> LpSolution {
    LpSolution {
        status,
        value: f64::NAN,
        x: Vec::new(),
        iterations,
    }
}

/// Re-solves the basic system from the original data and checks primal
/// feasibility and dual optimality.
fn certify(
    lp: &LinearProgram,
    sf: &StandardForm,
    basis: &[usize],
    iterations: usize,
) -> Result<LpSolution> {
    let m = basis.len();
    let mut bmat = DMatrix::zeros(m, m);
    for (k, &j) in basis.iter().enumerate() {
        bmat.set_column(k, &sf.a.column(j));
    }
    let lu = bmat.clone().lu();
    let z_basic = lu
        .solve(&sf.b)
        .ok_or_else(|| Error::Lp("optimal basis is singular".into()))?;
    let c_basic = DVector::from_iterator(m, basis.iter().map(|&j| sf.cost[j]));
    let duals = bmat
        .transpose()
        .lu()
        .solve(&c_basic)
        .ok_or_else(|| Error::Lp("optimal basis is singular".into()))?;

    let mut x = vec![0.0; sf.n_structural];
    for (k, &j) in basis.iter().enumerate() {
        if j < sf.n_structural {
            x[j] = z_basic[k];
        }
    }
    let violation = lp.max_violation(&x);
    let scale = sf.b.amax().max(1.0);
    if violation > TOLERANCE * scale {
        return Err(Error::Lp(format!(
            "optimal basis violates constraints by {violation:.3e}"
        )));
    }
    for j in 0..sf.first_artificial {
        let reduced = sf.cost[j] - sf.a.column(j).dot(&duals);
        if reduced < -TOLERANCE * scale {
            return Err(Error::Lp(format!(
                "improving direction remains at column {j} (reduced cost {reduced:.3e})"
            )));
        }
    }
    // Round-off below zero is clamped only after the raw point passed the check.
    for xi in &mut x {
        *xi = xi.max(0.0);
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value: lp.evaluate(&x),
        x,
        iterations,
    })
}
