//! Suboptimality index `alpha_{N,m}` of the relaxed Lyapunov inequality
//! `V_N(x_mu(m)) <= V_N(x) - alpha * sum_{n<m} l(x_mu(n), mu(x, n))`.
//!
//! Two routes are provided: the closed-form product formula, and the exact
//! linear program whose relaxation the formula solves. The closed form is a
//! lower bound on the LP value and coincides with it when the gamma sequence is
//! submultiplicative.

use std::ops::Range;

use serde::Serialize;

use crate::controllability::{check_submultiplicative, GammaSequence};
use crate::error::{Error, Result};
use crate::format::{ser_round12, ser_round12_opt};
use crate::lp::{self, LinearProgram, LpSolution, LpStatus, RowKind};

/// A well-formed `(gamma, N, m)` triple.
#[derive(Debug, Clone, Copy)]
pub struct CertificateQuery<'a> {
    gamma: &'a GammaSequence,
    horizon: usize,
    control_horizon: usize,
}

impl<'a> CertificateQuery<'a> {
    pub fn new(gamma: &'a GammaSequence, horizon: usize, control_horizon: usize) -> Result<Self> {
        if horizon < 2 {
            return Err(Error::param(
                "N",
                format!("prediction horizon must be >= 2, got {horizon}"),
            ));
        }
        if control_horizon < 1 || control_horizon >= horizon {
            return Err(Error::param(
                "m",
                format!(
                    "control horizon must lie in 1..={}, got {control_horizon}",
                    horizon - 1
                ),
            ));
        }
        if gamma.len() < horizon {
            return Err(Error::param(
                "gamma",
                format!("needs at least {horizon} entries, has {}", gamma.len()),
            ));
        }
        Ok(Self {
            gamma,
            horizon,
            control_horizon,
        })
    }

    pub fn gamma(&self) -> &'a GammaSequence {
        self.gamma
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn control_horizon(&self) -> usize {
        self.control_horizon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    LinearProgram,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateResult {
    pub alpha: f64,
    pub method: Method,
}

impl CertificateResult {
    pub fn stable(&self) -> bool {
        self.alpha >= 0.0
    }

    /// `1 / alpha` when `alpha > 0`.
    pub fn performance_bound(&self) -> Option<f64> {
        (self.alpha > 0.0).then(|| 1.0 / self.alpha)
    }
}

/// JSON result record.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateRecord {
    #[serde(rename = "N")]
    pub horizon: usize,
    pub m: usize,
    #[serde(serialize_with = "ser_round12")]
    pub alpha: f64,
    pub method: Method,
    pub stable: bool,
    #[serde(serialize_with = "ser_round12_opt")]
    pub performance_bound: Option<f64>,
    pub submultiplicative: bool,
}

impl CertificateRecord {
    pub fn new(query: &CertificateQuery<'_>, result: &CertificateResult) -> Self {
        let prefix = query
            .gamma
            .truncated(query.horizon)
            .expect("query validated gamma length");
        Self {
            horizon: query.horizon,
            m: query.control_horizon,
            alpha: result.alpha,
            method: result.method,
            stable: result.stable(),
            performance_bound: result.performance_bound(),
            submultiplicative: check_submultiplicative(&prefix),
        }
    }
}

/// `A / (P - A)` with `P = prod gamma_i`, `A = prod (gamma_i - 1)` over
/// `i in first..=last`, evaluated as `1 / (exp(sum ln(gamma_i/(gamma_i-1))) - 1)`.
///
/// `Ok(0.0)` when some `gamma_i == 1` in the range; `Err(())` when the
/// denominator vanishes numerically.
fn product_ratio(gamma: &GammaSequence, first: usize, last: usize) -> std::result::Result<f64, ()> {
    let mut log_sum = 0.0;
    for i in first..=last {
        let g = gamma.get(i);
        if g == 1.0 {
            return Ok(0.0);
        }
        log_sum += (1.0 / (g - 1.0)).ln_1p();
    }
    let denom = log_sum.exp_m1();
    if denom > 0.0 && denom.is_finite() {
        Ok(1.0 / denom)
    } else if denom.is_infinite() {
        Ok(0.0)
    } else {
        Err(())
    }
}

pub fn alpha_closed_form(q: &CertificateQuery<'_>) -> Result<CertificateResult> {
    let (n, m) = (q.horizon, q.control_horizon);
    let degenerate = || Error::DegenerateDenominator {
        horizon: n,
        control_horizon: m,
    };
    let tail_long = product_ratio(q.gamma, m + 1, n).map_err(|_| degenerate())?;
    let tail_short = product_ratio(q.gamma, n - m + 1, n).map_err(|_| degenerate())?;
    Ok(CertificateResult {
        alpha: 1.0 - tail_long * tail_short,
        method: Method::ClosedForm,
    })
}

/// The certificate LP over `lambda_0..lambda_{N-1}, nu` (variable `N` is `nu`).
#[derive(Debug, Clone)]
pub struct CertificateLp {
    pub program: LinearProgram,
    pub horizon: usize,
    pub control_horizon: usize,
    /// `sum_{n=k}^{N-1} lambda_n <= gamma_{N-k} lambda_k`, `k = 0..N-2`.
    pub family_a: Range<usize>,
    /// `nu - sum_{n<j} lambda_{n+m} <= gamma_{N-j} lambda_{j+m}`, `j = 0..N-m-1`.
    pub family_b: Range<usize>,
    /// `sum_{n<m} lambda_n = 1`.
    pub normalization: usize,
}

impl CertificateLp {
    pub fn nu_index(&self) -> usize {
        self.horizon
    }

    /// Splits a solution into `(lambda, nu)`.
    pub fn split<'s>(&self, sol: &'s LpSolution) -> (&'s [f64], f64) {
        (&sol.x[..self.horizon], sol.x[self.horizon])
    }
}

/// Builds the linearized certificate program.
///
/// The fractional objective `(sum lambda - nu) / sum_{n<m} lambda_n` is
/// positively homogeneous, as are all constraints, so fixing the denominator
/// to one loses nothing. The open positivity conditions are replaced by
/// `>= 0`; the infimum over the open set equals the minimum over its closure.
pub fn build_lp(q: &CertificateQuery<'_>) -> CertificateLp {
    let (n, m) = (q.horizon, q.control_horizon);
    let nu = n;
    let vars = n + 1;
    let mut objective = vec![1.0; vars];
    objective[nu] = -1.0;
    let mut program = LinearProgram::new(objective);

    for k in 0..=n - 2 {
        let mut row = vec![0.0; vars];
        for coeff in &mut row[k..n] {
            *coeff = 1.0;
        }
        row[k] -= q.gamma.get(n - k);
        program.add(row, RowKind::Le, 0.0);
    }
    let family_a = 0..program.constraints.len();

    for j in 0..n - m {
        let mut row = vec![0.0; vars];
        row[nu] = 1.0;
        for coeff in &mut row[m..m + j] {
            *coeff = -1.0;
        }
        row[j + m] -= q.gamma.get(n - j);
        program.add(row, RowKind::Le, 0.0);
    }
    let family_b = family_a.end..program.constraints.len();

    let mut row = vec![0.0; vars];
    for coeff in &mut row[..m] {
        *coeff = 1.0;
    }
    program.add(row, RowKind::Eq, 1.0);
    let normalization = program.constraints.len() - 1;

    CertificateLp {
        program,
        horizon: n,
        control_horizon: m,
        family_a,
        family_b,
        normalization,
    }
}

pub fn solve_lp(lp: &CertificateLp) -> Result<LpSolution> {
    lp::solve(&lp.program)
}

pub fn alpha_lp(q: &CertificateQuery<'_>) -> Result<CertificateResult> {
    let prog = build_lp(q);
    let sol = solve_lp(&prog)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(format!(
            "certificate program for N={}, m={} ended with status {:?}",
            q.horizon, q.control_horizon, sol.status
        )));
    }
    Ok(CertificateResult {
        alpha: sol.value,
        method: Method::LinearProgram,
    })
}

/// `argmax_m alpha_{N,m}` over `m = 1..N-1` by the closed form; the smallest
/// `m` wins ties.
pub fn max_alpha_over_m(gamma: &GammaSequence, horizon: usize) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for m in 1..horizon {
        let alpha = alpha_closed_form(&CertificateQuery::new(gamma, horizon, m)?)?.alpha;
        if best.is_none_or(|(_, a)| alpha > a) {
            best = Some((m, alpha));
        }
    }
    best.ok_or_else(|| Error::param("N", "prediction horizon must be >= 2"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllability::{constant_gamma, gamma_from_exponential, ExpBound};
    use approx::assert_abs_diff_eq;

    fn seq(v: &[f64]) -> GammaSequence {
        GammaSequence::new(v.to_vec()).unwrap()
    }

    fn closed(g: &GammaSequence, n: usize, m: usize) -> f64 {
        alpha_closed_form(&CertificateQuery::new(g, n, m).unwrap())
            .unwrap()
            .alpha
    }

    fn via_lp(g: &GammaSequence, n: usize, m: usize) -> f64 {
        alpha_lp(&CertificateQuery::new(g, n, m).unwrap())
            .unwrap()
            .alpha
    }

    /// Raw product evaluation, independent of the log-ratio path.
    pub(crate) fn naive_closed_form(g: &GammaSequence, n: usize, m: usize) -> f64 {
        let prod =
            |lo: usize, f: &dyn Fn(f64) -> f64| (lo..=n).map(|i| f(g.get(i))).product::<f64>();
        let a1 = prod(m + 1, &|x| x - 1.0);
        let p1 = prod(m + 1, &|x| x);
        let a2 = prod(n - m + 1, &|x| x - 1.0);
        let p2 = prod(n - m + 1, &|x| x);
        1.0 - a1 * a2 / ((p1 - a1) * (p2 - a2))
    }

    #[test]
    fn query_validation() {
        let g = seq(&[1.0, 2.0, 3.0]);
        assert!(CertificateQuery::new(&g, 1, 1).is_err());
        assert!(CertificateQuery::new(&g, 3, 0).is_err());
        assert!(CertificateQuery::new(&g, 3, 3).is_err());
        assert!(CertificateQuery::new(&g, 4, 1).is_err());
        assert!(CertificateQuery::new(&g, 3, 2).is_ok());
    }

    #[test]
    fn closed_form_examples() {
        assert_abs_diff_eq!(closed(&seq(&[1.0, 1.5]), 2, 1), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(closed(&seq(&[1.0, 3.0, 4.0]), 3, 1), -2.0, epsilon = 1e-14);
        let ones = constant_gamma(1.0, 8).unwrap();
        for m in 1..8 {
            assert_eq!(closed(&ones, 8, m), 1.0);
        }
    }

    #[test]
    fn closed_form_matches_raw_products_where_they_are_representable() {
        let g = gamma_from_exponential(ExpBound::new(3.0, 2.0 / 3.0).unwrap(), 30).unwrap();
        for n in 2..=30 {
            for m in 1..n {
                assert_abs_diff_eq!(
                    closed(&g, n, m),
                    naive_closed_form(&g, n, m),
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn closed_form_is_finite_for_long_horizons() {
        let g = constant_gamma(9.0, 250).unwrap();
        for m in [1, 35, 100, 199] {
            let a = closed(&g, 200, m);
            assert!(a.is_finite() && a <= 1.0);
        }
    }

    #[test]
    fn exponential_reference_horizons() {
        let g = gamma_from_exponential(ExpBound::new(3.0, 2.0 / 3.0).unwrap(), 20).unwrap();
        assert!(closed(&g, 18, 1) >= 0.0);
        assert!(closed(&g, 17, 1) < 0.0);
        let (m, a) = max_alpha_over_m(&g, 12).unwrap();
        assert_eq!(m, 6);
        assert!(a >= 0.0);
        assert!(max_alpha_over_m(&g, 11).unwrap().1 < 0.0);
    }

    #[test]
    fn max_alpha_ties_pick_smallest() {
        let ones = constant_gamma(1.0, 10).unwrap();
        assert_eq!(max_alpha_over_m(&ones, 10).unwrap(), (1, 1.0));
        let g = gamma_from_exponential(ExpBound::new(2.5, 0.6).unwrap(), 40).unwrap();
        for n in 2..=40 {
            assert_eq!(max_alpha_over_m(&g, n).unwrap().0, n / 2, "N = {n}");
        }
    }

    #[test]
    fn lp_shape() {
        let g = seq(&[1.0, 1.5]);
        let lp = build_lp(&CertificateQuery::new(&g, 2, 1).unwrap());
        assert_eq!(lp.program.num_vars(), 3);
        assert_eq!(lp.family_a.len(), 1);
        assert_eq!(lp.family_b.len(), 1);
        assert_eq!(
            lp.program.constraints[lp.normalization].coeffs,
            vec![1.0, 0.0, 0.0]
        );

        let g = constant_gamma(2.0, 5).unwrap();
        let lp = build_lp(&CertificateQuery::new(&g, 5, 2).unwrap());
        assert_eq!(lp.family_a.len(), 4);
        assert_eq!(lp.family_b.len(), 3);
        assert_eq!(lp.program.constraints.len(), 8);
    }

    #[test]
    fn lp_rows_for_three_step_example() {
        let g = seq(&[1.0, 3.0, 4.0]);
        let lp = build_lp(&CertificateQuery::new(&g, 3, 1).unwrap());
        let rows: Vec<Vec<f64>> = lp
            .program
            .constraints
            .iter()
            .map(|c| c.coeffs.clone())
            .collect();
        // lambda_0 + lambda_1 + lambda_2 <= 4 lambda_0 ; lambda_1 + lambda_2 <= 3 lambda_1
        assert_eq!(rows[0], vec![-3.0, 1.0, 1.0, 0.0]);
        assert_eq!(rows[1], vec![0.0, -2.0, 1.0, 0.0]);
        // nu <= 4 lambda_1 ; nu <= lambda_1 + 3 lambda_2
        assert_eq!(rows[2], vec![0.0, -4.0, 0.0, 1.0]);
        assert_eq!(rows[3], vec![0.0, -1.0, -3.0, 1.0]);
        assert_eq!(rows[4], vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn lp_values() {
        assert_abs_diff_eq!(via_lp(&seq(&[1.0, 1.5]), 2, 1), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(via_lp(&seq(&[1.0, 3.0, 4.0]), 3, 1), -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            via_lp(&constant_gamma(1.0, 6).unwrap(), 6, 2),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn lp_solution_satisfies_rows() {
        let g = gamma_from_exponential(ExpBound::new(3.0, 2.0 / 3.0).unwrap(), 12).unwrap();
        let q = CertificateQuery::new(&g, 12, 6).unwrap();
        let lp = build_lp(&q);
        let sol = solve_lp(&lp).unwrap();
        assert!(lp.program.max_violation(&sol.x) <= 1e-9);
        let (lambda, nu) = lp.split(&sol);
        assert_eq!(lambda.len(), 12);
        assert!(nu >= 0.0);
        assert_abs_diff_eq!(sol.value, closed(&g, 12, 6), epsilon = 1e-8);
    }

    #[test]
    fn infeasible_after_normalization() {
        let g = seq(&[1.0, 1.5]);
        let mut lp = build_lp(&CertificateQuery::new(&g, 2, 1).unwrap());
        lp.program.add(vec![1.0, 0.0, 0.0], RowKind::Le, -1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn record_fields() {
        let g = seq(&[1.0, 1.5]);
        let q = CertificateQuery::new(&g, 2, 1).unwrap();
        let rec = CertificateRecord::new(&q, &alpha_closed_form(&q).unwrap());
        let json = serde_json::to_value(&rec).unwrap();
        assert_eq!(json["N"], 2);
        assert_eq!(json["m"], 1);
        assert_eq!(json["alpha"], 0.75);
        assert_eq!(json["method"], "closed_form");
        assert_eq!(json["stable"], true);
        assert_abs_diff_eq!(
            json["performance_bound"].as_f64().unwrap(),
            4.0 / 3.0,
            epsilon = 1e-11
        );

        let g = seq(&[1.0, 3.0, 4.0]);
        let q = CertificateQuery::new(&g, 3, 1).unwrap();
        let rec = CertificateRecord::new(&q, &alpha_lp(&q).unwrap());
        let json = serde_json::to_value(&rec).unwrap();
        assert_eq!(json["stable"], false);
        assert!(json["performance_bound"].is_null());
        assert_eq!(json["method"], "linear_program");
    }
}
