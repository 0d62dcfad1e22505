//! Horizon requirements and parameter sweeps on top of the closed-form index.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::certificate::{alpha_closed_form, max_alpha_over_m, CertificateQuery};
use crate::controllability::{constant_gamma, gamma_from_exponential, ExpBound, GammaSequence};
use crate::error::{Error, Result};
use crate::format::sig12;

/// How the control horizon is chosen for each candidate `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonPolicy {
    Fixed(usize),
    BestM,
    /// `m = floor(N / 2)`
    Half,
}

impl HorizonPolicy {
    fn first_horizon(self) -> usize {
        match self {
            HorizonPolicy::Fixed(m) => (m + 1).max(2),
            _ => 2,
        }
    }

    /// Control horizon used at `N` and the resulting closed-form alpha.
    pub fn evaluate(self, gamma: &GammaSequence, horizon: usize) -> Result<(usize, f64)> {
        match self {
            HorizonPolicy::BestM => max_alpha_over_m(gamma, horizon),
            HorizonPolicy::Fixed(m) => Ok((m, alpha_at(gamma, horizon, m)?)),
            HorizonPolicy::Half => {
                let m = horizon / 2;
                Ok((m, alpha_at(gamma, horizon, m)?))
            }
        }
    }
}

fn alpha_at(gamma: &GammaSequence, horizon: usize, m: usize) -> Result<f64> {
    Ok(alpha_closed_form(&CertificateQuery::new(gamma, horizon, m)?)?.alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HorizonResult {
    pub n_hat: usize,
    pub policy: HorizonPolicy,
    pub m_used: usize,
    pub alpha_at_n_hat: f64,
}

/// Smallest `N in [2, n_max]` with `alpha_{N, m(policy)} >= 0`.
///
/// Scans upward one `N` at a time: alpha is not monotone in `N` for every
/// gamma, so bisection could skip the first stabilizing horizon.
pub fn minimal_horizon<G>(
    gamma_for: G,
    policy: HorizonPolicy,
    n_max: usize,
) -> Result<HorizonResult>
where
    G: Fn(usize) -> Result<GammaSequence>,
{
    if n_max < 2 {
        return Err(Error::param("N_max", format!("must be >= 2, got {n_max}")));
    }
    if let HorizonPolicy::Fixed(0) = policy {
        return Err(Error::param("m", "fixed control horizon must be >= 1"));
    }
    let first = policy.first_horizon();
    let mut last_alpha = f64::NAN;
    for n in first..=n_max {
        let gamma = gamma_for(n)?;
        let (m_used, alpha) = policy.evaluate(&gamma, n)?;
        if alpha >= 0.0 {
            return Ok(HorizonResult {
                n_hat: n,
                policy,
                m_used,
                alpha_at_n_hat: alpha,
            });
        }
        last_alpha = alpha;
    }
    Err(Error::HorizonNotFound {
        n_max,
        alpha_at_max: last_alpha,
    })
}

fn check_level(level: f64) -> Result<()> {
    if level > 1.0 && level.is_finite() {
        Ok(())
    } else {
        Err(Error::param("M", format!("must be > 1, got {level}")))
    }
}

/// `2 + ln(M-1) / (ln M - ln(M-1))`: sufficient `N` for `m = 1`, constant gamma.
pub fn horizon_bound_m1(level: f64) -> Result<f64> {
    check_level(level)?;
    let log_ratio = level.ln() - (level - 1.0).ln();
    Ok(2.0 + (level - 1.0).ln() / log_ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(n: usize) -> Self {
        if n.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Sufficient `N` of the given parity for `m = floor(N/2)`, constant gamma:
/// even `2 ln 2 / (ln M - ln(M-1))`, odd
/// `(ln((2M-1)/M) + ln((2M-1)/(M-1))) / (ln M - ln(M-1))`.
pub fn horizon_bound_half(level: f64, parity: Parity) -> Result<f64> {
    check_level(level)?;
    let log_ratio = level.ln() - (level - 1.0).ln();
    Ok(match parity {
        Parity::Even => 2.0 * std::f64::consts::LN_2 / log_ratio,
        Parity::Odd => {
            let num =
                ((2.0 * level - 1.0) / level).ln() + ((2.0 * level - 1.0) / (level - 1.0)).ln();
            num / log_ratio
        }
    })
}

/// `count` evenly spaced points on `[min, max]`.
pub fn linspace(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::param("steps", "axis must have at least one point"));
    }
    if !(min.is_finite() && max.is_finite()) || max < min {
        return Err(Error::param(
            "range",
            format!("empty or invalid range [{min}, {max}]"),
        ));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    let step = (max - min) / (count - 1) as f64;
    Ok((0..count).map(|k| min + step * k as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionGrid {
    pub horizon: usize,
    pub m: usize,
    pub c_axis: Vec<f64>,
    pub sigma_axis: Vec<f64>,
    /// Row-major: entry `ci * sigma_axis.len() + si`.
    pub mask: Vec<bool>,
}

impl RegionGrid {
    pub fn is_stable(&self, ci: usize, si: usize) -> bool {
        self.mask[ci * self.sigma_axis.len() + si]
    }

    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(out, "#{c}")?;
        }
        writeln!(out, "C,sigma,stable")?;
        for (ci, c) in self.c_axis.iter().enumerate() {
            for (si, s) in self.sigma_axis.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{}",
                    sig12(*c),
                    sig12(*s),
                    u8::from(self.is_stable(ci, si))
                )?;
            }
        }
        Ok(())
    }
}

/// Marks `(C, sigma)` cells with `alpha_{N,m} >= 0` under exponential gamma.
pub fn stability_region(
    horizon: usize,
    c_axis: &[f64],
    sigma_axis: &[f64],
    m: usize,
) -> Result<RegionGrid> {
    if horizon < 2 || m < 1 || m >= horizon {
        return Err(Error::param(
            "m",
            format!("need N >= 2 and 1 <= m < N, got N={horizon}, m={m}"),
        ));
    }
    if c_axis.is_empty() || sigma_axis.is_empty() {
        return Err(Error::param("axis", "region axes must be nonempty"));
    }
    let bounds: Vec<ExpBound> = c_axis
        .iter()
        .flat_map(|&c| sigma_axis.iter().map(move |&s| ExpBound::new(c, s)))
        .collect::<Result<_>>()?;
    let mask = bounds
        .par_iter()
        .map(|b| {
            let gamma = gamma_from_exponential(*b, horizon)?;
            Ok(alpha_at(&gamma, horizon, m)? >= 0.0)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(RegionGrid {
        horizon,
        m,
        c_axis: c_axis.to_vec(),
        sigma_axis: sigma_axis.to_vec(),
        mask,
    })
}

/// `(m, alpha_{N,m})` for `m = 1..N-1`.
pub fn alpha_profile_m(gamma: &GammaSequence, horizon: usize) -> Result<Vec<(usize, f64)>> {
    (1..horizon)
        .map(|m| Ok((m, alpha_at(gamma, horizon, m)?)))
        .collect()
}

pub fn write_profile_csv<W: Write>(
    profile: &[(usize, f64)],
    mut out: W,
    comments: &[String],
) -> Result<()> {
    for c in comments {
        writeln!(out, "#{c}")?;
    }
    writeln!(out, "m,alpha")?;
    for (m, a) in profile {
        writeln!(out, "{m},{}", sig12(*a))?;
    }
    Ok(())
}

/// One row of the constant-gamma horizon table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HorizonRow {
    pub level: f64,
    pub n_hat_m1: usize,
    pub n_hat_half: usize,
    pub bound_m1: f64,
    /// Bound of the parity of `n_hat_half`.
    pub bound_half: f64,
}

pub fn horizon_row(level: f64, n_max: usize) -> Result<HorizonRow> {
    let gamma_for = |n: usize| constant_gamma(level, n);
    let m1 = minimal_horizon(gamma_for, HorizonPolicy::Fixed(1), n_max)?;
    let half = minimal_horizon(gamma_for, HorizonPolicy::Half, n_max)?;
    Ok(HorizonRow {
        level,
        n_hat_m1: m1.n_hat,
        n_hat_half: half.n_hat,
        bound_m1: horizon_bound_m1(level)?,
        bound_half: horizon_bound_half(level, Parity::of(half.n_hat))?,
    })
}

pub fn horizon_table(levels: &[f64], n_max: usize) -> Result<Vec<HorizonRow>> {
    levels.par_iter().map(|&l| horizon_row(l, n_max)).collect()
}

pub fn write_horizon_csv<W: Write>(
    rows: &[HorizonRow],
    mut out: W,
    comments: &[String],
) -> Result<()> {
    for c in comments {
        writeln!(out, "#{c}")?;
    }
    writeln!(out, "M,N_hat_m1,N_hat_half,bound_m1,bound_half")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            sig12(r.level),
            r.n_hat_m1,
            r.n_hat_half,
            sig12(r.bound_m1),
            sig12(r.bound_half)
        )?;
    }
    Ok(())
}
