//! Controllability bounds `V_i(x) <= gamma_i * V_1(x)`.
//!
//! A [`GammaSequence`] stores `gamma_1..gamma_N` (1-based). `gamma_0 = 1` is a
//! convention used only when forming differences and is never stored.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig12;

/// Monotone nondecreasing sequence `gamma_1..gamma_N` with `gamma_1 >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaSequence {
    values: Vec<f64>,
}

impl GammaSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidGamma(format!(
                "need at least 2 entries, got {}",
                values.len()
            )));
        }
        for (idx, &v) in values.iter().enumerate() {
            let i = idx + 1;
            if !v.is_finite() {
                return Err(Error::InvalidGamma(format!("gamma_{i} is not finite")));
            }
            if v < 1.0 {
                return Err(Error::InvalidGamma(format!("gamma_{i} = {v} < 1")));
            }
            if idx > 0 && v < values[idx - 1] {
                return Err(Error::InvalidGamma(format!(
                    "not monotone: gamma_{i} = {v} < gamma_{} = {}",
                    i - 1,
                    values[idx - 1]
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `gamma_i` for `i` in `0..=len`; `gamma_0` is the convention value 1.
    ///
    /// Panics if `i > len`.
    pub fn get(&self, i: usize) -> f64 {
        if i == 0 {
            1.0
        } else {
            self.values[i - 1]
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `Delta_i = gamma_i - gamma_{i-1}` with `gamma_0 = 1`.
    pub fn delta(&self, i: usize) -> f64 {
        self.get(i) - self.get(i - 1)
    }

    /// The first `n` entries, or `None` if the sequence is shorter than `n`.
    pub fn truncated(&self, n: usize) -> Option<Self> {
        (n >= 2 && n <= self.len()).then(|| Self {
            values: self.values[..n].to_vec(),
        })
    }

    /// Writes the `i,gamma` CSV. Lines in `comments` are prefixed with `#`.
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(out, "#{c}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "gamma"])?;
        for (idx, v) in self.values.iter().enumerate() {
            w.write_record([(idx + 1).to_string(), sig12(*v)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the `i,gamma` CSV. Rows must be numbered 1..N in order; lines
    /// starting with `#` are skipped.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "i" || &headers[1] != "gamma" {
            return Err(Error::InvalidGamma(format!(
                "expected header `i,gamma`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut values = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let expected = row + 1;
            let idx: usize = record[0]
                .parse()
                .map_err(|_| Error::InvalidGamma(format!("bad index `{}`", &record[0])))?;
            if idx != expected {
                return Err(Error::InvalidGamma(format!(
                    "row {expected} carries index {idx}"
                )));
            }
            let v: f64 = record[1]
                .parse()
                .map_err(|_| Error::InvalidGamma(format!("bad value `{}`", &record[1])))?;
            values.push(v);
        }
        Self::new(values)
    }
}

/// Exponential controllability `beta(r, n) = C * sigma^n * r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpBound {
    overshoot: f64,
    decay: f64,
}

impl ExpBound {
    pub fn new(overshoot: f64, decay: f64) -> Result<Self> {
        if !(overshoot >= 1.0 && overshoot.is_finite()) {
            return Err(Error::param(
                "C",
                format!("overshoot must be >= 1, got {overshoot}"),
            ));
        }
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::param(
                "sigma",
                format!("decay must lie in (0,1), got {decay}"),
            ));
        }
        Ok(Self { overshoot, decay })
    }

    pub fn overshoot(&self) -> f64 {
        self.overshoot
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }
}

/// Per-step bounds `c_n` with `l(x_u(n), u(n)) <= c_n V_1(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CSequence {
    values: Vec<f64>,
}

impl CSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("c", "sequence is empty"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::param(
                "c",
                format!("entries must be finite and >= 0, got {v}"),
            ));
        }
        if values[0] < 1.0 {
            return Err(Error::param(
                "c",
                format!("c_0 must be >= 1, got {}", values[0]),
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `gamma_i = C * sum_{n<i} sigma^n = C (1 - sigma^i) / (1 - sigma)`.
pub fn gamma_from_exponential(bound: ExpBound, length: usize) -> Result<GammaSequence> {
    if length < 2 {
        return Err(Error::param(
            "length",
            format!("must be >= 2, got {length}"),
        ));
    }
    let ExpBound { overshoot, decay } = bound;
    let values = (1..=length)
        .map(|i| overshoot * (1.0 - decay.powi(i as i32)) / (1.0 - decay))
        .collect();
    GammaSequence::new(values)
}

/// Prefix sums `gamma_i = sum_{n<i} c_n`.
pub fn gamma_from_c_sequence(c: &CSequence) -> Result<GammaSequence> {
    let values = c
        .values
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    GammaSequence::new(values)
}

pub fn constant_gamma(level: f64, length: usize) -> Result<GammaSequence> {
    if !(level >= 1.0) {
        return Err(Error::param("M", format!("must be >= 1, got {level}")));
    }
    if length < 2 {
        return Err(Error::param(
            "length",
            format!("must be >= 2, got {length}"),
        ));
    }
    GammaSequence::new(vec![level; length])
}

/// Slack on `Delta_{n+m}` in ulps of `gamma_{n+m}`: differences of nearly
/// equal entries carry no more accuracy than that.
const DELTA_ULPS: f64 = 8.0;

/// `Delta_n * Delta_m >= Delta_{n+m}` for all `n, m >= 1`, `n + m <= N`,
/// up to rounding in the differences.
pub fn check_submultiplicative(gamma: &GammaSequence) -> bool {
    let n_max = gamma.len();
    (1..n_max).all(|n| {
        (1..=n_max - n).all(|m| {
            let slack = DELTA_ULPS * f64::EPSILON * gamma.get(n + m);
            gamma.delta(n) * gamma.delta(m) >= gamma.delta(n + m) - slack
        })
    })
}
