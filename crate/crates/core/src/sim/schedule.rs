//! Control-horizon schedules `(m_k)` and the packet-dropout channel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schedule {
    horizons: Vec<usize>,
    cap: usize,
}

impl Schedule {
    pub fn new(horizons: Vec<usize>, cap: usize) -> Result<Self> {
        if cap == 0 {
            return Err(Error::param("m_star", "cap must be >= 1"));
        }
        if let Some(m) = horizons.iter().find(|&&m| m == 0 || m > cap) {
            return Err(Error::param(
                "schedule",
                format!("horizon {m} outside 1..={cap}"),
            ));
        }
        Ok(Self { horizons, cap })
    }

    /// `updates` copies of `m`.
    pub fn constant(m: usize, updates: usize) -> Result<Self> {
        Self::new(vec![m; updates], m)
    }

    /// Constant `m` with enough updates to cover `steps`.
    pub fn constant_covering(m: usize, steps: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("m", "control horizon must be >= 1"));
        }
        Self::constant(m, steps.div_ceil(m))
    }

    pub fn horizons(&self) -> &[usize] {
        &self.horizons
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Total steps covered, `sum m_k`.
    pub fn span(&self) -> usize {
        self.horizons.iter().sum()
    }

    /// Update instants `sigma(k) = sum_{i<k} m_i`, `k = 0..len`.
    pub fn update_instants(&self) -> Vec<usize> {
        std::iter::once(0)
            .chain(self.horizons.iter().scan(0, |acc, m| {
                *acc += m;
                Some(*acc)
            }))
            .take(self.horizons.len())
            .collect()
    }

    /// `phi(n) = max { sigma(k) <= n }`, or `None` beyond the schedule.
    pub fn last_update_at(&self, n: usize) -> Option<usize> {
        if n >= self.span() {
            return None;
        }
        self.update_instants()
            .into_iter()
            .take_while(|&s| s <= n)
            .last()
    }
}

/// Builds a schedule from transmission outcomes (`true` = delivered).
///
/// After each update the actuator keeps consuming its buffered sequence while
/// attempts fail; `m_k = 1 + consecutive failures`, capped at `m_star` where
/// the buffer runs out and the next sequence is taken regardless.
pub fn dropout_schedule_from<I>(mut delivered: I, m_star: usize, updates: usize) -> Result<Schedule>
where
    I: FnMut() -> bool,
{
    if m_star == 0 {
        return Err(Error::param("m_star", "must be >= 1"));
    }
    let horizons = (0..updates)
        .map(|_| {
            let mut m = 1;
            while m < m_star && !delivered() {
                m += 1;
            }
            m
        })
        .collect();
    Schedule::new(horizons, m_star)
}

/// Bernoulli channel losing each packet with probability `p`; deterministic
/// for a fixed `seed`.
pub fn dropout_schedule(p: f64, m_star: usize, updates: usize, seed: u64) -> Result<Schedule> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::param(
            "p",
            format!("dropout probability must lie in [0,1), got {p}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dropout_schedule_from(|| !rng.random_bool(p), m_star, updates)
}

/// `E[m_k] = sum_{j<m_star} p^j` for the capped geometric channel.
pub fn expected_horizon(p: f64, m_star: usize) -> f64 {
    (0..m_star).map(|j| p.powi(j as i32)).sum()
}
