//! Achievable rates under superposition coding with SIC decoding.
//!
//! Users are indexed weakest first. UE `k` cancels every weaker user's
//! signal and sees the power of the stronger users `i > k` as noise, so the
//! strongest UE decodes interference-free.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// Power split across users, weakest user first.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    gamma: Vec<f64>,
}

impl PowerAllocation {
    /// Coefficients must be non-negative and sum to one within 1e-12.
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::domain("power allocation needs at least one user"));
        }
        if let Some((k, g)) = gamma
            .iter()
            .enumerate()
            .find(|(_, g)| !(**g >= 0.0 && g.is_finite()))
        {
            return Err(Error::domain(format!(
                "gamma[{k}] = {g} is not a finite non-negative number"
            )));
        }
        let total: f64 = gamma.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::domain(format!(
                "power coefficients sum to {total}, expected 1"
            )));
        }
        Ok(Self { gamma })
    }

    /// Normalize arbitrary non-negative weights into an allocation.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || !(total > 0.0) {
            return Err(Error::domain(
                "allocation weights must be non-negative with a positive sum",
            ));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    /// `gamma[k]` proportional to `K - k` (0-based): the weakest user gets the most power.
    pub fn linear(users: usize) -> Result<Self> {
        let weights: Vec<f64> = (0..users).map(|k| (users - k) as f64).collect();
        Self::from_weights(&weights)
    }

    pub fn uniform(users: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; users])
    }

    pub fn users(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Power of the users stronger than `k`, which UE `k` treats as noise.
    pub fn residual(&self, k: usize) -> f64 {
        self.gamma[k + 1..].iter().sum()
    }
}

/// How the per-antenna gains of one UE collapse to a single effective gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectiveGain {
    /// Best single antenna.
    #[default]
    Max,
    /// Coherent combining over all antennas.
    Sum,
}

impl EffectiveGain {
    pub fn per_user(self, realization: &ChannelRealization) -> Vec<f64> {
        (0..realization.users())
            .map(|k| {
                let column = realization.gains.iter().map(|row| row[k]);
                match self {
                    EffectiveGain::Max => column.fold(0.0, f64::max),
                    EffectiveGain::Sum => column.sum(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// Original user index for each decoding position, weakest first.
    pub order: Vec<usize>,
    /// Rate per decoding position in bits/s/Hz.
    pub per_user: Vec<f64>,
    pub sum: f64,
}

/// Stable ascending sort of users by gain.
pub fn order_users(gains: &[f64]) -> Result<Vec<usize>> {
    if gains.is_empty() {
        return Err(Error::domain("cannot order an empty user set"));
    }
    if let Some(g) = gains.iter().find(|g| g.is_nan()) {
        return Err(Error::domain(format!("gain {g} cannot be ordered")));
    }
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[a].total_cmp(&gains[b]));
    Ok(order)
}

/// Rate of the user at decoding position `k` (0-based, weakest first).
pub fn sic_rate(k: usize, gain: f64, rho: f64, alloc: &PowerAllocation) -> Result<f64> {
    if k >= alloc.users() {
        return Err(Error::domain(format!(
            "user index {k} out of range for {} users",
            alloc.users()
        )));
    }
    if !(gain >= 0.0) {
        return Err(Error::domain(format!("gain must be >= 0, got {gain}")));
    }
    let gamma = alloc.gamma[k];
    if gamma == 0.0 {
        return Ok(0.0);
    }
    let snr = rho * gain;
    let sinr = snr * gamma / (snr * alloc.residual(k) + 1.0);
    Ok((1.0 + sinr).log2())
}

/// Rates with users decoded in the order given, `gains[k]` belonging to position `k`.
pub fn sum_rate_fixed_order(
    gains: &[f64],
    rho: f64,
    alloc: &PowerAllocation,
) -> Result<RateReport> {
    check_users(gains, alloc)?;
    let per_user = gains
        .iter()
        .enumerate()
        .map(|(k, &g)| sic_rate(k, g, rho, alloc))
        .collect::<Result<Vec<_>>>()?;
    Ok(RateReport {
        order: (0..gains.len()).collect(),
        sum: per_user.iter().sum(),
        per_user,
    })
}

/// Sort users by effective gain, then assign `gamma` in decoding order.
pub fn sum_rate(gains: &[f64], rho: f64, alloc: &PowerAllocation) -> Result<RateReport> {
    check_users(gains, alloc)?;
    let order = order_users(gains)?;
    let sorted: Vec<f64> = order.iter().map(|&i| gains[i]).collect();
    let report = sum_rate_fixed_order(&sorted, rho, alloc)?;
    Ok(RateReport { order, ..report })
}

/// [`sum_rate`] on a full realization, collapsing antennas with `mode`.
pub fn realization_sum_rate(
    realization: &ChannelRealization,
    mode: EffectiveGain,
    rho: f64,
    alloc: &PowerAllocation,
) -> Result<RateReport> {
    sum_rate(&mode.per_user(realization), rho, alloc)
}

fn check_users(gains: &[f64], alloc: &PowerAllocation) -> Result<()> {
    if gains.len() != alloc.users() {
        return Err(Error::domain(format!(
            "{} gains but allocation for {} users",
            gains.len(),
            alloc.users()
        )));
    }
    Ok(())
}
