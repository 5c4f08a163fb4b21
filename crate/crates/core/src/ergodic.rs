//! Ergodic sum rate of the single-antenna NOMA downlink.
//!
//! Three routes are provided:
//! - a Gauss–Chebyshev approximation of the channel-gain PDF as a mixture of
//!   exponentials, integrated against each user's rate expression;
//! - a Monte-Carlo estimate drawing gains straight from the channel model;
//! - the high-user-count reference law `log2(rho * log2(log2 K))`.
//!
//! The analytic model gives every user the same unordered gain distribution,
//! and the Monte-Carlo oracle follows the same convention unless `ordered` is
//! requested.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::channel::{sample_realization, SystemConfig};
use crate::error::{Error, Result};
use crate::quadrature::{self, QuadSettings};
use crate::rate::{sum_rate, sum_rate_fixed_order, PowerAllocation};
use crate::rng::substream;

/// Default number of Chebyshev nodes.
pub const DEFAULT_NODES: usize = 50;

/// Chebyshev nodes and composite weights for the radial integral of the gain PDF.
#[derive(Debug, Clone, PartialEq)]
pub struct GcqCoefficients {
    pub radius: f64,
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
    /// Radius abscissa `(R/2) theta + R/2`.
    pub t: Vec<f64>,
    /// Decay rate `1 + t^alpha`.
    pub c: Vec<f64>,
    /// `omega * sqrt(1 - theta^2) * t * c`.
    pub delta: Vec<f64>,
}

impl GcqCoefficients {
    pub fn nodes(&self) -> usize {
        self.theta.len()
    }

    /// `(1/R) sum delta/c`, the total mass of the approximate PDF.
    pub fn normalization(&self) -> f64 {
        self.delta
            .iter()
            .zip(&self.c)
            .map(|(d, c)| d / c)
            .sum::<f64>()
            / self.radius
    }

    /// Smallest decay rate; governs the tail of the PDF.
    pub fn min_decay(&self) -> f64 {
        self.c.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_decay(&self) -> f64 {
        self.c.iter().copied().fold(0.0, f64::max)
    }
}

pub fn gcq_coefficients(nodes: usize, radius: f64, alpha: f64) -> Result<GcqCoefficients> {
    if nodes == 0 {
        return Err(Error::domain("GCQ needs at least one node"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::domain(format!(
            "cell radius must be > 0, got {radius}"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!(
            "path-loss exponent must be > 0, got {alpha}"
        )));
    }
    let n = nodes as f64;
    let theta: Vec<f64> = (1..=nodes)
        .map(|j| ((2 * j - 1) as f64 * PI / (2.0 * n)).cos())
        .collect();
    let omega = vec![PI / n; nodes];
    let t: Vec<f64> = theta
        .iter()
        .map(|th| 0.5 * radius * th + 0.5 * radius)
        .collect();
    let c: Vec<f64> = t.iter().map(|t| 1.0 + t.powf(alpha)).collect();
    let delta = (0..nodes)
        .map(|j| omega[j] * (1.0 - theta[j] * theta[j]).sqrt() * t[j] * c[j])
        .collect();
    Ok(GcqCoefficients {
        radius,
        theta,
        omega,
        t,
        c,
        delta,
    })
}

/// Approximate density of the channel gain at `x`.
pub fn gain_pdf(x: f64, coeffs: &GcqCoefficients) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("gain must be >= 0, got {x}")));
    }
    Ok(pdf_unchecked(x, coeffs))
}

fn pdf_unchecked(x: f64, coeffs: &GcqCoefficients) -> f64 {
    coeffs
        .delta
        .iter()
        .zip(&coeffs.c)
        .map(|(d, c)| d * (-c * x).exp())
        .sum::<f64>()
        / coeffs.radius
}

/// Integral of [`gain_pdf`] from 0 to `x`.
pub fn gain_cdf(x: f64, coeffs: &GcqCoefficients) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("gain must be >= 0, got {x}")));
    }
    Ok(coeffs
        .delta
        .iter()
        .zip(&coeffs.c)
        .map(|(d, c)| d / c * -(-c * x).exp_m1())
        .sum::<f64>()
        / coeffs.radius)
}

/// Settings for the outer integral over the gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterQuad {
    /// Absolute tolerance per rate term.
    pub abs_tol: f64,
    /// The integral is truncated where `exp(-c_min x)` drops below this.
    pub tail: f64,
    pub max_intervals: usize,
}

impl Default for OuterQuad {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            tail: 1e-12,
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcqRate {
    /// Contribution of each user, weakest first.
    pub terms: Vec<f64>,
    pub sum: f64,
    /// Summed quadrature error estimate.
    pub error: f64,
}

/// Ergodic sum rate with the gain PDF replaced by its `nodes`-point GCQ mixture.
///
/// The analytic model is single-antenna; `config.antennas` is ignored.
pub fn ergodic_sum_rate_gcq(
    config: &SystemConfig,
    alloc: &PowerAllocation,
    nodes: usize,
    quad: OuterQuad,
) -> Result<GcqRate> {
    config.validate()?;
    if alloc.users() != config.users {
        return Err(Error::domain(format!(
            "allocation for {} users but config has K = {}",
            alloc.users(),
            config.users
        )));
    }
    let coeffs = gcq_coefficients(nodes, config.radius, config.alpha)?;
    let panels = panels(&coeffs, quad.tail);
    let panel_settings = QuadSettings {
        abs_tol: quad.abs_tol / panels.len() as f64,
        max_intervals: quad.max_intervals,
    };
    let rho = config.rho;

    let mut terms = Vec::with_capacity(config.users);
    let mut error = 0.0;
    for (k, &gamma) in alloc.gamma().iter().enumerate() {
        if gamma == 0.0 {
            terms.push(0.0);
            continue;
        }
        let residual = alloc.residual(k);
        let integrand = |x: f64| {
            let snr = x * rho;
            (1.0 + snr * gamma / (snr * residual + 1.0)).log2() * pdf_unchecked(x, &coeffs)
        };
        let mut value = 0.0;
        for w in panels.windows(2) {
            let r =
                quadrature::integrate(integrand, w[0], w[1], panel_settings).map_err(
                    |e| match e {
                        Error::Numerical(msg) => Error::Numerical(format!("rate term {k}: {msg}")),
                        other => other,
                    },
                )?;
            value += r.value;
            error += r.error;
        }
        terms.push(value);
    }
    Ok(GcqRate {
        sum: terms.iter().sum(),
        terms,
        error,
    })
}

// Breakpoints for the outer integral: geometric panels from the fastest decay
// scale up to the truncation point, so every exponential is resolved.
fn panels(coeffs: &GcqCoefficients, tail: f64) -> Vec<f64> {
    let x_max = -tail.ln() / coeffs.min_decay();
    let x_min = 1e-3 / coeffs.max_decay();
    let mut points = vec![0.0];
    let mut x = x_min.min(x_max / 2.0);
    while x < x_max {
        points.push(x);
        x *= 2.0;
    }
    points.push(x_max);
    points
}

/// Monte-Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSettings {
    pub trials: usize,
    /// Number of independent random streams. Trials are dealt out in
    /// contiguous chunks of `ceil(trials / partitions)`, stream 0 first.
    pub partitions: usize,
    /// Sort each trial's gains before assigning power (order statistics).
    pub ordered: bool,
}

impl McSettings {
    pub fn new(trials: usize) -> Self {
        Self {
            trials,
            partitions: 64,
            ordered: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Standard error of the mean; NaN for a single trial.
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2
            + other.m2
            + delta * delta * (self.count as f64 * other.count as f64) / count as f64;
        Moments { count, mean, m2 }
    }
}

/// Monte-Carlo ergodic sum rate. Deterministic given `config.seed` and
/// `settings.partitions`; partition `p` draws from stream `p`.
pub fn ergodic_sum_rate_mc(
    config: &SystemConfig,
    alloc: &PowerAllocation,
    settings: McSettings,
) -> Result<McEstimate> {
    config.validate()?;
    if settings.trials == 0 {
        return Err(Error::domain("Monte-Carlo needs at least one trial"));
    }
    if settings.partitions == 0 {
        return Err(Error::domain("Monte-Carlo needs at least one partition"));
    }
    if alloc.users() != config.users {
        return Err(Error::domain(format!(
            "allocation for {} users but config has K = {}",
            alloc.users(),
            config.users
        )));
    }
    let single = SystemConfig {
        antennas: 1,
        ..config.clone()
    };
    let parts = settings.partitions;
    let trials = settings.trials;
    let chunk = trials.div_ceil(parts);
    let partial = (0..parts)
        .into_par_iter()
        .map(|p| {
            let begin = (p * chunk).min(trials);
            let end = ((p + 1) * chunk).min(trials);
            let mut rng = substream(single.seed, p as u64);
            let mut moments = Moments::default();
            for _ in begin..end {
                let realization = sample_realization(&single, &mut rng)?;
                let gains = &realization.gains[0];
                let report = if settings.ordered {
                    sum_rate(gains, single.rho, alloc)?
                } else {
                    sum_rate_fixed_order(gains, single.rho, alloc)?
                };
                moments.push(report.sum);
            }
            Ok(moments)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = partial.into_iter().fold(Moments::default(), Moments::merge);
    let stderr = if total.count > 1 {
        (total.m2 / (total.count - 1) as f64 / total.count as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(McEstimate {
        mean: total.mean,
        stderr,
        trials: total.count,
    })
}

/// `log2(rho * log2(log2 K))`, defined for `K >= 3` and `rho * log2(log2 K) > 1`.
pub fn asymptotic_rate(rho: f64, users: usize) -> Result<f64> {
    if users < 3 {
        return Err(Error::domain(format!(
            "asymptotic rate needs K >= 3, got K = {users}"
        )));
    }
    let loglog = (users as f64).log2().log2();
    let arg = rho * loglog;
    if !(arg > 1.0) {
        return Err(Error::domain(format!(
            "asymptotic rate needs rho * log2(log2 K) > 1, got {arg}"
        )));
    }
    Ok(arg.log2())
}
