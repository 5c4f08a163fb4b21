//! Statistical downlink channel for a single disk cell with the BS at its center.
//!
//! Each UE sits at distance `d` from the BS, sees path loss
//! `beta = 1 / (1 + d^alpha)` shared by all antennas, and independent unit-power
//! Rayleigh fading `a[m][k]` per antenna. The channel power gain is
//! `|a|^2 * beta`.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, QuadSettings};

/// How UE distances are drawn inside the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlacementModel {
    /// Uniform over the disk area: radial density `2r / R^2`.
    #[default]
    UniformArea,
    /// Uniform radius on `[0, R]`.
    UniformRadius,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// BS antenna count `M`.
    pub antennas: usize,
    /// UE count `K`.
    pub users: usize,
    /// Cell radius `R_D`.
    pub radius: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Transmit SNR, linear.
    pub rho: f64,
    pub seed: u64,
    pub placement: PlacementModel,
}

impl SystemConfig {
    pub fn new(
        antennas: usize,
        users: usize,
        radius: f64,
        alpha: f64,
        rho: f64,
        seed: u64,
    ) -> Result<Self> {
        let config = Self {
            antennas,
            users,
            radius,
            alpha,
            rho,
            seed,
            placement: PlacementModel::default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_placement(mut self, placement: PlacementModel) -> Self {
        self.placement = placement;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 {
            return Err(Error::domain("antenna count M must be at least 1"));
        }
        if self.users == 0 {
            return Err(Error::domain("user count K must be at least 1"));
        }
        let positive = [
            ("radius R_D", self.radius),
            ("alpha", self.alpha),
            ("rho", self.rho),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::domain(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// One draw of placement and fading for every (antenna, UE) link.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Distance per UE.
    pub distances: Vec<f64>,
    /// Fast fading, indexed `[m][k]`.
    pub fading: Vec<Vec<Complex64>>,
    /// Path-loss factor per UE.
    pub beta: Vec<f64>,
    /// Channel power gain, indexed `[m][k]`.
    pub gains: Vec<Vec<f64>>,
}

impl ChannelRealization {
    pub fn antennas(&self) -> usize {
        self.gains.len()
    }

    pub fn users(&self) -> usize {
        self.distances.len()
    }

    /// Debug dump with columns `k,d,beta,m,re,im,gain`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,d,beta,m,re,im,gain\n");
        for (k, (&d, &beta)) in self.distances.iter().zip(&self.beta).enumerate() {
            for (m, row) in self.fading.iter().enumerate() {
                let a = row[k];
                let _ = writeln!(
                    out,
                    "{k},{d:.16e},{beta:.16e},{m},{:.16e},{:.16e},{:.16e}",
                    a.re, a.im, self.gains[m][k]
                );
            }
        }
        out
    }
}

/// Draw `K` UE distances in `[0, R_D]`.
pub fn sample_placement<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Vec<f64> {
    (0..config.users)
        .map(|_| {
            let u: f64 = rng.random();
            match config.placement {
                PlacementModel::UniformArea => config.radius * u.sqrt(),
                PlacementModel::UniformRadius => config.radius * u,
            }
        })
        .collect()
}

/// `1 / (1 + d^alpha)`.
pub fn path_loss(d: f64, alpha: f64) -> Result<f64> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::domain(format!(
            "distance must be finite and >= 0, got {d}"
        )));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain(format!(
            "path-loss exponent must be > 0, got {alpha}"
        )));
    }
    Ok(1.0 / (1.0 + d.powf(alpha)))
}

/// Unit-variance circularly-symmetric complex Gaussian.
pub fn sample_fading<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draw fading for every link given UE distances. Draw order is antenna-major.
pub fn sample_channel<R: Rng + ?Sized>(
    config: &SystemConfig,
    distances: &[f64],
    rng: &mut R,
) -> Result<ChannelRealization> {
    if distances.len() != config.users {
        return Err(Error::domain(format!(
            "expected {} distances, got {}",
            config.users,
            distances.len()
        )));
    }
    let beta = distances
        .iter()
        .map(|&d| path_loss(d, config.alpha))
        .collect::<Result<Vec<_>>>()?;
    let fading: Vec<Vec<Complex64>> = (0..config.antennas)
        .map(|_| (0..config.users).map(|_| sample_fading(rng)).collect())
        .collect();
    let gains = fading
        .iter()
        .map(|row| {
            row.iter()
                .zip(&beta)
                .map(|(a, b)| a.norm_sqr() * b)
                .collect()
        })
        .collect();
    Ok(ChannelRealization {
        distances: distances.to_vec(),
        fading,
        beta,
        gains,
    })
}

/// Placement followed by fading, in that draw order.
pub fn sample_realization<R: Rng + ?Sized>(
    config: &SystemConfig,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let distances = sample_placement(config, rng);
    sample_channel(config, &distances, rng)
}

/// Analytic `P(g > x)` for a single link: `E_d[exp(-(1 + d^alpha) x)]` with
/// the expectation taken over the placement density by adaptive quadrature.
pub fn gain_survival(x: f64, config: &SystemConfig, settings: QuadSettings) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("gain must be >= 0, got {x}")));
    }
    let r_max = config.radius;
    let alpha = config.alpha;
    let value = match config.placement {
        PlacementModel::UniformArea => quadrature::integrate(
            |r| 2.0 * r / (r_max * r_max) * (-(1.0 + r.powf(alpha)) * x).exp(),
            0.0,
            r_max,
            settings,
        )?,
        PlacementModel::UniformRadius => quadrature::integrate(
            |r| (-(1.0 + r.powf(alpha)) * x).exp() / r_max,
            0.0,
            r_max,
            settings,
        )?,
    };
    Ok(value.value.clamp(0.0, 1.0))
}
