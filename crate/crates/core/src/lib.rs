//! NOMA downlink simulator: SIC achievable rates, ergodic sum capacity by
//! Gauss–Chebyshev quadrature with a Monte-Carlo cross-check, and
//! energy-efficiency maximization by Dinkelbach's method.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod commands;
pub mod ee;
pub mod ergodic;
pub mod error;
pub mod quadrature;
pub mod rate;
pub mod rng;
pub mod scenario;

pub use channel::{ChannelRealization, PlacementModel, SystemConfig};
pub use ee::{AntennaBudget, EeSolution, GradientForm, PowerModel};
pub use ergodic::{GcqCoefficients, McEstimate, McSettings};
pub use error::{Error, Result};
pub use rate::{EffectiveGain, PowerAllocation, RateReport};
pub use scenario::Scenario;
