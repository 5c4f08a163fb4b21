//! Scenario files: one TOML document per experiment.
//!
//! SNR is given in dB in scenario files and converted to linear here. A
//! scenario can also be loaded from the comment header of any file this
//! tool wrote, which is how outputs are replayed.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{PlacementModel, SystemConfig};
use crate::ee::{AntennaBudget, InnerSolver, PowerModel, SolverSettings};
use crate::ergodic::{McSettings, OuterQuad, DEFAULT_NODES};
use crate::error::{Error, Result};
use crate::rate::{EffectiveGain, PowerAllocation};
use crate::rng::derive_seed;

pub(crate) const HEADER_TAG: &str = "# noma-ee ";
pub(crate) const CONFIG_BEGIN: &str = "# config-begin";
pub(crate) const CONFIG_END: &str = "# config-end";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub system: SystemSection,
    #[serde(default)]
    pub allocation: AllocationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetSection>,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(default = "one")]
    pub antennas: usize,
    pub users: usize,
    pub radius: f64,
    pub alpha: f64,
    /// Transmit SNR in dB.
    pub rho: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub placement: PlacementModel,
    #[serde(default)]
    pub effective_gain: EffectiveGain,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationRule {
    /// Weights `K, K-1, ..., 1`, weakest user first.
    Linear,
    Uniform,
}

/// Exactly one of `rule`, `gamma` or `weights`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<AllocationRule>,
    /// Explicit coefficients, weakest user first; must sum to one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    /// Non-negative weights, normalized to sum to one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl Default for AllocationSpec {
    fn default() -> Self {
        Self {
            rule: Some(AllocationRule::Linear),
            gamma: None,
            weights: None,
        }
    }
}

impl AllocationSpec {
    pub fn resolve(&self, users: usize) -> Result<PowerAllocation> {
        let alloc = match (&self.rule, &self.gamma, &self.weights) {
            (Some(AllocationRule::Linear), None, None) => PowerAllocation::linear(users)?,
            (Some(AllocationRule::Uniform), None, None) => PowerAllocation::uniform(users)?,
            (None, Some(gamma), None) => PowerAllocation::new(gamma.clone())?,
            (None, None, Some(weights)) => PowerAllocation::from_weights(weights)?,
            _ => {
                return Err(Error::Config(
                    "allocation: give exactly one of `rule`, `gamma` or `weights`".into(),
                ))
            }
        };
        if alloc.users() != users {
            return Err(Error::Invariant(format!(
                "allocation has {} coefficients but system.users = {users}",
                alloc.users()
            )));
        }
        Ok(alloc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSection {
    pub eta: f64,
    pub p_c: f64,
    pub p_rf: f64,
    pub p_t: f64,
    pub n0: f64,
}

impl From<&PowerSection> for PowerModel {
    fn from(p: &PowerSection) -> Self {
        PowerModel {
            eta: p.eta,
            circuit_power: p.p_c,
            rf_power: p.p_rf,
            total_power: p.p_t,
            noise_power: p.n0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    pub bs_antennas: u32,
    pub bs_rf_chains: u32,
    pub antennas_per_user: Vec<u32>,
    pub min_rf_per_user: Vec<u32>,
    /// Defaults to `antennas_per_user`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rf_per_user: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerMode {
    Bisection,
    Subgradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    #[default]
    Ergodic,
    Optimize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: String,
    pub values: Vec<f64>,
    #[serde(default)]
    pub mode: SweepMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub trials: usize,
    pub gcq_nodes: usize,
    pub partitions: usize,
    pub ordered: bool,
    pub quad_tol: f64,
    pub ee_tol: f64,
    pub max_iter: usize,
    pub inner: InnerMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            trials: 10_000,
            gcq_nodes: DEFAULT_NODES,
            partitions: 64,
            ordered: false,
            quad_tol: 1e-8,
            ee_tol: 1e-8,
            max_iter: 50,
            inner: InnerMode::Bisection,
            sweep: None,
        }
    }
}

/// Scalar fields a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Antennas,
    Users,
    Radius,
    Alpha,
    Rho,
    Eta,
    CircuitPower,
    RfPower,
    TotalPower,
    Noise,
}

impl Axis {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "antennas" | "M" => Axis::Antennas,
            "users" | "K" => Axis::Users,
            "radius" | "R_D" => Axis::Radius,
            "alpha" => Axis::Alpha,
            "rho" => Axis::Rho,
            "eta" => Axis::Eta,
            "p_c" | "P_c" => Axis::CircuitPower,
            "p_rf" | "P_RF" => Axis::RfPower,
            "p_t" | "P_T" => Axis::TotalPower,
            "n0" | "N0" => Axis::Noise,
            other => {
                return Err(Error::Config(format!(
                    "run.sweep.axis: unknown axis `{other}`"
                )))
            }
        })
    }

    fn is_integer(self) -> bool {
        matches!(self, Axis::Antennas | Axis::Users)
    }

    fn is_power(self) -> bool {
        matches!(
            self,
            Axis::Eta | Axis::CircuitPower | Axis::RfPower | Axis::TotalPower | Axis::Noise
        )
    }
}

/// CLI overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub gcq_nodes: Option<usize>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Load a scenario file, or the scenario embedded in an output header.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if text.starts_with(HEADER_TAG) {
            Self::from_toml(&config_from_header(&text)?)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Hex SHA-256 of the resolved TOML.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn with_overrides(mut self, overrides: Overrides) -> Result<Self> {
        if let Some(seed) = overrides.seed {
            self.system.seed = seed;
        }
        if let Some(trials) = overrides.trials {
            self.run.trials = trials;
        }
        if let Some(nodes) = overrides.gcq_nodes {
            self.run.gcq_nodes = nodes;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.system_config()?;
        self.allocation.resolve(self.system.users)?;
        if let Some(power) = &self.power {
            PowerModel::from(power).validate()?;
        }
        if let Some(budget) = &self.budget {
            let k = self.system.users;
            let rf_len = budget.rf_per_user.as_ref().map_or(k, Vec::len);
            if budget.antennas_per_user.len() != k
                || budget.min_rf_per_user.len() != k
                || rf_len != k
            {
                return Err(Error::Invariant(format!(
                    "budget: per-user lists must have system.users = {k} entries"
                )));
            }
        }
        let run = &self.run;
        if run.trials == 0 {
            return Err(Error::Invariant("run.trials must be >= 1".into()));
        }
        if run.gcq_nodes == 0 {
            return Err(Error::Invariant("run.gcq_nodes must be >= 1".into()));
        }
        if run.partitions == 0 {
            return Err(Error::Invariant("run.partitions must be >= 1".into()));
        }
        if !(run.quad_tol > 0.0) || !(run.ee_tol > 0.0) {
            return Err(Error::Invariant("run tolerances must be > 0".into()));
        }
        if let Some(sweep) = &run.sweep {
            let axis = Axis::parse(&sweep.axis)?;
            if sweep.values.is_empty() {
                return Err(Error::Config(
                    "run.sweep.values: sweep list is empty".into(),
                ));
            }
            if !sweep.values.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Config(
                    "run.sweep.values must be strictly increasing".into(),
                ));
            }
            if axis.is_integer()
                && sweep
                    .values
                    .iter()
                    .any(|v| !(v.fract() == 0.0 && *v >= 1.0))
            {
                return Err(Error::Config(format!(
                    "run.sweep.values: axis `{}` takes positive integers",
                    sweep.axis
                )));
            }
            if axis.is_power() && self.power.is_none() {
                return Err(Error::Config(format!(
                    "run.sweep.axis `{}` needs a [power] section",
                    sweep.axis
                )));
            }
        }
        Ok(())
    }

    pub fn system_config(&self) -> Result<SystemConfig> {
        let s = &self.system;
        let config = SystemConfig {
            antennas: s.antennas,
            users: s.users,
            radius: s.radius,
            alpha: s.alpha,
            rho: db_to_linear(s.rho),
            seed: s.seed,
            placement: s.placement,
        };
        config
            .validate()
            .map_err(|e| Error::Invariant(format!("system: {e}")))?;
        Ok(config)
    }

    pub fn allocation(&self) -> Result<PowerAllocation> {
        self.allocation.resolve(self.system.users)
    }

    pub fn power_model(&self) -> Result<PowerModel> {
        self.power
            .as_ref()
            .map(PowerModel::from)
            .ok_or_else(|| Error::Config("missing section `power`".into()))
    }

    /// Explicit budget, or one antenna and one RF chain per UE.
    pub fn antenna_budget(&self) -> AntennaBudget {
        match &self.budget {
            Some(b) => AntennaBudget {
                bs_antennas: b.bs_antennas,
                bs_rf_chains: b.bs_rf_chains,
                antennas_per_user: b.antennas_per_user.clone(),
                min_rf_per_user: b.min_rf_per_user.clone(),
                rf_per_user: b
                    .rf_per_user
                    .clone()
                    .unwrap_or_else(|| b.antennas_per_user.clone()),
            },
            None => AntennaBudget::uniform(self.system.users, 1),
        }
    }

    pub fn mc_settings(&self) -> McSettings {
        McSettings {
            trials: self.run.trials,
            partitions: self.run.partitions,
            ordered: self.run.ordered,
        }
    }

    pub fn outer_quad(&self) -> OuterQuad {
        OuterQuad {
            abs_tol: self.run.quad_tol,
            ..OuterQuad::default()
        }
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            tolerance: self.run.ee_tol,
            max_iter: self.run.max_iter,
            inner: match self.run.inner {
                InnerMode::Bisection => InnerSolver::Bisection,
                InnerMode::Subgradient => InnerSolver::Subgradient,
            },
            ..SolverSettings::default()
        }
    }

    /// The scenario at sweep point `index`, with its seed derived from the
    /// master seed and the point index. The sweep itself is dropped.
    pub fn at_point(&self, axis: Axis, value: f64, index: usize) -> Result<Scenario> {
        let mut point = self.clone();
        point.run.sweep = None;
        point.system.seed = derive_seed(self.system.seed, index as u64);
        let power = point.power.as_mut();
        match (axis, power) {
            (Axis::Antennas, _) => point.system.antennas = value as usize,
            (Axis::Users, _) => {
                point.system.users = value as usize;
                if point.budget.is_some() {
                    return Err(Error::Invariant(
                        "cannot sweep users with an explicit [budget]".into(),
                    ));
                }
            }
            (Axis::Radius, _) => point.system.radius = value,
            (Axis::Alpha, _) => point.system.alpha = value,
            (Axis::Rho, _) => point.system.rho = value,
            (Axis::Eta, Some(p)) => p.eta = value,
            (Axis::CircuitPower, Some(p)) => p.p_c = value,
            (Axis::RfPower, Some(p)) => p.p_rf = value,
            (Axis::TotalPower, Some(p)) => p.p_t = value,
            (Axis::Noise, Some(p)) => p.n0 = value,
            (_, None) => {
                return Err(Error::Config(
                    "sweep over a power axis needs a [power] section".into(),
                ))
            }
        }
        point.validate()?;
        Ok(point)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Recover the scenario TOML embedded between the config markers of an output header.
pub fn config_from_header(text: &str) -> Result<String> {
    let mut lines = text.lines().skip_while(|l| *l != CONFIG_BEGIN);
    if lines.next().is_none() {
        return Err(Error::Config("output header has no embedded config".into()));
    }
    let mut config = String::new();
    for line in lines {
        if line == CONFIG_END {
            return Ok(config);
        }
        let body = if line == "#" {
            ""
        } else {
            line.strip_prefix("# ")
                .ok_or_else(|| Error::Config(format!("malformed header line: {line}")))?
        };
        config.push_str(body);
        config.push('\n');
    }
    Err(Error::Config(
        "output header config is not terminated".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "unit"

[system]
users = 3
radius = 10.0
alpha = 2.0
rho = 10.0
seed = 7
"#;

    #[test]
    fn defaults_and_conversion() {
        let s = Scenario::from_toml(BASE).unwrap();
        assert_eq!(s.system.antennas, 1);
        assert_eq!(s.run.gcq_nodes, 50);
        let c = s.system_config().unwrap();
        assert!((c.rho - 10.0).abs() < 1e-12);
        assert_eq!(c.placement, PlacementModel::UniformArea);
        assert_eq!(s.allocation().unwrap(), PowerAllocation::linear(3).unwrap());
        assert_eq!(s.antenna_budget(), AntennaBudget::uniform(3, 1));
        assert!(matches!(s.power_model(), Err(Error::Config(_))));
    }

    #[test]
    fn missing_field_is_named() {
        let err = Scenario::from_toml(&BASE.replace("rho = 10.0\n", "")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("`rho`"), "{err}");
    }

    #[test]
    fn unknown_field_and_bad_syntax() {
        assert_eq!(
            Scenario::from_toml(&format!("{BASE}bogus = 1\n"))
                .unwrap_err()
                .exit_code(),
            2
        );
        let err = Scenario::from_toml("name = \n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn invariant_violations_exit_three() {
        let bad_radius = BASE.replace("radius = 10.0", "radius = -1.0");
        assert_eq!(Scenario::from_toml(&bad_radius).unwrap_err().exit_code(), 3);
        let bad_gamma = format!("{BASE}[allocation]\ngamma = [0.5, 0.2, 0.2]\n");
        assert_eq!(Scenario::from_toml(&bad_gamma).unwrap_err().exit_code(), 3);
        let short_gamma = format!("{BASE}[allocation]\ngamma = [0.5, 0.5]\n");
        assert_eq!(
            Scenario::from_toml(&short_gamma).unwrap_err().exit_code(),
            3
        );
        let two_specs = format!("{BASE}[allocation]\nrule = \"uniform\"\nweights = [1, 2, 3]\n");
        assert_eq!(Scenario::from_toml(&two_specs).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn sweep_validation() {
        let sweep = |body: &str| Scenario::from_toml(&format!("{BASE}[run.sweep]\n{body}\n"));
        assert!(sweep("axis = \"rho\"\nvalues = [0.0, 10.0, 20.0]").is_ok());
        assert_eq!(
            sweep("axis = \"rho\"\nvalues = []")
                .unwrap_err()
                .exit_code(),
            2
        );
        assert_eq!(
            sweep("axis = \"nope\"\nvalues = [1.0]")
                .unwrap_err()
                .exit_code(),
            2
        );
        assert_eq!(
            sweep("axis = \"rho\"\nvalues = [1.0, 1.0]")
                .unwrap_err()
                .exit_code(),
            2
        );
        assert_eq!(
            sweep("axis = \"K\"\nvalues = [2.5]")
                .unwrap_err()
                .exit_code(),
            2
        );
        assert_eq!(
            sweep("axis = \"P_RF\"\nvalues = [1.0]")
                .unwrap_err()
                .exit_code(),
            2
        );
    }

    #[test]
    fn sweep_points_derive_seeds() {
        let s = Scenario::from_toml(BASE).unwrap();
        let a = s.at_point(Axis::Users, 5.0, 0).unwrap();
        let b = s.at_point(Axis::Users, 5.0, 1).unwrap();
        assert_eq!(a.system.users, 5);
        assert_ne!(a.system.seed, b.system.seed);
        assert_eq!(a.system.seed, derive_seed(7, 0));
        assert_eq!(a.allocation().unwrap().users(), 5);
    }

    #[test]
    fn overrides_apply() {
        let s = Scenario::from_toml(BASE)
            .unwrap()
            .with_overrides(Overrides {
                seed: Some(99),
                trials: Some(12),
                gcq_nodes: Some(20),
            })
            .unwrap();
        assert_eq!((s.system.seed, s.run.trials, s.run.gcq_nodes), (99, 12, 20));
        let zero = Scenario::from_toml(BASE)
            .unwrap()
            .with_overrides(Overrides {
                trials: Some(0),
                ..Default::default()
            });
        assert!(zero.is_err());
    }

    #[test]
    fn toml_round_trip_is_stable() {
        let mut s = Scenario::from_toml(BASE).unwrap();
        s.system.rho = 0.1 + 0.2;
        s.run.quad_tol = 1e-11;
        let text = s.to_toml();
        let back = Scenario::from_toml(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_toml(), text);
        assert_eq!(back.hash(), s.hash());
        assert_eq!(s.hash().len(), 64);
    }

    #[test]
    fn header_extraction() {
        let text = "# noma-ee 0.1.0\n# config-begin\n# name = \"x\"\n#\n# [system]\n# users = 1\n# config-end\na,b\n";
        assert_eq!(
            config_from_header(text).unwrap(),
            "name = \"x\"\n\n[system]\nusers = 1\n"
        );
        assert!(config_from_header("# noma-ee\n").is_err());
        assert!(config_from_header("# config-begin\n# a = 1\n").is_err());
    }
}
