//! Energy-efficiency maximization by Dinkelbach's method.
//!
//! Every UE gets the same transmit power `P`. The achievable rate is the
//! high-SNR proxy `log2((P / N0) * log2(log2 K))`, and energy efficiency is
//! that rate over `P + P_RF`. Dinkelbach turns the ratio into a sequence of
//! concave subproblems `max_P rate(P) - S * (P + P_RF)`, each solved on the
//! power interval allowed by the budget.

use std::f64::consts::LN_2;

use crate::error::{Constraint, Error, Result};

/// Power-consumption parameters, in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerModel {
    /// Amplifier efficiency in `(0, 1]`.
    pub eta: f64,
    /// Per-UE circuit power `P_c`.
    pub circuit_power: f64,
    /// RF-chain power `P_RF`.
    pub rf_power: f64,
    /// Total budget `P_T`.
    pub total_power: f64,
    /// Noise power `N0`.
    pub noise_power: f64,
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::domain(format!(
                "eta must lie in (0, 1], got {}",
                self.eta
            )));
        }
        if !(self.total_power > 0.0 && self.total_power.is_finite()) {
            return Err(Error::domain(format!(
                "P_T must be finite and > 0, got {}",
                self.total_power
            )));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::domain(format!(
                "N0 must be finite and > 0, got {}",
                self.noise_power
            )));
        }
        if !self.circuit_power.is_finite() || !self.rf_power.is_finite() {
            return Err(Error::domain("P_c and P_RF must be finite"));
        }
        Ok(())
    }
}

/// Antenna and RF-chain counts checked by C2 and C3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AntennaBudget {
    /// `N_bs^a`.
    pub bs_antennas: u32,
    /// `N_bs^rf`.
    pub bs_rf_chains: u32,
    /// `N_{k,b}^a` per UE.
    pub antennas_per_user: Vec<u32>,
    /// `N_{k,c}^UE` per UE.
    pub min_rf_per_user: Vec<u32>,
    /// `N_{k,c}^rf` per UE.
    pub rf_per_user: Vec<u32>,
}

impl AntennaBudget {
    /// `per_user` antennas and as many RF chains for each of `users` UEs,
    /// with BS counts exactly covering the demand.
    pub fn uniform(users: usize, per_user: u32) -> Self {
        let total = per_user * users as u32;
        Self {
            bs_antennas: total,
            bs_rf_chains: total,
            antennas_per_user: vec![per_user; users],
            min_rf_per_user: vec![per_user; users],
            rf_per_user: vec![per_user; users],
        }
    }
}

/// Outcome of each constraint; `true` means satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintReport {
    pub c1: bool,
    pub c2: bool,
    pub c3: bool,
    pub c4: bool,
}

impl ConstraintReport {
    pub fn feasible(&self) -> bool {
        self.c1 && self.c2 && self.c3 && self.c4
    }

    pub fn first_violation(&self) -> Option<Constraint> {
        [
            (self.c1, Constraint::C1),
            (self.c2, Constraint::C2),
            (self.c3, Constraint::C3),
            (self.c4, Constraint::C4),
        ]
        .into_iter()
        .find(|(ok, _)| !ok)
        .map(|(_, c)| c)
    }
}

/// Which closed form of the derivatives to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientForm {
    /// Exact derivatives of `rate / (P + P_RF)`.
    Corrected,
    /// The published expressions, whose first-derivative numerator lacks
    /// the `(P + P_RF)` factor on the `1 / (P ln 2)` term.
    Literal,
}

fn loglog(users: usize) -> Result<f64> {
    if users < 3 {
        return Err(Error::domain(format!(
            "rate model needs K >= 3, got K = {users}"
        )));
    }
    Ok((users as f64).log2().log2())
}

/// Smallest power keeping the rate proxy's argument above one.
pub fn min_power(power: &PowerModel, users: usize) -> Result<f64> {
    Ok((1.0 + 1e-9) * power.noise_power / loglog(users)?)
}

/// Largest per-UE power allowed by C1: `eta * (P_T / K - P_c - P_RF)`.
pub fn max_power(power: &PowerModel, users: usize) -> f64 {
    power.eta * (power.total_power / users as f64 - power.circuit_power - power.rf_power)
}

/// `log2((P / N0) * log2(log2 K))`.
pub fn rate_model(p: f64, power: &PowerModel, users: usize) -> Result<f64> {
    let arg = p / power.noise_power * loglog(users)?;
    if !(arg > 0.0) || !arg.is_finite() {
        return Err(Error::domain(format!(
            "rate model needs P > N0 / log2(log2 K); got P = {p}, N0 = {}",
            power.noise_power
        )));
    }
    Ok(arg.log2())
}

pub fn ee_objective(p: f64, power: &PowerModel, users: usize) -> Result<f64> {
    let denom = p + power.rf_power;
    if !(denom > 0.0) {
        return Err(Error::domain(format!("P + P_RF must be > 0, got {denom}")));
    }
    Ok(rate_model(p, power, users)? / denom)
}

/// Dinkelbach residual `rate(P) - S * (P + P_RF)`.
pub fn dinkelbach_value(s: f64, p: f64, power: &PowerModel, users: usize) -> Result<f64> {
    Ok(rate_model(p, power, users)? - s * (p + power.rf_power))
}

pub fn ee_gradient(p: f64, power: &PowerModel, users: usize, form: GradientForm) -> Result<f64> {
    let rate = rate_model(p, power, users)?;
    let s = p + power.rf_power;
    let drate = 1.0 / (p * LN_2);
    Ok(match form {
        GradientForm::Corrected => (drate * s - rate) / (s * s),
        GradientForm::Literal => (drate - rate) / (s * s),
    })
}

pub fn ee_second_derivative(
    p: f64,
    power: &PowerModel,
    users: usize,
    form: GradientForm,
) -> Result<f64> {
    let rate = rate_model(p, power, users)?;
    let s = p + power.rf_power;
    let drate = 1.0 / (p * LN_2);
    Ok(match form {
        // (r/s)'' = r''/s - 2 (r' s - r) / s^3, with r'' = -1 / (P^2 ln 2)
        GradientForm::Corrected => -1.0 / (p * p * LN_2 * s) - 2.0 * (drate * s - rate) / s.powi(3),
        GradientForm::Literal => {
            let l = loglog(users)?;
            (-LN_2 / (p * LN_2).powi(2) - 1.0 / (p * l * LN_2)) / (s * s)
                - 2.0 * (drate - rate) / s.powi(3)
        }
    })
}

/// Evaluate C1–C4 for a homogeneous per-UE power `p`.
pub fn check_constraints(
    p: f64,
    power: &PowerModel,
    budget: &AntennaBudget,
    users: usize,
) -> ConstraintReport {
    let consumed = users as f64 * (p / power.eta + power.circuit_power + power.rf_power);
    let c1 = consumed <= power.total_power * (1.0 + 1e-12);

    let demand: u64 = budget.antennas_per_user.iter().map(|&n| n as u64).sum();
    let c2 = demand <= budget.bs_antennas as u64;

    let assigned: u64 = budget.rf_per_user.iter().map(|&n| n as u64).sum();
    let c3 = budget.min_rf_per_user.iter().all(|&n| n as u64 <= assigned)
        && assigned <= budget.bs_rf_chains as u64;

    let c4 = p >= 0.0 && power.circuit_power >= 0.0 && power.rf_power >= 0.0;
    ConstraintReport { c1, c2, c3, c4 }
}

/// Inner solver for the Dinkelbach subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerSolver {
    /// Bisection on the derivative of the concave subproblem.
    #[default]
    Bisection,
    /// Projected ascent with diminishing steps `1/n`.
    Subgradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Stop when `|F(S_n)|` falls to this.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Bracket width at which the inner search stops.
    pub power_tolerance: f64,
    pub inner: InnerSolver,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iter: 50,
            power_tolerance: 1e-10,
            inner: InnerSolver::Bisection,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub iteration: usize,
    /// Candidate efficiency `S_n`.
    pub s: f64,
    /// `F(S_n) = max_P rate(P) - S_n (P + P_RF)`.
    pub residual: f64,
    /// Maximizer of the subproblem.
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EeSolution {
    pub p_star: f64,
    pub s_star: f64,
    pub iterations: usize,
    pub trace: Vec<TraceStep>,
    pub converged: bool,
    pub constraints: ConstraintReport,
}

/// Feasible interval `[P_min, P_max]` for the per-UE power, after checking
/// everything that does not depend on `P`.
pub fn feasible_interval(
    power: &PowerModel,
    budget: &AntennaBudget,
    users: usize,
) -> Result<(f64, f64)> {
    power.validate()?;
    let lo = min_power(power, users)?;
    let report = check_constraints(lo, power, budget, users);
    if !report.c4 {
        return Err(Error::Infeasible {
            constraint: Constraint::C4,
            detail: format!(
                "P_c = {} and P_RF = {} must be >= 0",
                power.circuit_power, power.rf_power
            ),
        });
    }
    if !report.c2 {
        return Err(Error::Infeasible {
            constraint: Constraint::C2,
            detail: format!(
                "UEs demand {} antennas but the BS has {}",
                budget
                    .antennas_per_user
                    .iter()
                    .map(|&n| n as u64)
                    .sum::<u64>(),
                budget.bs_antennas
            ),
        });
    }
    if !report.c3 {
        return Err(Error::Infeasible {
            constraint: Constraint::C3,
            detail: format!(
                "RF chains assigned {} must cover each UE minimum and fit in {} BS chains",
                budget.rf_per_user.iter().map(|&n| n as u64).sum::<u64>(),
                budget.bs_rf_chains
            ),
        });
    }
    let hi = max_power(power, users);
    if !(hi >= lo) {
        return Err(Error::Infeasible {
            constraint: Constraint::C1,
            detail: format!("budget allows P <= {hi} but the rate model needs P >= {lo}"),
        });
    }
    Ok((lo, hi))
}

// argmax over [lo, hi] of log2(P/N0 L) - s (P + P_RF); the derivative
// 1/(P ln 2) - s is decreasing.
fn inner_bisection(s: f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let slope = |p: f64| 1.0 / (p * LN_2) - s;
    if slope(hi) >= 0.0 {
        return hi;
    }
    if slope(lo) <= 0.0 {
        return lo;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..400 {
        let mid = 0.5 * (a + b);
        if b - a <= tol * mid.max(1.0) {
            break;
        }
        if slope(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

fn inner_subgradient(s: f64, lo: f64, hi: f64, start: f64, tol: f64) -> f64 {
    let slope = |p: f64| 1.0 / (p * LN_2) - s;
    let scale = (hi - lo).max(tol);
    let mut p = start.clamp(lo, hi);
    for n in 1..=2_000_000usize {
        let step = scale / n as f64 * slope(p);
        let next = (p + step).clamp(lo, hi);
        let moved = (next - p).abs();
        p = next;
        if moved <= tol * p.max(1.0) {
            break;
        }
    }
    p
}

/// Maximize `rate(P) / (P + P_RF)` over the feasible per-UE power interval.
pub fn maximize_ee(
    power: &PowerModel,
    budget: &AntennaBudget,
    users: usize,
    settings: SolverSettings,
) -> Result<EeSolution> {
    let (lo, hi) = feasible_interval(power, budget, users)?;
    let mut trace = Vec::new();
    let mut s = 0.0;
    let mut p = hi;
    for iteration in 0..settings.max_iter {
        p = match settings.inner {
            InnerSolver::Bisection => inner_bisection(s, lo, hi, settings.power_tolerance),
            InnerSolver::Subgradient => inner_subgradient(s, lo, hi, p, settings.power_tolerance),
        };
        let residual = dinkelbach_value(s, p, power, users)?;
        trace.push(TraceStep {
            iteration,
            s,
            residual,
            p,
        });
        if residual.abs() <= settings.tolerance {
            return Ok(EeSolution {
                p_star: p,
                s_star: ee_objective(p, power, users)?,
                iterations: iteration + 1,
                constraints: check_constraints(p, power, budget, users),
                trace,
                converged: true,
            });
        }
        s = ee_objective(p, power, users)?;
    }
    let last = trace.last().copied();
    Err(Error::Numerical(format!(
        "Dinkelbach did not reach |F| <= {:e} in {} iterations; last step {:?}",
        settings.tolerance, settings.max_iter, last
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model(rf: f64, n0: f64) -> PowerModel {
        PowerModel {
            eta: 1.0,
            circuit_power: 0.0,
            rf_power: rf,
            total_power: 1e4,
            noise_power: n0,
        }
    }

    /// Best grid point of the objective on `(lo, hi]`.
    fn grid_max(power: &PowerModel, users: usize, lo: f64, hi: f64, step: f64) -> (f64, f64) {
        let n = ((hi - lo) / step).round() as usize;
        (1..=n)
            .map(|i| lo + i as f64 * step)
            .filter_map(|p| ee_objective(p, power, users).ok().map(|v| (p, v)))
            .fold((f64::NAN, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            })
    }

    #[test]
    fn rate_model_examples() {
        let m = model(1.0, 1.0);
        assert_relative_eq!(rate_model(1.0, &m, 16).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(rate_model(2.0, &m, 16).unwrap(), 2.0, max_relative = 1e-15);
        assert_eq!(rate_model(1.0, &m, 4).unwrap(), 0.0);
        assert!(rate_model(1.0, &m, 2).is_err());
        assert!(rate_model(-1.0, &m, 16).is_err());
    }

    #[test]
    fn objective_examples() {
        assert_relative_eq!(
            ee_objective(1.0, &model(1.0, 1.0), 16).unwrap(),
            0.5,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            ee_objective(2.0, &model(0.0, 1.0), 16).unwrap(),
            1.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn constraint_examples() {
        let power = PowerModel {
            eta: 0.5,
            circuit_power: 0.1,
            rf_power: 0.4,
            total_power: 5.0,
            noise_power: 1.0,
        };
        let budget = AntennaBudget::uniform(2, 1);
        let r = check_constraints(1.0, &power, &budget, 2);
        assert!(r.feasible(), "{r:?}");

        let r = check_constraints(-1.0, &power, &budget, 2);
        assert!(!r.c4);
        assert_eq!(r.first_violation(), Some(Constraint::C4));

        let crowded = AntennaBudget {
            bs_antennas: 4,
            antennas_per_user: vec![3, 3],
            ..AntennaBudget::uniform(2, 3)
        };
        let r = check_constraints(1.0, &power, &crowded, 2);
        assert!(!r.c2 && r.c3);

        let short = AntennaBudget {
            bs_rf_chains: 1,
            ..AntennaBudget::uniform(2, 1)
        };
        assert!(!check_constraints(1.0, &power, &short, 2).c3);
        let starved = AntennaBudget {
            min_rf_per_user: vec![3, 1],
            ..AntennaBudget::uniform(2, 1)
        };
        assert!(!check_constraints(1.0, &power, &starved, 2).c3);
        assert!(!check_constraints(1.1, &power, &budget, 2).c1);
    }

    #[test]
    fn dinkelbach_value_identities() {
        let m = model(1.0, 1.0);
        for p in [0.7, 1.0, 3.0, 40.0] {
            let s = ee_objective(p, &m, 16).unwrap();
            assert!(dinkelbach_value(s, p, &m, 16).unwrap().abs() < 1e-15);
            assert_eq!(
                dinkelbach_value(0.0, p, &m, 16).unwrap(),
                rate_model(p, &m, 16).unwrap()
            );
        }
    }

    #[test]
    fn residual_is_negative_above_optimum() {
        let m = model(1.0, 1.0);
        let (_, best) = grid_max(&m, 16, 0.5, 10.0, 1e-3);
        let s = best * 1.01;
        let worst_case = (1..=9500)
            .map(|i| dinkelbach_value(s, 0.5 + i as f64 * 1e-3, &m, 16).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(worst_case < 0.0);
    }

    #[test]
    fn gradient_examples() {
        let m = model(1.0, 1.0);
        let corrected = ee_gradient(1.0, &m, 16, GradientForm::Corrected).unwrap();
        assert_relative_eq!(corrected, (2.0 / LN_2 - 1.0) / 4.0, max_relative = 1e-14);
        assert_relative_eq!(corrected, 0.471_347_520_444_481_7, max_relative = 1e-12);
        let literal = ee_gradient(1.0, &m, 16, GradientForm::Literal).unwrap();
        assert_relative_eq!(literal, (1.0 / LN_2 - 1.0) / 4.0, max_relative = 1e-14);
        assert_relative_eq!(literal, 0.110_673_760_222_240_85, max_relative = 1e-12);

        let h = 1e-6;
        let f = |p| ee_objective(p, &m, 16).unwrap();
        let fd = (f(1.0 + h) - f(1.0 - h)) / (2.0 * h);
        assert_relative_eq!(corrected, fd, max_relative = 1e-6);
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        let m = model(1.0, 1.0);
        let h = 1e-4;
        let f = |p| ee_objective(p, &m, 16).unwrap();
        let fd = (f(1.0 + h) - 2.0 * f(1.0) + f(1.0 - h)) / (h * h);
        let exact = ee_second_derivative(1.0, &m, 16, GradientForm::Corrected).unwrap();
        assert_relative_eq!(exact, fd, max_relative = 1e-5);

        // Literal form at the same point, evaluated term by term.
        let literal = ee_second_derivative(1.0, &m, 16, GradientForm::Literal).unwrap();
        let hand =
            (-LN_2 / (LN_2 * LN_2) - 1.0 / (2.0 * LN_2)) / 4.0 - 2.0 * (1.0 / LN_2 - 1.0) / 8.0;
        assert_relative_eq!(literal, hand, max_relative = 1e-14);
        assert_relative_eq!(literal, -0.651_684_400_555_602_1, max_relative = 1e-12);
    }

    #[test]
    fn objective_is_convex_in_the_tail() {
        // r/s with r ~ log P behaves like log(P)/P, which turns convex once
        // P is large enough; concavity only holds near the optimum.
        let m = model(1.0, 1.0);
        assert!(ee_second_derivative(2.16, &m, 16, GradientForm::Corrected).unwrap() < 0.0);
        assert!(ee_second_derivative(50.0, &m, 16, GradientForm::Corrected).unwrap() > 0.0);
    }

    #[test]
    fn solver_matches_grid_on_default_scenario() {
        let m = model(1.0, 1.0);
        let sol = maximize_ee(
            &m,
            &AntennaBudget::uniform(16, 1),
            16,
            SolverSettings::default(),
        )
        .unwrap();
        let (p_grid, s_grid) = grid_max(&m, 16, 0.5, 10.0, 1e-4);
        assert!(sol.converged);
        assert!((sol.s_star - s_grid).abs() <= 1e-3 * s_grid);
        assert!((sol.p_star - p_grid).abs() < 1e-3);
        assert!(sol.iterations <= 10, "{}", sol.iterations);
        assert!(sol.trace.windows(2).all(|w| w[1].s >= w[0].s));
        assert!(sol.trace.windows(2).all(|w| w[1].residual <= w[0].residual));
        assert!(sol.trace.last().unwrap().residual.abs() <= 1e-8);
        assert!(
            ee_gradient(sol.p_star, &m, 16, GradientForm::Corrected)
                .unwrap()
                .abs()
                <= 1e-6
        );
        assert!(sol.constraints.feasible());
    }

    #[test]
    fn binding_budget_returns_boundary() {
        let mut m = model(1.0, 1.0);
        m.total_power = 16.0 * (1.0 + 0.0 + 1.0);
        assert_relative_eq!(max_power(&m, 16), 1.0);
        let sol = maximize_ee(
            &m,
            &AntennaBudget::uniform(16, 1),
            16,
            SolverSettings::default(),
        )
        .unwrap();
        assert_eq!(sol.p_star, 1.0);
        assert!(ee_gradient(sol.p_star, &m, 16, GradientForm::Corrected).unwrap() > 0.0);
        assert!(sol.constraints.c1);
    }

    #[test]
    fn subgradient_agrees_with_bisection() {
        let m = model(1.0, 1.0);
        let budget = AntennaBudget::uniform(16, 1);
        let a = maximize_ee(&m, &budget, 16, SolverSettings::default()).unwrap();
        let b = maximize_ee(
            &m,
            &budget,
            16,
            SolverSettings {
                inner: InnerSolver::Subgradient,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(
            (a.s_star - b.s_star).abs() < 1e-6,
            "{} vs {}",
            a.s_star,
            b.s_star
        );
        assert!((a.p_star - b.p_star).abs() < 1e-3);
    }

    #[test]
    fn infeasible_problems_name_the_constraint() {
        let budget = AntennaBudget::uniform(16, 1);
        let mut m = model(1.0, 1.0);
        m.total_power = 16.0;
        match maximize_ee(&m, &budget, 16, SolverSettings::default()) {
            Err(Error::Infeasible { constraint, .. }) => assert_eq!(constraint, Constraint::C1),
            other => panic!("{other:?}"),
        }
        let no_antennas = AntennaBudget {
            bs_antennas: 0,
            ..budget.clone()
        };
        match maximize_ee(
            &model(1.0, 1.0),
            &no_antennas,
            16,
            SolverSettings::default(),
        ) {
            Err(e @ Error::Infeasible { .. }) => {
                assert_eq!(e.exit_code(), 4);
                assert!(e.to_string().contains("C2"));
            }
            other => panic!("{other:?}"),
        }
        let mut negative = model(1.0, 1.0);
        negative.rf_power = -0.5;
        assert!(matches!(
            maximize_ee(&negative, &budget, 16, SolverSettings::default()),
            Err(Error::Infeasible {
                constraint: Constraint::C4,
                ..
            })
        ));
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let settings = SolverSettings {
            max_iter: 1,
            ..Default::default()
        };
        let err = maximize_ee(
            &model(1.0, 1.0),
            &AntennaBudget::uniform(16, 1),
            16,
            settings,
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 5);
    }

    #[test]
    fn invalid_power_model() {
        let mut m = model(1.0, 1.0);
        m.eta = 0.0;
        assert!(maximize_ee(
            &m,
            &AntennaBudget::uniform(16, 1),
            16,
            SolverSettings::default()
        )
        .is_err());
        assert!(maximize_ee(
            &model(1.0, 1.0),
            &AntennaBudget::uniform(2, 1),
            2,
            SolverSettings::default()
        )
        .is_err());
    }
}
