//! The four command-line reports. Each returns the complete output file:
//! a comment header that embeds the resolved scenario, then CSV.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::channel::sample_realization;
use crate::ee::{maximize_ee, EeSolution};
use crate::ergodic::{asymptotic_rate, ergodic_sum_rate_gcq, ergodic_sum_rate_mc};
use crate::error::{Error, Result};
use crate::rate::realization_sum_rate;
use crate::rng::substream;
use crate::scenario::{Axis, Scenario, SweepMode, CONFIG_BEGIN, CONFIG_END, HEADER_TAG};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Ergodic,
    Optimize,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Ergodic => "ergodic",
            Command::Optimize => "optimize",
            Command::Sweep => "sweep",
        }
    }
}

/// Run `command` on an already-resolved scenario.
pub fn run(command: Command, scenario: &Scenario) -> Result<String> {
    scenario.validate()?;
    let body = match command {
        Command::Simulate => simulate(scenario)?,
        Command::Ergodic => ergodic(scenario)?,
        Command::Optimize => optimize(scenario)?,
        Command::Sweep => sweep(scenario)?,
    };
    Ok(header(command, scenario) + &body)
}

fn header(command: Command, scenario: &Scenario) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER_TAG}{}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# command: {}", command.name());
    let _ = writeln!(out, "# scenario: {}", scenario.name);
    let _ = writeln!(out, "# scenario_hash: sha256:{}", scenario.hash());
    let _ = writeln!(out, "# seed: {}", scenario.system.seed);
    out.push_str(CONFIG_BEGIN);
    out.push('\n');
    for line in scenario.to_toml().lines() {
        if line.is_empty() {
            out.push_str("#\n");
        } else {
            let _ = writeln!(out, "# {line}");
        }
    }
    out.push_str(CONFIG_END);
    out.push('\n');
    out
}

/// Seventeen significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn stats(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, f64::NAN);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn simulate(scenario: &Scenario) -> Result<String> {
    let config = scenario.system_config()?;
    let alloc = scenario.allocation()?;
    let mode = scenario.system.effective_gain;
    let k = config.users;

    let rows = (0..scenario.run.trials)
        .into_par_iter()
        .map(|i| {
            let realization = sample_realization(&config, &mut substream(config.seed, i as u64))?;
            let gains = mode.per_user(&realization);
            let report = realization_sum_rate(&realization, mode, config.rho, &alloc)?;
            let ordered: Vec<f64> = report.order.iter().map(|&u| gains[u]).collect();
            Ok((ordered, report))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = String::from("realization,seed");
    for u in 1..=k {
        let _ = write!(out, ",g_{u}");
    }
    for u in 1..=k {
        let _ = write!(out, ",R_{u}");
    }
    out.push_str(",sum_rate\n");
    for (i, (gains, report)) in rows.iter().enumerate() {
        let _ = write!(out, "{i},{}", config.seed);
        for g in gains.iter().chain(&report.per_user) {
            let _ = write!(out, ",{}", fmt_f64(*g));
        }
        let _ = writeln!(out, ",{}", fmt_f64(report.sum));
    }

    let mut mean_row = format!("mean,{}", config.seed);
    let mut err_row = format!("stderr,{}", config.seed);
    let columns = (0..k)
        .map(|u| stats(rows.iter().map(move |r| r.0[u])))
        .chain((0..k).map(|u| stats(rows.iter().map(move |r| r.1.per_user[u]))))
        .chain(std::iter::once(stats(rows.iter().map(|r| r.1.sum))));
    for (mean, err) in columns {
        let _ = write!(mean_row, ",{}", fmt_f64(mean));
        let _ = write!(err_row, ",{}", fmt_f64(err));
    }
    let _ = writeln!(out, "{mean_row}");
    let _ = writeln!(out, "{err_row}");
    Ok(out)
}

const ERGODIC_COLUMNS: &str = "K,rho_dB,gcq_rate,mc_rate,mc_stderr,asymptotic_rate,rel_gap";

/// One ergodic comparison row, without a trailing newline.
fn ergodic_row(scenario: &Scenario) -> Result<String> {
    let config = scenario.system_config()?;
    let alloc = scenario.allocation()?;
    let gcq = ergodic_sum_rate_gcq(
        &config,
        &alloc,
        scenario.run.gcq_nodes,
        scenario.outer_quad(),
    )?;
    let mc = ergodic_sum_rate_mc(&config, &alloc, scenario.mc_settings())?;
    let asymptotic = asymptotic_rate(config.rho, config.users)
        .map(fmt_f64)
        .unwrap_or_default();
    Ok(format!(
        "{},{},{},{},{},{},{}",
        config.users,
        fmt_f64(scenario.system.rho),
        fmt_f64(gcq.sum),
        fmt_f64(mc.mean),
        fmt_f64(mc.stderr),
        asymptotic,
        fmt_f64((gcq.sum - mc.mean) / mc.mean)
    ))
}

/// The scenario's sweep points in axis order, or the scenario itself.
fn points(scenario: &Scenario) -> Result<Vec<(f64, Scenario)>> {
    match &scenario.run.sweep {
        None => Ok(vec![(f64::NAN, scenario.clone())]),
        Some(sweep) => {
            let axis = Axis::parse(&sweep.axis)?;
            sweep
                .values
                .iter()
                .enumerate()
                .map(|(i, &v)| Ok((v, scenario.at_point(axis, v, i)?)))
                .collect()
        }
    }
}

fn ergodic(scenario: &Scenario) -> Result<String> {
    let rows = points(scenario)?
        .par_iter()
        .map(|(_, point)| ergodic_row(point))
        .collect::<Result<Vec<_>>>()?;
    let mut out = format!("{ERGODIC_COLUMNS}\n");
    for row in rows {
        let _ = writeln!(out, "{row}");
    }
    Ok(out)
}

const OPTIMIZE_COLUMNS: &str = "record,iteration,S,residual,P,converged,C1,C2,C3,C4";

fn solve(scenario: &Scenario) -> Result<EeSolution> {
    let power = scenario.power_model()?;
    maximize_ee(
        &power,
        &scenario.antenna_budget(),
        scenario.system.users,
        scenario.solver_settings(),
    )
}

/// Trace rows then one summary row, each newline-terminated and prefixed by `tag`.
fn optimize_rows(scenario: &Scenario, tag: &str) -> Result<String> {
    let solution = solve(scenario)?;
    let mut out = String::new();
    for step in &solution.trace {
        let _ = writeln!(
            out,
            "{tag}trace,{},{},{},{},,,,,",
            step.iteration,
            fmt_f64(step.s),
            fmt_f64(step.residual),
            fmt_f64(step.p)
        );
    }
    let residual = solution.trace.last().map_or(f64::NAN, |step| step.residual);
    let c = solution.constraints;
    let _ = writeln!(
        out,
        "{tag}summary,{},{},{},{},{},{},{},{},{}",
        solution.iterations,
        fmt_f64(solution.s_star),
        fmt_f64(residual),
        fmt_f64(solution.p_star),
        solution.converged,
        c.c1,
        c.c2,
        c.c3,
        c.c4
    );
    Ok(out)
}

fn optimize(scenario: &Scenario) -> Result<String> {
    Ok(format!(
        "{OPTIMIZE_COLUMNS}\n{}",
        optimize_rows(scenario, "")?
    ))
}

fn sweep(scenario: &Scenario) -> Result<String> {
    let sweep = scenario
        .run
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep needs a [run.sweep] section".into()))?;
    let columns = match sweep.mode {
        SweepMode::Ergodic => ERGODIC_COLUMNS,
        SweepMode::Optimize => OPTIMIZE_COLUMNS,
    };
    let blocks = points(scenario)?
        .par_iter()
        .map(|(value, point)| {
            let tag = format!("{},{},", sweep.axis, fmt_f64(*value));
            match sweep.mode {
                SweepMode::Ergodic => Ok(format!("{tag}{}\n", ergodic_row(point)?)),
                SweepMode::Optimize => optimize_rows(point, &tag),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(format!("axis,value,{columns}\n{}", blocks.concat()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 6.02e23, -2.5e-300, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1.5), "1.5000000000000000e0");
    }

    #[test]
    fn stats_of_constant_column() {
        let (m, e) = stats([2.0, 2.0, 2.0].into_iter());
        assert_eq!((m, e), (2.0, 0.0));
        assert!(stats([1.0].into_iter()).1.is_nan());
    }
}
