//! Solver-independent audit against the original landing problem, and the
//! studies built on it: flight-time search and solver comparison.
//!
//! The audit reads only `t`, `r`, `v`, `m` and `T` from a trajectory. Nothing
//! the solvers keep internally (`sigma`, `z`, the stacked vector) is trusted.

use std::collections::BTreeMap;

use log::info;
use nalgebra::{Vector3, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{SolveResult, SolverKind};
use crate::error::AnalysisError;
use crate::model::{DiscreteDynamics, Trajectory};
use crate::scenario::ScenarioConfig;
use crate::solvers::{solve_with, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityTolerances {
    /// Thrust-bound tolerance as a fraction of `rho1` (absolute newtons =
    /// `thrust_rel_rho1 * rho1`).
    pub thrust_rel_rho1: f64,
    /// rad
    pub pointing: f64,
    /// m
    pub terminal_position: f64,
    /// m/s
    pub terminal_velocity: f64,
    /// kg
    pub mass_floor: f64,
    /// m, worst step of the position re-simulation.
    pub dynamics_position: f64,
    /// m/s
    pub dynamics_velocity: f64,
    /// kg, worst step of the mass re-simulation under `m' = -alpha |T|`.
    pub dynamics_mass: f64,
}

impl Default for FeasibilityTolerances {
    fn default() -> Self {
        Self {
            thrust_rel_rho1: 1e-3,
            pointing: 1e-6,
            terminal_position: 1e-2,
            terminal_velocity: 1e-2,
            mass_floor: 1e-6,
            dynamics_position: 1e-6,
            dynamics_velocity: 1e-6,
            dynamics_mass: 1e-3,
        }
    }
}

/// Worst violation of each constraint; every field is nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// N
    pub max_upper_thrust_violation: f64,
    /// N
    pub max_lower_thrust_violation: f64,
    /// rad
    pub max_pointing_violation: f64,
    /// m
    pub terminal_position_error: f64,
    /// m/s
    pub terminal_velocity_error: f64,
    /// kg
    pub mass_floor_violation: f64,
    /// m
    pub dynamics_defect: f64,
    /// m/s
    pub velocity_defect: f64,
    /// kg
    pub mass_defect: f64,
    pub min_thrust: f64,
    pub max_thrust: f64,
    pub tolerances: FeasibilityTolerances,
    pub feasible: bool,
}

/// Audits `traj` against the thrust bounds, pointing cone, boundary
/// conditions and the continuous dynamics of the original problem.
///
/// The dynamics are re-simulated step by step: each `(r, v)` pair is
/// propagated under the constant acceleration `T_i / m_i`, and the mass under
/// `m' = -alpha |T| ` with the same piecewise-constant acceleration, which
/// integrates to `log m_{i+1} = log m_i - alpha dt |T_i| / m_i`.
pub fn check_feasibility(
    traj: &Trajectory,
    cfg: &ScenarioConfig,
    tol: &FeasibilityTolerances,
) -> Result<FeasibilityReport, AnalysisError> {
    let n = cfg.horizon();
    let steps = traj.thrust.len();
    if steps != n || traj.r.len() != n + 1 || traj.v.len() != n + 1 || traj.m.len() != n + 1 {
        return Err(AnalysisError::HorizonMismatch {
            expected: n,
            found: steps,
        });
    }
    let (mut upper, mut lower, mut pointing) = (0.0f64, 0.0f64, 0.0f64);
    let (mut min_thrust, mut max_thrust) = (f64::INFINITY, 0.0f64);
    let (mut def_r, mut def_v, mut def_m) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        let thrust = Vector3::from(traj.thrust[i]);
        let mag = thrust.norm();
        min_thrust = min_thrust.min(mag);
        max_thrust = max_thrust.max(mag);
        upper = upper.max(mag - cfg.rho2);
        lower = lower.max(cfg.rho1 - mag);
        if mag > 0.0 {
            let tilt = (thrust[0] / mag).clamp(-1.0, 1.0).acos();
            pointing = pointing.max(tilt - cfg.theta_tp);
        }

        let dt = traj.t[i + 1] - traj.t[i];
        let dynamics = DiscreteDynamics::new(dt, cfg.g, cfg.alpha, 1);
        let x = Vector6::from_iterator(traj.r[i].iter().chain(&traj.v[i]).copied());
        let next = dynamics.step(&x, &(thrust / traj.m[i]));
        for k in 0..3 {
            def_r = def_r.max((next[k] - traj.r[i + 1][k]).abs());
            def_v = def_v.max((next[k + 3] - traj.v[i + 1][k]).abs());
        }
        let m_next = traj.m[i] * (-cfg.alpha * dt * mag / traj.m[i]).exp();
        def_m = def_m.max((m_next - traj.m[i + 1]).abs());
    }
    let report = FeasibilityReport {
        max_upper_thrust_violation: upper.max(0.0),
        max_lower_thrust_violation: lower.max(0.0),
        max_pointing_violation: pointing.max(0.0),
        terminal_position_error: Vector3::from(traj.r[n]).norm(),
        terminal_velocity_error: Vector3::from(traj.v[n]).norm(),
        mass_floor_violation: (cfg.m_dry - traj.m[n]).max(0.0),
        dynamics_defect: def_r,
        velocity_defect: def_v,
        mass_defect: def_m,
        min_thrust,
        max_thrust,
        tolerances: *tol,
        feasible: false,
    };
    let thrust_tol = tol.thrust_rel_rho1 * cfg.rho1;
    let feasible = report.max_upper_thrust_violation <= thrust_tol
        && report.max_lower_thrust_violation <= thrust_tol
        && report.max_pointing_violation <= tol.pointing
        && report.terminal_position_error <= tol.terminal_position
        && report.terminal_velocity_error <= tol.terminal_velocity
        && report.mass_floor_violation <= tol.mass_floor
        && report.dynamics_defect <= tol.dynamics_position
        && report.velocity_defect <= tol.dynamics_velocity
        && report.mass_defect <= tol.dynamics_mass;
    Ok(FeasibilityReport { feasible, ..report })
}

/// `m_0 - m_N` in kg.
pub fn fuel_consumed(traj: &Trajectory) -> f64 {
    match (traj.m.first(), traj.m.last()) {
        (Some(first), Some(last)) => first - last,
        _ => 0.0,
    }
}

/// One point of a flight-time sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfSample {
    pub tf: f64,
    pub dt: f64,
    pub solver: SolverKind,
    pub converged: bool,
    pub feasible: bool,
    pub fuel: f64,
    pub iterations: usize,
    pub min_thrust: f64,
    pub max_thrust: f64,
    pub terminal_position_error: f64,
    pub terminal_velocity_error: f64,
}

impl TfSample {
    /// Fuel if the solve converged to an audited-feasible trajectory.
    pub fn admissible_fuel(&self) -> Option<f64> {
        (self.converged && self.feasible).then_some(self.fuel)
    }
}

/// Solves and audits one flight time.
pub fn evaluate_tf(
    base: &ScenarioConfig,
    tf: f64,
    nominal_dt: f64,
    solver: SolverKind,
    tol: &FeasibilityTolerances,
) -> Result<(TfSample, SolveResult, FeasibilityReport), AnalysisError> {
    let cfg = base.with_tf(tf, nominal_dt);
    let result = solve_with(solver, &cfg, &SolveOptions::default())?;
    let report = check_feasibility(&result.trajectory, &cfg, tol)?;
    let sample = TfSample {
        tf,
        dt: cfg.dt,
        solver,
        converged: result.converged,
        feasible: report.feasible,
        fuel: result.fuel,
        iterations: result.iterations,
        min_thrust: report.min_thrust,
        max_thrust: report.max_thrust,
        terminal_position_error: report.terminal_position_error,
        terminal_velocity_error: report.terminal_velocity_error,
    };
    Ok((sample, result, report))
}

/// Evaluates several flight times in parallel; results keep the input order.
pub fn evaluate_tfs(
    base: &ScenarioConfig,
    tfs: &[f64],
    nominal_dt: f64,
    solver: SolverKind,
    tol: &FeasibilityTolerances,
) -> Result<Vec<TfSample>, AnalysisError> {
    tfs.par_iter()
        .map(|&tf| evaluate_tf(base, tf, nominal_dt, solver, tol).map(|(s, _, _)| s))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfSearch {
    pub tf_star: f64,
    pub fuel: f64,
    /// Every flight time that was solved, in increasing order.
    pub samples: Vec<TfSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSettings {
    /// Spacing of candidate flight times.
    pub grid: f64,
    /// Coarse-scan stride, in grid points.
    pub stride: usize,
    pub solver: SolverKind,
    pub tolerances: FeasibilityTolerances,
}

impl SearchSettings {
    pub fn new(grid: f64) -> Self {
        Self {
            grid,
            stride: 4,
            solver: SolverKind::Exproj,
            tolerances: FeasibilityTolerances::default(),
        }
    }
}

/// Flight time in `[t_lo, t_hi]`, on the grid `t_lo + k * grid`, whose solve
/// uses the least fuel among converged, audited-feasible solves.
///
/// A coarse scan every `stride` grid points (solved in parallel) locates the
/// basin, an integer golden-section search refines it, and a final
/// neighbour check makes the answer a local minimum on the grid. Infeasible
/// flight times count as infinite fuel.
pub fn search_optimal_tf(
    cfg: &ScenarioConfig,
    t_lo: f64,
    t_hi: f64,
    settings: &SearchSettings,
) -> Result<TfSearch, AnalysisError> {
    if !(t_lo <= t_hi) || !(t_lo > 0.0) || !(settings.grid > 0.0) {
        return Err(AnalysisError::InvalidBracket { t_lo, t_hi });
    }
    let last = ((t_hi - t_lo) / settings.grid + 1e-9).floor() as usize;
    let tf_at = |k: usize| t_lo + k as f64 * settings.grid;
    let mut cache: BTreeMap<usize, TfSample> = BTreeMap::new();

    let eval = |ks: &[usize], cache: &mut BTreeMap<usize, TfSample>| -> Result<(), AnalysisError> {
        let todo: Vec<usize> = ks
            .iter()
            .copied()
            .filter(|k| *k <= last && !cache.contains_key(k))
            .collect();
        let solved: Vec<Result<(usize, TfSample), AnalysisError>> = todo
            .par_iter()
            .map(|&k| {
                evaluate_tf(
                    cfg,
                    tf_at(k),
                    settings.grid,
                    settings.solver,
                    &settings.tolerances,
                )
                .map(|(s, _, _)| (k, s))
            })
            .collect();
        for r in solved {
            let (k, s) = r?;
            info!(
                "tf={:.4} fuel={:.4} feasible={} converged={}",
                s.tf, s.fuel, s.feasible, s.converged
            );
            cache.insert(k, s);
        }
        Ok(())
    };
    let cost = |cache: &BTreeMap<usize, TfSample>, k: usize| {
        cache
            .get(&k)
            .and_then(|s| s.admissible_fuel())
            .unwrap_or(f64::INFINITY)
    };

    let stride = settings.stride.max(1);
    let mut coarse: Vec<usize> = (0..=last).step_by(stride).collect();
    if coarse.last() != Some(&last) {
        coarse.push(last);
    }
    eval(&coarse, &mut cache)?;
    let best_coarse = coarse
        .iter()
        .copied()
        .min_by(|a, b| cost(&cache, *a).total_cmp(&cost(&cache, *b)))
        .expect("at least one grid point");
    if cost(&cache, best_coarse).is_infinite() {
        return Err(AnalysisError::NoFeasible {
            t_lo,
            t_hi,
            samples: cache.into_values().collect(),
        });
    }

    let (mut a, mut b) = (
        best_coarse.saturating_sub(stride),
        (best_coarse + stride).min(last),
    );
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 3 {
        let span = (b - a) as f64;
        let c = b - (inv_phi * span).round() as usize;
        let d = a + (inv_phi * span).round() as usize;
        let (c, d) = if c < d { (c, d) } else { (d, c) };
        eval(&[c, d], &mut cache)?;
        if cost(&cache, c) <= cost(&cache, d) {
            b = d;
        } else {
            a = c;
        }
    }
    let window: Vec<usize> = (a..=b).collect();
    eval(&window, &mut cache)?;
    let mut best = window
        .iter()
        .copied()
        .chain(std::iter::once(best_coarse))
        .min_by(|x, y| cost(&cache, *x).total_cmp(&cost(&cache, *y)))
        .expect("nonempty window");
    loop {
        let neighbours: Vec<usize> = [best.checked_sub(1), Some(best + 1)]
            .into_iter()
            .flatten()
            .filter(|k| *k <= last)
            .collect();
        eval(&neighbours, &mut cache)?;
        match neighbours
            .iter()
            .copied()
            .find(|k| cost(&cache, *k) < cost(&cache, best))
        {
            Some(k) => best = k,
            None => break,
        }
    }
    Ok(TfSearch {
        tf_star: tf_at(best),
        fuel: cost(&cache, best),
        samples: cache.into_values().collect(),
    })
}

/// Side-by-side summary of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub solver: SolverKind,
    pub converged: bool,
    pub feasible: bool,
    pub fuel: f64,
    pub terminal_position: [f64; 3],
    pub terminal_velocity: [f64; 3],
    pub terminal_position_error: f64,
    pub terminal_velocity_error: f64,
    pub min_thrust: f64,
    pub max_thrust: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub tf: f64,
    pub dt: f64,
    pub a: ComparisonEntry,
    pub b: ComparisonEntry,
    /// `b.fuel - a.fuel`
    pub fuel_delta: f64,
    pub terminal_position_delta: f64,
    pub terminal_velocity_delta: f64,
    pub min_thrust_delta: f64,
    pub max_thrust_delta: f64,
}

fn same_problem(a: &ScenarioConfig, b: &ScenarioConfig) -> Option<&'static str> {
    let fields = [
        ("r_init", a.r_init == b.r_init),
        ("v_init", a.v_init == b.v_init),
        ("g", a.g == b.g),
        ("m_wet", a.m_wet == b.m_wet),
        ("m_dry", a.m_dry == b.m_dry),
        ("rho1", a.rho1 == b.rho1),
        ("rho2", a.rho2 == b.rho2),
        ("alpha", a.alpha == b.alpha),
        ("theta_tp", a.theta_tp == b.theta_tp),
        ("tf", a.tf == b.tf),
        ("dt", a.dt == b.dt),
    ];
    fields.iter().find(|(_, same)| !same).map(|(k, _)| *k)
}

fn entry(r: &SolveResult, tol: &FeasibilityTolerances) -> Result<ComparisonEntry, AnalysisError> {
    let report = check_feasibility(&r.trajectory, &r.scenario, tol)?;
    let n = r.trajectory.steps();
    Ok(ComparisonEntry {
        solver: r.solver,
        converged: r.converged,
        feasible: report.feasible,
        fuel: r.fuel,
        terminal_position: r.trajectory.r[n],
        terminal_velocity: r.trajectory.v[n],
        terminal_position_error: report.terminal_position_error,
        terminal_velocity_error: report.terminal_velocity_error,
        min_thrust: report.min_thrust,
        max_thrust: report.max_thrust,
        iterations: r.iterations,
    })
}

pub fn compare(
    a: &SolveResult,
    b: &SolveResult,
    tol: &FeasibilityTolerances,
) -> Result<Comparison, AnalysisError> {
    if let Some(key) = same_problem(&a.scenario, &b.scenario) {
        return Err(AnalysisError::ScenarioMismatch(format!("{key} differs")));
    }
    let (ea, eb) = (entry(a, tol)?, entry(b, tol)?);
    Ok(Comparison {
        tf: a.scenario.tf,
        dt: a.scenario.dt,
        fuel_delta: eb.fuel - ea.fuel,
        terminal_position_delta: eb.terminal_position_error - ea.terminal_position_error,
        terminal_velocity_delta: eb.terminal_velocity_error - ea.terminal_velocity_error,
        min_thrust_delta: eb.min_thrust - ea.min_thrust,
        max_thrust_delta: eb.max_thrust - ea.max_thrust,
        a: ea,
        b: eb,
    })
}
