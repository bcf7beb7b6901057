use std::path::Path;

use anyhow::{bail, Context, Result};
use log::info;
use serde::Serialize;

use exproj_core::analysis::{
    compare, evaluate_tfs, search_optimal_tf, Comparison, ComparisonEntry, SearchSettings, TfSample,
};
use exproj_core::export::{load_trajectory_csv, save_json, save_rows_csv, save_trajectory_csv};
use exproj_core::solvers::{solve_with, SolveOptions};
use exproj_core::{check_feasibility, AnalysisError, FeasibilityReport, SolveResult, SolverKind};

use crate::args::{RunArgs, RunManifest, SolverChoice};

/// Process exit status. Larger values are worse, so combining runs keeps the
/// maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok = 0,
    Infeasible = 2,
    NotConverged = 3,
}

impl Status {
    fn of(result: &SolveResult, report: &FeasibilityReport) -> Self {
        match (result.converged, report.feasible) {
            (false, _) => Self::NotConverged,
            (true, false) => Self::Infeasible,
            (true, true) => Self::Ok,
        }
    }
}

fn solve_and_export(kind: SolverKind, manifest: &RunManifest) -> Result<(SolveResult, FeasibilityReport)> {
    let cfg = &manifest.scenario;
    info!("solving {kind} at tf = {} s, N = {}", cfg.tf, cfg.horizon());
    let result =
        solve_with(kind, cfg, &SolveOptions::default()).with_context(|| format!("{kind} solve failed"))?;
    let report = check_feasibility(&result.trajectory, cfg, &manifest.tolerances)?;
    let label = kind.label();
    save_trajectory_csv(
        &result.trajectory,
        manifest.path(&format!("{label}_trajectory.csv")),
    )?;
    save_json(&result, manifest.path(&format!("{label}_result.json")))?;
    save_json(&report, manifest.path(&format!("{label}_report.json")))?;
    Ok((result, report))
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn solve(run: &RunArgs) -> Result<Status> {
    let solver = run.solver.unwrap_or(SolverChoice::Exproj);
    let manifest = RunManifest::new("solve", run, solver, run.scenario()?)?;
    save_json(&manifest, manifest.path("manifest.json"))?;
    let mut status = Status::Ok;
    for kind in solver.kinds() {
        let (result, report) = solve_and_export(kind, &manifest)?;
        println!(
            "{kind}: {:?} after {} iterations, fuel {:.4} kg, |T| in [{:.2}, {:.2}] N, \
             |r_N| {:.3e} m, |v_N| {:.3e} m/s, feasible {}",
            result.termination,
            result.iterations,
            result.fuel,
            report.min_thrust,
            report.max_thrust,
            report.terminal_position_error,
            report.terminal_velocity_error,
            yes_no(report.feasible),
        );
        status = status.max(Status::of(&result, &report));
    }
    Ok(status)
}

#[derive(Serialize)]
struct ComparisonRow<'a> {
    solver: &'a str,
    converged: bool,
    feasible: bool,
    fuel: f64,
    rx: f64,
    ry: f64,
    rz: f64,
    vx: f64,
    vy: f64,
    vz: f64,
    terminal_position_error: f64,
    terminal_velocity_error: f64,
    min_thrust: f64,
    max_thrust: f64,
    iterations: usize,
}

impl<'a> From<&'a ComparisonEntry> for ComparisonRow<'a> {
    fn from(e: &'a ComparisonEntry) -> Self {
        let [rx, ry, rz] = e.terminal_position;
        let [vx, vy, vz] = e.terminal_velocity;
        Self {
            solver: e.solver.label(),
            converged: e.converged,
            feasible: e.feasible,
            fuel: e.fuel,
            rx,
            ry,
            rz,
            vx,
            vy,
            vz,
            terminal_position_error: e.terminal_position_error,
            terminal_velocity_error: e.terminal_velocity_error,
            min_thrust: e.min_thrust,
            max_thrust: e.max_thrust,
            iterations: e.iterations,
        }
    }
}

fn vec3(v: [f64; 3]) -> String {
    format!("({:.3e}, {:.3e}, {:.3e})", v[0], v[1], v[2])
}

pub fn render_table(c: &Comparison) -> String {
    let (a, b) = (&c.a, &c.b);
    let mut out = format!("tf = {} s, dt = {} s\n", c.tf, c.dt);
    let mut row = |name: &str, x: String, y: String, d: String| {
        out.push_str(&format!("{name:<16} {x:>38} {y:>38} {d:>12}\n"));
    };
    row("", a.solver.to_string(), b.solver.to_string(), "delta".into());
    row(
        "r(tf) [m]",
        vec3(a.terminal_position),
        vec3(b.terminal_position),
        String::new(),
    );
    row(
        "|r(tf)| [m]",
        format!("{:.3e}", a.terminal_position_error),
        format!("{:.3e}", b.terminal_position_error),
        format!("{:.3e}", c.terminal_position_delta),
    );
    row(
        "v(tf) [m/s]",
        vec3(a.terminal_velocity),
        vec3(b.terminal_velocity),
        String::new(),
    );
    row(
        "|v(tf)| [m/s]",
        format!("{:.3e}", a.terminal_velocity_error),
        format!("{:.3e}", b.terminal_velocity_error),
        format!("{:.3e}", c.terminal_velocity_delta),
    );
    row(
        "fuel [kg]",
        format!("{:.4}", a.fuel),
        format!("{:.4}", b.fuel),
        format!("{:.4}", c.fuel_delta),
    );
    row(
        "min |T| [N]",
        format!("{:.2}", a.min_thrust),
        format!("{:.2}", b.min_thrust),
        format!("{:.2}", c.min_thrust_delta),
    );
    row(
        "max |T| [N]",
        format!("{:.2}", a.max_thrust),
        format!("{:.2}", b.max_thrust),
        format!("{:.2}", c.max_thrust_delta),
    );
    row(
        "converged",
        yes_no(a.converged).into(),
        yes_no(b.converged).into(),
        String::new(),
    );
    row(
        "feasible",
        yes_no(a.feasible).into(),
        yes_no(b.feasible).into(),
        String::new(),
    );
    row(
        "iterations",
        a.iterations.to_string(),
        b.iterations.to_string(),
        String::new(),
    );
    if a.solver != b.solver {
        let (less, more) = if a.fuel < b.fuel { (a, b) } else { (b, a) };
        out.push_str(&format!("{} uses less fuel than {}\n", less.solver, more.solver));
    }
    out
}

pub fn compare_cmd(run: &RunArgs) -> Result<Status> {
    let solver = run.solver.unwrap_or(SolverChoice::Both);
    let manifest = RunManifest::new("compare", run, solver, run.scenario()?)?;
    save_json(&manifest, manifest.path("manifest.json"))?;
    let runs: Vec<(SolveResult, FeasibilityReport)> = solver
        .kinds()
        .into_iter()
        .map(|k| solve_and_export(k, &manifest))
        .collect::<Result<_>>()?;
    // A single solver is compared against itself.
    let (a, b) = (&runs[0], runs.last().expect("one run"));
    let cmp = compare(&a.0, &b.0, &manifest.tolerances)?;
    save_json(&cmp, manifest.path("comparison.json"))?;
    save_rows_csv(
        &[ComparisonRow::from(&cmp.a), ComparisonRow::from(&cmp.b)],
        manifest.path("comparison.csv"),
    )?;
    print!("{}", render_table(&cmp));
    Ok(runs
        .iter()
        .map(|(r, rep)| Status::of(r, rep))
        .max()
        .unwrap_or(Status::Ok))
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    t_lo: f64,
    t_hi: f64,
    search_solver: SolverKind,
    tf_star: Option<f64>,
    fuel: Option<f64>,
    samples: &'a [TfSample],
}

pub fn sweep(run: &RunArgs, t_lo: f64, t_hi: f64) -> Result<Status> {
    if !(t_lo <= t_hi) {
        bail!("usage: sweep needs t_lo <= t_hi, got [{t_lo}, {t_hi}]");
    }
    let solver = run.solver.unwrap_or(SolverChoice::Both);
    let manifest = RunManifest::new("sweep", run, solver, run.scenario()?)?;
    save_json(&manifest, manifest.path("manifest.json"))?;
    let search_solver = match solver {
        SolverChoice::Lcvx => SolverKind::Lcvx,
        _ => SolverKind::Exproj,
    };
    let settings = SearchSettings {
        solver: search_solver,
        tolerances: manifest.tolerances,
        ..SearchSettings::new(run.nominal_dt())
    };
    let (found, mut samples) = match search_optimal_tf(&manifest.scenario, t_lo, t_hi, &settings) {
        Ok(s) => (Some((s.tf_star, s.fuel)), s.samples),
        Err(AnalysisError::NoFeasible { samples, .. }) => (None, samples),
        Err(e) => return Err(e.into()),
    };
    if solver == SolverChoice::Both {
        let tfs: Vec<f64> = samples.iter().map(|s| s.tf).collect();
        let lcvx = evaluate_tfs(
            &manifest.scenario,
            &tfs,
            settings.grid,
            SolverKind::Lcvx,
            &manifest.tolerances,
        )?;
        samples.extend(lcvx);
    }
    save_rows_csv(&samples, manifest.path("sweep.csv"))?;
    save_json(
        &SweepSummary {
            t_lo,
            t_hi,
            search_solver,
            tf_star: found.map(|f| f.0),
            fuel: found.map(|f| f.1),
            samples: &samples,
        },
        manifest.path("sweep.json"),
    )?;
    println!(
        "{:>8} {:>7} {:>10} {:>9} {:>12}",
        "tf [s]", "solver", "converged", "feasible", "fuel [kg]"
    );
    for s in &samples {
        println!(
            "{:>8.3} {:>7} {:>10} {:>9} {:>12.4}",
            s.tf,
            s.solver,
            yes_no(s.converged),
            yes_no(s.feasible),
            s.fuel
        );
    }
    match found {
        Some((tf, fuel)) => {
            println!("tf* = {tf} s ({search_solver}, fuel {fuel:.4} kg)");
            Ok(Status::Ok)
        }
        None => bail!(AnalysisError::NoFeasible {
            t_lo,
            t_hi,
            samples: Vec::new()
        }),
    }
}

pub fn check(run: &RunArgs, trajectory: &Path) -> Result<Status> {
    let traj = load_trajectory_csv(trajectory)
        .with_context(|| format!("reading trajectory {}", trajectory.display()))?;
    let mut run = run.clone();
    // Unless told otherwise, take the horizon from the file.
    if run.tf.is_none() && run.dt.is_none() {
        run.tf = Some(traj.t[traj.steps()] - traj.t[0]);
        run.dt = Some(traj.t[1] - traj.t[0]);
    }
    let manifest = RunManifest::new("check", &run, SolverChoice::Both, run.scenario()?)?;
    let report = check_feasibility(&traj, &manifest.scenario, &manifest.tolerances)?;
    save_json(&report, manifest.path("report.json"))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.feasible {
        Status::Ok
    } else {
        Status::Infeasible
    })
}
