use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use exproj_core::scenario::NOMINAL_DT;
use exproj_core::{load_scenario_file, FeasibilityTolerances, ScenarioConfig, SolverKind};

#[derive(Debug, Parser)]
#[command(name = "exproj", version, about = "Minimum-fuel powered-descent guidance")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one scenario and export the trajectory, result and audit.
    Solve {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Solve with two solvers and print a side-by-side table.
    Compare {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Search a flight-time bracket for the least-fuel feasible solve.
    Sweep {
        /// Lower end of the bracket (s)
        t_lo: f64,
        /// Upper end of the bracket (s)
        t_hi: f64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Audit an existing trajectory CSV.
    Check {
        /// Trajectory CSV as written by `solve`
        trajectory: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Exproj,
    Lcvx,
    Both,
}

impl SolverChoice {
    pub fn kinds(self) -> Vec<SolverKind> {
        match self {
            Self::Exproj => vec![SolverKind::Exproj],
            Self::Lcvx => vec![SolverKind::Lcvx],
            Self::Both => vec![SolverKind::Exproj, SolverKind::Lcvx],
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario file (key-value text or JSON). Defaults to the built-in Mars
    /// landing scenario.
    #[arg(long)]
    pub scenario: Option<PathBuf>,

    /// Solver selection; `compare` and `sweep` default to both.
    #[arg(long, value_enum)]
    pub solver: Option<SolverChoice>,

    /// Time of flight (s). The sampling interval is re-snapped so that tf is
    /// an integer number of steps.
    #[arg(long)]
    pub tf: Option<f64>,

    /// Nominal sampling interval (s)
    #[arg(long)]
    pub dt: Option<f64>,

    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,

    #[arg(long)]
    pub max_iters: Option<usize>,

    #[arg(long)]
    pub penalty_rho: Option<f64>,

    #[arg(long)]
    pub gamma: Option<f64>,

    #[command(flatten)]
    pub tol: TolArgs,
}

/// Audit tolerance overrides.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TolArgs {
    /// Thrust-bound tolerance as a fraction of rho1
    #[arg(long)]
    pub tol_thrust: Option<f64>,
    /// rad
    #[arg(long)]
    pub tol_pointing: Option<f64>,
    /// m
    #[arg(long)]
    pub tol_position: Option<f64>,
    /// m/s
    #[arg(long)]
    pub tol_velocity: Option<f64>,
    /// kg
    #[arg(long)]
    pub tol_mass_floor: Option<f64>,
    /// m
    #[arg(long)]
    pub tol_dynamics_position: Option<f64>,
    /// m/s
    #[arg(long)]
    pub tol_dynamics_velocity: Option<f64>,
    /// kg
    #[arg(long)]
    pub tol_dynamics_mass: Option<f64>,
}

impl TolArgs {
    pub fn resolve(&self) -> Result<FeasibilityTolerances> {
        let mut t = FeasibilityTolerances::default();
        let slots = [
            (&mut t.thrust_rel_rho1, self.tol_thrust, "--tol-thrust"),
            (&mut t.pointing, self.tol_pointing, "--tol-pointing"),
            (&mut t.terminal_position, self.tol_position, "--tol-position"),
            (&mut t.terminal_velocity, self.tol_velocity, "--tol-velocity"),
            (&mut t.mass_floor, self.tol_mass_floor, "--tol-mass-floor"),
            (
                &mut t.dynamics_position,
                self.tol_dynamics_position,
                "--tol-dynamics-position",
            ),
            (
                &mut t.dynamics_velocity,
                self.tol_dynamics_velocity,
                "--tol-dynamics-velocity",
            ),
            (
                &mut t.dynamics_mass,
                self.tol_dynamics_mass,
                "--tol-dynamics-mass",
            ),
        ];
        for (slot, value, flag) in slots {
            if let Some(v) = value {
                ensure!(v.is_finite() && v >= 0.0, "{flag} must be a nonnegative number");
                *slot = v;
            }
        }
        Ok(t)
    }
}

impl RunArgs {
    /// Scenario with every command-line override applied and validated.
    pub fn scenario(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.scenario {
            Some(path) => {
                load_scenario_file(path).with_context(|| format!("loading scenario {}", path.display()))?
            }
            None => ScenarioConfig::mars_landing(),
        };
        if self.tf.is_some() || self.dt.is_some() {
            let nominal = self.dt.unwrap_or(NOMINAL_DT);
            ensure!(nominal.is_finite() && nominal > 0.0, "--dt must be positive");
            cfg = cfg.with_tf(self.tf.unwrap_or(cfg.tf), nominal);
        }
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.penalty_rho {
            cfg.penalty_rho = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        cfg.validate().context("invalid scenario")?;
        Ok(cfg)
    }

    pub fn nominal_dt(&self) -> f64 {
        self.dt.unwrap_or(NOMINAL_DT)
    }
}

/// Record of one invocation, written next to its artifacts.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub subcommand: &'static str,
    pub scenario_path: Option<PathBuf>,
    pub solver: SolverChoice,
    pub output_dir: PathBuf,
    pub tolerance_overrides: TolArgs,
    pub tolerances: FeasibilityTolerances,
    pub scenario: ScenarioConfig,
    pub determinism: &'static str,
}

impl RunManifest {
    pub fn new(
        subcommand: &'static str,
        run: &RunArgs,
        solver: SolverChoice,
        scenario: ScenarioConfig,
    ) -> Result<Self> {
        std::fs::create_dir_all(&run.out)
            .with_context(|| format!("creating output directory {}", run.out.display()))?;
        let probe = run.out.join(".write-test");
        std::fs::write(&probe, b"")
            .with_context(|| format!("output directory {} is not writable", run.out.display()))?;
        let _ = std::fs::remove_file(probe);
        Ok(Self {
            tool_version: env!("CARGO_PKG_VERSION"),
            subcommand,
            scenario_path: run.scenario.clone(),
            solver,
            output_dir: run.out.clone(),
            tolerance_overrides: run.tol.clone(),
            tolerances: run.tol.resolve()?,
            scenario,
            determinism: "solvers use no randomness; identical inputs give identical outputs",
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}
