//! Minimum-fuel powered-descent guidance.
//!
//! Two solvers share one ADMM engine:
//!
//! * **ExProj** keeps the nonconvex constraints as they are and projects
//!   directly onto the cone surface `|u| = sigma` and the exponential thrust
//!   band `rho1 e^-z <= sigma <= rho2 e^-z`.
//! * **LCvx** relaxes the cone surface to the solid cone and linearizes the
//!   band around a reference log-mass profile, giving a convex problem.
//!
//! [`analysis`] audits the resulting trajectories against the original
//! nonconvex problem in physical units.

pub mod admm;
pub mod analysis;
pub mod error;
pub mod export;
pub mod linalg;
pub mod model;
pub mod projections;
pub mod scenario;
pub mod solvers;
pub mod sparse;

pub use admm::{AdmmParams, SolveResult, SolverKind, SplitState, Termination};
pub use analysis::{check_feasibility, fuel_consumed, FeasibilityReport, FeasibilityTolerances};
pub use error::{AnalysisError, IoError, ModelError, ProjectionError, ScenarioError, SolverError};
pub use model::{assemble, discretize, pack, unpack, DiscreteDynamics, ProblemMatrices, Trajectory};
pub use scenario::{load_scenario, load_scenario_file, ScenarioConfig};
pub use solvers::{solve_exproj, solve_lcvx};
