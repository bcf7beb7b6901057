use thiserror::Error;

/// Problems with scenario text or its values.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("could not parse scenario: {0}")]
    Parse(String),
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("{key} {reason}")]
    Invalid { key: &'static str, reason: String },
}

impl ScenarioError {
    pub(crate) fn invalid(key: &'static str, reason: impl Into<String>) -> Self {
        Self::Invalid {
            key,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("stacked vector has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("time of flight {tf} s is not an integer multiple of dt = {dt} s")]
    HorizonMismatch { tf: f64, dt: f64 },
    #[error("reference mass becomes nonpositive: m_wet - alpha*rho2*t = {mass} kg at t = {t} s")]
    NonphysicalReference { t: f64, mass: f64 },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error(
        "Newton-Raphson did not converge in {iterations} iterations \
         (z = {z}, sigma = {sigma}, rho = {rho}, residual = {residual:e})"
    )]
    NewtonDidNotConverge {
        z: f64,
        sigma: f64,
        rho: f64,
        iterations: usize,
        residual: f64,
    },
    #[error("no stationary point found on the curve for z = {z}, sigma = {sigma}, rho = {rho}")]
    NoRoot { z: f64, sigma: f64, rho: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("KKT matrix is singular (pivot column {column})")]
    SingularKkt { column: usize },
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("trajectory has {found} steps but the scenario horizon is {expected}")]
    HorizonMismatch { expected: usize, found: usize },
    /// Carries the flight times that were tried.
    #[error("no feasible time of flight in [{t_lo}, {t_hi}] s")]
    NoFeasible {
        t_lo: f64,
        t_hi: f64,
        samples: Vec<crate::analysis::TfSample>,
    },
    #[error("invalid bracket [{t_lo}, {t_hi}]")]
    InvalidBracket { t_lo: f64, t_hi: f64 },
    #[error("results come from different scenarios: {0}")]
    ScenarioMismatch(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed trajectory file: {0}")]
    Malformed(String),
}
