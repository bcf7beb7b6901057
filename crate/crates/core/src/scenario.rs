//! Scenario parameters: vehicle, environment and solver knobs.
//!
//! Scenario files are flat key-value text (TOML syntax) or JSON with the same
//! keys. Vectors are written as three-element arrays. All values are SI; the
//! pointing limit `theta_tp` is in radians.
//!
//! ```text
//! r_init = [2400.0, 450.0, -330.0]
//! v_init = [-10.0, -40.0, 10.0]
//! g = [-3.71, 0.0, 0.0]
//! m_wet = 2000.0
//! m_dry = 1700.0
//! rho1 = 4800.0
//! rho2 = 19200.0
//! alpha = 0.0005
//! theta_tp = 1.5707963267948966
//! tf = 46.96
//! ```

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;

/// Nominal sampling interval used when a scenario omits `dt`.
pub const NOMINAL_DT: f64 = 1.0;

/// Relative tolerance on `tf = N * dt`.
const HORIZON_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub r_init: [f64; 3],
    pub v_init: [f64; 3],
    pub g: [f64; 3],
    pub m_wet: f64,
    pub m_dry: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub alpha: f64,
    pub theta_tp: f64,
    pub tf: f64,
    pub dt: f64,
    /// Terminal-state weight, in nondimensional units.
    pub gamma: f64,
    /// ADMM penalty, in nondimensional units.
    pub penalty_rho: f64,
    pub max_iters: usize,
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub nr_tol: f64,
    pub nr_max_iters: usize,
}

/// Solver knobs applied when a scenario file leaves them out.
pub mod defaults {
    pub const GAMMA: f64 = 1.0e6;
    pub const PENALTY_RHO: f64 = 0.01;
    pub const MAX_ITERS: usize = 100_000;
    pub const EPS_PRIMAL: f64 = 1e-6;
    pub const EPS_DUAL: f64 = 1e-6;
    pub const NR_TOL: f64 = 1e-12;
    pub const NR_MAX_ITERS: usize = 50;
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    r_init: Option<[f64; 3]>,
    v_init: Option<[f64; 3]>,
    g: Option<[f64; 3]>,
    m_wet: Option<f64>,
    m_dry: Option<f64>,
    rho1: Option<f64>,
    rho2: Option<f64>,
    alpha: Option<f64>,
    theta_tp: Option<f64>,
    tf: Option<f64>,
    dt: Option<f64>,
    gamma: Option<f64>,
    penalty_rho: Option<f64>,
    max_iters: Option<usize>,
    eps_primal: Option<f64>,
    eps_dual: Option<f64>,
    nr_tol: Option<f64>,
    nr_max_iters: Option<usize>,
}

fn required<T>(value: Option<T>, key: &'static str) -> Result<T, ScenarioError> {
    value.ok_or(ScenarioError::MissingKey(key))
}

impl RawScenario {
    fn into_config(self) -> Result<ScenarioConfig, ScenarioError> {
        let tf = required(self.tf, "tf")?;
        let dt = match self.dt {
            Some(dt) => dt,
            None => ScenarioConfig::grid_dt(tf, NOMINAL_DT),
        };
        let cfg = ScenarioConfig {
            r_init: required(self.r_init, "r_init")?,
            v_init: required(self.v_init, "v_init")?,
            g: required(self.g, "g")?,
            m_wet: required(self.m_wet, "m_wet")?,
            m_dry: required(self.m_dry, "m_dry")?,
            rho1: required(self.rho1, "rho1")?,
            rho2: required(self.rho2, "rho2")?,
            alpha: required(self.alpha, "alpha")?,
            theta_tp: required(self.theta_tp, "theta_tp")?,
            tf,
            dt,
            gamma: self.gamma.unwrap_or(defaults::GAMMA),
            penalty_rho: self.penalty_rho.unwrap_or(defaults::PENALTY_RHO),
            max_iters: self.max_iters.unwrap_or(defaults::MAX_ITERS),
            eps_primal: self.eps_primal.unwrap_or(defaults::EPS_PRIMAL),
            eps_dual: self.eps_dual.unwrap_or(defaults::EPS_DUAL),
            nr_tol: self.nr_tol.unwrap_or(defaults::NR_TOL),
            nr_max_iters: self.nr_max_iters.unwrap_or(defaults::NR_MAX_ITERS),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses scenario text. Input whose first non-blank character is `{` is
/// read as JSON, anything else as key-value text.
pub fn load_scenario(source: &str) -> Result<ScenarioConfig, ScenarioError> {
    let raw: RawScenario = if source.trim_start().starts_with('{') {
        serde_json::from_str(source).map_err(|e| ScenarioError::Parse(e.to_string()))?
    } else {
        toml::from_str(source).map_err(|e| ScenarioError::Parse(e.to_string()))?
    };
    raw.into_config()
}

pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Parse(format!("{}: {e}", path.display())))?;
    load_scenario(&text)
}

impl ScenarioConfig {
    /// The Mars landing scenario used throughout the examples, at the
    /// fuel-optimal time of flight.
    pub fn mars_landing() -> Self {
        let tf = 46.96;
        Self {
            r_init: [2400.0, 450.0, -330.0],
            v_init: [-10.0, -40.0, 10.0],
            g: [-3.71, 0.0, 0.0],
            m_wet: 2000.0,
            m_dry: 1700.0,
            rho1: 4800.0,
            rho2: 19200.0,
            alpha: 0.0005,
            theta_tp: FRAC_PI_2,
            tf,
            dt: Self::grid_dt(tf, NOMINAL_DT),
            gamma: defaults::GAMMA,
            penalty_rho: defaults::PENALTY_RHO,
            max_iters: defaults::MAX_ITERS,
            eps_primal: defaults::EPS_PRIMAL,
            eps_dual: defaults::EPS_DUAL,
            nr_tol: defaults::NR_TOL,
            nr_max_iters: defaults::NR_MAX_ITERS,
        }
    }

    /// Sampling interval closest to `nominal_dt` that divides `tf` into an
    /// integer number (at least two) of steps.
    pub fn grid_dt(tf: f64, nominal_dt: f64) -> f64 {
        let n = (tf / nominal_dt).round().max(2.0);
        tf / n
    }

    /// Copy of this scenario with a new time of flight. The sampling interval
    /// is re-snapped so that `tf` stays an integer multiple of it, staying as
    /// close as possible to `nominal_dt`.
    pub fn with_tf(&self, tf: f64, nominal_dt: f64) -> Self {
        Self {
            tf,
            dt: Self::grid_dt(tf, nominal_dt),
            ..self.clone()
        }
    }

    /// Number of steps `N = tf / dt`.
    pub fn horizon(&self) -> usize {
        (self.tf / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        use ScenarioError as E;
        for (key, v) in [("r_init", &self.r_init), ("v_init", &self.v_init), ("g", &self.g)] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(E::invalid(key, "must be finite"));
            }
        }
        let positive = [
            ("m_wet", self.m_wet),
            ("m_dry", self.m_dry),
            ("rho1", self.rho1),
            ("rho2", self.rho2),
            ("alpha", self.alpha),
            ("theta_tp", self.theta_tp),
            ("tf", self.tf),
            ("dt", self.dt),
            ("gamma", self.gamma),
            ("penalty_rho", self.penalty_rho),
            ("eps_primal", self.eps_primal),
            ("eps_dual", self.eps_dual),
            ("nr_tol", self.nr_tol),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(E::invalid(key, "must be positive"));
            }
        }
        if self.rho1 >= self.rho2 {
            return Err(E::invalid("rho1", "must be smaller than rho2"));
        }
        if self.m_dry >= self.m_wet {
            return Err(E::invalid("m_dry", "must be smaller than m_wet"));
        }
        if self.theta_tp > FRAC_PI_2 + 1e-12 {
            return Err(E::invalid("theta_tp", "must not exceed pi/2"));
        }
        if self.max_iters == 0 {
            return Err(E::invalid("max_iters", "must be at least 1"));
        }
        if self.nr_max_iters == 0 {
            return Err(E::invalid("nr_max_iters", "must be at least 1"));
        }
        let steps = self.tf / self.dt;
        if (steps - steps.round()).abs() * self.dt > HORIZON_TOL * self.dt {
            return Err(E::invalid(
                "tf",
                format!("must be an integer multiple of dt = {}", self.dt),
            ));
        }
        if steps.round() < 2.0 {
            return Err(E::invalid("tf", "must span at least two steps"));
        }
        Ok(())
    }

    /// Key-value text that [`load_scenario`] reads back to the same values.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}
