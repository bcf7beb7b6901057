//! Discretized landing problem.
//!
//! The continuous dynamics `r'' = g + u`, `z' = -alpha * sigma` are sampled
//! with an exact zero-order hold, and the whole horizon is stacked into one
//! decision vector
//!
//! ```text
//! y = [y_0; y_1; ...; y_{N-1}],   y_i = [u_i (3), x_{i+1} (6), sigma_i, z_{i+1}]
//! ```
//!
//! where `x = [r; v]` and `z = log m`. Everything inside [`ProblemMatrices`]
//! is nondimensional (see [`Scaling`]); [`unpack`] converts back to SI.

use nalgebra::{Matrix6, SMatrix, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use sprs::TriMat;

use crate::error::ModelError;
use crate::scenario::ScenarioConfig;
use crate::sparse::{self, SpMat};

/// Entries per step in the stacked vector.
pub const STEP_DIM: usize = 11;
/// Equality rows per step: six for position/velocity, one for log-mass.
pub const EQ_PER_STEP: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDynamics {
    pub a: Matrix6<f64>,
    pub b: SMatrix<f64, 6, 3>,
    pub c: Vector6<f64>,
    /// `alpha * dt`: log-mass decrement per unit of sigma.
    pub mass_step: f64,
    pub dt: f64,
    pub n: usize,
}

impl DiscreteDynamics {
    pub fn new(dt: f64, g: [f64; 3], alpha: f64, n: usize) -> Self {
        let mut a = Matrix6::identity();
        let mut b = SMatrix::<f64, 6, 3>::zeros();
        let mut c = Vector6::zeros();
        let half = 0.5 * dt * dt;
        for k in 0..3 {
            a[(k, k + 3)] = dt;
            b[(k, k)] = half;
            b[(k + 3, k)] = dt;
            c[k] = half * g[k];
            c[k + 3] = dt * g[k];
        }
        Self {
            a,
            b,
            c,
            mass_step: alpha * dt,
            dt,
            n,
        }
    }

    /// Same dynamics expressed in the nondimensional units of `scaling`.
    pub fn nondimensional(&self, g: [f64; 3], alpha: f64, scaling: &Scaling) -> Self {
        let acc = scaling.acceleration();
        Self::new(
            self.dt / scaling.time,
            g.map(|gi| gi / acc),
            alpha * scaling.length / scaling.time,
            self.n,
        )
    }

    pub fn step(&self, x: &Vector6<f64>, u: &Vector3<f64>) -> Vector6<f64> {
        self.a * x + self.b * u + self.c
    }
}

/// Zero-order-hold discretization of the scenario's dynamics, in SI units.
pub fn discretize(cfg: &ScenarioConfig) -> Result<DiscreteDynamics, ModelError> {
    let steps = cfg.tf / cfg.dt;
    let n = steps.round();
    if (steps - n).abs() > 1e-9 || n < 1.0 {
        return Err(ModelError::HorizonMismatch {
            tf: cfg.tf,
            dt: cfg.dt,
        });
    }
    Ok(DiscreteDynamics::new(cfg.dt, cfg.g, cfg.alpha, n as usize))
}

/// Reference units: length `max(|r_init|, 1)`, time `tf`, mass `m_wet`.
/// Log-mass is shifted by `log m_wet` (never scaled) so the thrust bounds keep
/// their exponential form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub length: f64,
    pub time: f64,
    pub mass: f64,
}

impl Scaling {
    pub fn for_scenario(cfg: &ScenarioConfig) -> Self {
        Self {
            length: Vector3::from(cfg.r_init).norm().max(1.0),
            time: cfg.tf,
            mass: cfg.m_wet,
        }
    }

    pub fn velocity(&self) -> f64 {
        self.length / self.time
    }

    pub fn acceleration(&self) -> f64 {
        self.length / (self.time * self.time)
    }

    pub fn log_mass(&self) -> f64 {
        self.mass.ln()
    }
}

/// The scenario in nondimensional units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledScenario {
    pub scaling: Scaling,
    pub x0: Vector6<f64>,
    pub z0: f64,
    pub z_dry: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub cos_theta: f64,
    pub gamma: f64,
    pub dynamics: DiscreteDynamics,
}

impl ScaledScenario {
    pub fn new(cfg: &ScenarioConfig, dynamics: &DiscreteDynamics) -> Self {
        let s = Scaling::for_scenario(cfg);
        let mut x0 = Vector6::zeros();
        for k in 0..3 {
            x0[k] = cfg.r_init[k] / s.length;
            x0[k + 3] = cfg.v_init[k] / s.velocity();
        }
        let thrust_unit = s.mass * s.acceleration();
        Self {
            scaling: s,
            x0,
            z0: 0.0,
            z_dry: (cfg.m_dry / cfg.m_wet).ln(),
            rho1: cfg.rho1 / thrust_unit,
            rho2: cfg.rho2 / thrust_unit,
            // cos(pi/2) is 6e-17 in floating point; snap it so the pointing
            // rows are exactly e1'u >= 0.
            cos_theta: if (cfg.theta_tp - std::f64::consts::FRAC_PI_2).abs() < 1e-15 {
                0.0
            } else {
                cfg.theta_tp.cos()
            },
            gamma: cfg.gamma,
            dynamics: dynamics.nondimensional(cfg.g, cfg.alpha, &s),
        }
    }
}

/// Positions of each step's quantities inside the stacked vector `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub n: usize,
}

impl Layout {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn dim(&self) -> usize {
        STEP_DIM * self.n
    }

    /// Offset of `u_i` (three entries).
    pub fn u(&self, i: usize) -> usize {
        STEP_DIM * i
    }

    /// Offset of `x_{i+1}` (six entries).
    pub fn x_next(&self, i: usize) -> usize {
        STEP_DIM * i + 3
    }

    pub fn sigma(&self, i: usize) -> usize {
        STEP_DIM * i + 9
    }

    /// Index of `z_{i+1}`.
    pub fn z_next(&self, i: usize) -> usize {
        STEP_DIM * i + 10
    }

    /// Index of `z_i` for `i >= 1`; `z_0` is a constant and has no slot.
    pub fn z(&self, i: usize) -> Option<usize> {
        (i >= 1).then(|| self.z_next(i - 1))
    }

    /// Offset of `x_i` for `i >= 1`.
    pub fn x(&self, i: usize) -> Option<usize> {
        (i >= 1).then(|| self.x_next(i - 1))
    }
}

/// Row counts of the three consensus blocks `w1`, `w2`, `w3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSizes {
    pub w1: usize,
    pub w2: usize,
    pub w3: usize,
}

impl BlockSizes {
    pub fn total(&self) -> usize {
        self.w1 + self.w2 + self.w3
    }
}

/// Stacked matrices of the discretized problem
///
/// ```text
/// minimize   yᵀ H y + hᵀ y
/// subject to G y = b,  P y >= q,
///            (u_i, sigma_i) on the cone surface, (z_i, sigma_i) in the band
/// ```
///
/// together with the consensus map `C = [Dw1; Dw2; P]` and offset
/// `q̃ = [0; 0; q]` used by the splitting.
///
/// The first row of `Dw2` selects `sigma_0` alone. Its partner `z_0` is a
/// constant, kept in `bw2[0]`; the remaining entries of `bw2` are zero.
#[derive(Debug, Clone)]
pub struct ProblemMatrices {
    pub layout: Layout,
    pub scaled: ScaledScenario,
    /// `H`
    pub cost_quad: SpMat,
    /// `h`
    pub cost_lin: Vec<f64>,
    /// `G`
    pub eq_mat: SpMat,
    /// `b`
    pub eq_rhs: Vec<f64>,
    /// `P`
    pub ineq_mat: SpMat,
    /// `q`
    pub ineq_rhs: Vec<f64>,
    /// `Dw1`
    pub select_w1: SpMat,
    /// `Dw2`
    pub select_w2: SpMat,
    /// `bw2`
    pub offset_w2: Vec<f64>,
    /// `C`
    pub consensus: SpMat,
    /// `q̃`
    pub consensus_offset: Vec<f64>,
    pub blocks: BlockSizes,
}

impl ProblemMatrices {
    /// Recomputes `C` and `q̃` after any of `Dw1`, `Dw2`, `P`, `q` changed.
    pub fn rebuild_consensus(&mut self) {
        self.consensus = sparse::vstack(&[&self.select_w1, &self.select_w2, &self.ineq_mat]);
        self.blocks = BlockSizes {
            w1: self.select_w1.rows(),
            w2: self.select_w2.rows(),
            w3: self.ineq_mat.rows(),
        };
        let mut offset = vec![0.0; self.blocks.w1 + self.blocks.w2];
        offset.extend_from_slice(&self.ineq_rhs);
        self.consensus_offset = offset;
    }

    /// `yᵀ H y + hᵀ y`
    pub fn objective(&self, y: &[f64]) -> f64 {
        let hy = sparse::mul_vec(&self.cost_quad, y);
        y.iter()
            .zip(&hy)
            .zip(&self.cost_lin)
            .map(|((yi, hyi), li)| yi * hyi + li * yi)
            .sum()
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }
}

/// Builds the stacked problem (nondimensional) for the nonconvex formulation:
/// cost `-z_N + gamma |x_N|²`, pointing rows `e1ᵀu_i - cos(theta) sigma_i >= 0`
/// and the mass floor `z_N >= log(m_dry)`.
pub fn assemble(cfg: &ScenarioConfig, dynamics: &DiscreteDynamics) -> Result<ProblemMatrices, ModelError> {
    cfg.validate()?;
    if dynamics.n != cfg.horizon() || (dynamics.dt - cfg.dt).abs() > 1e-12 * cfg.dt {
        return Err(ModelError::HorizonMismatch {
            tf: cfg.tf,
            dt: dynamics.dt,
        });
    }
    let scaled = ScaledScenario::new(cfg, dynamics);
    let n = dynamics.n;
    let layout = Layout::new(n);
    let dim = layout.dim();
    let last = n - 1;

    let mut h = TriMat::new((dim, dim));
    for k in 0..6 {
        h.add_triplet(layout.x_next(last) + k, layout.x_next(last) + k, scaled.gamma);
    }
    let mut cost_lin = vec![0.0; dim];
    cost_lin[layout.z_next(last)] = -1.0;

    let (eq_mat, eq_rhs) = equality_constraints(&scaled, layout);

    let mut sel1 = TriMat::new((4 * n, dim));
    for i in 0..n {
        for k in 0..3 {
            sel1.add_triplet(4 * i + k, layout.u(i) + k, 1.0);
        }
        sel1.add_triplet(4 * i + 3, layout.sigma(i), 1.0);
    }

    let mut sel2 = TriMat::new((2 * n - 1, dim));
    sel2.add_triplet(0, layout.sigma(0), 1.0);
    for i in 1..n {
        sel2.add_triplet(2 * i - 1, layout.sigma(i), 1.0);
        sel2.add_triplet(2 * i, layout.z(i).expect("i >= 1"), 1.0);
    }
    let mut offset_w2 = vec![0.0; 2 * n - 1];
    offset_w2[0] = scaled.z0;

    let mut p = TriMat::new((n + 1, dim));
    let mut q = vec![0.0; n + 1];
    for i in 0..n {
        p.add_triplet(i, layout.u(i), 1.0);
        if scaled.cos_theta != 0.0 {
            p.add_triplet(i, layout.sigma(i), -scaled.cos_theta);
        }
    }
    p.add_triplet(n, layout.z_next(last), 1.0);
    q[n] = scaled.z_dry;

    let mut mat = ProblemMatrices {
        layout,
        scaled,
        cost_quad: h.to_csr(),
        cost_lin,
        eq_mat,
        eq_rhs,
        ineq_mat: p.to_csr(),
        ineq_rhs: q,
        select_w1: sel1.to_csr(),
        select_w2: sel2.to_csr(),
        offset_w2,
        consensus: sparse::empty(0, dim),
        consensus_offset: Vec::new(),
        blocks: BlockSizes { w1: 0, w2: 0, w3: 0 },
    };
    mat.rebuild_consensus();
    Ok(mat)
}

/// Dynamics rows `x_{i+1} - A x_i - B u_i = c` and `z_{i+1} - z_i + αΔt σ_i = 0`,
/// with the known `x_0`, `z_0` moved to the right-hand side.
fn equality_constraints(scaled: &ScaledScenario, layout: Layout) -> (SpMat, Vec<f64>) {
    let dynamics = &scaled.dynamics;
    let n = layout.n;
    let mut g = TriMat::new((EQ_PER_STEP * n, layout.dim()));
    let mut b = vec![0.0; EQ_PER_STEP * n];
    let ax0 = dynamics.a * scaled.x0;
    for i in 0..n {
        let row = EQ_PER_STEP * i;
        for k in 0..6 {
            g.add_triplet(row + k, layout.x_next(i) + k, 1.0);
            for j in 0..3 {
                let bkj = dynamics.b[(k, j)];
                if bkj != 0.0 {
                    g.add_triplet(row + k, layout.u(i) + j, -bkj);
                }
            }
            match layout.x(i) {
                Some(xi) => {
                    for j in 0..6 {
                        let akj = dynamics.a[(k, j)];
                        if akj != 0.0 {
                            g.add_triplet(row + k, xi + j, -akj);
                        }
                    }
                    b[row + k] = dynamics.c[k];
                }
                None => b[row + k] = dynamics.c[k] + ax0[k],
            }
        }
        g.add_triplet(row + 6, layout.z_next(i), 1.0);
        g.add_triplet(row + 6, layout.sigma(i), dynamics.mass_step);
        match layout.z(i) {
            Some(zi) => g.add_triplet(row + 6, zi, -1.0),
            None => b[row + 6] = scaled.z0,
        }
    }
    (g.to_csr(), b)
}

/// A trajectory in SI units. Per-node arrays have `N + 1` entries, per-step
/// arrays have `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub t: Vec<f64>,
    pub r: Vec<[f64; 3]>,
    pub v: Vec<[f64; 3]>,
    pub m: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<[f64; 3]>,
    pub sigma: Vec<f64>,
    pub thrust: Vec<[f64; 3]>,
    pub thrust_mag: Vec<f64>,
    /// Angle between the thrust and `e1`, in radians.
    pub tilt: Vec<f64>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.sigma.len()
    }

    /// Rebuilds a trajectory from node states and per-step thrust; `u` is
    /// recovered as `T / m` and `sigma` is supplied by the caller.
    pub fn from_states(
        dt: f64,
        r: Vec<[f64; 3]>,
        v: Vec<[f64; 3]>,
        m: Vec<f64>,
        thrust: Vec<[f64; 3]>,
        sigma: Vec<f64>,
    ) -> Self {
        let n = thrust.len();
        let t = (0..=n).map(|i| i as f64 * dt).collect();
        let z = m.iter().map(|mi| mi.ln()).collect();
        let u = thrust.iter().zip(&m).map(|(ti, mi)| ti.map(|c| c / mi)).collect();
        let thrust_mag: Vec<f64> = thrust.iter().map(|ti| Vector3::from(*ti).norm()).collect();
        let tilt = thrust
            .iter()
            .zip(&thrust_mag)
            .map(|(ti, mag)| tilt_angle(ti, *mag))
            .collect();
        Self {
            dt,
            t,
            r,
            v,
            m,
            z,
            u,
            sigma,
            thrust,
            thrust_mag,
            tilt,
        }
    }
}

fn tilt_angle(thrust: &[f64; 3], mag: f64) -> f64 {
    if mag > 0.0 {
        (thrust[0] / mag).clamp(-1.0, 1.0).acos()
    } else {
        0.0
    }
}

/// Converts a stacked nondimensional vector into an SI trajectory, with the
/// initial state taken from `cfg`.
pub fn unpack(y: &[f64], cfg: &ScenarioConfig) -> Result<Trajectory, ModelError> {
    let n = cfg.horizon();
    let layout = Layout::new(n);
    if y.len() != layout.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: layout.dim(),
            found: y.len(),
        });
    }
    let s = Scaling::for_scenario(cfg);
    let acc = s.acceleration();
    let mut r = Vec::with_capacity(n + 1);
    let mut v = Vec::with_capacity(n + 1);
    let mut z = Vec::with_capacity(n + 1);
    r.push(cfg.r_init);
    v.push(cfg.v_init);
    z.push(cfg.m_wet.ln());
    let mut u = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for i in 0..n {
        let ui = layout.u(i);
        u.push([y[ui] * acc, y[ui + 1] * acc, y[ui + 2] * acc]);
        sigma.push(y[layout.sigma(i)] * acc);
        let xi = layout.x_next(i);
        r.push([0, 1, 2].map(|k| y[xi + k] * s.length));
        v.push([3, 4, 5].map(|k| y[xi + k] * s.velocity()));
        z.push(y[layout.z_next(i)] + s.log_mass());
    }
    let mut m: Vec<f64> = z.iter().map(|zi| zi.exp()).collect();
    // exp(log(m_wet)) can be off by an ulp
    m[0] = cfg.m_wet;
    let thrust: Vec<[f64; 3]> = u.iter().zip(&m).map(|(ui, mi)| ui.map(|c| c * mi)).collect();
    let thrust_mag: Vec<f64> = thrust.iter().map(|ti| Vector3::from(*ti).norm()).collect();
    let tilt = thrust
        .iter()
        .zip(&thrust_mag)
        .map(|(ti, mag)| tilt_angle(ti, *mag))
        .collect();
    Ok(Trajectory {
        dt: cfg.dt,
        t: (0..=n).map(|i| i as f64 * cfg.dt).collect(),
        r,
        v,
        m,
        z,
        u,
        sigma,
        thrust,
        thrust_mag,
        tilt,
    })
}

/// Inverse of [`unpack`].
pub fn pack(traj: &Trajectory, cfg: &ScenarioConfig) -> Result<Vec<f64>, ModelError> {
    let n = cfg.horizon();
    if traj.steps() != n {
        return Err(ModelError::DimensionMismatch {
            expected: n,
            found: traj.steps(),
        });
    }
    let layout = Layout::new(n);
    let s = Scaling::for_scenario(cfg);
    let acc = s.acceleration();
    let mut y = vec![0.0; layout.dim()];
    for i in 0..n {
        for k in 0..3 {
            y[layout.u(i) + k] = traj.u[i][k] / acc;
            y[layout.x_next(i) + k] = traj.r[i + 1][k] / s.length;
            y[layout.x_next(i) + 3 + k] = traj.v[i + 1][k] / s.velocity();
        }
        y[layout.sigma(i)] = traj.sigma[i] / acc;
        y[layout.z_next(i)] = traj.z[i + 1] - s.log_mass();
    }
    Ok(y)
}

/// Propagates the SI dynamics from the scenario's initial state under
/// piecewise-constant `(u_i, sigma_i)`. Returns node states `[r; v]` and
/// log-masses, `N + 1` each.
pub fn simulate(
    cfg: &ScenarioConfig,
    dynamics: &DiscreteDynamics,
    u: &[[f64; 3]],
    sigma: &[f64],
) -> (Vec<Vector6<f64>>, Vec<f64>) {
    let mut x = Vector6::new(
        cfg.r_init[0],
        cfg.r_init[1],
        cfg.r_init[2],
        cfg.v_init[0],
        cfg.v_init[1],
        cfg.v_init[2],
    );
    let mut z = cfg.m_wet.ln();
    let mut xs = vec![x];
    let mut zs = vec![z];
    for (ui, si) in u.iter().zip(sigma) {
        x = dynamics.step(&x, &Vector3::from(*ui));
        z -= dynamics.mass_step * si;
        xs.push(x);
        zs.push(z);
    }
    (xs, zs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(tf: f64) -> ScenarioConfig {
        ScenarioConfig::mars_landing().with_tf(tf, 1.0)
    }

    #[test]
    fn zoh_blocks() {
        let d = DiscreteDynamics::new(1.0, [-3.71, 0.0, 0.0], 5e-4, 3);
        let c: Vec<f64> = d.c.iter().copied().collect();
        assert_eq!(c, vec![-1.855, 0.0, 0.0, -3.71, 0.0, 0.0]);
        assert_eq!(
            d.a.fixed_view::<3, 3>(0, 3).into_owned(),
            nalgebra::Matrix3::identity()
        );
        let d = DiscreteDynamics::new(0.5, [0.0; 3], 5e-4, 3);
        assert_eq!(
            d.b.fixed_view::<3, 3>(0, 0).into_owned(),
            nalgebra::Matrix3::identity() * 0.125
        );
        assert_eq!(d.mass_step, 2.5e-4);
    }

    #[test]
    fn discretize_rejects_fractional_horizon() {
        let mut cfg = ScenarioConfig::mars_landing();
        cfg.dt = 1.0;
        assert!(matches!(
            discretize(&cfg),
            Err(ModelError::HorizonMismatch { .. })
        ));
        let cfg = small_cfg(40.0);
        let d = discretize(&cfg).unwrap();
        assert_eq!(d.n, 40);
        assert_eq!(d.mass_step, 5e-4);
    }

    #[test]
    fn dimensions_for_two_steps() {
        let cfg = small_cfg(2.0);
        let mat = assemble(&cfg, &discretize(&cfg).unwrap()).unwrap();
        assert_eq!(mat.dim(), 22);
        assert_eq!(mat.select_w1.rows(), 8);
        assert_eq!(mat.select_w2.rows(), 3);
        assert_eq!(mat.eq_mat.rows(), 14);
        assert_eq!(mat.ineq_mat.rows(), 3);
        assert_eq!(mat.consensus.rows(), 14);
        assert_eq!(mat.consensus_offset.len(), 14);
    }

    #[test]
    fn pointing_rows_at_ninety_degrees() {
        let cfg = small_cfg(5.0);
        let mat = assemble(&cfg, &discretize(&cfg).unwrap()).unwrap();
        assert_eq!(mat.scaled.cos_theta, 0.0);
        for (i, row) in mat.ineq_mat.outer_iterator().take(5).enumerate() {
            let entries: Vec<_> = row.iter().map(|(c, v)| (c, *v)).collect();
            assert_eq!(entries, vec![(mat.layout.u(i), 1.0)]);
        }
        let mut cfg = small_cfg(5.0);
        cfg.theta_tp = std::f64::consts::FRAC_PI_4;
        let mat = assemble(&cfg, &discretize(&cfg).unwrap()).unwrap();
        let row: Vec<_> = mat
            .ineq_mat
            .outer_view(2)
            .unwrap()
            .iter()
            .map(|(c, v)| (c, *v))
            .collect();
        assert_eq!(row.len(), 2);
        assert!((row[1].1 + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn selection_maps() {
        let cfg = small_cfg(4.0);
        let mat = assemble(&cfg, &discretize(&cfg).unwrap()).unwrap();
        let y: Vec<f64> = (0..mat.dim()).map(|k| k as f64).collect();
        let l = mat.layout;
        let w1 = sparse::mul_vec(&mat.select_w1, &y);
        let mut expect = vec![];
        for i in 0..4 {
            expect.extend([y[l.u(i)], y[l.u(i) + 1], y[l.u(i) + 2], y[l.sigma(i)]]);
        }
        assert_eq!(w1, expect);
        let w2 = sparse::mul_vec(&mat.select_w2, &y);
        let mut expect = vec![y[l.sigma(0)]];
        for i in 1..4 {
            expect.extend([y[l.sigma(i)], y[l.z(i).unwrap()]]);
        }
        assert_eq!(w2, expect);
        assert_eq!(mat.offset_w2, vec![0.0; 7]);
    }

    #[test]
    fn hover_thrust_balances_gravity() {
        let cfg = small_cfg(3.0);
        let d = discretize(&cfg).unwrap();
        let gmag = 3.71;
        let u = vec![[3.71, 0.0, 0.0]; 3];
        let sigma = vec![gmag; 3];
        let (xs, zs) = simulate(&cfg, &d, &u, &sigma);
        let mut traj = Trajectory::from_states(
            cfg.dt,
            xs.iter().map(|x| [x[0], x[1], x[2]]).collect(),
            xs.iter().map(|x| [x[3], x[4], x[5]]).collect(),
            zs.iter().map(|z| z.exp()).collect(),
            vec![[0.0; 3]; 3],
            sigma,
        );
        traj.thrust = (0..3).map(|i| [traj.m[i] * 3.71, 0.0, 0.0]).collect();
        let y = pack(
            &Trajectory {
                u: u.clone(),
                ..traj.clone()
            },
            &cfg,
        )
        .unwrap();
        let back = unpack(&y, &cfg).unwrap();
        for i in 0..3 {
            assert!((back.thrust_mag[i] - back.m[i] * gmag).abs() < 1e-9 * back.m[i]);
            assert!(back.tilt[i].abs() < 1e-12);
            // velocity is unchanged under hover
            assert!((back.v[i + 1][0] - cfg.v_init[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn unpack_exp_log() {
        let cfg = small_cfg(2.0);
        let mut y = vec![0.0; 22];
        let l = Layout::new(2);
        y[l.z_next(0)] = 0.0;
        y[l.z_next(1)] = (1700.0f64 / 2000.0).ln();
        let t = unpack(&y, &cfg).unwrap();
        assert_eq!(t.m[0], 2000.0);
        assert!((t.m[1] - 2000.0).abs() < 1e-9);
        assert!((t.m[2] - 1700.0).abs() < 1e-9);
        assert!(matches!(
            unpack(&y[..21], &cfg),
            Err(ModelError::DimensionMismatch {
                expected: 22,
                found: 21
            })
        ));
    }
}
