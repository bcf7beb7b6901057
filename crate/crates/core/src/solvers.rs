//! Problem frontends over the ADMM engine.
//!
//! [`solve_exproj`] projects directly onto the nonconvex sets: the cone
//! surface `|u_i| = sigma_i` and the exponential band
//! `rho1 e^-z_i <= sigma_i <= rho2 e^-z_i`. [`solve_lcvx`] solves the
//! losslessly convexified problem: the solid cone `|u_i| <= sigma_i` plus both
//! thrust bounds linearized once about the full-thrust mass profile.

use log::info;
use sprs::TriMat;

use crate::admm::{
    self, AdmmOutcome, AdmmParams, KktFactor, Projector, SolveResult, SolverKind, SplitState, Termination,
};
use crate::error::{ModelError, ProjectionError, SolverError};
use crate::model::{assemble, discretize, unpack, ProblemMatrices, Scaling};
use crate::projections::{
    project_cone, project_cone_surface, project_exp_band, project_interval, project_nonneg_in_place,
    BandPoint, ConePoint,
};
use crate::scenario::ScenarioConfig;
use crate::sparse;

/// Projection onto `C1 x C2 x C3` for the nonconvex formulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprojProjector {
    pub steps: usize,
    pub rho1: f64,
    pub rho2: f64,
    /// Known initial log-mass; fixes the band at step 0 to an interval.
    pub z0: f64,
    pub nr_tol: f64,
    pub nr_max_iters: usize,
}

impl ExprojProjector {
    pub fn new(mat: &ProblemMatrices, cfg: &ScenarioConfig) -> Self {
        Self {
            steps: mat.layout.n,
            rho1: mat.scaled.rho1,
            rho2: mat.scaled.rho2,
            z0: mat.offset_w2[0],
            nr_tol: cfg.nr_tol,
            nr_max_iters: cfg.nr_max_iters,
        }
    }
}

pub(crate) fn project_cones(v: &[f64], out: &mut [f64], op: impl Fn(ConePoint) -> ConePoint) {
    for (src, dst) in v.chunks_exact(4).zip(out.chunks_exact_mut(4)) {
        let p = op(ConePoint::new([src[0], src[1], src[2]], src[3]));
        dst[..3].copy_from_slice(&p.u);
        dst[3] = p.sigma;
    }
}

impl Projector for ExprojProjector {
    fn project(&self, v: &[f64], out: &mut [f64]) -> Result<(), ProjectionError> {
        let n = self.steps;
        let (w1, rest) = v.split_at(4 * n);
        let (w2, w3) = rest.split_at(2 * n - 1);
        let (o1, rest) = out.split_at_mut(4 * n);
        let (o2, o3) = rest.split_at_mut(2 * n - 1);

        project_cones(w1, o1, project_cone_surface);

        let decay = (-self.z0).exp();
        o2[0] = project_interval(w2[0], self.rho1 * decay, self.rho2 * decay);
        for (src, dst) in w2[1..].chunks_exact(2).zip(o2[1..].chunks_exact_mut(2)) {
            let p = project_exp_band(
                BandPoint::new(src[1], src[0]),
                self.rho1,
                self.rho2,
                self.nr_tol,
                self.nr_max_iters,
            )?;
            dst[0] = p.sigma;
            dst[1] = p.z;
        }

        o3.copy_from_slice(w3);
        project_nonneg_in_place(o3);
        Ok(())
    }
}

/// Projection onto the solid cones and the nonnegative orthant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LcvxProjector {
    pub steps: usize,
}

impl Projector for LcvxProjector {
    fn project(&self, v: &[f64], out: &mut [f64]) -> Result<(), ProjectionError> {
        let split = 4 * self.steps;
        project_cones(&v[..split], &mut out[..split], project_cone);
        out[split..].copy_from_slice(&v[split..]);
        project_nonneg_in_place(&mut out[split..]);
        Ok(())
    }
}

/// Log-mass of a vehicle burning at full thrust from `t = 0`, sampled at the
/// start of every step, and the resulting linear thrust-bound coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LcvxReference {
    /// `log(m_wet - alpha rho2 t_i)`, SI.
    pub z_ref: Vec<f64>,
    /// `rho1 e^-z_ref`, N per (kg).
    pub lower: Vec<f64>,
    /// `rho2 e^-z_ref`
    pub upper: Vec<f64>,
}

pub fn build_lcvx_reference(cfg: &ScenarioConfig) -> Result<LcvxReference, ModelError> {
    let n = cfg.horizon();
    let mut z_ref = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * cfg.dt;
        let mass = cfg.m_wet - cfg.alpha * cfg.rho2 * t;
        if mass <= 0.0 {
            return Err(ModelError::NonphysicalReference { t, mass });
        }
        z_ref.push(mass.ln());
    }
    // The bounds are also required at the end of the horizon, where the last
    // sample would sit; a reference that runs dry there is rejected too.
    let mass_end = cfg.m_wet - cfg.alpha * cfg.rho2 * cfg.tf;
    if mass_end <= 0.0 {
        return Err(ModelError::NonphysicalReference {
            t: cfg.tf,
            mass: mass_end,
        });
    }
    let lower = z_ref.iter().map(|z| cfg.rho1 * (-z).exp()).collect();
    let upper = z_ref.iter().map(|z| cfg.rho2 * (-z).exp()).collect();
    Ok(LcvxReference { z_ref, lower, upper })
}

/// Stacked problem for the convexified formulation. Starts from [`assemble`],
/// swaps the cost for `alpha dt sum sigma_i + gamma |x_N|²`, drops the band
/// block and appends two rows per step to `P`:
///
/// ```text
///  sigma_i + a1_i z_i >=  a1_i (1 + z_ref_i)
/// -sigma_i - a2_i z_i >= -a2_i (1 + z_ref_i)
/// ```
///
/// The fuel term carries the factor `alpha` so that, through the mass
/// dynamics, it equals `-z_N` exactly and the trade-off against the terminal
/// penalty is the same as in the nonconvex problem.
pub fn assemble_lcvx(cfg: &ScenarioConfig) -> Result<ProblemMatrices, ModelError> {
    let dynamics = discretize(cfg)?;
    let mut mat = assemble(cfg, &dynamics)?;
    let reference = build_lcvx_reference(cfg)?;
    let scaling = Scaling::for_scenario(cfg);
    let layout = mat.layout;
    let n = layout.n;
    let dim = layout.dim();
    let (rho1, rho2, z0) = (mat.scaled.rho1, mat.scaled.rho2, mat.scaled.z0);

    mat.cost_lin = vec![0.0; dim];
    for i in 0..n {
        mat.cost_lin[layout.sigma(i)] = mat.scaled.dynamics.mass_step;
    }
    mat.select_w2 = sparse::empty(0, dim);
    mat.offset_w2 = Vec::new();

    let base = mat.ineq_mat.rows();
    let mut p = TriMat::new((base + 2 * n, dim));
    for (v, (r, c)) in mat.ineq_mat.iter() {
        p.add_triplet(r, c, *v);
    }
    let mut q = mat.ineq_rhs.clone();
    for i in 0..n {
        let z_ref = reference.z_ref[i] - scaling.log_mass();
        let lower = rho1 * (-z_ref).exp();
        let upper = rho2 * (-z_ref).exp();
        let (row_lo, row_hi) = (base + 2 * i, base + 2 * i + 1);
        p.add_triplet(row_lo, layout.sigma(i), 1.0);
        p.add_triplet(row_hi, layout.sigma(i), -1.0);
        let mut q_lo = lower * (1.0 + z_ref);
        let mut q_hi = -upper * (1.0 + z_ref);
        match layout.z(i) {
            Some(zi) => {
                p.add_triplet(row_lo, zi, lower);
                p.add_triplet(row_hi, zi, -upper);
            }
            None => {
                q_lo -= lower * z0;
                q_hi += upper * z0;
            }
        }
        q.push(q_lo);
        q.push(q_hi);
    }
    mat.ineq_mat = p.to_csr();
    mat.ineq_rhs = q;
    mat.rebuild_consensus();
    Ok(mat)
}

/// Knobs that are not part of the scenario.
#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub record_history: bool,
    /// Start from this state instead of the cold start. Must come from a
    /// problem of the same size.
    pub warm_start: Option<SplitState>,
}

pub fn solve_exproj(cfg: &ScenarioConfig) -> Result<SolveResult, SolverError> {
    solve_exproj_with(cfg, &SolveOptions::default())
}

pub fn solve_exproj_with(cfg: &ScenarioConfig, opts: &SolveOptions) -> Result<SolveResult, SolverError> {
    let dynamics = discretize(cfg)?;
    let mat = assemble(cfg, &dynamics)?;
    let projector = ExprojProjector::new(&mat, cfg);
    run(SolverKind::Exproj, cfg, &mat, &projector, opts)
}

pub fn solve_lcvx(cfg: &ScenarioConfig) -> Result<SolveResult, SolverError> {
    solve_lcvx_with(cfg, &SolveOptions::default())
}

pub fn solve_lcvx_with(cfg: &ScenarioConfig, opts: &SolveOptions) -> Result<SolveResult, SolverError> {
    let mat = assemble_lcvx(cfg)?;
    let projector = LcvxProjector { steps: mat.layout.n };
    run(SolverKind::Lcvx, cfg, &mat, &projector, opts)
}

pub fn solve_with(
    kind: SolverKind,
    cfg: &ScenarioConfig,
    opts: &SolveOptions,
) -> Result<SolveResult, SolverError> {
    match kind {
        SolverKind::Exproj => solve_exproj_with(cfg, opts),
        SolverKind::Lcvx => solve_lcvx_with(cfg, opts),
    }
}

fn run(
    kind: SolverKind,
    cfg: &ScenarioConfig,
    mat: &ProblemMatrices,
    projector: &dyn Projector,
    opts: &SolveOptions,
) -> Result<SolveResult, SolverError> {
    let mut params = AdmmParams::from_scenario(cfg);
    params.record_history = opts.record_history;
    if kind == SolverKind::Lcvx {
        // convex: ADMM converges, so there is nothing to detect
        params.stall_window = None;
    }
    let factor = KktFactor::new(mat, params.penalty_rho)?;
    let start = match &opts.warm_start {
        Some(s) => SplitState { iter: 0, ..s.clone() },
        None => SplitState::cold(mat, projector)?,
    };
    let outcome = admm::solve_from(mat, &factor, projector, &params, start)?;
    info!(
        "{kind} tf={} N={}: {:?} after {} iterations ({:.2}s)",
        cfg.tf, mat.layout.n, outcome.termination, outcome.iterations, outcome.elapsed_s
    );
    finish(kind, cfg, mat, outcome)
}

fn finish(
    kind: SolverKind,
    cfg: &ScenarioConfig,
    mat: &ProblemMatrices,
    outcome: AdmmOutcome,
) -> Result<SolveResult, SolverError> {
    let AdmmOutcome {
        state,
        iterations,
        termination,
        history,
        elapsed_s,
    } = outcome;
    let trajectory = unpack(&state.y, cfg)?;
    let last = mat.layout.n - 1;
    let x_n = &state.y[mat.layout.x_next(last)..mat.layout.x_next(last) + 6];
    // Reported objective is the nonconvex one for both solvers.
    let objective =
        -state.y[mat.layout.z_next(last)] + mat.scaled.gamma * x_n.iter().map(|x| x * x).sum::<f64>();
    let fuel = cfg.m_wet - trajectory.m[mat.layout.n];
    Ok(SolveResult {
        solver: kind,
        scenario: cfg.clone(),
        converged: termination == Termination::Converged,
        termination,
        iterations,
        primal_residual: state.primal_res,
        dual_residual: state.dual_res,
        objective,
        fuel,
        solve_seconds: elapsed_s,
        trajectory,
        history: (!history.is_empty()).then_some(history),
        state: Some(state),
    })
}
