//! Scaled-form ADMM over `(y, w, y_s)`.
//!
//! Each iteration performs
//!
//! ```text
//! y   <- argmin  yᵀHy + hᵀy + ρ/2 |C y - q̃ - w + y_s|²   s.t.  G y = b
//! w   <- Π(C y - q̃ + y_s)
//! y_s <- y_s + C y - q̃ - w
//! ```
//!
//! The equality-constrained primal step is one solve with the KKT matrix
//! `[[ρCᵀC + 2H, Gᵀ], [G, 0]]`, factored once per penalty value. The
//! projection `Π` is supplied by the caller, so the same loop runs with convex
//! and nonconvex constraint sets.

use std::time::Instant;

use log::debug;
use serde::{Deserialize, Serialize};
use sprs::TriMat;

use crate::error::{ProjectionError, SolverError};
use crate::linalg::{BandLu, BandMatrix};
use crate::model::{ProblemMatrices, Trajectory, EQ_PER_STEP, STEP_DIM};
use crate::scenario::ScenarioConfig;
use crate::sparse::{self, norm_inf, SpMat};

/// Blockwise projection onto the constraint set of the auxiliary variable.
pub trait Projector {
    /// Writes the projection of `v` (laid out as `[w1; w2; w3]`) into `out`.
    fn project(&self, v: &[f64], out: &mut [f64]) -> Result<(), ProjectionError>;
}

impl<P: Projector + ?Sized> Projector for &P {
    fn project(&self, v: &[f64], out: &mut [f64]) -> Result<(), ProjectionError> {
        (**self).project(v, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmParams {
    pub penalty_rho: f64,
    pub max_iters: usize,
    pub eps_primal: f64,
    pub eps_dual: f64,
    /// Stall detection works on the envelope of the normalized residual
    /// `max(primal / eps_primal, dual / eps_dual)`: iterations are cut into
    /// windows of this length, and the run stops as stalled once the window
    /// maximum has failed `stall_patience` times in a row to undercut the
    /// best window maximum by the relative amount `stall_tol`. The residuals
    /// of the nonconvex splitting oscillate, so single dips say little.
    /// `None` runs to `max_iters`.
    pub stall_window: Option<usize>,
    pub stall_tol: f64,
    pub stall_patience: usize,
    pub record_history: bool,
}

impl AdmmParams {
    pub fn from_scenario(cfg: &ScenarioConfig) -> Self {
        Self {
            penalty_rho: cfg.penalty_rho,
            max_iters: cfg.max_iters,
            eps_primal: cfg.eps_primal,
            eps_dual: cfg.eps_dual,
            stall_window: Some(10_000),
            stall_tol: 1e-2,
            stall_patience: 2,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitState {
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub y_s: Vec<f64>,
    pub iter: usize,
    pub primal_res: f64,
    pub dual_res: f64,
}

impl SplitState {
    /// Cold start: `y = 0`, `w = Π(-q̃)`, `y_s = 0`. The first primal update
    /// then moves `y` onto `G y = b`.
    pub fn cold(mat: &ProblemMatrices, projector: &dyn Projector) -> Result<Self, SolverError> {
        Self::from_primal(mat, projector, vec![0.0; mat.dim()])
    }

    /// Starts from a given primal stack with `w = Π(C y - q̃)` and zero duals.
    pub fn from_primal(
        mat: &ProblemMatrices,
        projector: &dyn Projector,
        y: Vec<f64>,
    ) -> Result<Self, SolverError> {
        let m = mat.blocks.total();
        let y_s = vec![0.0; m];
        let w = update_splitting(&y, &y_s, mat, projector)?;
        Ok(Self {
            y,
            w,
            y_s,
            iter: 0,
            primal_res: f64::INFINITY,
            dual_res: f64::INFINITY,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Exproj,
    Lcvx,
}

impl SolverKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Exproj => "exproj",
            Self::Lcvx => "lcvx",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Outcome of one solver run, in physical units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub solver: SolverKind,
    pub scenario: ScenarioConfig,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `-z_N + gamma |x_N|²` in nondimensional units.
    pub objective: f64,
    /// `m_wet - m_N` in kg.
    pub fuel: f64,
    pub solve_seconds: f64,
    pub trajectory: Trajectory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<[f64; 2]>>,
    /// Final splitting state, for warm starts.
    #[serde(skip)]
    pub state: Option<SplitState>,
}

/// Band slot of each entry of `y_i` = `[u (3), x (6), sigma, z]`, after the
/// seven dynamics rows of the same step.
const PRIMAL_SLOT: [usize; STEP_DIM] = [7, 8, 9, 11, 12, 13, 14, 15, 16, 10, 17];

/// Cached factorization of the KKT matrix for one penalty value.
#[derive(Debug, Clone)]
pub struct KktFactor {
    lu: BandLu,
    kkt: SpMat,
    /// Band position of each KKT row/column.
    position: Vec<usize>,
    n_primal: usize,
    n_eq: usize,
    penalty_rho: f64,
}

impl KktFactor {
    pub fn new(mat: &ProblemMatrices, penalty_rho: f64) -> Result<Self, SolverError> {
        let n_primal = mat.dim();
        let n_eq = mat.eq_mat.rows();
        let n = n_primal + n_eq;

        let c = &mat.consensus;
        let ct: SpMat = c.transpose_view().to_csr();
        let ctc: SpMat = &ct * c;
        let mut tri = TriMat::new((n, n));
        for (v, (i, j)) in ctc.iter() {
            tri.add_triplet(i, j, penalty_rho * v);
        }
        for (v, (i, j)) in mat.cost_quad.iter() {
            tri.add_triplet(i, j, 2.0 * v);
        }
        for (v, (r, j)) in mat.eq_mat.iter() {
            tri.add_triplet(n_primal + r, j, *v);
            tri.add_triplet(j, n_primal + r, *v);
        }
        let kkt: SpMat = tri.to_csr();

        // Interleave by time step. Within a step the dynamics rows come first
        // and x_{i+1}, z_{i+1} last, next to the rows of step i+1 that use them.
        let block = STEP_DIM + EQ_PER_STEP;
        let position: Vec<usize> = (0..n)
            .map(|k| {
                if k < n_primal {
                    block * (k / STEP_DIM) + PRIMAL_SLOT[k % STEP_DIM]
                } else {
                    let r = k - n_primal;
                    block * (r / EQ_PER_STEP) + r % EQ_PER_STEP
                }
            })
            .collect();
        let (mut kl, mut ku) = (0usize, 0usize);
        for (_, (i, j)) in kkt.iter() {
            let (pi, pj) = (position[i], position[j]);
            if pi > pj {
                kl = kl.max(pi - pj);
            } else {
                ku = ku.max(pj - pi);
            }
        }
        let mut band = BandMatrix::zeros(n, kl, ku);
        for (v, (i, j)) in kkt.iter() {
            band.add(position[i], position[j], *v);
        }
        let lu = band
            .factor()
            .map_err(|e| SolverError::SingularKkt { column: e.column })?;
        Ok(Self {
            lu,
            kkt,
            position,
            n_primal,
            n_eq,
            penalty_rho,
        })
    }

    pub fn dim(&self) -> usize {
        self.n_primal + self.n_eq
    }

    /// Lower and upper bandwidth after the step-interleaved ordering.
    pub fn bandwidth(&self) -> (usize, usize) {
        self.lu.bandwidth()
    }

    pub fn penalty_rho(&self) -> f64 {
        self.penalty_rho
    }

    /// The unfactored KKT matrix, in natural (unpermuted) order.
    pub fn matrix(&self) -> &SpMat {
        &self.kkt
    }

    /// Solves `K [y; λ] = [top; bottom]`. One step of iterative refinement
    /// is taken when the relative residual exceeds `1e-11`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.dim();
        debug_assert_eq!(rhs.len(), n);
        let mut sol = self.solve_permuted(rhs);
        let scale = norm_inf(rhs).max(f64::MIN_POSITIVE);
        let mut residual = vec![0.0; n];
        sparse::spmv(&self.kkt, &sol, &mut residual);
        residual.iter_mut().zip(rhs).for_each(|(r, b)| *r = b - *r);
        if norm_inf(&residual) > 1e-11 * scale {
            let delta = self.solve_permuted(&residual);
            sol.iter_mut().zip(&delta).for_each(|(s, d)| *s += d);
        }
        sol
    }

    fn solve_permuted(&self, rhs: &[f64]) -> Vec<f64> {
        let mut work = vec![0.0; rhs.len()];
        for (k, v) in rhs.iter().enumerate() {
            work[self.position[k]] = *v;
        }
        self.lu.solve_in_place(&mut work);
        self.position.iter().map(|&p| work[p]).collect()
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), SolverError> {
    if expected == found {
        Ok(())
    } else {
        Err(SolverError::Dimension {
            what,
            expected,
            found,
        })
    }
}

/// Primal step: minimizes the augmented Lagrangian over `{G y = b}`.
pub fn update_primal(
    factor: &KktFactor,
    mat: &ProblemMatrices,
    w: &[f64],
    y_s: &[f64],
) -> Result<Vec<f64>, SolverError> {
    let m = mat.blocks.total();
    check_len("w", m, w.len())?;
    check_len("y_s", m, y_s.len())?;
    let shifted: Vec<f64> = mat
        .consensus_offset
        .iter()
        .zip(w)
        .zip(y_s)
        .map(|((q, wi), si)| q + wi - si)
        .collect();
    let mut rhs = sparse::mul_t_vec(&mat.consensus, &shifted);
    for (r, h) in rhs.iter_mut().zip(&mat.cost_lin) {
        *r = factor.penalty_rho * *r - h;
    }
    rhs.extend_from_slice(&mat.eq_rhs);
    let mut sol = factor.solve(&rhs);
    sol.truncate(mat.dim());
    Ok(sol)
}

/// Splitting step: `w = Π(C y - q̃ + y_s)`.
pub fn update_splitting(
    y: &[f64],
    y_s: &[f64],
    mat: &ProblemMatrices,
    projector: &dyn Projector,
) -> Result<Vec<f64>, SolverError> {
    check_len("y", mat.dim(), y.len())?;
    check_len("y_s", mat.blocks.total(), y_s.len())?;
    let mut v = sparse::mul_vec(&mat.consensus, y);
    for ((vi, q), s) in v.iter_mut().zip(&mat.consensus_offset).zip(y_s) {
        *vi += s - q;
    }
    let mut w = vec![0.0; v.len()];
    projector.project(&v, &mut w)?;
    Ok(w)
}

/// Dual step: `y_s + C y - q̃ - w`.
pub fn update_dual(y: &[f64], w: &[f64], mat: &ProblemMatrices, y_s: &[f64]) -> Vec<f64> {
    let cy = sparse::mul_vec(&mat.consensus, y);
    cy.iter()
        .zip(&mat.consensus_offset)
        .zip(w)
        .zip(y_s)
        .map(|(((c, q), wi), s)| s + c - q - wi)
        .collect()
}

/// `(|C y - q̃ - w|∞, ρ |Cᵀ(w - w_prev)|∞)`
pub fn residuals(state: &SplitState, prev_w: &[f64], mat: &ProblemMatrices, penalty_rho: f64) -> (f64, f64) {
    let cy = sparse::mul_vec(&mat.consensus, &state.y);
    let primal = cy
        .iter()
        .zip(&mat.consensus_offset)
        .zip(&state.w)
        .fold(0.0f64, |m, ((c, q), w)| m.max((c - q - w).abs()));
    let dw: Vec<f64> = state.w.iter().zip(prev_w).map(|(a, b)| a - b).collect();
    let dual = penalty_rho * norm_inf(&sparse::mul_t_vec(&mat.consensus, &dw));
    (primal, dual)
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    /// Returned iterate; `state.iter` is the iteration it was produced at.
    pub state: SplitState,
    /// Iterations actually run.
    pub iterations: usize,
    pub termination: Termination,
    pub history: Vec<[f64; 2]>,
    pub elapsed_s: f64,
}

impl AdmmOutcome {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Runs ADMM from a cold start.
pub fn solve(
    mat: &ProblemMatrices,
    projector: &dyn Projector,
    params: &AdmmParams,
) -> Result<AdmmOutcome, SolverError> {
    let factor = KktFactor::new(mat, params.penalty_rho)?;
    let start = SplitState::cold(mat, projector)?;
    solve_from(mat, &factor, projector, params, start)
}

/// Runs ADMM from `start` with a prebuilt factorization, which fixes the
/// penalty.
///
/// Deterministic: the same inputs give bitwise-identical iterates. When the
/// run does not converge the returned state is the iterate with the smallest
/// tolerance-normalized residual.
pub fn solve_from(
    mat: &ProblemMatrices,
    factor: &KktFactor,
    projector: &dyn Projector,
    params: &AdmmParams,
    start: SplitState,
) -> Result<AdmmOutcome, SolverError> {
    let started = Instant::now();
    let m = mat.blocks.total();
    check_len("y", mat.dim(), start.y.len())?;
    check_len("w", m, start.w.len())?;
    check_len("y_s", m, start.y_s.len())?;
    // The factorization fixes the penalty; `params.penalty_rho` only matters
    // when building it.
    let rho = factor.penalty_rho;

    let mut state = start;
    let mut v = vec![0.0; m];
    let mut w_new = vec![0.0; m];
    let mut cy = vec![0.0; m];
    let mut dw_back = vec![0.0; mat.dim()];
    let mut history = Vec::new();
    let mut best: Option<(f64, SplitState)> = None;
    let mut envelope_best = f64::INFINITY;
    let mut window_max = 0.0f64;
    let mut misses = 0;
    let first_iter = state.iter;
    let mut termination = Termination::MaxIterations;

    while state.iter - first_iter < params.max_iters {
        state.y = update_primal(factor, mat, &state.w, &state.y_s)?;
        sparse::spmv(&mat.consensus, &state.y, &mut cy);
        for k in 0..m {
            v[k] = cy[k] - mat.consensus_offset[k] + state.y_s[k];
        }
        projector.project(&v, &mut w_new)?;

        let mut primal = 0.0f64;
        for k in 0..m {
            let r = cy[k] - mat.consensus_offset[k] - w_new[k];
            state.y_s[k] += r;
            primal = primal.max(r.abs());
            // reuse v for w_new - w
            v[k] = w_new[k] - state.w[k];
        }
        sparse::spmv_t(&mat.consensus, &v, &mut dw_back);
        let dual = rho * norm_inf(&dw_back);
        std::mem::swap(&mut state.w, &mut w_new);
        state.iter += 1;
        state.primal_res = primal;
        state.dual_res = dual;
        if params.record_history {
            history.push([primal, dual]);
        }

        if primal <= params.eps_primal && dual <= params.eps_dual {
            termination = Termination::Converged;
            best = None;
            break;
        }
        let score = (primal / params.eps_primal).max(dual / params.eps_dual);
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, state.clone()));
        }
        window_max = window_max.max(score);
        if let Some(window) = params.stall_window {
            if (state.iter - first_iter).is_multiple_of(window.max(1)) {
                if window_max < envelope_best * (1.0 - params.stall_tol) {
                    envelope_best = window_max;
                    misses = 0;
                } else {
                    misses += 1;
                    if misses >= params.stall_patience.max(1) {
                        termination = Termination::Stalled;
                        break;
                    }
                }
                window_max = 0.0;
            }
        }
    }
    debug!(
        "admm finished after {} iterations: {:?}, primal {:.3e}, dual {:.3e}",
        state.iter, termination, state.primal_res, state.dual_res
    );
    let iterations = state.iter;
    let state = match best {
        Some((_, b)) if termination != Termination::Converged => b,
        _ => state,
    };
    Ok(AdmmOutcome {
        state,
        iterations,
        termination,
        history,
        elapsed_s: started.elapsed().as_secs_f64(),
    })
}
