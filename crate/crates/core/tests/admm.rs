mod common;

use exproj_core::admm::{self, update_dual, update_primal, update_splitting, KktFactor, Projector};
use exproj_core::solvers::{assemble_lcvx, solve_exproj_with, ExprojProjector, SolveOptions};
use exproj_core::sparse::mul_vec;
use exproj_core::{
    assemble, discretize, solve_exproj, solve_lcvx, AdmmParams, ScenarioConfig, SolverError, SplitState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg_with(tf: f64) -> ScenarioConfig {
    ScenarioConfig::mars_landing().with_tf(tf, 1.0)
}

fn dense(m: &exproj_core::sparse::SpMat) -> nalgebra::DMatrix<f64> {
    let mut d = nalgebra::DMatrix::zeros(m.rows(), m.cols());
    for (v, (i, j)) in m.iter() {
        d[(i, j)] += *v;
    }
    d
}

#[test]
fn kkt_solve_matches_dense_lu() {
    let cfg = cfg_with(6.0);
    let mat = assemble(&cfg, &discretize(&cfg).unwrap()).unwrap();
    let factor = KktFactor::new(&mat, 0.7).unwrap();
    let n = factor.dim();
    assert_eq!(n, mat.dim() + mat.eq_mat.rows());

    // Dense K assembled here from the blocks, not taken from the factor.
    let c = dense(&mat.consensus);
    let h = dense(&mat.cost_quad);
    let g = dense(&mat.eq_mat);
    let np = mat.dim();
    let mut k = nalgebra::DMatrix::zeros(n, n);
    k.view_mut((0, 0), (np, np))
        .copy_from(&(c.transpose() * &c * 0.7 + h * 2.0));
    k.view_mut((np, 0), (g.nrows(), np)).copy_from(&g);
    k.view_mut((0, np), (np, g.nrows())).copy_from(&g.transpose());

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = factor.solve(&rhs);
    let reference = k
        .clone()
        .lu()
        .solve(&nalgebra::DVector::from_vec(rhs.clone()))
        .unwrap();
    let resid = &k * nalgebra::DVector::from_vec(x.clone()) - nalgebra::DVector::from_vec(rhs);
    assert!(resid.amax() < 1e-10, "residual {:e}", resid.amax());
    for (a, b) in x.iter().zip(reference.iter()) {
        assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
    }
}

#[test]
fn interleaved_ordering_keeps_band_narrow() {
    let cfg = cfg_with(82.0);
    let mat = assemble(&cfg, &discretize(&cfg).unwrap()).unwrap();
    let (kl, ku) = KktFactor::new(&mat, 0.01).unwrap().bandwidth();
    assert!(kl <= 11 && ku <= 22, "bandwidth ({kl}, {ku})");
}

#[test]
fn duplicated_dynamics_row_is_singular() {
    let cfg = cfg_with(4.0);
    let mut mat = assemble(&cfg, &discretize(&cfg).unwrap()).unwrap();
    let g = dense(&mat.eq_mat);
    let mut tri = sprs::TriMat::new((g.nrows(), g.ncols()));
    for i in 0..g.nrows() {
        let src = if i == 8 { 7 } else { i };
        for j in 0..g.ncols() {
            if g[(src, j)] != 0.0 {
                tri.add_triplet(i, j, g[(src, j)]);
            }
        }
    }
    mat.eq_mat = tri.to_csr();
    assert!(matches!(
        KktFactor::new(&mat, 1.0),
        Err(SolverError::SingularKkt { .. })
    ));
}

#[test]
fn primal_iterates_satisfy_dynamics() {
    let cfg = cfg_with(10.0);
    let mat = assemble(&cfg, &discretize(&cfg).unwrap()).unwrap();
    let factor = KktFactor::new(&mat, 0.01).unwrap();
    let m = mat.consensus.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5 {
        let w: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let ys: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y = update_primal(&factor, &mat, &w, &ys).unwrap();
        let gy = mul_vec(&mat.eq_mat, &y);
        let worst = gy
            .iter()
            .zip(&mat.eq_rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst:e}");
    }
}

#[test]
fn scaled_duals_telescope() {
    // y_s^k = y_s^0 + sum of the consensus residuals C y^j - q̃ - w^j
    let cfg = cfg_with(8.0);
    let mat = assemble(&cfg, &discretize(&cfg).unwrap()).unwrap();
    let proj = ExprojProjector::new(&mat, &cfg);
    let factor = KktFactor::new(&mat, 0.05).unwrap();
    let mut state = SplitState::cold(&mat, &proj).unwrap();
    let mut sum = state.y_s.clone();
    for _ in 0..25 {
        let y = update_primal(&factor, &mat, &state.w, &state.y_s).unwrap();
        let w = update_splitting(&y, &state.y_s, &mat, &proj).unwrap();
        let ys = update_dual(&y, &w, &mat, &state.y_s);
        let cy = mul_vec(&mat.consensus, &y);
        for k in 0..sum.len() {
            sum[k] += cy[k] - mat.consensus_offset[k] - w[k];
        }
        state.y = y;
        state.w = w;
        state.y_s = ys;
    }
    for (a, b) in state.y_s.iter().zip(&sum) {
        assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
    }
}

#[test]
fn splitting_lands_in_constraint_set() {
    let cfg = cfg_with(6.0);
    let mat = assemble(&cfg, &discretize(&cfg).unwrap()).unwrap();
    let proj = ExprojProjector::new(&mat, &cfg);
    let m = mat.consensus.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let v: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut w = vec![0.0; m];
    proj.project(&v, &mut w).unwrap();
    let n = mat.layout.n;
    for i in 0..n {
        let c = &w[4 * i..4 * i + 4];
        assert!((common::norm(&c[..3]) - c[3]).abs() < 1e-12);
    }
    let w2 = &w[4 * n..6 * n - 1];
    assert!(w2[0] >= mat.scaled.rho1 - 1e-12 && w2[0] <= mat.scaled.rho2 + 1e-12);
    for pair in w2[1..].chunks_exact(2) {
        assert!(common::in_band(
            pair[1],
            pair[0],
            mat.scaled.rho1,
            mat.scaled.rho2,
            1e-9
        ));
    }
    assert!(w[6 * n - 1..].iter().all(|x| *x >= 0.0));
}

#[test]
fn solves_are_deterministic() {
    let cfg = cfg_with(30.0);
    let mut cfg = cfg;
    cfg.max_iters = 3000;
    let a = solve_exproj(&cfg).unwrap();
    let b = solve_exproj(&cfg).unwrap();
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.primal_residual.to_bits(), b.primal_residual.to_bits());
}

#[test]
fn warm_start_from_solution_converges_at_once() {
    let cfg = ScenarioConfig::mars_landing();
    let first = solve_exproj(&cfg).unwrap();
    assert!(first.converged);
    let again = solve_exproj_with(
        &cfg,
        &SolveOptions {
            warm_start: first.state.clone(),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(again.converged);
    assert!(again.iterations <= 2, "{} iterations", again.iterations);
    assert!(
        (again.fuel - first.fuel).abs() < 1e-3,
        "{} vs {}",
        again.fuel,
        first.fuel
    );
}

#[test]
fn max_iterations_is_reported() {
    let mut cfg = cfg_with(46.0);
    cfg.max_iters = 50;
    let r = solve_exproj(&cfg).unwrap();
    assert!(!r.converged);
    assert_eq!(r.iterations, 50);
    assert_eq!(r.termination, exproj_core::Termination::MaxIterations);
}

#[test]
fn engine_rejects_mismatched_state() {
    let cfg = cfg_with(5.0);
    let mat = assemble(&cfg, &discretize(&cfg).unwrap()).unwrap();
    let proj = ExprojProjector::new(&mat, &cfg);
    let factor = KktFactor::new(&mat, 0.01).unwrap();
    let mut start = SplitState::cold(&mat, &proj).unwrap();
    start.w.pop();
    let params = AdmmParams::from_scenario(&cfg);
    assert!(matches!(
        admm::solve_from(&mat, &factor, &proj, &params, start),
        Err(SolverError::Dimension { .. })
    ));
}

#[test]
fn lcvx_matches_reference_on_three_steps() {
    let mut cfg = ScenarioConfig::mars_landing();
    cfg.r_init = [60.0, 10.0, -5.0];
    cfg.v_init = [-8.0, -2.0, 1.0];
    cfg.tf = 3.0;
    cfg.dt = 1.0;
    cfg.gamma = 20.0;
    let reference = common::ReducedLcvx::new(&cfg);
    let x = reference.solve();
    assert!(reference.max_violation(&x) < 1e-9);
    let expect = reference.objective(&x);
    let got = solve_lcvx(&cfg).unwrap();
    assert!(got.converged);
    assert!(
        (got.objective - expect).abs() <= 1e-3 * expect.abs(),
        "{} vs {expect}",
        got.objective
    );
    // the convexified rows are the ones the reference used
    assert_eq!(assemble_lcvx(&cfg).unwrap().ineq_mat.rows(), reference.b.len());
}
