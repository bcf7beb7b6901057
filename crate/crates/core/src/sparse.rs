//! Thin helpers over `sprs` for the handful of sparse kernels the solvers use.

use sprs::{CsMat, TriMat};

pub type SpMat = CsMat<f64>;

/// `out = a * x`
pub fn spmv(a: &SpMat, x: &[f64], out: &mut [f64]) {
    debug_assert!(a.is_csr());
    debug_assert_eq!(a.cols(), x.len());
    debug_assert_eq!(a.rows(), out.len());
    for (row, vec) in a.outer_iterator().enumerate() {
        out[row] = vec.iter().map(|(col, v)| v * x[col]).sum();
    }
}

/// `out = aᵀ * x`
pub fn spmv_t(a: &SpMat, x: &[f64], out: &mut [f64]) {
    debug_assert!(a.is_csr());
    debug_assert_eq!(a.rows(), x.len());
    debug_assert_eq!(a.cols(), out.len());
    out.iter_mut().for_each(|o| *o = 0.0);
    for (row, vec) in a.outer_iterator().enumerate() {
        let xr = x[row];
        if xr != 0.0 {
            for (col, v) in vec.iter() {
                out[col] += v * xr;
            }
        }
    }
}

pub fn mul_vec(a: &SpMat, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.rows()];
    spmv(a, x, &mut out);
    out
}

pub fn mul_t_vec(a: &SpMat, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.cols()];
    spmv_t(a, x, &mut out);
    out
}

/// Stacks CSR matrices with equal column counts on top of each other.
pub fn vstack(blocks: &[&SpMat]) -> SpMat {
    let cols = blocks.first().map_or(0, |b| b.cols());
    let rows = blocks.iter().map(|b| b.rows()).sum();
    let mut tri = TriMat::new((rows, cols));
    let mut offset = 0;
    for b in blocks {
        assert_eq!(b.cols(), cols, "vstack column mismatch");
        for (v, (r, c)) in b.iter() {
            tri.add_triplet(offset + r, c, *v);
        }
        offset += b.rows();
    }
    tri.to_csr()
}

pub fn empty(rows: usize, cols: usize) -> SpMat {
    TriMat::<f64>::new((rows, cols)).to_csr()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
