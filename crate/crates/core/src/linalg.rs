//! Banded LU with partial pivoting.
//!
//! The KKT matrices of the landing problem couple only neighbouring time
//! steps, so after interleaving primal and multiplier blocks by step they are
//! banded with a bandwidth independent of the horizon. Storage follows the
//! LAPACK `gbtrf` layout: each row keeps `kl` extra columns to the right for
//! fill-in caused by row exchanges.

/// Relative pivot threshold below which a column is declared singular.
const SINGULAR_PIVOT: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularMatrix {
    pub column: usize,
}

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    /// Zero `n x n` matrix with `kl` sub- and `ku` super-diagonals.
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    /// Adds `v` at `(i, j)`; the entry must lie inside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// In-place LU factorization with partial pivoting.
    pub fn factor(mut self) -> Result<BandLu, SingularMatrix> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut col_scale = vec![0.0f64; n];
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n - 1);
            for j in lo..=hi {
                col_scale[j] = col_scale[j].max(self.get(i, j).abs());
            }
        }
        let mut pivots = vec![0usize; n];
        let upper = kl + ku;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > SINGULAR_PIVOT * col_scale[k]) {
                return Err(SingularMatrix { column: k });
            }
            pivots[k] = p;
            let last_col = (k + upper).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            let krow = self.idx(k, k);
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l != 0.0 {
                    let irow = self.idx(i, k);
                    let len = last_col - k;
                    // Row i and row k are both contiguous over columns k..=last_col.
                    let (src, dst) = if irow > krow {
                        let (a, b) = self.data.split_at_mut(irow);
                        (&a[krow + 1..krow + 1 + len], &mut b[1..1 + len])
                    } else {
                        unreachable!("rows below the pivot are stored later")
                    };
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d -= l * s;
                    }
                }
            }
        }
        Ok(BandLu { mat: self, pivots })
    }

    /// `out = self * x`, valid before factorization.
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            *o = (lo..=hi).map(|j| self.get(i, j) * x[j]).sum();
        }
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    mat: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn dim(&self) -> usize {
        self.mat.n
    }

    /// `(kl, ku)` of the factored matrix.
    pub fn bandwidth(&self) -> (usize, usize) {
        (self.mat.kl, self.mat.ku)
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.mat;
        let (n, kl) = (m.n, m.kl);
        let upper = m.kl + m.ku;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    b[i] -= m.data[m.idx(i, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let last = (k + upper).min(n - 1);
            let row = m.idx(k, k);
            let len = last - k;
            let acc = dot(&m.data[row + 1..row + 1 + len], &b[k + 1..=last]);
            b[k] = (b[k] - acc) / m.data[row];
        }
    }
}

/// Dot product with four independent accumulators, so the adds pipeline.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ha, ta) = a.split_at(a.len() / 4 * 4);
    let (hb, tb) = b.split_at(ha.len());
    for (x, y) in ha.chunks_exact(4).zip(hb.chunks_exact(4)) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ta.iter().zip(tb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, kl: usize, ku: usize, rng: &mut ChaCha8Rng) -> (BandMatrix, DMatrix<f64>) {
        let mut b = BandMatrix::zeros(n, kl, ku);
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // zeros on a third of the diagonal force pivoting
                let v = if i == j && i % 3 == 0 {
                    0.0
                } else {
                    rng.random_range(-1.0..1.0)
                };
                b.add(i, j, v);
                d[(i, j)] = v;
            }
        }
        (b, d)
    }

    #[test]
    fn matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1, 0, 0), (5, 1, 1), (40, 3, 5), (60, 7, 2)] {
            let (band, dense) = if n == 1 {
                let mut b = BandMatrix::zeros(1, 0, 0);
                b.add(0, 0, 2.0);
                (b, DMatrix::from_element(1, 1, 2.0))
            } else {
                random_band(n, kl, ku, &mut rng)
            };
            let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let expect = dense.clone().lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
            let lu = band.factor().unwrap();
            let mut x = rhs.clone();
            lu.solve_in_place(&mut x);
            let err = (DVector::from_vec(x) - expect).amax();
            assert!(err < 1e-9, "n={n} err={err}");
        }
    }

    #[test]
    fn detects_singularity() {
        let mut b = BandMatrix::zeros(3, 1, 1);
        b.add(0, 0, 1.0);
        b.add(0, 1, 2.0);
        b.add(1, 0, 2.0);
        b.add(1, 1, 4.0);
        b.add(2, 2, 1.0);
        assert_eq!(b.factor().unwrap_err(), SingularMatrix { column: 1 });
    }
}
