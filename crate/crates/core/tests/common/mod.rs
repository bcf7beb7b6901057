//! Oracles shared by the integration tests. None of them call into the
//! library's projection or solver code.
#![allow(dead_code)]

use exproj_core::ScenarioConfig;

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Golden-section minimum of `f` on `[a, b]`.
pub fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Distance from `p = (u, sigma)` to the cone surface `{s (d, 1) : |d| = 1,
/// s >= 0}` by searching directions `d` on a spherical grid, then polishing
/// the best one with a compass search on the unit sphere. For a fixed `d`
/// the best `s` is the clamped 1-D least-squares value.
pub fn brute_cone_surface_distance(p: [f64; 4]) -> f64 {
    let pn2 = p.iter().map(|x| x * x).sum::<f64>();
    let at = |d: [f64; 3]| {
        let n = norm(&d);
        let a = (d[0] * p[0] + d[1] * p[1] + d[2] * p[2]) / n + p[3];
        let s = (a / 2.0).max(0.0);
        // |p - s (d, 1)|² = |p|² - 2 s a + 2 s²
        (pn2 - 2.0 * s * a + 2.0 * s * s).max(0.0)
    };
    let (nt, np) = (90, 180);
    let mut best = (f64::INFINITY, [1.0, 0.0, 0.0]);
    for i in 0..=nt {
        let theta = std::f64::consts::PI * i as f64 / nt as f64;
        for j in 0..np {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / np as f64;
            let d = [theta.cos(), theta.sin() * phi.cos(), theta.sin() * phi.sin()];
            let v = at(d);
            if v < best.0 {
                best = (v, d);
            }
        }
    }
    let (mut v, mut d) = best;
    let mut h = 0.05;
    while h > 1e-12 {
        let mut improved = false;
        for k in 0..3 {
            for sign in [-1.0, 1.0] {
                let mut e = d;
                e[k] += sign * h;
                let n = norm(&e);
                let e = e.map(|x| x / n);
                let ve = at(e);
                if ve < v {
                    v = ve;
                    d = e;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    v.sqrt()
}

pub fn in_solid_cone(p: [f64; 4], tol: f64) -> bool {
    norm(&p[..3]) <= p[3] + tol
}

/// Distance to the solid cone: zero inside, otherwise the distance to its
/// surface (the nearest point of a closed convex set lies on its boundary).
pub fn brute_cone_distance(p: [f64; 4]) -> f64 {
    if in_solid_cone(p, 0.0) {
        0.0
    } else {
        brute_cone_surface_distance(p)
    }
}

pub fn in_band(z: f64, sigma: f64, rho1: f64, rho2: f64, tol: f64) -> bool {
    let e = (-z).exp();
    sigma >= rho1 * e - tol && sigma <= rho2 * e + tol
}

/// Distance from `(z, sigma)` to the band `rho1 e^-z <= sigma <= rho2 e^-z`:
/// zero inside, otherwise the smaller distance to the two boundary curves,
/// each found on a dense grid of `t` around `z` and polished by golden
/// section.
pub fn brute_band_distance(z: f64, sigma: f64, rho1: f64, rho2: f64) -> f64 {
    if in_band(z, sigma, rho1, rho2, 0.0) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for rho in [rho1, rho2] {
        let d2 = |t: f64| (t - z).powi(2) + (rho * (-t).exp() - sigma).powi(2);
        // straight up/down hits the curve, so the nearest point is no
        // farther away than that along t
        let reach = (rho * (-z).exp() - sigma).abs().min(50.0) + 1e-9;
        let n = 20_000;
        let h = 2.0 * reach / n as f64;
        let mut arg = z;
        let mut val = d2(z);
        for k in 0..=n {
            let t = z - reach + k as f64 * h;
            let v = d2(t);
            if v < val {
                val = v;
                arg = t;
            }
        }
        let (_, v) = golden(d2, arg - h, arg + h, 80);
        best = best.min(val.min(v));
    }
    best.sqrt()
}

/// Projection onto `{|u| <= s}` written out independently of the library.
pub fn soc_project(p: [f64; 4]) -> [f64; 4] {
    let n = norm(&p[..3]);
    if n <= p[3] {
        return p;
    }
    if n <= -p[3] {
        return [0.0; 4];
    }
    let a = 0.5 * (n + p[3]);
    [a * p[0] / n, a * p[1] / n, a * p[2] / n, a]
}

/// The convexified landing problem in the solver's nondimensional units,
/// with the states eliminated: decision `x = (u_0, s_0, ..., u_{N-1},
/// s_{N-1})`, cost `0.5 xᵀQx + pᵀx + c0`, linear constraints `A x <= b`, and
/// a second-order cone on each `(u_i, s_i)`.
pub struct ReducedLcvx {
    pub n: usize,
    pub q: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub c0: f64,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl ReducedLcvx {
    /// Builds the problem from the physical scenario. Units: length
    /// `max(|r_init|, 1)`, time `tf`, mass `m_wet`; log-mass is measured from
    /// `log m_wet`.
    pub fn new(cfg: &ScenarioConfig) -> Self {
        let n = (cfg.tf / cfg.dt).round() as usize;
        let len = norm(&cfg.r_init).max(1.0);
        let time = cfg.tf;
        let acc = len / (time * time);
        let dt = cfg.dt / time;
        let g: Vec<f64> = cfg.g.iter().map(|x| x / acc).collect();
        let mass_rate = cfg.alpha * len / time;
        let thrust_unit = cfg.m_wet * acc;
        let (rho1, rho2) = (cfg.rho1 / thrust_unit, cfg.rho2 / thrust_unit);
        let x0: Vec<f64> = cfg
            .r_init
            .iter()
            .map(|r| r / len)
            .chain(cfg.v_init.iter().map(|v| v * time / len))
            .collect();
        let dim = 4 * n;

        // Terminal state and every log-mass are affine in x; recover the maps
        // by simulating the basis.
        let simulate = |x: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let mut r = x0[..3].to_vec();
            let mut v = x0[3..].to_vec();
            let mut z = vec![0.0];
            for i in 0..n {
                for k in 0..3 {
                    let a = x[4 * i + k] + g[k];
                    r[k] += v[k] * dt + 0.5 * a * dt * dt;
                    v[k] += a * dt;
                }
                let last = z[i];
                z.push(last - mass_rate * dt * x[4 * i + 3]);
            }
            (r.into_iter().chain(v).collect(), z)
        };
        let (s0, z0) = simulate(&vec![0.0; dim]);
        let mut sx = vec![vec![0.0; dim]; 6];
        let mut zx = vec![vec![0.0; dim]; n + 1];
        for j in 0..dim {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            let (s, z) = simulate(&e);
            for k in 0..6 {
                sx[k][j] = s[k] - s0[k];
            }
            for i in 0..=n {
                zx[i][j] = z[i] - z0[i];
            }
        }

        // cost: -z_N + gamma |S x + s0|²
        let gamma = cfg.gamma;
        let mut q = vec![vec![0.0; dim]; dim];
        let mut p: Vec<f64> = zx[n].iter().map(|v| -v).collect();
        for k in 0..6 {
            for i in 0..dim {
                p[i] += 2.0 * gamma * sx[k][i] * s0[k];
                for j in 0..dim {
                    q[i][j] += 2.0 * gamma * sx[k][i] * sx[k][j];
                }
            }
        }
        let c0 = -z0[n] + gamma * s0.iter().map(|s| s * s).sum::<f64>();

        let mut a = Vec::new();
        let mut b = Vec::new();
        let cos_t = if (cfg.theta_tp - std::f64::consts::FRAC_PI_2).abs() < 1e-15 {
            0.0
        } else {
            cfg.theta_tp.cos()
        };
        for i in 0..n {
            // pointing: cos(theta) s_i - u_i,x <= 0
            let mut row = vec![0.0; dim];
            row[4 * i] = -1.0;
            row[4 * i + 3] = cos_t;
            a.push(row);
            b.push(0.0);

            let t = i as f64 * cfg.dt;
            let zr = (1.0 - cfg.alpha * cfg.rho2 * t / cfg.m_wet).ln();
            let (lo, hi) = (rho1 * (-zr).exp(), rho2 * (-zr).exp());
            // s_i >= lo (1 + zr - z_i)  <=>  -s_i - lo z_i <= -lo (1 + zr)
            let mut row: Vec<f64> = zx[i].iter().map(|v| -lo * v).collect();
            row[4 * i + 3] -= 1.0;
            a.push(row);
            b.push(-lo * (1.0 + zr) + lo * z0[i]);
            // s_i <= hi (1 + zr - z_i)
            let mut row: Vec<f64> = zx[i].iter().map(|v| hi * v).collect();
            row[4 * i + 3] += 1.0;
            a.push(row);
            b.push(hi * (1.0 + zr) - hi * z0[i]);
        }
        // mass floor: z_N >= log(m_dry / m_wet)
        a.push(zx[n].iter().map(|v| -v).collect());
        b.push(z0[n] - (cfg.m_dry / cfg.m_wet).ln());
        Self { n, q, p, c0, a, b }
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut v = self.c0;
        for i in 0..x.len() {
            v += self.p[i] * x[i];
            for j in 0..x.len() {
                v += 0.5 * x[i] * self.q[i][j] * x[j];
            }
        }
        v
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let lin = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(row, bi)| row.iter().zip(x).map(|(r, xi)| r * xi).sum::<f64>() - bi)
            .fold(0.0f64, f64::max);
        let cone = (0..self.n)
            .map(|i| norm(&x[4 * i..4 * i + 3]) - x[4 * i + 3])
            .fold(0.0f64, f64::max);
        lin.max(cone)
    }

    /// Augmented Lagrangian on the linear rows, with accelerated projected
    /// gradient (projection onto the product of cones) for each inner
    /// problem.
    pub fn solve(&self) -> Vec<f64> {
        let dim = 4 * self.n;
        let m = self.b.len();
        let fro = |mat: &[Vec<f64>]| mat.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        let (q_norm, a_norm2) = (fro(&self.q), fro(&self.a).powi(2));
        let mut x = vec![0.0; dim];
        let mut lambda = vec![0.0; m];
        let mut mu = 10.0;
        let grad = |x: &[f64], lambda: &[f64], mu: f64| -> Vec<f64> {
            let mut g: Vec<f64> = (0..dim)
                .map(|i| self.p[i] + (0..dim).map(|j| self.q[i][j] * x[j]).sum::<f64>())
                .collect();
            for (row, (bi, li)) in self.a.iter().zip(self.b.iter().zip(lambda)) {
                let ax: f64 = row.iter().zip(x).map(|(r, xi)| r * xi).sum();
                let w = (li + mu * (ax - bi)).max(0.0);
                if w > 0.0 {
                    for (gi, r) in g.iter_mut().zip(row) {
                        *gi += w * r;
                    }
                }
            }
            g
        };
        let project = |x: &mut [f64]| {
            for c in x.chunks_exact_mut(4) {
                let p = soc_project([c[0], c[1], c[2], c[3]]);
                c.copy_from_slice(&p);
            }
        };
        for _outer in 0..60 {
            let step = 1.0 / (q_norm + mu * a_norm2);
            let mut yk = x.clone();
            let mut tk = 1.0f64;
            for _ in 0..200_000 {
                let g = grad(&yk, &lambda, mu);
                let mut next: Vec<f64> = yk.iter().zip(&g).map(|(y, gi)| y - step * gi).collect();
                project(&mut next);
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
                let moved = dist(&next, &x);
                // restart momentum when it points uphill
                let uphill: f64 = g
                    .iter()
                    .zip(next.iter().zip(&x))
                    .map(|(gi, (a, b))| gi * (a - b))
                    .sum();
                let beta = if uphill > 0.0 { 0.0 } else { (tk - 1.0) / t_next };
                yk = next.iter().zip(&x).map(|(a, b)| a + beta * (a - b)).collect();
                if uphill > 0.0 {
                    tk = 1.0;
                } else {
                    tk = t_next;
                }
                x = next;
                if moved < 1e-14 * (1.0 + norm(&x)) {
                    break;
                }
            }
            let mut worst = 0.0f64;
            let mut shift = 0.0f64;
            for (j, (row, bi)) in self.a.iter().zip(&self.b).enumerate() {
                let ax: f64 = row.iter().zip(&x).map(|(r, xi)| r * xi).sum();
                let next = (lambda[j] + mu * (ax - bi)).max(0.0);
                shift = shift.max((next - lambda[j]).abs());
                lambda[j] = next;
                worst = worst.max(ax - bi);
            }
            if worst < 1e-11 && shift < 1e-10 {
                break;
            }
            mu = (mu * 4.0).min(1e8);
        }
        x
    }
}
