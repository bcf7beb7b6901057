//! Euclidean projections used by the splitting step.
//!
//! Two of these sets are nonconvex: the surface of the second-order cone
//! `{|u| = sigma}` and the band `{rho1 e^-z <= sigma <= rho2 e^-z}` between
//! two exponential curves. Their projections are still well defined (up to
//! ties) but are not nonexpansive.

use serde::{Deserialize, Serialize};

use crate::error::ProjectionError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConePoint {
    pub u: [f64; 3],
    pub sigma: f64,
}

impl ConePoint {
    pub fn new(u: [f64; 3], sigma: f64) -> Self {
        Self { u, sigma }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        let du: f64 = (0..3).map(|k| (self.u[k] - other.u[k]).powi(2)).sum();
        (du + (self.sigma - other.sigma).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub z: f64,
    pub sigma: f64,
}

impl BandPoint {
    pub fn new(z: f64, sigma: f64) -> Self {
        Self { z, sigma }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (self.z - other.z).hypot(self.sigma - other.sigma)
    }
}

fn norm3(u: &[f64; 3]) -> f64 {
    (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt()
}

/// Projection onto the cone surface `{(u, sigma) : |u| = sigma}`.
///
/// At the apex (`u = 0`, `sigma > 0`) every direction is optimal; `e1` is
/// returned.
pub fn project_cone_surface(p: ConePoint) -> ConePoint {
    let norm = norm3(&p.u);
    if p.sigma == norm {
        return p;
    }
    if p.sigma <= -norm {
        return ConePoint::new([0.0; 3], 0.0);
    }
    let radius = 0.5 * (norm + p.sigma);
    if norm == 0.0 {
        return ConePoint::new([radius, 0.0, 0.0], radius);
    }
    let s = radius / norm;
    ConePoint::new(p.u.map(|c| c * s), radius)
}

/// Projection onto the solid cone `{(u, sigma) : |u| <= sigma}`.
pub fn project_cone(p: ConePoint) -> ConePoint {
    let norm = norm3(&p.u);
    if norm <= p.sigma {
        return p;
    }
    if p.sigma <= -norm {
        return ConePoint::new([0.0; 3], 0.0);
    }
    let radius = 0.5 * (norm + p.sigma);
    let s = radius / norm;
    ConePoint::new(p.u.map(|c| c * s), radius)
}

/// Foot of the perpendicular from `(z, sigma)` onto the curve
/// `sigma = rho e^-t`, with the Newton iterations it took.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpRoot {
    pub t: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Stationarity condition for the distance from `(z, sigma)` to
/// `(t, rho e^-t)`, multiplied through by `e^t`.
#[inline]
pub fn exp_residual(t: f64, z: f64, sigma: f64, rho: f64) -> f64 {
    t.exp() * (t - z) - rho * rho * (-t).exp() + rho * sigma
}

#[inline]
fn exp_residual_slope(t: f64, z: f64, rho: f64) -> f64 {
    t.exp() * (1.0 + t - z) + rho * rho * (-t).exp()
}

fn squared_distance(t: f64, z: f64, sigma: f64, rho: f64) -> f64 {
    (t - z).powi(2) + (rho * (-t).exp() - sigma).powi(2)
}

/// Solves `e^t (t - z) - rho² e^-t + rho sigma = 0` for the root that gives
/// the nearest point of the curve `sigma = rho e^-t`.
///
/// The nearest point lies within the distance of two known curve points
/// (straight down/up and straight across from the query), which gives a
/// bracket around `z`. The stationarity condition can have up to three roots
/// when `sigma² > 8`; the bracket is split at the turning points of
/// `(t - z) - rho e^-t (rho e^-t - sigma)` and Newton-Raphson, safeguarded
/// by bisection, is run on each piece that changes sign. `iterations` counts
/// the Newton steps spent on the returned root.
pub fn newton_exp_root(
    z: f64,
    sigma: f64,
    rho: f64,
    tol: f64,
    max_iters: usize,
) -> Result<ExpRoot, ProjectionError> {
    debug_assert!(rho > 0.0 && tol > 0.0);
    let on_curve = rho * (-z).exp();
    let mut reach = (sigma - on_curve).abs();
    if sigma > 0.0 {
        reach = reach.min(((rho / sigma).ln() - z).abs());
    }
    if reach == 0.0 || exp_residual(z, z, sigma, rho) == 0.0 {
        return Ok(ExpRoot {
            t: z,
            iterations: 0,
            residual: 0.0,
        });
    }
    let margin = reach * (1.0 + 1e-9) + 1e-12 * (1.0 + z.abs());
    let (lo, hi) = (z - margin, z + margin);

    let mut cuts = vec![lo];
    let disc = sigma * sigma - 8.0;
    if disc > 0.0 {
        let root = disc.sqrt();
        // turning points in x = rho e^-t, so t = ln(rho / x); descending x is ascending t
        for x in [(sigma + root) / 4.0, (sigma - root) / 4.0] {
            let t = (rho / x).ln();
            if t > lo && t < hi {
                cuts.push(t);
            }
        }
    }
    cuts.push(hi);

    let guess = if sigma > on_curve && sigma > 0.0 {
        0.5 * (z + (rho / sigma).ln())
    } else {
        z
    };

    let mut best: Option<(f64, ExpRoot)> = None;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (exp_residual(a, z, sigma, rho), exp_residual(b, z, sigma, rho));
        if fa.signum() == fb.signum() && fa != 0.0 && fb != 0.0 {
            continue;
        }
        let root = safeguarded_newton(z, sigma, rho, a, b, fa, guess.clamp(a, b), tol, max_iters)?;
        let d = squared_distance(root.t, z, sigma, rho);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, root));
        }
    }
    best.map(|(_, r)| r)
        .ok_or(ProjectionError::NoRoot { z, sigma, rho })
}

#[allow(clippy::too_many_arguments)]
fn safeguarded_newton(
    z: f64,
    sigma: f64,
    rho: f64,
    mut a: f64,
    mut b: f64,
    fa: f64,
    start: f64,
    tol: f64,
    max_iters: usize,
) -> Result<ExpRoot, ProjectionError> {
    let increasing = fa < 0.0 || (fa == 0.0 && exp_residual(b, z, sigma, rho) > 0.0);
    let mut t = start;
    let mut f = exp_residual(t, z, sigma, rho);
    for iter in 0..=max_iters {
        if f.abs() <= tol {
            return Ok(ExpRoot {
                t,
                iterations: iter,
                residual: f,
            });
        }
        if iter == max_iters {
            break;
        }
        if (f < 0.0) == increasing {
            a = t;
        } else {
            b = t;
        }
        let slope = exp_residual_slope(t, z, rho);
        let newton = t - f / slope;
        if slope.is_finite() && (newton - t).abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
            // Newton has stopped moving: the residual is at its rounding floor,
            // which for large e^t can sit above an absolute `tol`.
            return Ok(ExpRoot {
                t,
                iterations: iter,
                residual: f,
            });
        }
        let next = if slope.is_finite() && slope != 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if next == t {
            // bracket collapsed to adjacent floats: this is the closest root representable
            return Ok(ExpRoot {
                t,
                iterations: iter,
                residual: f,
            });
        }
        t = next;
        f = exp_residual(t, z, sigma, rho);
    }
    Err(ProjectionError::NewtonDidNotConverge {
        z,
        sigma,
        rho,
        iterations: max_iters,
        residual: f,
    })
}

/// Projection onto the band `rho1 e^-z <= sigma <= rho2 e^-z`.
pub fn project_exp_band(
    p: BandPoint,
    rho1: f64,
    rho2: f64,
    tol: f64,
    max_iters: usize,
) -> Result<BandPoint, ProjectionError> {
    project_exp_band_counted(p, rho1, rho2, tol, max_iters).map(|(q, _)| q)
}

/// [`project_exp_band`] that also reports the Newton root, if one was needed.
pub fn project_exp_band_counted(
    p: BandPoint,
    rho1: f64,
    rho2: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(BandPoint, Option<ExpRoot>), ProjectionError> {
    let decay = (-p.z).exp();
    let rho = if p.sigma < rho1 * decay {
        rho1
    } else if p.sigma > rho2 * decay {
        rho2
    } else {
        return Ok((p, None));
    };
    let root = newton_exp_root(p.z, p.sigma, rho, tol, max_iters)?;
    Ok((BandPoint::new(root.t, rho * (-root.t).exp()), Some(root)))
}

pub fn project_interval(sigma: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi);
    sigma.clamp(lo, hi)
}

pub fn project_nonneg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.max(0.0)).collect()
}

pub fn project_nonneg_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}
