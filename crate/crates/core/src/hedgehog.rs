//! Radial hedgehog profile `Q = h(r) (n n - I/3)`, `n = x/|x|`, where
//!
//! ```text
//! h'' + (2/r) h' - 6 h / r^2 = a h - (b/3) h^2 + (2c/3) h^3,
//! h(0) = 0,  h(R) = s_plus,
//! ```
//!
//! solved with second-order central differences and damped Newton.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{critical_points, BulkParams};
use crate::vecops::norm_inf;

#[derive(Debug, Clone, Serialize)]
pub struct HedgehogProfile {
    pub radius: f64,
    pub dr: f64,
    pub r: Vec<f64>,
    pub h: Vec<f64>,
    pub s_plus: f64,
    /// Max-norm residual at interior nodes.
    pub residual: f64,
    pub iterations: usize,
}

fn source(p: &BulkParams, h: f64) -> (f64, f64) {
    let f = p.a * h - p.b / 3.0 * h * h + 2.0 * p.c / 3.0 * h * h * h;
    let df = p.a - 2.0 * p.b / 3.0 * h + 2.0 * p.c * h * h;
    (f, df)
}

/// Discrete residual at interior nodes `1..N` (index `i - 1`).
pub fn residual(p: &BulkParams, dr: f64, h: &[f64]) -> Vec<f64> {
    let n = h.len() - 1;
    (1..n)
        .map(|i| {
            let r = i as f64 * dr;
            let d2 = (h[i + 1] - 2.0 * h[i] + h[i - 1]) / (dr * dr);
            let d1 = (h[i + 1] - h[i - 1]) / (2.0 * dr);
            d2 + 2.0 / r * d1 - 6.0 * h[i] / (r * r) - source(p, h[i]).0
        })
        .collect()
}

/// Solves the tridiagonal system `lo[i] x[i-1] + di[i] x[i] + up[i] x[i+1] = rhs[i]`.
fn thomas(lo: &[f64], di: &[f64], up: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = di.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = up[0] / di[0];
    d[0] = rhs[0] / di[0];
    for i in 1..m {
        let den = di[i] - lo[i] * c[i - 1];
        c[i] = up[i] / den;
        d[i] = (rhs[i] - lo[i] * d[i - 1]) / den;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

const TOL: f64 = 1e-8;
const MAX_NEWTON: usize = 100;

pub fn solve_profile(p: &BulkParams, radius: f64, n: usize) -> Result<HedgehogProfile> {
    p.validate()?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid("R", "must be positive"));
    }
    if n < 64 {
        return Err(Error::invalid("N", "must be at least 64"));
    }
    let s_plus = critical_points(p)?.s_plus;
    let dr = radius / n as f64;
    let r: Vec<f64> = (0..=n).map(|i| i as f64 * dr).collect();
    let mut h: Vec<f64> = r.iter().map(|ri| s_plus * ri / radius).collect();
    h[n] = s_plus;

    let mut res = residual(p, dr, &h);
    let mut rnorm = norm_inf(&res);
    let mut iterations = 0;
    while rnorm >= TOL {
        if iterations == MAX_NEWTON {
            return Err(Error::NoConvergence {
                iterations,
                residual: rnorm,
            });
        }
        iterations += 1;
        let m = n - 1;
        let (mut lo, mut di, mut up) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        for k in 0..m {
            let i = k + 1;
            let ri = r[i];
            lo[k] = 1.0 / (dr * dr) - 1.0 / (ri * dr);
            up[k] = 1.0 / (dr * dr) + 1.0 / (ri * dr);
            di[k] = -2.0 / (dr * dr) - 6.0 / (ri * ri) - source(p, h[i]).1;
        }
        let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
        let delta = thomas(&lo, &di, &up, &rhs);

        let mut t = 1.0;
        loop {
            let mut trial = h.clone();
            for k in 0..m {
                trial[k + 1] += t * delta[k];
            }
            let tres = residual(p, dr, &trial);
            let tnorm = norm_inf(&tres);
            if tnorm < rnorm || t < 1e-10 {
                h = trial;
                res = tres;
                rnorm = tnorm;
                break;
            }
            t *= 0.5;
        }
    }
    Ok(HedgehogProfile {
        radius,
        dr,
        r,
        h,
        s_plus,
        residual: rnorm,
        iterations,
    })
}
