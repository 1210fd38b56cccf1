//! High-index saddle dynamics.
//!
//! An index-k saddle is a stable fixed point of
//!
//! ```text
//! x'   = -(I - 2 sum_j v_j v_j^T) grad E(x)
//! v_i' = -(I - v_i v_i^T - 2 sum_{j<i} v_j v_j^T) H(x) v_i
//! ```
//!
//! discretized with explicit Euler. [`find_saddle`] adds Barzilai-Borwein step
//! lengths for `x` and periodic LOBPCG refreshes of the `v_i`.

use crate::eigen::{smallest_eigs, spectral_scale, EigOptions, SpectrumReport};
use crate::error::{Error, Result};
use crate::landscape::SaddleRecord;
use crate::objective::Objective;
use crate::vecops::{axpy, dot, norm2, norm_inf, orthonormalize};

#[derive(Debug, Clone)]
pub struct SaddleSearchState {
    pub x: Vec<f64>,
    /// Orthonormal directions, `v.len() == k`.
    pub v: Vec<Vec<f64>>,
    pub k: usize,
}

/// `(I - 2 sum_j v_j v_j^T) g`.
pub fn reflect(g: &[f64], v: &[Vec<f64>]) -> Vec<f64> {
    let mut out = g.to_vec();
    for vj in v {
        let c = dot(vj, g);
        axpy(-2.0 * c, vj, &mut out);
    }
    out
}

/// Gram-Schmidt that keeps the count: a collapsed direction is replaced by a
/// coordinate vector outside the current span.
fn reorthonormalize(v: &mut Vec<Vec<f64>>) {
    let k = v.len();
    orthonormalize(v, 1e-12);
    let mut e = 0;
    while v.len() < k {
        let mut c = vec![0.0; v.first().map_or(0, |x| x.len()).max(1)];
        let len = c.len();
        c[e % len] = 1.0;
        e += 1;
        v.push(c);
        orthonormalize(v, 1e-8);
    }
}

fn update_directions<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    v: &mut Vec<Vec<f64>>,
    gamma_dt: f64,
    l: Option<f64>,
) {
    let hv: Vec<Vec<f64>> = v
        .iter()
        .map(|vi| match l {
            Some(l) => obj.hessian_vec(x, vi, l),
            None => obj.hvp(x, vi),
        })
        .collect();
    let old = v.clone();
    for i in 0..v.len() {
        // (I - v_i v_i^T - 2 sum_{j<i} v_j v_j^T) H v_i
        let mut d = hv[i].clone();
        let c = dot(&old[i], &hv[i]);
        axpy(-c, &old[i], &mut d);
        for vj in &old[..i] {
            let c = dot(vj, &hv[i]);
            axpy(-2.0 * c, vj, &mut d);
        }
        axpy(-gamma_dt, &d, &mut v[i]);
    }
    reorthonormalize(v);
}

/// One explicit-Euler step of the saddle dynamics with Hessian-vector
/// products of finite-difference length `l`.
pub fn hisd_step<O: Objective + ?Sized>(
    obj: &O,
    s: &SaddleSearchState,
    beta_dt: f64,
    gamma_dt: f64,
    l: f64,
) -> SaddleSearchState {
    let g = obj.gradient(&s.x);
    let f = reflect(&g, &s.v);
    let mut x = s.x.clone();
    axpy(-beta_dt, &f, &mut x);
    let mut v = s.v.clone();
    if !v.is_empty() {
        update_directions(obj, &x, &mut v, gamma_dt, Some(l));
    }
    SaddleSearchState { x, v, k: s.k }
}

#[derive(Debug, Clone)]
pub struct HisdOptions {
    pub tol_grad: f64,
    pub max_iters: usize,
    /// Base `beta dt`; `None` uses `1 / spectral scale`.
    pub beta_dt: Option<f64>,
    /// `gamma dt`; `None` uses `1 / spectral scale`.
    pub gamma_dt: Option<f64>,
    /// Barzilai-Borwein step lengths for `x`.
    pub barzilai_borwein: bool,
    /// Recompute the directions by LOBPCG every this many steps (0: never).
    pub refresh: usize,
    /// Largest step as a fraction of `max(1, |x|)`.
    pub max_step: f64,
    pub eig: EigOptions,
}

impl Default for HisdOptions {
    fn default() -> Self {
        HisdOptions {
            tol_grad: 1e-8,
            max_iters: 100_000,
            beta_dt: None,
            gamma_dt: None,
            barzilai_borwein: true,
            refresh: 0,
            max_step: 0.1,
            eig: EigOptions::default(),
        }
    }
}

/// Morse index at `x` from the smallest `k + 2` Hessian eigenvalues, enlarging
/// the block while every computed eigenvalue is negative.
pub fn verify_index<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    k: usize,
    initial: Option<&[Vec<f64>]>,
    eig: &EigOptions,
) -> Result<SpectrumReport> {
    let n = obj.dim();
    let mut m = (k + 2).min(n).min(30);
    loop {
        let rep = smallest_eigs(obj, x, m, initial, eig)?;
        if rep.morse_index < m || m == n.min(30) {
            return Ok(rep);
        }
        m = (m + 4).min(n).min(30);
    }
}

fn record_from<O: Objective + ?Sized>(obj: &O, x: Vec<f64>, rep: SpectrumReport) -> SaddleRecord {
    let g = obj.gradient(&x);
    SaddleRecord {
        id: 0,
        energy: obj.energy(&x),
        grad_inf: norm_inf(&g),
        morse_index: rep.morse_index,
        lambda_spectrum: rep.eigenvalues,
        eigenvectors: rep.eigenvectors,
        x,
    }
}

/// Searches for an index-`k` saddle from `init_x`.
///
/// Without `init_v` the directions start as the `k` lowest eigenvectors.
/// Fails with `WrongIndex` (carrying the record) when the converged point
/// has a different verified index.
pub fn find_saddle<O: Objective + ?Sized>(
    obj: &O,
    k: usize,
    init_x: &[f64],
    init_v: Option<Vec<Vec<f64>>>,
    opts: &HisdOptions,
) -> Result<SaddleRecord> {
    let n = obj.dim();
    if init_x.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n} values"),
            found: format!("{} values", init_x.len()),
        });
    }
    if k > n.min(30) {
        return Err(Error::invalid("k", "exceeds the supported index"));
    }
    if !(opts.tol_grad > 0.0) {
        return Err(Error::invalid("tol_grad", "must be positive"));
    }
    let mut x = init_x.to_vec();
    let mut v = match init_v {
        Some(v) => {
            if v.len() != k || v.iter().any(|vi| vi.len() != n) {
                return Err(Error::invalid("init_v", format!("needs {k} vectors of length {n}")));
            }
            v
        }
        None if k > 0 => smallest_eigs(obj, &x, k, None, &opts.eig)?.eigenvectors,
        None => Vec::new(),
    };
    if k > 0 {
        reorthonormalize(&mut v);
    }

    let scale = spectral_scale(obj, &x, opts.eig.rng_seed);
    let base = opts.beta_dt.unwrap_or(1.0 / scale);
    let gamma = opts.gamma_dt.unwrap_or(1.0 / scale);
    let mut g = obj.gradient(&x);
    let mut f = reflect(&g, &v);
    let mut alpha = base;
    // the search has run off to infinity
    let escape = 1e3 * norm2(&x).max(1.0);
    let mut it = 0;
    while norm_inf(&g) >= opts.tol_grad {
        if it == opts.max_iters {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: norm_inf(&g),
            });
        }
        it += 1;
        let fnorm = norm2(&f);
        let cap = opts.max_step * norm2(&x).max(1.0);
        let step = if alpha * fnorm > cap { cap / fnorm } else { alpha };
        let mut x_new = x.clone();
        axpy(-step, &f, &mut x_new);
        if norm2(&x_new) > escape {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: norm_inf(&g),
            });
        }
        let g_new = obj.gradient(&x_new);
        let gn = norm2(&g_new);
        if !gn.is_finite() || gn > 1e3 * norm2(&g).max(opts.tol_grad) {
            // blow-up guard
            alpha = 0.5 * step.min(base);
            continue;
        }
        if k > 0 {
            if opts.refresh > 0 && it % opts.refresh == 0 {
                v = smallest_eigs(obj, &x_new, k, Some(&v), &opts.eig)?.eigenvectors;
                reorthonormalize(&mut v);
            } else {
                update_directions(obj, &x_new, &mut v, gamma, None);
            }
        }
        let f_new = reflect(&g_new, &v);
        alpha = if opts.barzilai_borwein {
            let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = f_new.iter().zip(&f).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 0.0 {
                (dot(&s, &s) / sy).min(1e4 * base)
            } else {
                base
            }
        } else {
            base
        };
        x = x_new;
        g = g_new;
        f = f_new;
    }
    let initial = if v.is_empty() { None } else { Some(v.as_slice()) };
    let rep = verify_index(obj, &x, k, initial, &opts.eig)?;
    let record = record_from(obj, x, rep);
    if record.morse_index != k {
        return Err(Error::WrongIndex {
            found: record.morse_index,
            wanted: k,
            record: Box::new(record),
        });
    }
    Ok(record)
}
