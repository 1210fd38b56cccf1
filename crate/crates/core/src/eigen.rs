//! Smallest Hessian eigenpairs and Morse index.
//!
//! The Hessian is never formed: the block LOBPCG iteration only needs
//! Hessian-vector products from [`Objective::hvp`]. Operators so small that
//! the LOBPCG trial subspace would cover a large part of the space (`n < 5k`)
//! are assembled column by column and diagonalized densely instead.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::vecops::{axpy, dot, norm2, normalize, orthonormalize};

#[derive(Debug, Clone)]
pub struct EigOptions {
    /// Residual tolerance relative to the spectral scale.
    pub tol: f64,
    pub max_iters: usize,
    /// Extra block vectors carried along to speed up convergence of the last
    /// requested pair.
    pub guard: usize,
    pub rng_seed: u64,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions {
            tol: 1e-8,
            max_iters: 5000,
            guard: 3,
            rng_seed: 0x5eed,
        }
    }
}

/// `k` algebraically smallest eigenpairs of the Hessian at a point.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unit, mutually orthogonal.
    pub eigenvectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// Estimate of the largest |eigenvalue| from a short power iteration.
    pub spectral_scale: f64,
    /// Threshold below which an eigenvalue counts as negative (its negation).
    pub tol_eig: f64,
    /// Number of eigenvalues `< -tol_eig` among those computed.
    pub morse_index: usize,
    pub iterations: usize,
}

impl SpectrumReport {
    fn finish(mut self) -> Self {
        self.morse_index = self
            .eigenvalues
            .iter()
            .filter(|&&l| l < -self.tol_eig)
            .count();
        self
    }
}

/// Largest |eigenvalue| estimate from 10 power iterations.
pub fn spectral_scale<O: Objective + ?Sized>(obj: &O, x: &[f64], seed: u64) -> f64 {
    let n = obj.dim();
    let mut v = random_vector(n, seed ^ 0xa11ce);
    normalize(&mut v);
    let mut est = 0.0;
    for _ in 0..10 {
        let hv = obj.hvp(x, &v);
        est = dot(&v, &hv).abs().max(norm2(&hv));
        v = hv;
        if normalize(&mut v) == 0.0 {
            break;
        }
    }
    if est > 0.0 && est.is_finite() {
        est
    } else {
        1.0
    }
}

fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Smallest `k` eigenpairs of the Hessian of `obj` at `x`.
///
/// `initial` optionally seeds the block (it is completed with random vectors).
pub fn smallest_eigs<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    k: usize,
    initial: Option<&[Vec<f64>]>,
    opts: &EigOptions,
) -> Result<SpectrumReport> {
    let n = obj.dim();
    if k == 0 || k > 30 {
        return Err(Error::invalid("k", "must lie in 1..=30"));
    }
    if k > n {
        return Err(Error::invalid("k", format!("exceeds the dimension {n}")));
    }
    let scale = spectral_scale(obj, x, opts.rng_seed);
    let tol_eig = 1e-8 * scale;
    if n < 5 * k || n <= 32 {
        return Ok(dense_smallest(obj, x, k, scale, tol_eig));
    }
    lobpcg(|v| obj.hvp(x, v), n, k, initial, scale, tol_eig, opts).map(SpectrumReport::finish)
}

/// Assembles the Hessian column by column and diagonalizes it.
pub fn dense_hessian<O: Objective + ?Sized>(obj: &O, x: &[f64]) -> DMatrix<f64> {
    let n = obj.dim();
    let mut h = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = obj.hvp(x, &e);
        e[j] = 0.0;
        for i in 0..n {
            h[(i, j)] = col[i];
        }
    }
    // symmetrize away finite-difference noise
    let ht = h.transpose();
    (h + ht) * 0.5
}

fn dense_smallest<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    k: usize,
    scale: f64,
    tol_eig: f64,
) -> SpectrumReport {
    let h = dense_hessian(obj, x);
    let (vals, vecs) = sorted_eigen(h.clone());
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenvectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for j in 0..k {
        let v: Vec<f64> = vecs.column(j).iter().copied().collect();
        let hv = &h * vecs.column(j);
        let r = (hv - vecs.column(j) * vals[j]).norm();
        eigenvalues.push(vals[j]);
        eigenvectors.push(v);
        residuals.push(r);
    }
    SpectrumReport {
        eigenvalues,
        eigenvectors,
        residuals,
        spectral_scale: scale,
        tol_eig,
        morse_index: 0,
        iterations: 0,
    }
    .finish()
}

/// Symmetric eigendecomposition with eigenvalues ascending; ties keep the
/// solver's column order.
pub fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Block LOBPCG for the `k` smallest eigenpairs of a symmetric operator,
/// without preconditioning. Rayleigh-Ritz runs on the orthonormalized trial
/// basis `[X, W, P]` every iteration.
#[allow(clippy::too_many_arguments)]
pub fn lobpcg<F>(
    apply: F,
    n: usize,
    k: usize,
    initial: Option<&[Vec<f64>]>,
    scale: f64,
    tol_eig: f64,
    opts: &EigOptions,
) -> Result<SpectrumReport>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = (k + opts.guard).min(n / 3).max(k);
    let mut x: Vec<Vec<f64>> = initial.map(|v| v.to_vec()).unwrap_or_default();
    x.truncate(m);
    let mut extra = 0u64;
    loop {
        while x.len() < m {
            x.push(random_vector(n, opts.rng_seed.wrapping_add(extra)));
            extra += 1;
        }
        orthonormalize(&mut x, 1e-8);
        if x.len() == m {
            break;
        }
    }
    let mut hx: Vec<Vec<f64>> = x.iter().map(|v| apply(v)).collect();
    let (mut theta, c) = rayleigh_ritz(&x, &hx);
    x = combine(&x, &c, m);
    hx = combine(&hx, &c, m);
    theta.truncate(m);

    let res_tol = opts.tol * scale;
    let mut p: Vec<Vec<f64>> = Vec::new();
    let mut residuals = vec![f64::INFINITY; m];
    for iter in 0..opts.max_iters {
        let r: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut ri = hx[i].clone();
                axpy(-theta[i], &x[i], &mut ri);
                ri
            })
            .collect();
        for i in 0..m {
            residuals[i] = norm2(&r[i]);
        }
        if residuals[..k].iter().all(|&ri| ri < res_tol) {
            return Ok(SpectrumReport {
                eigenvalues: theta[..k].to_vec(),
                eigenvectors: x[..k].to_vec(),
                residuals: residuals[..k].to_vec(),
                spectral_scale: scale,
                tol_eig,
                morse_index: 0,
                iterations: iter,
            });
        }
        // active residuals only; converged columns stop contributing directions
        let mut w: Vec<Vec<f64>> = (0..m)
            .filter(|&i| residuals[i] >= 0.1 * res_tol)
            .map(|i| r[i].clone())
            .collect();
        // W and P orthogonal to X, then among themselves
        let mut basis = x.clone();
        let nx = basis.len();
        basis.append(&mut w);
        basis.extend(p.iter().cloned());
        orthonormalize_tail(&mut basis, nx);
        let tail: Vec<Vec<f64>> = basis[nx..].to_vec();
        let htail: Vec<Vec<f64>> = tail.iter().map(|v| apply(v)).collect();
        let mut hs = hx.clone();
        hs.extend(htail);
        let (vals, coeffs) = rayleigh_ritz(&basis, &hs);
        let new_x = combine(&basis, &coeffs, m);
        let new_hx = combine(&hs, &coeffs, m);
        // P = tail part of the Ritz vectors
        let mut new_p: Vec<Vec<f64>> = Vec::with_capacity(m);
        for j in 0..m {
            let mut pj = vec![0.0; n];
            for (t, v) in tail.iter().enumerate() {
                axpy(coeffs[(nx + t, j)], v, &mut pj);
            }
            new_p.push(pj);
        }
        x = new_x;
        hx = new_hx;
        theta = vals[..m].to_vec();
        p = new_p;
        // refresh the images periodically to stop drift from accumulating
        if iter % 50 == 49 {
            orthonormalize(&mut x, 1e-12);
            while x.len() < m {
                x.push(random_vector(n, opts.rng_seed.wrapping_add(extra)));
                extra += 1;
                orthonormalize(&mut x, 1e-8);
            }
            hx = x.iter().map(|v| apply(v)).collect();
            let (t2, c2) = rayleigh_ritz(&x, &hx);
            x = combine(&x, &c2, m);
            hx = combine(&hx, &c2, m);
            theta = t2[..m].to_vec();
            p.clear();
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iters,
        residual: residuals[..k].iter().cloned().fold(0.0, f64::max),
    })
}

/// Orthonormalizes `basis[start..]` against `basis[..start]` (assumed
/// orthonormal) and among itself, dropping near-dependent vectors.
fn orthonormalize_tail(basis: &mut Vec<Vec<f64>>, start: usize) {
    let mut tail: Vec<Vec<f64>> = basis.drain(start..).collect();
    for v in tail.iter_mut() {
        for _ in 0..2 {
            for b in basis.iter() {
                let c = dot(b, v);
                axpy(-c, b, v);
            }
        }
    }
    orthonormalize(&mut tail, 1e-10);
    // second pass against the head after the tail was rescaled
    for v in tail.iter_mut() {
        for b in basis.iter() {
            let c = dot(b, v);
            axpy(-c, b, v);
        }
        normalize(v);
    }
    basis.extend(tail);
}

fn rayleigh_ritz(s: &[Vec<f64>], hs: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let d = s.len();
    let mut g = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = 0.5 * (dot(&s[i], &hs[j]) + dot(&s[j], &hs[i]));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    sorted_eigen(g)
}

fn combine(vs: &[Vec<f64>], c: &DMatrix<f64>, m: usize) -> Vec<Vec<f64>> {
    let n = vs[0].len();
    (0..m)
        .map(|j| {
            let mut out = vec![0.0; n];
            for (i, v) in vs.iter().enumerate() {
                axpy(c[(i, j)], v, &mut out);
            }
            out
        })
        .collect()
}

/// Smallest eigenvalue by the normalized Rayleigh-quotient gradient flow
/// `v' = -(2 gamma/<v,v>)(Hv - (<Hv,v>/<v,v>) v)`, explicit Euler with step
/// `gamma_dt`. Slower than LOBPCG; kept as an independent cross-check.
pub fn rayleigh_flow<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    v0: &[f64],
    gamma_dt: f64,
    tol: f64,
    max_steps: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut v = v0.to_vec();
    normalize(&mut v);
    let mut lambda = f64::NAN;
    for _ in 0..max_steps {
        let hv = obj.hvp(x, &v);
        let vv = dot(&v, &v);
        lambda = dot(&hv, &v) / vv;
        let mut r = hv;
        axpy(-lambda, &v, &mut r);
        if norm2(&r) < tol {
            return Ok((lambda, v));
        }
        axpy(-2.0 * gamma_dt / vv, &r, &mut v);
        normalize(&mut v);
    }
    Err(Error::NoConvergence {
        iterations: max_steps,
        residual: lambda,
    })
}
