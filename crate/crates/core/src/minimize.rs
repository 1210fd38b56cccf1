//! Local minimization by limited-memory BFGS with Armijo backtracking, and
//! stability certificates from the smallest Hessian eigenvalue.

use std::collections::VecDeque;

use crate::eigen::{smallest_eigs, EigOptions};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::vecops::{axpy, dot, norm2, norm_inf};

#[derive(Debug, Clone)]
pub struct MinimizeOptions {
    /// L-BFGS history length.
    pub memory: usize,
    /// Convergence threshold on `|grad|_inf`.
    pub tol_grad: f64,
    pub max_iters: usize,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    /// Backtracking factor.
    pub shrink: f64,
    pub max_backtracks: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            memory: 10,
            tol_grad: 1e-8,
            max_iters: 20_000,
            c1: 1e-4,
            shrink: 0.5,
            max_backtracks: 60,
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.memory < 1 {
            return Err(Error::invalid("memory", "must be at least 1"));
        }
        if !(self.tol_grad > 0.0) {
            return Err(Error::invalid("tol_grad", "must be positive"));
        }
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return Err(Error::invalid("c1", "must lie in (0, 1)"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::invalid("shrink", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub energy: f64,
    pub grad_inf: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Energies of accepted iterates, starting with the initial point.
    pub history: Vec<f64>,
    /// Iterations where the quasi-Newton direction failed the descent test.
    pub steepest_fallbacks: usize,
}

impl Minimum {
    /// `Err(NoConvergence)` for a non-converged run.
    pub fn ok(self) -> Result<Minimum> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                iterations: self.iterations,
                residual: self.grad_inf,
            })
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LbfgsHistory {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
}

impl LbfgsHistory {
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>, memory: usize) -> bool {
        let sy = dot(&s, &y);
        if !(sy > 1e-300) || !sy.is_finite() {
            return false;
        }
        if self.pairs.len() == memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
        true
    }

    /// Stores a pair without the curvature check. A pair with `s.y <= 0`
    /// makes the implicit inverse Hessian indefinite.
    pub fn push_unchecked(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Two-loop recursion: returns `-H g`.
    pub fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            axpy(-a, y, &mut q);
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            axpy(a - b, s, &mut q);
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }
}

/// Whether `d` is an acceptable descent direction for gradient `g`.
pub fn is_descent(d: &[f64], g: &[f64]) -> bool {
    let dg = dot(d, g);
    let scale = norm2(d) * norm2(g);
    dg.is_finite() && dg < -1e-10 * scale
}

/// Minimizes from `x0`; `project` is applied to every gradient before use
/// (identity for unconstrained runs, a symmetrizer to stay in an invariant
/// subspace).
pub fn minimize_projected<O, P>(
    obj: &O,
    x0: Vec<f64>,
    opts: &MinimizeOptions,
    project: P,
) -> Result<Minimum>
where
    O: Objective + ?Sized,
    P: Fn(&mut [f64]),
{
    minimize_with_history(obj, x0, opts, project, LbfgsHistory::default())
}

/// [`minimize_projected`] starting from an existing curvature history.
pub fn minimize_with_history<O, P>(
    obj: &O,
    x0: Vec<f64>,
    opts: &MinimizeOptions,
    project: P,
    mut hist: LbfgsHistory,
) -> Result<Minimum>
where
    O: Objective + ?Sized,
    P: Fn(&mut [f64]),
{
    opts.validate()?;
    if x0.len() != obj.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} values", obj.dim()),
            found: format!("{} values", x0.len()),
        });
    }
    let mut x = x0;
    let (mut e, mut g) = obj.energy_and_gradient(&x);
    project(&mut g);
    let mut history = vec![e];
    let mut fallbacks = 0;
    let mut iterations = 0;
    let mut gnorm = norm_inf(&g);
    while gnorm >= opts.tol_grad && iterations < opts.max_iters {
        iterations += 1;
        let mut d = hist.direction(&g);
        let quasi_newton = !hist.is_empty();
        if !is_descent(&d, &g) {
            fallbacks += 1;
            hist.clear();
            d = g.iter().map(|v| -v).collect();
        }
        // first step (or after a reset): unit-length move
        let mut step = if hist.is_empty() {
            (1.0 / norm2(&d)).min(1.0)
        } else {
            1.0
        };
        let mut accepted = line_search(obj, &x, e, &g, &d, &mut step, opts);
        if accepted.is_none() && quasi_newton {
            fallbacks += 1;
            hist.clear();
            d = g.iter().map(|v| -v).collect();
            step = (1.0 / norm2(&d)).min(1.0);
            accepted = line_search(obj, &x, e, &g, &d, &mut step, opts);
        }
        let Some((x_new, e_new)) = accepted else {
            break;
        };
        let mut g_new = obj.gradient(&x_new);
        project(&mut g_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        hist.push(s, y, opts.memory);
        x = x_new;
        e = e_new;
        g = g_new;
        gnorm = norm_inf(&g);
        history.push(e);
    }
    let g_true = obj.gradient(&x);
    let grad_inf = norm_inf(&g_true);
    Ok(Minimum {
        energy: obj.energy(&x),
        x,
        grad_inf,
        iterations,
        converged: gnorm < opts.tol_grad && grad_inf < opts.tol_grad,
        history,
        steepest_fallbacks: fallbacks,
    })
}

fn line_search<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    e: f64,
    g: &[f64],
    d: &[f64],
    step: &mut f64,
    opts: &MinimizeOptions,
) -> Option<(Vec<f64>, f64)> {
    let slope = dot(g, d);
    // energy differences below this are rounding noise
    let noise = 1e-12 * (1.0 + e.abs());
    for _ in 0..opts.max_backtracks {
        let trial: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + *step * b).collect();
        let et = obj.energy(&trial);
        if et.is_finite() && et <= e + opts.c1 * *step * slope {
            return Some((trial, et));
        }
        // approximate Armijo: near a minimum the decrease is invisible in
        // the energy, so ask for the directional derivative to shrink instead
        if et.is_finite() && et <= e + noise {
            let gt = obj.gradient(&trial);
            if dot(&gt, d) <= (1.0 - 2.0 * opts.c1) * slope.abs() && dot(&gt, d).abs() < slope.abs() {
                return Some((trial, et));
            }
        }
        *step *= opts.shrink;
    }
    None
}

/// Unconstrained L-BFGS minimization.
pub fn minimize<O: Objective + ?Sized>(
    obj: &O,
    x0: Vec<f64>,
    opts: &MinimizeOptions,
) -> Result<Minimum> {
    minimize_projected(obj, x0, opts, |_| {})
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityCertificate {
    pub lambda1: f64,
    pub tol_eig: f64,
    pub stable: bool,
}

/// Smallest Hessian eigenvalue at a (near-)stationary point.
///
/// Fails with `NotStationary` when `|grad|_inf >= 10 tol_grad`.
pub fn certify_stability<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    tol_grad: f64,
    eig: &EigOptions,
) -> Result<StabilityCertificate> {
    let g = norm_inf(&obj.gradient(x));
    let limit = 10.0 * tol_grad;
    if !(g < limit) {
        return Err(Error::NotStationary { grad_inf: g, limit });
    }
    let rep = smallest_eigs(obj, x, 1, None, eig)?;
    let lambda1 = rep.eigenvalues[0];
    Ok(StabilityCertificate {
        lambda1,
        tol_eig: rep.tol_eig,
        stable: lambda1 > rep.tol_eig,
    })
}
