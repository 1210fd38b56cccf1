//! Gradient flow `dq/dt = -grad F(q)` of the discrete energy.
//!
//! The energy is split as `F = q.L q / 2 + b.q + c + F1(q) - C0` with `L` the
//! elastic operator shifted by `a1` times the mass matrix, `b` the boundary
//! contribution and `F1 >= 1` the remaining bulk part. The SAV scheme evolves
//! `r ~ sqrt(F1)` alongside `q` with a Crank-Nicolson average; every step costs
//! two conjugate-gradient solves with the fixed operator `I/dt + L/2`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Domain, QField};
use crate::objective::Objective;
use crate::tensor::metric_apply;
use crate::vecops::{axpy, dot, norm2, norm_inf};

/// A gradient system written in SAV form.
pub trait SavSystem {
    fn dim(&self) -> usize;
    /// `L q` (linear, symmetric positive definite).
    fn apply_l(&self, q: &[f64]) -> Vec<f64>;
    /// Constant part `b` of the gradient.
    fn affine(&self) -> &[f64];
    /// Bounded-below nonlinear part, `F1 >= 1`.
    fn f1(&self, q: &[f64]) -> f64;
    fn f1_gradient(&self, q: &[f64]) -> Vec<f64>;
    /// `c - C0`, so that `F = q.L q/2 + b.q + F1 + offset`.
    fn offset(&self) -> f64;

    fn energy(&self, q: &[f64]) -> f64 {
        let lq = self.apply_l(q);
        0.5 * dot(q, &lq) + dot(self.affine(), q) + self.f1(q) + self.offset()
    }

    fn full_gradient(&self, q: &[f64]) -> Vec<f64> {
        let mut g = self.apply_l(q);
        axpy(1.0, self.affine(), &mut g);
        axpy(1.0, &self.f1_gradient(q), &mut g);
        g
    }
}

/// Shifted uniaxial bulk density per unit area,
/// `lambda^2 f_b(s) - a1 |Q|^2 / 2` with `|Q|^2 = 2 s^2 / 3`.
pub fn shifted_uniaxial(domain: &Domain, a1: f64, s: f64) -> f64 {
    domain.lambda2() * domain.bulk().uniaxial_energy(s) - a1 * s * s / 3.0
}

/// Minimum over `s` of [`shifted_uniaxial`] by scan plus golden section.
pub fn shifted_bulk_min(domain: &Domain, a1: f64) -> f64 {
    let p = domain.bulk();
    let l2 = domain.lambda2();
    // all critical points of the quartic lie inside this interval
    let lim = 1.0 + p.b / p.c + 2.0 * ((l2 * p.a - a1).abs() / (l2 * p.c)).sqrt();
    let n = 2000;
    let g = |s: f64| shifted_uniaxial(domain, a1, s);
    let h = 2.0 * lim / n as f64;
    let (mut best, mut best_s) = (f64::INFINITY, 0.0);
    for k in 0..=n {
        let s = -lim + k as f64 * h;
        let v = g(s);
        if v < best {
            best = v;
            best_s = s;
        }
    }
    let (mut lo, mut hi) = (best_s - h, best_s + h);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..200 {
        if hi - lo < 1e-13 * (1.0 + lim) {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = g(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = g(d);
        }
    }
    best.min(fc).min(fd).min(g(0.0))
}

/// SAV splitting of the Landau-de Gennes energy on a [`Domain`].
#[derive(Debug, Clone)]
pub struct SavSplit {
    domain: Arc<Domain>,
    pub a1: f64,
    pub c0: f64,
    affine: Vec<f64>,
    elastic_const: f64,
}

pub fn sav_split(domain: Arc<Domain>) -> Result<SavSplit> {
    if !(domain.bulk().c > 0.0) {
        return Err(Error::invalid("c", "the SAV splitting needs c > 0"));
    }
    let a1 = domain.lambda2() * (-domain.bulk().a).max(0.0) + 1.0;
    let gmin = shifted_bulk_min(&domain, a1);
    let c0 = 1.0 - domain.area() * gmin.min(0.0);
    let affine = domain.elastic_affine();
    let elastic_const = domain.elastic_part(&vec![0.0; domain.len()]);
    Ok(SavSplit {
        domain,
        a1,
        c0,
        affine,
        elastic_const,
    })
}

impl SavSplit {
    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    fn mass_shift(&self) -> f64 {
        self.a1 * self.domain.cell_weight()
    }
}

impl SavSystem for SavSplit {
    fn dim(&self) -> usize {
        self.domain.len()
    }

    fn apply_l(&self, q: &[f64]) -> Vec<f64> {
        let mut out = self.domain.elastic_apply(q, &self.affine);
        let m = self.mass_shift();
        for (o, qn) in out.chunks_exact_mut(5).zip(q.chunks_exact(5)) {
            let gq = metric_apply(qn);
            for c in 0..5 {
                o[c] += m * gq[c];
            }
        }
        out
    }

    fn affine(&self) -> &[f64] {
        &self.affine
    }

    fn f1(&self, q: &[f64]) -> f64 {
        let m = self.mass_shift();
        let quad: f64 = q.chunks_exact(5).map(|qn| dot(qn, &metric_apply(qn))).sum();
        self.domain.bulk_part(q) - 0.5 * m * quad + self.c0
    }

    fn f1_gradient(&self, q: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; q.len()];
        self.domain.bulk_part_gradient(q, &mut g);
        let m = self.mass_shift();
        for (gn, qn) in g.chunks_exact_mut(5).zip(q.chunks_exact(5)) {
            let gq = metric_apply(qn);
            for c in 0..5 {
                gn[c] -= m * gq[c];
            }
        }
        g
    }

    fn offset(&self) -> f64 {
        self.elastic_const - self.c0
    }

    fn energy(&self, q: &[f64]) -> f64 {
        self.domain.energy(q)
    }

    fn full_gradient(&self, q: &[f64]) -> Vec<f64> {
        self.domain.gradient(q)
    }
}

/// Conjugate gradients for a symmetric positive definite operator.
///
/// With `b = max(|rhs|, scale)`, stops when `|r| <= 1e-12 b` and fails if
/// `|r| > 1e-10 b` after `max_iters`. `scale` is the size of the terms that
/// cancel in `rhs`; near equilibrium `|rhs|` alone is unreachable.
pub fn conjugate_gradient<F>(
    apply: F,
    rhs: &[f64],
    x0: Option<&[f64]>,
    max_iters: usize,
    scale: f64,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let bnorm = norm2(rhs).max(scale);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; rhs.len()]);
    if norm2(rhs) == 0.0 {
        return Ok(vec![0.0; rhs.len()]);
    }
    let ax = apply(&x);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = 1e-12 * bnorm;
    let mut it = 0;
    while rr.sqrt() > target && it < max_iters {
        it += 1;
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    // true residual
    let ax = apply(&x);
    let res = rhs.iter().zip(&ax).map(|(b, a)| (b - a).powi(2)).sum::<f64>().sqrt();
    if !(res <= 1e-10 * bnorm) {
        return Err(Error::LinearSolveFailure {
            iterations: it,
            residual: res / bnorm,
        });
    }
    Ok(x)
}

fn cg_limit(n: usize) -> usize {
    (10 * n).max(1000)
}

#[derive(Debug, Clone)]
pub struct SavState {
    pub q: Vec<f64>,
    pub r: f64,
    pub q_prev: Option<Vec<f64>>,
    pub step: usize,
    pub time: f64,
}

impl SavState {
    /// Starts at `q` with `r = sqrt(F1(q))`.
    pub fn new<S: SavSystem + ?Sized>(sys: &S, q: Vec<f64>) -> Self {
        let r = sys.f1(&q).sqrt();
        SavState {
            q,
            r,
            q_prev: None,
            step: 0,
            time: 0.0,
        }
    }

    pub fn from_field(split: &SavSplit, f: &QField) -> Self {
        SavState::new(split, f.as_slice().to_vec())
    }

    pub fn field(&self, split: &SavSplit) -> QField {
        QField::from_vec(split.domain().clone(), self.q.clone()).expect("state matches domain")
    }

    /// `q.L q/2 + b.q + r^2`.
    pub fn modified_energy<S: SavSystem + ?Sized>(&self, sys: &S) -> f64 {
        let lq = sys.apply_l(&self.q);
        0.5 * dot(&self.q, &lq) + dot(sys.affine(), &self.q) + self.r * self.r
    }
}

/// One second-order SAV Crank-Nicolson step.
pub fn sav_step<S: SavSystem + ?Sized>(sys: &S, s: &SavState, dt: f64) -> Result<SavState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    let n = sys.dim();
    let qbar: Vec<f64> = match &s.q_prev {
        Some(prev) => s.q.iter().zip(prev).map(|(a, b)| 1.5 * a - 0.5 * b).collect(),
        None => s.q.clone(),
    };
    let f1 = sys.f1(&qbar);
    debug_assert!(f1 >= 1.0 - 1e-10, "F1 fell below 1: {f1}");
    let mut w = sys.f1_gradient(&qbar);
    let sq = f1.sqrt();
    w.iter_mut().for_each(|v| *v /= sq);

    // (I/dt + L/2) D + (w w^T / 4) D = -(L q + b + r w)
    let mut rhs = sys.apply_l(&s.q);
    let scale = norm2(&rhs) + norm2(sys.affine()) + s.r.abs() * norm2(&w);
    axpy(1.0, sys.affine(), &mut rhs);
    axpy(s.r, &w, &mut rhs);
    rhs.iter_mut().for_each(|v| *v = -*v);
    let op = |x: &[f64]| {
        let mut y = sys.apply_l(x);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = 0.5 * *yi + xi / dt;
        }
        y
    };
    let u = conjugate_gradient(op, &rhs, None, cg_limit(n), scale)?;
    let z = conjugate_gradient(op, &w, None, cg_limit(n), 0.0)?;
    let coef = 0.25 * dot(&w, &u) / (1.0 + 0.25 * dot(&w, &z));
    let mut delta = u;
    axpy(-coef, &z, &mut delta);

    let r_new = s.r + 0.5 * dot(&w, &delta);
    let mut q_new = s.q.clone();
    axpy(1.0, &delta, &mut q_new);
    Ok(SavState {
        q: q_new,
        r: r_new,
        q_prev: Some(s.q.clone()),
        step: s.step + 1,
        time: s.time + dt,
    })
}

/// Linearly implicit step `(I/dt + L) q' = q/dt - (b + grad F1(q))`.
pub fn semi_implicit_step<S: SavSystem + ?Sized>(sys: &S, q: &[f64], dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    let mut rhs = sys.f1_gradient(q);
    axpy(1.0, sys.affine(), &mut rhs);
    let scale = norm2(&rhs) + norm2(q) / dt;
    for (ri, qi) in rhs.iter_mut().zip(q) {
        *ri = qi / dt - *ri;
    }
    let op = |x: &[f64]| {
        let mut y = sys.apply_l(x);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += xi / dt;
        }
        y
    };
    conjugate_gradient(op, &rhs, Some(q), cg_limit(sys.dim()), scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub modified_energy: f64,
    pub grad_inf_norm: f64,
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub q: Vec<f64>,
    pub steps: usize,
    pub converged: bool,
    pub grad_inf: f64,
    pub trajectory: Vec<TrajectoryRow>,
}

/// Runs SAV steps until `|grad F|_inf < tol_grad` or `max_steps`.
///
/// The auxiliary variable is reset to `sqrt(F1)` before each step, so that
/// the fixed points of the iteration are exactly the stationary points.
pub fn flow_run<S: SavSystem + ?Sized>(
    sys: &S,
    q0: Vec<f64>,
    dt: f64,
    tol_grad: f64,
    max_steps: usize,
) -> Result<FlowResult> {
    if !(tol_grad > 0.0) {
        return Err(Error::invalid("tol_grad", "must be positive"));
    }
    let mut s = SavState::new(sys, q0);
    let row = |s: &SavState| {
        let g = sys.full_gradient(&s.q);
        TrajectoryRow {
            step: s.step,
            time: s.time,
            energy: sys.energy(&s.q),
            modified_energy: s.modified_energy(sys),
            grad_inf_norm: norm_inf(&g),
        }
    };
    let mut trajectory = vec![row(&s)];
    while trajectory.last().unwrap().grad_inf_norm >= tol_grad && s.step < max_steps {
        s.r = sys.f1(&s.q).sqrt();
        s = sav_step(sys, &s, dt)?;
        trajectory.push(row(&s));
    }
    let grad_inf = trajectory.last().unwrap().grad_inf_norm;
    Ok(FlowResult {
        converged: grad_inf < tol_grad,
        steps: s.step,
        q: s.q,
        grad_inf,
        trajectory,
    })
}

/// Flows a field to equilibrium; `NoConvergence` if `max_steps` is reached.
pub fn flow_to_equilibrium(
    init: &QField,
    dt: f64,
    tol_grad: f64,
    max_steps: usize,
) -> Result<(QField, usize)> {
    let split = sav_split(init.domain().clone())?;
    let res = flow_run(&split, init.as_slice().to_vec(), dt, tol_grad, max_steps)?;
    if !res.converged {
        return Err(Error::NoConvergence {
            iterations: res.steps,
            residual: res.grad_inf,
        });
    }
    let steps = res.steps;
    Ok((QField::from_vec(split.domain().clone(), res.q)?, steps))
}
