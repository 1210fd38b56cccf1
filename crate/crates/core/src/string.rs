//! String method for minimal energy paths.
//!
//! Each iteration moves the interior nodes down the full gradient and then
//! redistributes them along the interpolated curve. The node of highest
//! energy is finally polished into an index-1 saddle by the saddle dynamics
//! with the path tangent as initial unstable direction.

use serde::Serialize;

use crate::eigen::spectral_scale;
use crate::error::{Error, Result};
use crate::hisd::{find_saddle, HisdOptions};
use crate::objective::Objective;
use crate::vecops::{axpy, distance, dot, norm_inf, normalize, sub};

#[derive(Debug, Clone)]
pub struct Path {
    pub nodes: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    /// Normalized cumulative chord length, `alpha[0] = 0`, `alpha[N-1] = 1`.
    pub alpha: Vec<f64>,
}

impl Path {
    /// Builds a path through `nodes` and evaluates its energies.
    pub fn from_nodes<O: Objective + ?Sized>(obj: &O, nodes: Vec<Vec<f64>>) -> Result<Path> {
        if nodes.len() < 3 {
            return Err(Error::invalid("N", "a path needs at least 3 nodes"));
        }
        if let Some(bad) = nodes.iter().find(|x| x.len() != obj.dim()) {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", obj.dim()),
                found: format!("{} values", bad.len()),
            });
        }
        let energies = nodes.iter().map(|x| obj.energy(x)).collect();
        let alpha = chord_parameters(&nodes);
        Ok(Path {
            nodes,
            energies,
            alpha,
        })
    }

    /// `n` equally spaced nodes on the segment from `a` to `b`.
    pub fn linear<O: Objective + ?Sized>(obj: &O, a: &[f64], b: &[f64], n: usize) -> Result<Path> {
        if n < 3 {
            return Err(Error::invalid("N", "a path needs at least 3 nodes"));
        }
        let nodes = (0..n)
            .map(|i| {
                if i == 0 {
                    return a.to_vec();
                }
                if i == n - 1 {
                    return b.to_vec();
                }
                let t = i as f64 / (n - 1) as f64;
                a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect()
            })
            .collect();
        Path::from_nodes(obj, nodes)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn chords(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| distance(&w[0], &w[1])).collect()
    }

    /// Index of the interior node of highest energy.
    pub fn top(&self) -> usize {
        (1..self.len() - 1)
            .max_by(|&a, &b| self.energies[a].total_cmp(&self.energies[b]))
            .unwrap()
    }

    /// Unit tangent at interior node `i` by central difference.
    pub fn tangent(&self, i: usize) -> Vec<f64> {
        let mut t = sub(&self.nodes[i + 1], &self.nodes[i - 1]);
        normalize(&mut t);
        t
    }
}

fn chord_parameters(nodes: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = vec![0.0];
    for w in nodes.windows(2) {
        let last = *acc.last().unwrap();
        acc.push(last + distance(&w[0], &w[1]));
    }
    let total = *acc.last().unwrap();
    if total > 0.0 {
        acc.iter_mut().for_each(|a| *a /= total);
    }
    acc
}

/// Whether the interior of an energy profile rises then falls.
pub fn is_unimodal(e: &[f64]) -> bool {
    let mut falling = false;
    for w in e.windows(2) {
        if w[1] < w[0] {
            falling = true;
        } else if falling && w[1] > w[0] {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, Copy)]
pub struct StepSizes {
    /// Initial step per node before backtracking.
    pub base: f64,
    pub max_backtracks: usize,
}

/// Moves every interior node along `-grad E`, halving the node's step until
/// its energy does not increase.
pub fn evolve_step<O: Objective + ?Sized>(obj: &O, p: &Path, steps: StepSizes) -> Path {
    let n = p.len();
    let mut out = p.clone();
    for i in 1..n - 1 {
        let g = obj.gradient(&p.nodes[i]);
        if g.iter().all(|&c| c == 0.0) {
            continue;
        }
        let mut t = steps.base;
        for _ in 0..=steps.max_backtracks {
            let mut trial = p.nodes[i].clone();
            axpy(-t, &g, &mut trial);
            let e = obj.energy(&trial);
            if e <= p.energies[i] {
                out.nodes[i] = trial;
                out.energies[i] = e;
                break;
            }
            t *= 0.5;
        }
    }
    out.alpha = chord_parameters(&out.nodes);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reparam {
    EqualArc,
    /// Arc length weighted by `1 + kappa (E - Emin)/(Emax - Emin)`.
    EnergyWeighted { kappa: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Linear,
    /// Natural cubic spline in the chord parameter.
    CubicSpline,
}

/// Polyline `pts` with a forward cursor (segment, local parameter).
struct Marcher<'a> {
    pts: &'a [Vec<f64>],
}

impl Marcher<'_> {
    fn point(&self, seg: usize, t: f64) -> Vec<f64> {
        let (p, q) = (&self.pts[seg], &self.pts[seg + 1]);
        p.iter().zip(q).map(|(a, b)| a + t * (b - a)).collect()
    }

    /// First point after `(seg, t)` at distance `c` from `x`, scanning forward.
    fn next(&self, x: &[f64], seg: usize, t: f64, c: f64) -> Option<(usize, f64)> {
        let mut t0 = t;
        for s in seg..self.pts.len() - 1 {
            let d = sub(&self.pts[s + 1], &self.pts[s]);
            let px = sub(&self.pts[s], x);
            let a = dot(&d, &d);
            if a > 0.0 {
                let b = dot(&d, &px);
                let cc = dot(&px, &px) - c * c;
                let disc = b * b - a * cc;
                if disc >= 0.0 {
                    let root = (-b + disc.sqrt()) / a;
                    if root >= t0 && root <= 1.0 {
                        return Some((s, root));
                    }
                }
            }
            t0 = 0.0;
        }
        None
    }

    /// Places `m` points after the start at mutual distance `c`; returns them
    /// and the distance from the last to the end of the polyline, or `None`
    /// when the polyline ends first.
    fn march(&self, c: f64, m: usize) -> Option<(Vec<Vec<f64>>, f64)> {
        let mut x = self.pts[0].clone();
        let (mut seg, mut t) = (0, 0.0);
        let mut out = Vec::with_capacity(m);
        for _ in 0..m {
            let (s, r) = self.next(&x, seg, t, c)?;
            seg = s;
            t = r;
            x = self.point(seg, t);
            out.push(x.clone());
        }
        let rest = distance(&x, self.pts.last().unwrap());
        Some((out, rest))
    }
}

/// Points of equal chord length along a polyline, by bisection on the chord.
fn equal_chords(pts: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let marcher = Marcher { pts };
    let arc: f64 = pts.windows(2).map(|w| distance(&w[0], &w[1])).sum();
    let (mut lo, mut hi) = (0.0, arc / (n - 1) as f64 * (1.0 + 1e-12));
    let mut best = None;
    for _ in 0..200 {
        let c = 0.5 * (lo + hi);
        if c <= lo || c >= hi {
            break;
        }
        match marcher.march(c, n - 2) {
            Some((inner, rest)) if rest > c => {
                lo = c;
                best = Some(inner);
            }
            Some((inner, _)) => {
                hi = c;
                best = Some(inner);
            }
            None => hi = c,
        }
    }
    best.unwrap_or_else(|| marcher.march(lo, n - 2).map(|r| r.0).unwrap_or_default())
}

/// Natural cubic spline through `ys` at parameters `ts`, componentwise,
/// sampled `per_interval` times on each interval.
fn spline_resample(ts: &[f64], ys: &[Vec<f64>], per_interval: usize) -> Vec<Vec<f64>> {
    let n = ts.len();
    let dim = ys[0].len();
    let h: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
    // second derivatives m_i, natural ends, Thomas algorithm per component
    let mut m = vec![vec![0.0; dim]; n];
    if n > 2 {
        let k = n - 2;
        let mut cp = vec![0.0; k];
        let mut dp = vec![vec![0.0; dim]; k];
        for i in 0..k {
            let (a, b, c) = (h[i], 2.0 * (h[i] + h[i + 1]), h[i + 1]);
            let den = b - if i > 0 { a * cp[i - 1] } else { 0.0 };
            cp[i] = c / den;
            for d in 0..dim {
                let rhs = 6.0 * ((ys[i + 2][d] - ys[i + 1][d]) / h[i + 1] - (ys[i + 1][d] - ys[i][d]) / h[i]);
                let prev = if i > 0 { a * dp[i - 1][d] } else { 0.0 };
                dp[i][d] = (rhs - prev) / den;
            }
        }
        for i in (0..k).rev() {
            for d in 0..dim {
                let next = if i + 1 < k { cp[i] * m[i + 2][d] } else { 0.0 };
                m[i + 1][d] = dp[i][d] - next;
            }
        }
    }
    let mut out = Vec::with_capacity((n - 1) * per_interval + 1);
    for i in 0..n - 1 {
        for s in 0..per_interval {
            let u = s as f64 / per_interval as f64;
            let (a, b) = (1.0 - u, u);
            let hi = h[i];
            let y: Vec<f64> = (0..dim)
                .map(|d| {
                    a * ys[i][d]
                        + b * ys[i + 1][d]
                        + ((a * a * a - a) * m[i][d] + (b * b * b - b) * m[i + 1][d]) * hi * hi / 6.0
                })
                .collect();
            out.push(y);
        }
    }
    out.push(ys[n - 1].clone());
    out
}

/// Redistributes the interior nodes; the endpoints are left untouched.
pub fn reparametrize<O: Objective + ?Sized>(
    obj: &O,
    p: &Path,
    mode: Reparam,
    interp: Interpolation,
) -> Result<Path> {
    let n = p.len();
    if n < 3 {
        return Err(Error::invalid("N", "a path needs at least 3 nodes"));
    }
    let chords = p.chords();
    let length: f64 = chords.iter().sum();
    if !(length >= 1e-14) {
        return Err(Error::DegeneratePath { length });
    }
    let curve: Vec<Vec<f64>> = match interp {
        Interpolation::Linear => p.nodes.clone(),
        Interpolation::CubicSpline => spline_resample(&chord_parameters(&p.nodes), &p.nodes, 16),
    };
    let inner = match mode {
        Reparam::EqualArc => equal_chords(&curve, n),
        Reparam::EnergyWeighted { kappa } => weighted_positions(&curve, obj, &p.energies, kappa, n, interp),
    };
    let mut nodes = Vec::with_capacity(n);
    nodes.push(p.nodes[0].clone());
    nodes.extend(inner);
    nodes.push(p.nodes[n - 1].clone());
    if nodes.len() != n {
        return Err(Error::DegeneratePath { length });
    }
    let mut energies = Vec::with_capacity(n);
    energies.push(p.energies[0]);
    for x in &nodes[1..n - 1] {
        energies.push(obj.energy(x));
    }
    energies.push(p.energies[n - 1]);
    let alpha = chord_parameters(&nodes);
    Ok(Path {
        nodes,
        energies,
        alpha,
    })
}

fn weighted_positions<O: Objective + ?Sized>(
    curve: &[Vec<f64>],
    obj: &O,
    node_energies: &[f64],
    kappa: f64,
    n: usize,
    interp: Interpolation,
) -> Vec<Vec<f64>> {
    let energies: Vec<f64> = match interp {
        Interpolation::Linear => node_energies.to_vec(),
        Interpolation::CubicSpline => curve.iter().map(|x| obj.energy(x)).collect(),
    };
    let (emin, emax) = energies
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
    let span = emax - emin;
    let w: Vec<f64> = energies
        .iter()
        .map(|e| 1.0 + if span > 0.0 { kappa * (e - emin) / span } else { 0.0 })
        .collect();
    let mut acc = vec![0.0];
    for (i, win) in curve.windows(2).enumerate() {
        let last = *acc.last().unwrap();
        acc.push(last + distance(&win[0], &win[1]) * 0.5 * (w[i] + w[i + 1]));
    }
    let total = *acc.last().unwrap();
    (1..n - 1)
        .map(|j| {
            let target = total * j as f64 / (n - 1) as f64;
            let seg = acc.partition_point(|&a| a <= target).clamp(1, curve.len() - 1) - 1;
            let len = acc[seg + 1] - acc[seg];
            let t = if len > 0.0 { (target - acc[seg]) / len } else { 0.0 };
            curve[seg]
                .iter()
                .zip(&curve[seg + 1])
                .map(|(a, b)| a + t * (b - a))
                .collect()
        })
        .collect()
}

/// Largest perpendicular gradient `|g - (g.t) t|_inf` over interior nodes.
pub fn perpendicular_residual<O: Objective + ?Sized>(obj: &O, p: &Path) -> f64 {
    (1..p.len() - 1)
        .map(|i| {
            let t = p.tangent(i);
            let mut g = obj.gradient(&p.nodes[i]);
            let c = dot(&g, &t);
            axpy(-c, &t, &mut g);
            norm_inf(&g)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct StringOptions {
    /// Convergence threshold on [`perpendicular_residual`].
    pub tol: f64,
    pub max_iters: usize,
    /// Base step; `None` uses `1 / spectral scale` at the first endpoint.
    pub step: Option<f64>,
    pub max_backtracks: usize,
    pub reparam: Reparam,
    pub interpolation: Interpolation,
    /// Saddle dynamics used to polish the top node.
    pub hisd: HisdOptions,
}

impl Default for StringOptions {
    fn default() -> Self {
        StringOptions {
            tol: 1e-6,
            max_iters: 100_000,
            step: None,
            max_backtracks: 30,
            reparam: Reparam::EqualArc,
            interpolation: Interpolation::Linear,
            hisd: HisdOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MepResult {
    #[serde(skip)]
    pub path: Path,
    pub ts_index: usize,
    #[serde(skip)]
    pub ts: Vec<f64>,
    pub ts_energy: f64,
    pub barrier_forward: f64,
    pub barrier_backward: f64,
    pub ts_lambda1: f64,
    pub ts_lambda2: f64,
    /// `|grad E|_inf` at the top node of the string, before polishing.
    pub top_grad_norm: f64,
    pub iterations: usize,
}

/// Iterates evolve/reparametrize until the perpendicular residual drops
/// below `tol`. Returns the path and the iteration count.
pub fn relax_string<O: Objective + ?Sized>(obj: &O, mut p: Path, opts: &StringOptions) -> Result<(Path, usize)> {
    let base = opts
        .step
        .unwrap_or_else(|| 1.0 / spectral_scale(obj, &p.nodes[0], opts.hisd.eig.rng_seed));
    let steps = StepSizes {
        base,
        max_backtracks: opts.max_backtracks,
    };
    p = reparametrize(obj, &p, opts.reparam, opts.interpolation)?;
    let mut it = 0;
    loop {
        let res = perpendicular_residual(obj, &p);
        if res < opts.tol {
            return Ok((p, it));
        }
        if it == opts.max_iters {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: res,
            });
        }
        it += 1;
        p = evolve_step(obj, &p, steps);
        p = reparametrize(obj, &p, opts.reparam, opts.interpolation)?;
    }
}

fn polish_top<O: Objective + ?Sized>(obj: &O, p: Path, iterations: usize, opts: &StringOptions) -> Result<MepResult> {
    let n = p.len();
    let top = p.top();
    let top_grad_norm = norm_inf(&obj.gradient(&p.nodes[top]));
    let tangent = p.tangent(top);
    let rec = match find_saddle(obj, 1, &p.nodes[top], Some(vec![tangent]), &opts.hisd) {
        Ok(r) => r,
        Err(Error::WrongIndex { record, .. }) => {
            return Err(Error::NotIndexOne {
                eigenvalues: record.lambda_spectrum,
            })
        }
        Err(e) => return Err(e),
    };
    let l1 = rec.lambda_spectrum[0];
    let l2 = rec.lambda_spectrum.get(1).copied().unwrap_or(f64::INFINITY);
    Ok(MepResult {
        ts_index: top,
        ts_energy: rec.energy,
        barrier_forward: rec.energy - p.energies[0],
        barrier_backward: rec.energy - p.energies[n - 1],
        ts_lambda1: l1,
        ts_lambda2: l2,
        ts: rec.x,
        path: p,
        top_grad_norm,
        iterations,
    })
}

/// Minimal energy path between two stationary points `a` and `b` with `n`
/// nodes, and its certified transition state.
pub fn find_mep<O: Objective + ?Sized>(obj: &O, a: &[f64], b: &[f64], n: usize, opts: &StringOptions) -> Result<MepResult> {
    if n < 8 {
        return Err(Error::invalid("N", "the string needs at least 8 nodes"));
    }
    check_endpoints(obj, a, b, opts)?;
    let p = Path::linear(obj, a, b, n)?;
    mep_from_path(obj, p, opts)
}

fn check_endpoints<O: Objective + ?Sized>(obj: &O, a: &[f64], b: &[f64], opts: &StringOptions) -> Result<()> {
    let limit = 10.0 * opts.hisd.tol_grad;
    for x in [a, b] {
        let g = norm_inf(&obj.gradient(x));
        if !(g < limit) {
            return Err(Error::NotStationary { grad_inf: g, limit });
        }
    }
    Ok(())
}

/// Like [`find_mep`] but starting from a given initial path, for endpoints
/// whose straight segment runs along a ridge.
pub fn mep_from_path<O: Objective + ?Sized>(obj: &O, p: Path, opts: &StringOptions) -> Result<MepResult> {
    if p.len() < 8 {
        return Err(Error::invalid("N", "the string needs at least 8 nodes"));
    }
    check_endpoints(obj, &p.nodes[0], &p.nodes[p.len() - 1], opts)?;
    let (p, it) = relax_string(obj, p, opts)?;
    polish_top(obj, p, it, opts)
}

/// Fine string between the two highest-energy interior nodes of `coarse`.
/// The returned path is the fine one.
pub fn refine_multiscale<O: Objective + ?Sized>(
    obj: &O,
    coarse: &Path,
    fine_n: usize,
    opts: &StringOptions,
) -> Result<MepResult> {
    if fine_n < 3 {
        return Err(Error::invalid("fineN", "needs at least 3 nodes"));
    }
    let n = coarse.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&x, &y| coarse.energies[y].total_cmp(&coarse.energies[x]));
    let (i, j) = (idx[0].min(idx[1]), idx[0].max(idx[1]));
    let p = Path::linear(obj, &coarse.nodes[i], &coarse.nodes[j], fine_n)?;
    let (p, it) = relax_string(obj, p, opts)?;
    let mut res = polish_top(obj, p, it, opts)?;
    // barriers relative to the original endpoints
    res.barrier_forward = res.ts_energy - coarse.energies[0];
    res.barrier_backward = res.ts_energy - coarse.energies[n - 1];
    Ok(res)
}
