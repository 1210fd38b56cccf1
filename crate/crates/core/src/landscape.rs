//! Solution landscapes: stationary points connected by downward and upward
//! saddle searches.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hisd::{find_saddle, verify_index, HisdOptions};
use crate::objective::Objective;
use crate::vecops::{axpy, distance, norm2};

/// A verified stationary point.
#[derive(Debug, Clone)]
pub struct SaddleRecord {
    pub id: usize,
    pub x: Vec<f64>,
    pub energy: f64,
    pub grad_inf: f64,
    pub morse_index: usize,
    /// Lowest Hessian eigenvalues, ascending (at least `morse_index + 2` when
    /// the dimension allows).
    pub lambda_spectrum: Vec<f64>,
    /// Eigenvectors matching `lambda_spectrum`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl SaddleRecord {
    /// Verifies a point as stationary and computes its index.
    pub fn verify<O: Objective + ?Sized>(obj: &O, x: Vec<f64>, tol_grad: f64, opts: &HisdOptions) -> Result<Self> {
        let g = crate::vecops::norm_inf(&obj.gradient(&x));
        let limit = 10.0 * tol_grad;
        if !(g < limit) {
            return Err(Error::NotStationary { grad_inf: g, limit });
        }
        let rep = verify_index(obj, &x, 0, None, &opts.eig)?;
        Ok(SaddleRecord {
            id: 0,
            energy: obj.energy(&x),
            grad_inf: g,
            morse_index: rep.morse_index,
            lambda_spectrum: rep.eigenvalues,
            eigenvectors: rep.eigenvectors,
            x,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Downward,
    Upward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
    /// Sign of the initial perturbation, `+1` or `-1`.
    pub sign: i8,
}

/// Result of one branch of a search.
#[derive(Debug)]
pub struct SearchOutcome {
    pub sign: i8,
    pub k: usize,
    pub result: Result<SaddleRecord>,
}

fn perturbation_size(x: &[f64], eps: f64) -> f64 {
    eps * norm2(x).max(1.0)
}

fn eigvecs_at<O: Objective + ?Sized>(
    obj: &O,
    rec: &SaddleRecord,
    count: usize,
    opts: &HisdOptions,
) -> Result<Vec<Vec<f64>>> {
    if rec.eigenvectors.len() >= count {
        return Ok(rec.eigenvectors[..count].to_vec());
    }
    let rep = crate::eigen::smallest_eigs(obj, &rec.x, count, None, &opts.eig)?;
    Ok(rep.eigenvectors)
}

/// Index-`k` searches from `x +- eps v_{k+1}` with directions `v_1..v_k` of
/// the parent.
pub fn downward_search<O: Objective + ?Sized>(
    obj: &O,
    parent: &SaddleRecord,
    k: usize,
    eps: f64,
    opts: &HisdOptions,
) -> Result<Vec<SearchOutcome>> {
    if k >= parent.morse_index {
        return Err(Error::invalid("k", "must be below the parent index"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", "must be positive"));
    }
    let vecs = eigvecs_at(obj, parent, k + 1, opts)?;
    let size = perturbation_size(&parent.x, eps);
    let mut out = Vec::with_capacity(2);
    for sign in [1i8, -1] {
        let mut x0 = parent.x.clone();
        axpy(sign as f64 * size, &vecs[k], &mut x0);
        let result = find_saddle(obj, k, &x0, Some(vecs[..k].to_vec()), opts);
        out.push(SearchOutcome { sign, k, result });
    }
    Ok(out)
}

/// Index-`k` searches upward from a lower-index child: the directions are the
/// child's unstable eigenvectors followed by its lowest stable ones, and the
/// start is perturbed along the last of them.
pub fn upward_search<O: Objective + ?Sized>(
    obj: &O,
    child: &SaddleRecord,
    k: usize,
    eps: f64,
    opts: &HisdOptions,
) -> Result<Vec<SearchOutcome>> {
    if k <= child.morse_index {
        return Err(Error::invalid("k", "must exceed the child index"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", "must be positive"));
    }
    let vecs = eigvecs_at(obj, child, k, opts)?;
    let size = perturbation_size(&child.x, eps);
    let mut out = Vec::with_capacity(2);
    for sign in [1i8, -1] {
        let mut x0 = child.x.clone();
        axpy(sign as f64 * size, &vecs[k - 1], &mut x0);
        let result = find_saddle(obj, k, &x0, Some(vecs.clone()), opts);
        out.push(SearchOutcome { sign, k, result });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct LandscapeOptions {
    /// Perturbation size relative to `max(1, |x|)`.
    pub eps: f64,
    pub hisd: HisdOptions,
    pub upward: bool,
    /// Highest index targeted by upward searches.
    pub max_index: usize,
    pub max_nodes: usize,
    pub max_searches: usize,
    /// Compare fields modulo [`Objective::symmetry_images`].
    pub use_symmetry: bool,
    /// Energy tolerance factor: `|dE| < tol_energy (1 + |E|)`.
    pub tol_energy: f64,
    /// Relative field distance tolerance.
    pub tol_x: f64,
}

impl Default for LandscapeOptions {
    fn default() -> Self {
        LandscapeOptions {
            eps: 1e-2,
            hisd: HisdOptions::default(),
            upward: false,
            max_index: 4,
            max_nodes: 200,
            max_searches: 2000,
            use_symmetry: false,
            tol_energy: 1e-8,
            tol_x: 1e-4,
        }
    }
}

/// A search that did not produce a node.
#[derive(Debug, Clone, Serialize)]
pub struct FailedSearch {
    pub from: usize,
    pub k: usize,
    pub sign: i8,
    pub kind: EdgeKind,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct LandscapeGraph {
    pub nodes: Vec<SaddleRecord>,
    pub edges: Vec<Edge>,
    pub failures: Vec<FailedSearch>,
    pub searches: usize,
    /// Set when a budget stopped the exploration early.
    pub truncated: bool,
}

impl LandscapeGraph {
    /// Nodes with the given Morse index.
    pub fn with_index(&self, index: usize) -> impl Iterator<Item = &SaddleRecord> {
        self.nodes.iter().filter(move |n| n.morse_index == index)
    }

    /// `BudgetExceeded` for a truncated graph.
    pub fn check_budget(&self) -> Result<()> {
        if self.truncated {
            Err(Error::BudgetExceeded {
                nodes: self.nodes.len(),
                searches: self.searches,
            })
        } else {
            Ok(())
        }
    }
}

/// Distance relative to `max(1, |a|, |b|)`, so states near the origin compare
/// absolutely.
fn relative_distance(a: &[f64], b: &[f64]) -> f64 {
    distance(a, b) / norm2(a).max(norm2(b)).max(1.0)
}

/// Duplicate predicate of the landscape assembler.
pub fn same_state<O: Objective + ?Sized>(obj: &O, a: &SaddleRecord, b: &SaddleRecord, opts: &LandscapeOptions) -> bool {
    let e_scale = 1.0 + a.energy.abs().max(b.energy.abs());
    if (a.energy - b.energy).abs() >= opts.tol_energy * e_scale {
        return false;
    }
    if relative_distance(&a.x, &b.x) < opts.tol_x {
        return true;
    }
    opts.use_symmetry
        && obj
            .symmetry_images(&b.x)
            .iter()
            .any(|img| relative_distance(&a.x, img) < opts.tol_x)
}

/// Breadth-first landscape construction from a verified seed.
///
/// Every node is searched downward to every lower index (both signs), and
/// upward up to `max_index` when enabled. Node ids are assigned at the end
/// by descending index, ascending energy and discovery order.
pub fn build_landscape<O: Objective + ?Sized>(
    obj: &O,
    seed: SaddleRecord,
    opts: &LandscapeOptions,
) -> Result<LandscapeGraph> {
    let mut nodes = vec![seed];
    let mut edges: Vec<Edge> = Vec::new();
    let mut failures = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    let mut searches = 0;
    let mut truncated = false;

    'outer: while let Some(cur) = queue.pop_front() {
        let parent = nodes[cur].clone();
        let mut plan: Vec<(EdgeKind, usize)> = (0..parent.morse_index)
            .rev()
            .map(|k| (EdgeKind::Downward, k))
            .collect();
        if opts.upward {
            plan.extend((parent.morse_index + 1..=opts.max_index).map(|k| (EdgeKind::Upward, k)));
        }
        for (kind, k) in plan {
            if searches + 2 > opts.max_searches {
                truncated = true;
                break 'outer;
            }
            searches += 2;
            let outcomes = match kind {
                EdgeKind::Downward => downward_search(obj, &parent, k, opts.eps, &opts.hisd),
                EdgeKind::Upward => upward_search(obj, &parent, k, opts.eps, &opts.hisd),
            };
            let outcomes = match outcomes {
                Ok(o) => o,
                Err(e) => {
                    failures.push(FailedSearch {
                        from: cur,
                        k,
                        sign: 0,
                        kind,
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            for SearchOutcome { sign, k, result } in outcomes {
                let rec = match result {
                    Ok(r) => r,
                    Err(Error::WrongIndex { record, .. }) if index_fits(kind, &parent, &record) => *record,
                    Err(e) => {
                        failures.push(FailedSearch {
                            from: cur,
                            k,
                            sign,
                            kind,
                            message: e.to_string(),
                        });
                        continue;
                    }
                };
                let target = match nodes.iter().position(|n| same_state(obj, n, &rec, opts)) {
                    Some(i) => i,
                    None => {
                        if nodes.len() == opts.max_nodes {
                            truncated = true;
                            break 'outer;
                        }
                        nodes.push(rec);
                        queue.push_back(nodes.len() - 1);
                        nodes.len() - 1
                    }
                };
                if target == cur {
                    continue;
                }
                let edge = Edge {
                    from: cur,
                    to: target,
                    kind,
                    sign,
                };
                if !edges.contains(&edge) {
                    edges.push(edge);
                }
            }
        }
    }

    // deterministic ids
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| {
        nodes[b]
            .morse_index
            .cmp(&nodes[a].morse_index)
            .then(nodes[a].energy.total_cmp(&nodes[b].energy))
            .then(a.cmp(&b))
    });
    let mut new_id = vec![0; nodes.len()];
    for (id, &old) in order.iter().enumerate() {
        new_id[old] = id;
    }
    let mut sorted: Vec<SaddleRecord> = order.iter().map(|&i| nodes[i].clone()).collect();
    for (id, n) in sorted.iter_mut().enumerate() {
        n.id = id;
    }
    for e in &mut edges {
        e.from = new_id[e.from];
        e.to = new_id[e.to];
    }
    edges.sort_by_key(|e| (e.from, e.to, e.kind == EdgeKind::Upward, -e.sign));
    for f in &mut failures {
        f.from = new_id[f.from];
    }
    Ok(LandscapeGraph {
        nodes: sorted,
        edges,
        failures,
        searches,
        truncated,
    })
}

/// Whether a record of unexpected index still respects the edge direction.
fn index_fits(kind: EdgeKind, parent: &SaddleRecord, rec: &SaddleRecord) -> bool {
    match kind {
        EdgeKind::Downward => rec.morse_index < parent.morse_index,
        EdgeKind::Upward => rec.morse_index > parent.morse_index,
    }
}
