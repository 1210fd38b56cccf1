//! Finite-difference Landau-de Gennes energy on the unit square.
//!
//! Interior nodes `(i, j)`, `1 <= i <= nx`, `1 <= j <= ny`, sit at
//! `(i hx, j hy)` with `hx = 1/(nx+1)`, `hy = 1/(ny+1)`; the ring of nodes
//! with `i` or `j` on the border carries Dirichlet data. The discrete energy is
//!
//! ```text
//! F = sum_edges (L1/2) |dQ|^2 (hy/hx or hx/hy)
//!   + sum_cells hx hy [ (L2/2) |div Q|^2 + (L3/2) Q_jk,i Q_ij,k ]
//!   + sum_nodes hx hy lambda^2 f_b(Q)
//! ```
//!
//! where edges are grid edges with at least one interior endpoint and cell
//! derivatives are averages of the two parallel edge differences. The field
//! is stored as `5 nx ny` components, row-major in `j` then `i`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::tensor::{
    biaxiality, bulk_energy_and_component_gradient, critical_points, metric_apply, metric_dot,
    BulkParams, QTensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    pub l1: f64,
    #[serde(default)]
    pub l2: f64,
    #[serde(default)]
    pub l3: f64,
}

impl Default for ElasticParams {
    fn default() -> Self {
        ElasticParams {
            l1: 1.0,
            l2: 0.0,
            l3: 0.0,
        }
    }
}

/// Dirichlet data on the four edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    Zero,
    Uniform(QTensor),
    /// `s (t t - I/3)` with `t` the edge tangent; corners take the traceless
    /// average of the two adjacent edge values. `None` uses `s_plus` of the
    /// bulk coefficients.
    Tangent { amplitude: Option<f64> },
}

#[derive(Debug, Clone)]
pub struct Domain {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    lambda2: f64,
    bulk: BulkParams,
    elastic: ElasticParams,
    boundary: BoundaryCondition,
    /// Padded `(nx+2)(ny+2)` array holding boundary values; interior zero.
    ring: Vec<f64>,
}

impl Domain {
    pub fn new(
        nx: usize,
        ny: usize,
        lambda2: f64,
        bulk: BulkParams,
        elastic: ElasticParams,
        boundary: BoundaryCondition,
    ) -> Result<Self> {
        if nx < 4 {
            return Err(Error::invalid("nx", "must be at least 4"));
        }
        if ny < 4 {
            return Err(Error::invalid("ny", "must be at least 4"));
        }
        if !(lambda2 > 0.0 && lambda2.is_finite()) {
            return Err(Error::invalid("lambda2", "must be positive"));
        }
        if !(elastic.l1 > 0.0) {
            return Err(Error::invalid("L1", "must be positive"));
        }
        if !(elastic.l2.is_finite() && elastic.l3.is_finite()) {
            return Err(Error::invalid("L2/L3", "must be finite"));
        }
        if !(bulk.a.is_finite() && bulk.b.is_finite() && bulk.c.is_finite()) || bulk.c < 0.0 {
            return Err(Error::invalid("c", "bulk coefficients must be finite with c >= 0"));
        }
        let boundary = match boundary {
            BoundaryCondition::Tangent { amplitude: None } => BoundaryCondition::Tangent {
                amplitude: Some(critical_points(&bulk)?.s_plus),
            },
            other => other,
        };
        let mut d = Domain {
            nx,
            ny,
            hx: 1.0 / (nx as f64 + 1.0),
            hy: 1.0 / (ny as f64 + 1.0),
            lambda2,
            bulk,
            elastic,
            boundary,
            ring: Vec::new(),
        };
        d.ring = d.build_ring();
        Ok(d)
    }

    /// Square `n x n` grid with tangent boundary data and one-constant elasticity.
    pub fn square_tangent(n: usize, lambda2: f64, bulk: BulkParams) -> Result<Self> {
        Domain::new(
            n,
            n,
            lambda2,
            bulk,
            ElasticParams::default(),
            BoundaryCondition::Tangent { amplitude: None },
        )
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }
    pub fn bulk(&self) -> &BulkParams {
        &self.bulk
    }
    pub fn elastic(&self) -> &ElasticParams {
        &self.elastic
    }
    pub fn boundary(&self) -> &BoundaryCondition {
        &self.boundary
    }
    pub fn len(&self) -> usize {
        5 * self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Sum of the nodal quadrature weights, `nx ny hx hy`.
    pub fn area(&self) -> f64 {
        (self.nx * self.ny) as f64 * self.hx * self.hy
    }
    pub fn cell_weight(&self) -> f64 {
        self.hx * self.hy
    }

    /// Offset of interior node `(i, j)` (1-based grid indices) in a field array.
    #[inline]
    pub fn node_offset(&self, i: usize, j: usize) -> usize {
        5 * ((j - 1) * self.nx + (i - 1))
    }

    #[inline]
    fn pad(&self, i: usize, j: usize) -> usize {
        5 * (j * (self.nx + 2) + i)
    }

    fn build_ring(&self) -> Vec<f64> {
        let (px, py) = (self.nx + 2, self.ny + 2);
        let mut ring = vec![0.0; 5 * px * py];
        for j in 0..py {
            for i in 0..px {
                let on_x = i == 0 || i == px - 1;
                let on_y = j == 0 || j == py - 1;
                if !(on_x || on_y) {
                    continue;
                }
                let q = self.boundary_value(on_x, on_y);
                let o = self.pad(i, j);
                ring[o..o + 5].copy_from_slice(&q.0);
            }
        }
        ring
    }

    /// Boundary tensor on a vertical edge (`on_x`), a horizontal edge (`on_y`)
    /// or a corner (both).
    fn boundary_value(&self, on_x: bool, on_y: bool) -> QTensor {
        match self.boundary {
            BoundaryCondition::Zero => QTensor::ZERO,
            BoundaryCondition::Uniform(q) => q,
            BoundaryCondition::Tangent { amplitude } => {
                let s = amplitude.unwrap_or(0.0);
                let horiz = QTensor::uniaxial(s, [1.0, 0.0, 0.0]);
                let vert = QTensor::uniaxial(s, [0.0, 1.0, 0.0]);
                match (on_x, on_y) {
                    (true, true) => horiz.add(&vert).scaled(0.5),
                    (true, false) => vert,
                    _ => horiz,
                }
            }
        }
    }

    /// Boundary or interior value at grid index `(i, j)`, `0 <= i <= nx+1`.
    pub fn value_at(&self, data: &[f64], i: usize, j: usize) -> QTensor {
        if i == 0 || j == 0 || i == self.nx + 1 || j == self.ny + 1 {
            QTensor::from_slice(&self.ring[self.pad(i, j)..])
        } else {
            QTensor::from_slice(&data[self.node_offset(i, j)..])
        }
    }

    fn padded(&self, data: &[f64]) -> Vec<f64> {
        let mut p = self.ring.clone();
        for j in 1..=self.ny {
            let src = self.node_offset(1, j);
            let dst = self.pad(1, j);
            p[dst..dst + 5 * self.nx].copy_from_slice(&data[src..src + 5 * self.nx]);
        }
        p
    }

    pub fn check_len(&self, data: &[f64]) -> Result<()> {
        if data.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values ({}x{}x5)", self.len(), self.nx, self.ny),
                found: format!("{} values", data.len()),
            });
        }
        Ok(())
    }

    pub fn free_energy(&self, data: &[f64]) -> Result<f64> {
        self.check_len(data)?;
        Ok(self.energy(data))
    }

    pub fn free_gradient(&self, data: &[f64]) -> Result<Vec<f64>> {
        self.check_len(data)?;
        Ok(self.gradient(data))
    }

    pub fn bulk_part(&self, data: &[f64]) -> f64 {
        let w = self.cell_weight() * self.lambda2;
        data.chunks_exact(5)
            .map(|q| bulk_energy_and_component_gradient(q, &self.bulk).0)
            .sum::<f64>()
            * w
    }

    pub fn bulk_part_gradient(&self, data: &[f64], g: &mut [f64]) {
        let w = self.cell_weight() * self.lambda2;
        for (q, gq) in data.chunks_exact(5).zip(g.chunks_exact_mut(5)) {
            let (_, d) = bulk_energy_and_component_gradient(q, &self.bulk);
            for c in 0..5 {
                gq[c] = w * d[c];
            }
        }
    }

    pub fn elastic_part(&self, data: &[f64]) -> f64 {
        let p = self.padded(data);
        let (nx, ny) = (self.nx, self.ny);
        let cx = 0.5 * self.elastic.l1 * self.hy / self.hx;
        let cy = 0.5 * self.elastic.l1 * self.hx / self.hy;
        let mut e = 0.0;
        let mut d = [0.0; 5];
        for j in 1..=ny {
            for i in 0..=nx {
                let (a, b) = (self.pad(i, j), self.pad(i + 1, j));
                for c in 0..5 {
                    d[c] = p[b + c] - p[a + c];
                }
                e += cx * metric_dot(&d, &d);
            }
        }
        for j in 0..=ny {
            for i in 1..=nx {
                let (a, b) = (self.pad(i, j), self.pad(i, j + 1));
                for c in 0..5 {
                    d[c] = p[b + c] - p[a + c];
                }
                e += cy * metric_dot(&d, &d);
            }
        }
        if self.has_anisotropic_elasticity() {
            for j in 0..=ny {
                for i in 0..=nx {
                    let (dx, dy) = self.cell_derivatives(&p, i, j);
                    e += self.cell_weight() * self.anisotropic_density(&dx, &dy).0;
                }
            }
        }
        e
    }

    /// Gradient of [`Domain::elastic_part`], written into `g` (overwrites).
    pub fn elastic_part_gradient(&self, data: &[f64], g: &mut [f64]) {
        let p = self.padded(data);
        let (nx, ny) = (self.nx, self.ny);
        let mut gp = vec![0.0; p.len()];
        let kx = self.elastic.l1 * self.hy / self.hx;
        let ky = self.elastic.l1 * self.hx / self.hy;
        let mut d = [0.0; 5];
        for j in 1..=ny {
            for i in 0..=nx {
                let (a, b) = (self.pad(i, j), self.pad(i + 1, j));
                for c in 0..5 {
                    d[c] = p[b + c] - p[a + c];
                }
                let gd = metric_apply(&d);
                for c in 0..5 {
                    gp[b + c] += kx * gd[c];
                    gp[a + c] -= kx * gd[c];
                }
            }
        }
        for j in 0..=ny {
            for i in 1..=nx {
                let (a, b) = (self.pad(i, j), self.pad(i, j + 1));
                for c in 0..5 {
                    d[c] = p[b + c] - p[a + c];
                }
                let gd = metric_apply(&d);
                for c in 0..5 {
                    gp[b + c] += ky * gd[c];
                    gp[a + c] -= ky * gd[c];
                }
            }
        }
        if self.has_anisotropic_elasticity() {
            let w = self.cell_weight();
            let (sx, sy) = (0.5 / self.hx, 0.5 / self.hy);
            for j in 0..=ny {
                for i in 0..=nx {
                    let (dx, dy) = self.cell_derivatives(&p, i, j);
                    let (_, px, py) = self.anisotropic_density(&dx, &dy);
                    let gx = project_components(&px);
                    let gy = project_components(&py);
                    let c00 = self.pad(i, j);
                    let c10 = self.pad(i + 1, j);
                    let c01 = self.pad(i, j + 1);
                    let c11 = self.pad(i + 1, j + 1);
                    for c in 0..5 {
                        let tx = w * sx * gx[c];
                        let ty = w * sy * gy[c];
                        gp[c10 + c] += tx - ty;
                        gp[c11 + c] += tx + ty;
                        gp[c00 + c] += -tx - ty;
                        gp[c01 + c] += -tx + ty;
                    }
                }
            }
        }
        for j in 1..=ny {
            let src = self.pad(1, j);
            let dst = self.node_offset(1, j);
            g[dst..dst + 5 * nx].copy_from_slice(&gp[src..src + 5 * nx]);
        }
    }

    fn has_anisotropic_elasticity(&self) -> bool {
        self.elastic.l2 != 0.0 || self.elastic.l3 != 0.0
    }

    /// Cell-centred x and y derivatives as full 3x3 matrices.
    fn cell_derivatives(&self, p: &[f64], i: usize, j: usize) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
        let c00 = &p[self.pad(i, j)..];
        let c10 = &p[self.pad(i + 1, j)..];
        let c01 = &p[self.pad(i, j + 1)..];
        let c11 = &p[self.pad(i + 1, j + 1)..];
        let mut dx = [0.0; 5];
        let mut dy = [0.0; 5];
        for c in 0..5 {
            dx[c] = (c10[c] - c00[c] + c11[c] - c01[c]) * 0.5 / self.hx;
            dy[c] = (c01[c] - c00[c] + c11[c] - c10[c]) * 0.5 / self.hy;
        }
        (QTensor(dx).matrix(), QTensor(dy).matrix())
    }

    /// L2/L3 density and its partial derivatives with respect to the entries
    /// of the two derivative matrices.
    fn anisotropic_density(
        &self,
        dx: &[[f64; 3]; 3],
        dy: &[[f64; 3]; 3],
    ) -> (f64, [[f64; 3]; 3], [[f64; 3]; 3]) {
        let (l2, l3) = (self.elastic.l2, self.elastic.l3);
        let d = [dx, dy];
        let mut px = [[0.0; 3]; 3];
        let mut py = [[0.0; 3]; 3];
        let mut e = 0.0;
        // (L2/2) sum_k (Q_xk,x + Q_yk,y)^2
        for k in 0..3 {
            let div = dx[0][k] + dy[1][k];
            e += 0.5 * l2 * div * div;
            px[0][k] += l2 * div;
            py[1][k] += l2 * div;
        }
        // (L3/2) sum_{j} sum_{i,k in {x,y}} Q_jk,i Q_ij,k
        for j in 0..3 {
            for i in 0..2 {
                for k in 0..2 {
                    e += 0.5 * l3 * d[i][j][k] * d[k][i][j];
                }
            }
        }
        for (m, pm) in [&mut px, &mut py].into_iter().enumerate() {
            for a in 0..3 {
                for b in 0..3 {
                    let mut t = 0.0;
                    if b < 2 {
                        t += d[b][m][a];
                    }
                    if a < 2 {
                        t += d[a][b][m];
                    }
                    pm[a][b] += 0.5 * l3 * t;
                }
            }
        }
        (e, px, py)
    }

    /// Gradient of the elastic energy at the zero interior field: the affine
    /// part contributed by the boundary data.
    pub fn elastic_affine(&self) -> Vec<f64> {
        let zero = vec![0.0; self.len()];
        let mut g = vec![0.0; self.len()];
        self.elastic_part_gradient(&zero, &mut g);
        g
    }

    /// Homogeneous elastic operator `A q` (the Hessian of the elastic energy).
    pub fn elastic_apply(&self, q: &[f64], affine: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.len()];
        self.elastic_part_gradient(q, &mut g);
        for (gi, bi) in g.iter_mut().zip(affine) {
            *gi -= bi;
        }
        g
    }

    pub fn zero_field(self: &Arc<Self>) -> QField {
        QField::zeros(self.clone())
    }

    /// Field built from a seed library entry.
    pub fn seed_field(self: &Arc<Self>, seed: &Seed, rng_seed: u64) -> QField {
        let s = match self.boundary {
            BoundaryCondition::Tangent { amplitude } => amplitude.unwrap_or(1.0),
            _ => critical_points(&self.bulk).map(|c| c.s_plus).unwrap_or(1.0),
        };
        let mut f = QField::zeros(self.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        for j in 1..=self.ny {
            for i in 1..=self.nx {
                let x = i as f64 * self.hx;
                let y = j as f64 * self.hy;
                let q = match *seed {
                    Seed::Isotropic => QTensor::ZERO,
                    Seed::Diagonal(Diagonal::D1) => QTensor::uniaxial(s, [1.0, 1.0, 0.0]),
                    Seed::Diagonal(Diagonal::D2) => QTensor::uniaxial(s, [1.0, -1.0, 0.0]),
                    Seed::Rotated(edge) => {
                        use std::f64::consts::{FRAC_PI_2, PI};
                        let theta = match edge {
                            Edge::Bottom => PI * y,
                            Edge::Top => -PI * y,
                            Edge::Left => FRAC_PI_2 + PI * x,
                            Edge::Right => FRAC_PI_2 - PI * x,
                        };
                        QTensor::uniaxial(s, [theta.cos(), theta.sin(), 0.0])
                    }
                    Seed::Random(sigma) => {
                        let normal = Normal::new(0.0, sigma.max(0.0)).unwrap();
                        QTensor([
                            normal.sample(&mut rng),
                            normal.sample(&mut rng),
                            normal.sample(&mut rng),
                            normal.sample(&mut rng),
                            normal.sample(&mut rng),
                        ])
                    }
                };
                let o = self.node_offset(i, j);
                f.data[o..o + 5].copy_from_slice(&q.0);
            }
        }
        f
    }

    /// Whether the grid admits the symmetries of the square.
    pub fn is_square(&self) -> bool {
        self.nx == self.ny
    }

    /// Image of a field under element `g` of the symmetry group of the square
    /// (`g` in `0..8`: four rotations, then the same composed with the mirror
    /// `x -> -x`), optionally composed with the mirror `z -> -z`.
    ///
    /// Requires a square grid.
    pub fn transform(&self, data: &[f64], g: usize, z_mirror: bool) -> Vec<f64> {
        assert!(self.is_square(), "symmetry transforms need nx == ny");
        let r2 = square_group_element(g);
        let r3 = [
            [r2[0][0] as f64, r2[0][1] as f64, 0.0],
            [r2[1][0] as f64, r2[1][1] as f64, 0.0],
            [0.0, 0.0, if z_mirror { -1.0 } else { 1.0 }],
        ];
        let n = self.nx as i64;
        let mut out = vec![0.0; data.len()];
        for j in 1..=self.ny {
            for i in 1..=self.nx {
                // doubled coordinates about the centre
                let u = 2 * i as i64 - (n + 1);
                let v = 2 * j as i64 - (n + 1);
                // preimage R^T (u, v)
                let up = r2[0][0] * u + r2[1][0] * v;
                let vp = r2[0][1] * u + r2[1][1] * v;
                let ip = ((up + n + 1) / 2) as usize;
                let jp = ((vp + n + 1) / 2) as usize;
                let src = QTensor::from_slice(&data[self.node_offset(ip, jp)..]);
                let q = src.rotated(&r3);
                let o = self.node_offset(i, j);
                out[o..o + 5].copy_from_slice(&q.0);
            }
        }
        out
    }

    /// Projects onto fields invariant under the square group and the `z`
    /// mirror, the symmetry class of the well order reconstruction solution.
    pub fn symmetrize(&self, data: &mut [f64]) {
        let mut acc = vec![0.0; data.len()];
        for g in 0..8 {
            for z in [false, true] {
                let t = self.transform(data, g, z);
                for (a, b) in acc.iter_mut().zip(&t) {
                    *a += b;
                }
            }
        }
        for (d, a) in data.iter_mut().zip(&acc) {
            *d = a / 16.0;
        }
    }
}

/// Projects a derivative with respect to full matrix entries onto the five
/// stored components.
fn project_components(p: &[[f64; 3]; 3]) -> [f64; 5] {
    [
        p[0][0] - p[2][2],
        p[0][1] + p[1][0],
        p[0][2] + p[2][0],
        p[1][1] - p[2][2],
        p[1][2] + p[2][1],
    ]
}

fn square_group_element(g: usize) -> [[i64; 2]; 2] {
    let rot = [[[1, 0], [0, 1]], [[0, -1], [1, 0]], [[-1, 0], [0, -1]], [[0, 1], [-1, 0]]];
    let r = rot[g % 4];
    if g < 4 {
        r
    } else {
        // r * diag(-1, 1)
        [[-r[0][0], r[0][1]], [-r[1][0], r[1][1]]]
    }
}

impl Objective for Domain {
    fn dim(&self) -> usize {
        self.len()
    }

    fn energy(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.len());
        self.elastic_part(x) + self.bulk_part(x)
    }

    fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        debug_assert_eq!(x.len(), self.len());
        let mut gb = vec![0.0; x.len()];
        self.bulk_part_gradient(x, &mut gb);
        self.elastic_part_gradient(x, g);
        for (gi, b) in g.iter_mut().zip(&gb) {
            *gi += b;
        }
    }

    fn symmetry_images(&self, x: &[f64]) -> Vec<Vec<f64>> {
        if !self.is_square() {
            return Vec::new();
        }
        (1..8).map(|g| self.transform(x, g, false)).collect()
    }
}

/// Named initial conditions for the square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Seed {
    /// Zero interior.
    Isotropic,
    /// Uniform director along one diagonal.
    Diagonal(Diagonal),
    /// Director rotating by pi between two opposite edges, anchored on `Edge`.
    Rotated(Edge),
    /// Gaussian noise of the given standard deviation per component.
    Random(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Diagonal {
    D1,
    D2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Edge {
    Bottom,
    Top,
    Left,
    Right,
}

impl std::str::FromStr for Seed {
    type Err = Error;

    /// Accepts `isotropic`, `diagonal(d1)`, `diagonal(d2)`,
    /// `rotated(bottom|top|left|right)` and `random(<sigma>)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || Error::invalid("seed", format!("unrecognized seed `{s}`"));
        if s == "isotropic" {
            return Ok(Seed::Isotropic);
        }
        let (name, arg) = s
            .strip_suffix(')')
            .and_then(|r| r.split_once('('))
            .ok_or_else(bad)?;
        match name {
            "diagonal" => match arg {
                "d1" => Ok(Seed::Diagonal(Diagonal::D1)),
                "d2" => Ok(Seed::Diagonal(Diagonal::D2)),
                _ => Err(bad()),
            },
            "rotated" => match arg {
                "bottom" => Ok(Seed::Rotated(Edge::Bottom)),
                "top" => Ok(Seed::Rotated(Edge::Top)),
                "left" => Ok(Seed::Rotated(Edge::Left)),
                "right" => Ok(Seed::Rotated(Edge::Right)),
                _ => Err(bad()),
            },
            "random" => arg.parse::<f64>().map(Seed::Random).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

/// A discretized Q-tensor field tied to its domain.
#[derive(Debug, Clone)]
pub struct QField {
    domain: Arc<Domain>,
    data: Vec<f64>,
}

impl QField {
    pub fn zeros(domain: Arc<Domain>) -> Self {
        let n = domain.len();
        QField {
            domain,
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(domain: Arc<Domain>, data: Vec<f64>) -> Result<Self> {
        domain.check_len(&data)?;
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("field", "entries must be finite"));
        }
        Ok(QField { domain, data })
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn energy(&self) -> f64 {
        self.domain.energy(&self.data)
    }

    pub fn gradient(&self) -> QField {
        QField {
            domain: self.domain.clone(),
            data: self.domain.gradient(&self.data),
        }
    }

    pub fn hessian_vec(&self, v: &QField, l: f64) -> Result<QField> {
        self.domain.check_len(v.as_slice())?;
        if !(l > 0.0) {
            return Err(Error::invalid("l", "finite-difference length must be positive"));
        }
        Ok(QField {
            domain: self.domain.clone(),
            data: self.domain.hessian_vec(&self.data, &v.data, l),
        })
    }

    /// Tensor at grid index `(i, j)`, boundary ring included.
    pub fn tensor_at(&self, i: usize, j: usize) -> QTensor {
        self.domain.value_at(&self.data, i, j)
    }
}

/// Magnitude of the in-plane (xy-block) traceless part,
/// `sqrt(((Q11 - Q22)/2)^2 + Q12^2)`.
pub fn planar_order(q: &QTensor) -> f64 {
    let d = 0.5 * (q.0[0] - q.0[3]);
    (d * d + q.0[1] * q.0[1]).sqrt()
}

/// Profile of a field along both diagonals of a square grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalProfile {
    pub max_biaxiality: f64,
    pub max_planar_order: f64,
    pub max_norm: f64,
    /// Maxima over the whole interior, for normalization.
    pub field_max_planar_order: f64,
    pub field_max_norm: f64,
}

pub fn diagonal_profile(f: &QField) -> DiagonalProfile {
    let d = f.domain();
    let n = d.nx().min(d.ny());
    let mut prof = DiagonalProfile {
        max_biaxiality: 0.0,
        max_planar_order: 0.0,
        max_norm: 0.0,
        field_max_planar_order: 0.0,
        field_max_norm: 0.0,
    };
    for k in 1..=n {
        for q in [f.tensor_at(k, k), f.tensor_at(k, n + 1 - k)] {
            prof.max_biaxiality = prof.max_biaxiality.max(biaxiality(&q));
            prof.max_planar_order = prof.max_planar_order.max(planar_order(&q));
            prof.max_norm = prof.max_norm.max(q.norm_sq().sqrt());
        }
    }
    for j in 1..=d.ny() {
        for i in 1..=d.nx() {
            let q = f.tensor_at(i, j);
            prof.field_max_planar_order = prof.field_max_planar_order.max(planar_order(&q));
            prof.field_max_norm = prof.field_max_norm.max(q.norm_sq().sqrt());
        }
    }
    prof
}
