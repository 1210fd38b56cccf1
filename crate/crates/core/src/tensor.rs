//! Pointwise Q-tensor algebra.
//!
//! A [`QTensor`] stores the five independent components of a traceless
//! symmetric 3x3 matrix,
//!
//! ```text
//!     [ q1  q2  q3        ]
//!     [ q2  q4  q5        ]
//!     [ q3  q5  -q1 - q4  ]
//! ```
//!
//! so tracelessness and symmetry hold by construction. The Frobenius inner
//! product in component space is `<P, Q> = p^T G q` with the metric [`METRIC`].

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub type Mat3 = [[f64; 3]; 3];

/// Frobenius metric in component space: `|Q|^2 = q^T G q`.
pub const METRIC: [[f64; 5]; 5] = [
    [2.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 2.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 2.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 2.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 2.0],
];

/// `G q` for the component metric.
#[inline]
pub fn metric_apply(q: &[f64]) -> [f64; 5] {
    [
        2.0 * q[0] + q[3],
        2.0 * q[1],
        2.0 * q[2],
        q[0] + 2.0 * q[3],
        2.0 * q[4],
    ]
}

/// `p^T G q`
#[inline]
pub fn metric_dot(p: &[f64], q: &[f64]) -> f64 {
    2.0 * (p[0] * q[0] + p[1] * q[1] + p[2] * q[2] + p[3] * q[3] + p[4] * q[4])
        + p[0] * q[3]
        + p[3] * q[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QTensor(pub [f64; 5]);

impl QTensor {
    pub const ZERO: QTensor = QTensor([0.0; 5]);

    pub fn new(q1: f64, q2: f64, q3: f64, q4: f64, q5: f64) -> Self {
        QTensor([q1, q2, q3, q4, q5])
    }

    pub fn from_slice(q: &[f64]) -> Self {
        QTensor([q[0], q[1], q[2], q[3], q[4]])
    }

    /// Projects an arbitrary 3x3 matrix onto the traceless symmetric space.
    pub fn from_matrix(m: &Mat3) -> Self {
        let tr3 = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
        QTensor([
            m[0][0] - tr3,
            0.5 * (m[0][1] + m[1][0]),
            0.5 * (m[0][2] + m[2][0]),
            m[1][1] - tr3,
            0.5 * (m[1][2] + m[2][1]),
        ])
    }

    /// `s (n n - I/3)`; `n` is normalized internally.
    pub fn uniaxial(s: f64, n: [f64; 3]) -> Self {
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        let n = [n[0] / len, n[1] / len, n[2] / len];
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = s * n[i] * n[j];
            }
        }
        QTensor::from_matrix(&m)
    }

    pub fn matrix(&self) -> Mat3 {
        let [q1, q2, q3, q4, q5] = self.0;
        [[q1, q2, q3], [q2, q4, q5], [q3, q5, -q1 - q4]]
    }

    /// `|Q|^2 = tr Q^2`
    pub fn norm_sq(&self) -> f64 {
        metric_dot(&self.0, &self.0)
    }

    pub fn frobenius_dot(&self, other: &QTensor) -> f64 {
        metric_dot(&self.0, &other.0)
    }

    pub fn tr_cube(&self) -> f64 {
        let m = self.matrix();
        let m2 = matmul(&m, &m);
        (0..3)
            .map(|i| (0..3).map(|k| m2[i][k] * m[k][i]).sum::<f64>())
            .sum()
    }

    /// `R Q R^T`
    pub fn rotated(&self, r: &Mat3) -> QTensor {
        let m = self.matrix();
        let rm = matmul(r, &m);
        let rt = transpose(r);
        QTensor::from_matrix(&matmul(&rm, &rt))
    }

    pub fn scaled(&self, s: f64) -> QTensor {
        QTensor(self.0.map(|x| s * x))
    }

    pub fn add(&self, other: &QTensor) -> QTensor {
        let mut out = self.0;
        for (o, b) in out.iter_mut().zip(other.0) {
            *o += b;
        }
        QTensor(out)
    }

    pub fn eigen(&self) -> ([f64; 3], Mat3) {
        sym_eigen3(&self.matrix())
    }
}

pub fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

/// Bulk coefficients of `f_b = (a/2)|Q|^2 - (b/3) tr Q^3 + (c/4)|Q|^4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl BulkParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let p = BulkParams { a, b, c };
        p.validate()?;
        Ok(p)
    }

    /// Requires `b > 0` and `c > 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite() && self.c.is_finite()) {
            return Err(Error::invalid("a,b,c", "bulk coefficients must be finite"));
        }
        if self.b <= 0.0 {
            return Err(Error::invalid("b", "must be positive"));
        }
        if self.c <= 0.0 {
            return Err(Error::invalid("c", "must be positive"));
        }
        Ok(())
    }

    /// Bulk energy restricted to uniaxial tensors `s (n n - I/3)`.
    pub fn uniaxial_energy(&self, s: f64) -> f64 {
        self.a * s * s / 3.0 - 2.0 * self.b * s.powi(3) / 27.0 + self.c * s.powi(4) / 9.0
    }

    /// `d/ds` of [`BulkParams::uniaxial_energy`].
    pub fn uniaxial_derivative(&self, s: f64) -> f64 {
        2.0 * self.a * s / 3.0 - 2.0 * self.b * s * s / 9.0 + 4.0 * self.c * s.powi(3) / 9.0
    }
}

pub fn bulk_energy(q: &QTensor, p: &BulkParams) -> f64 {
    let n2 = q.norm_sq();
    0.5 * p.a * n2 - p.b / 3.0 * q.tr_cube() + 0.25 * p.c * n2 * n2
}

/// Tensor gradient `aQ - b(Q^2 - tr(Q^2)/3 I) + c|Q|^2 Q`.
///
/// Its Frobenius product with a traceless direction `D` is the directional
/// derivative of [`bulk_energy`] along `D`.
pub fn bulk_gradient(q: &QTensor, p: &BulkParams) -> QTensor {
    let m = q.matrix();
    let m2 = matmul(&m, &m);
    let n2 = q.norm_sq();
    let lin = p.a + p.c * n2;
    let mut g = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = lin * m[i][j] - p.b * m2[i][j];
        }
    }
    QTensor::from_matrix(&g)
}

/// Bulk energy density and its gradient with respect to the five stored
/// components (not the tensor gradient; see [`bulk_gradient`]).
#[inline]
pub fn bulk_energy_and_component_gradient(q: &[f64], p: &BulkParams) -> (f64, [f64; 5]) {
    let [q1, q2, q3, q4, q5] = [q[0], q[1], q[2], q[3], q[4]];
    let q6 = -q1 - q4;
    let n2 = metric_dot(q, q);
    // Q^2 entries needed for both tr Q^3 and the gradient.
    let s11 = q1 * q1 + q2 * q2 + q3 * q3;
    let s12 = q1 * q2 + q2 * q4 + q3 * q5;
    let s13 = q1 * q3 + q2 * q5 + q3 * q6;
    let s22 = q2 * q2 + q4 * q4 + q5 * q5;
    let s23 = q2 * q3 + q4 * q5 + q5 * q6;
    let s33 = q3 * q3 + q5 * q5 + q6 * q6;
    let tr3 = s11 * q1 + s22 * q4 + s33 * q6 + 2.0 * (s12 * q2 + s13 * q3 + s23 * q5);
    let e = 0.5 * p.a * n2 - p.b / 3.0 * tr3 + 0.25 * p.c * n2 * n2;
    // M = (a + c|Q|^2) Q - b Q^2; component gradient is the projection of M
    // onto the basis matrices E_c.
    let lin = p.a + p.c * n2;
    let m11 = lin * q1 - p.b * s11;
    let m12 = lin * q2 - p.b * s12;
    let m13 = lin * q3 - p.b * s13;
    let m22 = lin * q4 - p.b * s22;
    let m23 = lin * q5 - p.b * s23;
    let m33 = lin * q6 - p.b * s33;
    (
        e,
        [
            m11 - m33,
            2.0 * m12,
            2.0 * m13,
            m22 - m33,
            2.0 * m23,
        ],
    )
}

/// Biaxiality parameter `1 - 6 (tr Q^3)^2 / (tr Q^2)^3`, clamped to [0, 1].
///
/// Returns 0 when `|Q|^2 < EPS_ISO`.
pub fn biaxiality(q: &QTensor) -> f64 {
    let n2 = q.norm_sq();
    if n2 < EPS_ISO {
        return 0.0;
    }
    let t3 = q.tr_cube();
    (1.0 - 6.0 * t3 * t3 / (n2 * n2 * n2)).clamp(0.0, 1.0)
}

pub const EPS_ISO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    Isotropic,
    /// `Q = s (n n - I/3)`
    Uniaxial { s: f64, n: [f64; 3] },
    /// Eigenvalues in ascending order.
    Biaxial { eigenvalues: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub phase: Phase,
    pub eigenvalues: [f64; 3],
    /// Every eigenvalue lies in the open interval (-1/3, 2/3).
    pub physical: bool,
}

pub fn eig_classify(q: &QTensor, tol: f64) -> Classification {
    assert!(tol > 0.0, "classification tolerance must be positive");
    let (ev, vecs) = q.eigen();
    let physical = ev.iter().all(|&l| l > -1.0 / 3.0 && l < 2.0 / 3.0);
    let gap_lo = ev[1] - ev[0];
    let gap_hi = ev[2] - ev[1];
    let phase = if ev[2] - ev[0] < tol {
        Phase::Isotropic
    } else if gap_lo < tol || gap_hi < tol {
        // the distinct eigenvalue carries the director
        let idx = if gap_lo < tol { 2 } else { 0 };
        let n = [vecs[0][idx], vecs[1][idx], vecs[2][idx]];
        Phase::Uniaxial {
            s: 1.5 * ev[idx],
            n,
        }
    } else {
        Phase::Biaxial { eigenvalues: ev }
    };
    Classification {
        phase,
        eigenvalues: ev,
        physical,
    }
}

/// Closed-form eigendecomposition of a symmetric 3x3 matrix.
///
/// Eigenvalues come from the trigonometric Cardano formula and are returned in
/// ascending order; eigenvectors are the columns of the returned matrix. The
/// best-separated eigenvalue gets its vector from a cross product of shifted
/// rows; the remaining pair is resolved by a 2x2 rotation inside the
/// orthogonal complement.
pub fn sym_eigen3(a: &Mat3) -> ([f64; 3], Mat3) {
    let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let d0 = a[0][0] - q;
    let d1 = a[1][1] - q;
    let d2 = a[2][2] - q;
    let p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1;
    let scale = a.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    if p2 <= (1e-30 * scale * scale).max(f64::MIN_POSITIVE) {
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        return ([q, q, q], id);
    }
    let p = (p2 / 6.0).sqrt();
    let b = [
        [d0 / p, a[0][1] / p, a[0][2] / p],
        [a[1][0] / p, d1 / p, a[1][2] / p],
        [a[2][0] / p, a[2][1] / p, d2 / p],
    ];
    let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (0.5 * det_b).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let mid = 3.0 * q - hi - lo;

    // Resolve the eigenvalue farthest from the other two first.
    let (first, first_idx) = if hi - mid >= mid - lo {
        (hi, 2)
    } else {
        (lo, 0)
    };
    let v1 = null_vector(a, first);
    let (u, w) = complement_basis(&v1);
    let au = mat_vec(a, &u);
    let aw = mat_vec(a, &w);
    let m00 = dot3(&u, &au);
    let m01 = dot3(&u, &aw);
    let m11 = dot3(&w, &aw);
    // 2x2 symmetric eigenproblem by a Jacobi rotation
    let theta = 0.5 * (2.0 * m01).atan2(m00 - m11);
    let (c, s) = (theta.cos(), theta.sin());
    let e_a = c * c * m00 + 2.0 * c * s * m01 + s * s * m11;
    let e_b = s * s * m00 - 2.0 * c * s * m01 + c * c * m11;
    let va = [c * u[0] + s * w[0], c * u[1] + s * w[1], c * u[2] + s * w[2]];
    let vb = [-s * u[0] + c * w[0], -s * u[1] + c * w[1], -s * u[2] + c * w[2]];
    let (lo2, vlo2, hi2, vhi2) = if e_a <= e_b {
        (e_a, va, e_b, vb)
    } else {
        (e_b, vb, e_a, va)
    };
    let (ev, cols) = if first_idx == 2 {
        ([lo2, hi2, first], [vlo2, vhi2, v1])
    } else {
        ([first, lo2, hi2], [v1, vlo2, vhi2])
    };
    let mut vecs = [[0.0; 3]; 3];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..3 {
            vecs[i][j] = col[i];
        }
    }
    (ev, vecs)
}

fn mat_vec(a: &Mat3, v: &[f64; 3]) -> [f64; 3] {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn null_vector(a: &Mat3, lambda: f64) -> [f64; 3] {
    let r = [
        [a[0][0] - lambda, a[0][1], a[0][2]],
        [a[1][0], a[1][1] - lambda, a[1][2]],
        [a[2][0], a[2][1], a[2][2] - lambda],
    ];
    let candidates = [cross(&r[0], &r[1]), cross(&r[0], &r[2]), cross(&r[1], &r[2])];
    let best = candidates
        .iter()
        .max_by(|x, y| dot3(x, x).total_cmp(&dot3(y, y)))
        .copied()
        .unwrap();
    let n = dot3(&best, &best).sqrt();
    if n == 0.0 {
        return [1.0, 0.0, 0.0];
    }
    [best[0] / n, best[1] / n, best[2] / n]
}

fn complement_basis(v: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let helper = if v[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let mut u = cross(v, &helper);
    let n = dot3(&u, &u).sqrt();
    u = [u[0] / n, u[1] / n, u[2] / n];
    let w = cross(v, &u);
    (u, w)
}

/// Stability of a bulk critical point, as a function of temperature regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    GlobalMinimizer,
    LocalMinimizer,
    Unstable,
}

/// Temperature regime of the bulk coefficient `a = A (T - T*)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `a < 0`
    BelowSupercooling,
    /// `0 < a < b^2/(27c)`
    BelowClearing,
    /// `b^2/(27c) < a < b^2/(24c)`
    Superheated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkCriticalSet {
    pub s_zero: f64,
    /// Amplitude of the minimal manifold: the nonzero root with the lower
    /// uniaxial energy.
    pub s_plus: f64,
    pub s_minus: f64,
    pub regime: Regime,
    pub stability_zero: Stability,
    pub stability_plus: Stability,
    pub stability_minus: Stability,
}

impl BulkCriticalSet {
    pub fn amplitudes(&self) -> [f64; 3] {
        [self.s_zero, self.s_minus, self.s_plus]
    }
}

/// Uniaxial critical points: `s = 0` and the real roots of `2c s^2 - b s + 3a = 0`.
pub fn critical_points(p: &BulkParams) -> Result<BulkCriticalSet> {
    p.validate()?;
    let disc = p.b * p.b - 24.0 * p.a * p.c;
    if disc < 0.0 {
        return Err(Error::NoNematicRoots { discriminant: disc });
    }
    let sq = disc.sqrt();
    // numerically stable quadratic roots
    let big = (p.b + sq) / (4.0 * p.c);
    let small = if big != 0.0 {
        3.0 * p.a / (2.0 * p.c * big)
    } else {
        0.0
    };
    let (s_plus, s_minus) = if p.uniaxial_energy(big) <= p.uniaxial_energy(small) {
        (big, small)
    } else {
        (small, big)
    };
    let a_clear = p.b * p.b / (27.0 * p.c);
    let (regime, st0, stp) = if p.a < 0.0 {
        (Regime::BelowSupercooling, Stability::Unstable, Stability::GlobalMinimizer)
    } else if p.a < a_clear {
        (Regime::BelowClearing, Stability::LocalMinimizer, Stability::GlobalMinimizer)
    } else {
        (Regime::Superheated, Stability::GlobalMinimizer, Stability::LocalMinimizer)
    };
    Ok(BulkCriticalSet {
        s_zero: 0.0,
        s_plus,
        s_minus,
        regime,
        stability_zero: st0,
        stability_plus: stp,
        stability_minus: Stability::Unstable,
    })
}

/// Characteristic temperatures for `a = A (T - T*)`: returns `(T*, T_c, T_II)`.
pub fn critical_temperatures(amp: f64, t_star: f64, b: f64, c: f64) -> (f64, f64, f64) {
    (
        t_star,
        t_star + b * b / (27.0 * amp * c),
        t_star + b * b / (24.0 * amp * c),
    )
}
