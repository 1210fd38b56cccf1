//! Homogeneous Maier-Saupe critical points.
//!
//! Critical densities are `exp(eta (m.n)^2)` up to normalization, with `eta = 0`
//! (isotropic) or `eta` solving `R(eta) = alpha`, where
//!
//! ```text
//! R(eta) = int_0^1 exp(eta z^2) dz / int_0^1 z^2 (1 - z^2) exp(eta z^2) dz.
//! ```
//!
//! `R` attains its minimum `alpha*` at `eta*`; above `alpha*` there are two
//! roots, the prolate `eta1 > eta*` and the oblate `eta2 < eta*`.

use serde::{Deserialize, Serialize};

use crate::quadrature::integrate;

/// Largest `|eta|` accepted by the quadrature routines.
pub const ETA_MAX: f64 = 500.0;

/// `alpha` at which the isotropic state changes stability.
pub const ALPHA_ISOTROPIC: f64 = 7.5;

const QUAD_REL: f64 = 1e-14;

/// `int_0^1 p(z) exp(eta (z^2 - shift)) dz` with `shift = 1` for positive
/// `eta` to keep the integrand bounded.
fn weighted<F: Fn(f64) -> f64>(eta: f64, p: F) -> f64 {
    assert!(
        eta.is_finite() && eta.abs() <= ETA_MAX,
        "|eta| must not exceed {ETA_MAX}, got {eta}"
    );
    let shift = if eta > 0.0 { 1.0 } else { 0.0 };
    integrate(
        |z| p(z) * (eta * (z * z - shift)).exp(),
        0.0,
        1.0,
        0.0,
        QUAD_REL,
    )
    .0
}

/// `R(eta)`.
pub fn ratio(eta: f64) -> f64 {
    if eta == 0.0 {
        return ALPHA_ISOTROPIC;
    }
    weighted(eta, |_| 1.0) / weighted(eta, |z| z * z * (1.0 - z * z))
}

/// Analytic `dR/deta`.
pub fn ratio_derivative(eta: f64) -> f64 {
    let i0 = weighted(eta, |_| 1.0);
    let i0p = weighted(eta, |z| z * z);
    let i2 = weighted(eta, |z| z * z * (1.0 - z * z));
    let i2p = weighted(eta, |z| z.powi(4) * (1.0 - z * z));
    (i0p * i2 - i0 * i2p) / (i2 * i2)
}

/// `(alpha*, eta*)`: minimum of `R` and its location.
pub fn critical_alpha() -> (f64, f64) {
    // coarse scan on a geometric grid in both directions
    let mut grid: Vec<f64> = Vec::new();
    let mut t = 0.05;
    while t < 50.0 {
        grid.push(-t);
        t *= 1.15;
    }
    grid.push(0.0);
    let mut t = 0.05;
    while t < ETA_MAX {
        grid.push(t);
        t *= 1.15;
    }
    grid.sort_by(f64::total_cmp);
    let values: Vec<f64> = grid.iter().map(|&e| ratio(e)).collect();
    let (imin, _) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let mut lo = grid[imin.saturating_sub(1)];
    let mut hi = grid[(imin + 1).min(grid.len() - 1)];

    // golden-section search
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (ratio(c), ratio(d));
    while hi - lo > 1e-6 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = ratio(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = ratio(d);
        }
    }
    // R is flat at the bottom; finish on the sign change of R'.
    let (mut a, mut b) = (lo - 1e-6, hi + 1e-6);
    let mut da = ratio_derivative(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let dm = ratio_derivative(m);
        if (dm < 0.0) == (da < 0.0) {
            a = m;
            da = dm;
        } else {
            b = m;
        }
    }
    let eta_star = 0.5 * (a + b);
    (ratio(eta_star), eta_star)
}

/// Solves `R(eta) = alpha` on the side of `eta*` given by `upward`.
fn solve_branch(alpha: f64, eta_star: f64, upward: bool) -> f64 {
    let dir = if upward { 1.0 } else { -1.0 };
    let mut step = 1.0;
    let mut far = eta_star + dir * step;
    while ratio(far) < alpha {
        step *= 2.0;
        far = (eta_star + dir * step).clamp(-ETA_MAX, ETA_MAX);
        if far.abs() >= ETA_MAX {
            break;
        }
    }
    let (mut near, mut far) = (eta_star, far);
    for _ in 0..200 {
        let mid = 0.5 * (near + far);
        if mid == near || mid == far {
            break;
        }
        if ratio(mid) < alpha {
            near = mid;
        } else {
            far = mid;
        }
    }
    let (rn, rf) = (ratio(near), ratio(far));
    if (rn - alpha).abs() <= (rf - alpha).abs() {
        near
    } else {
        far
    }
}

/// Nonzero roots `(eta1, eta2)` of `R(eta) = alpha`, if `alpha >= alpha*`.
pub fn eta_branches(alpha: f64) -> Option<(f64, f64)> {
    let (alpha_star, eta_star) = critical_alpha();
    if alpha < alpha_star {
        return None;
    }
    Some((
        solve_branch(alpha, eta_star, true),
        solve_branch(alpha, eta_star, false),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Isotropic,
    Prolate,
    Oblate,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Branch::Isotropic => "isotropic",
            Branch::Prolate => "prolate",
            Branch::Oblate => "oblate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsCriticalPoint {
    pub eta: f64,
    pub branch: Branch,
    pub stable: bool,
    /// On the stability boundary (isotropic state at `alpha = 7.5`).
    pub marginal: bool,
    pub s2: f64,
    pub s4: f64,
}

/// Oblate roots closer to zero than this are merged with the isotropic state.
pub const MERGE_TOL: f64 = 1e-8;

/// All critical points at concentration `alpha`, isotropic first.
pub fn solve_branches(alpha: f64) -> Vec<MsCriticalPoint> {
    assert!(alpha > 0.0, "alpha must be positive");
    let marginal = (alpha - ALPHA_ISOTROPIC).abs() < 1e-12;
    let mut out = vec![MsCriticalPoint {
        eta: 0.0,
        branch: Branch::Isotropic,
        stable: alpha < ALPHA_ISOTROPIC && !marginal,
        marginal,
        s2: 0.0,
        s4: 0.0,
    }];
    if let Some((eta1, eta2)) = eta_branches(alpha) {
        let (s2, s4) = order_parameters(eta1);
        out.push(MsCriticalPoint {
            eta: eta1,
            branch: Branch::Prolate,
            stable: true,
            marginal: false,
            s2,
            s4,
        });
        if eta2.abs() >= MERGE_TOL {
            let (s2, s4) = order_parameters(eta2);
            out.push(MsCriticalPoint {
                eta: eta2,
                branch: Branch::Oblate,
                stable: false,
                marginal: false,
                s2,
                s4,
            });
        }
    }
    out
}

/// Legendre moments `(S2, S4)` of the axially symmetric density with
/// parameter `eta`.
pub fn order_parameters(eta: f64) -> (f64, f64) {
    if eta == 0.0 {
        return (0.0, 0.0);
    }
    let norm = weighted(eta, |_| 1.0);
    let s2 = weighted(eta, |z| 0.5 * (3.0 * z * z - 1.0)) / norm;
    let s4 = weighted(eta, |z| {
        let z2 = z * z;
        (35.0 * z2 * z2 - 30.0 * z2 + 3.0) / 8.0
    }) / norm;
    (s2, s4)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeslieSet {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    pub alpha5: f64,
    pub alpha6: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl LeslieSet {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.alpha1,
            self.alpha2,
            self.alpha3,
            self.alpha4,
            self.alpha5,
            self.alpha6,
        ]
    }
}

/// Leslie viscosities from the moments `S2`, `S4` and the rotational
/// viscosity `gamma1`.
pub fn leslie_coefficients(s2: f64, s4: f64, gamma1: f64) -> LeslieSet {
    LeslieSet {
        alpha1: -s4 / 2.0,
        alpha2: -(s2 - gamma1) / 2.0,
        alpha3: -(s2 + gamma1) / 2.0,
        alpha4: 4.0 / 15.0 - 5.0 / 21.0 * s2 - s4 / 35.0,
        alpha5: s4 / 7.0 + 6.0 * s2 / 7.0,
        alpha6: s4 / 7.0 - s2 / 7.0,
        gamma1,
        gamma2: -s2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_ratio_is_exact() {
        assert_eq!(ratio(0.0), 7.5);
        // the quadrature path agrees
        let r = weighted(1e-300, |_| 1.0) / weighted(1e-300, |z| z * z * (1.0 - z * z));
        assert!((r - 7.5).abs() < 1e-12);
    }

    #[test]
    fn ratio_grows_for_negative_eta() {
        assert!(ratio(-10.0) > 7.5);
    }

    #[test]
    fn order_parameters_limits() {
        assert_eq!(order_parameters(0.0), (0.0, 0.0));
        assert!(order_parameters(50.0).0 > 0.9);
        let (s2, _) = order_parameters(-50.0);
        assert!(s2 < -0.4);
    }

    #[test]
    fn low_alpha_has_only_isotropic() {
        let b = solve_branches(6.0);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].branch, Branch::Isotropic);
        assert!(b[0].stable);
    }

    #[test]
    fn leslie_examples() {
        let l = leslie_coefficients(0.0, 0.0, 1.0);
        assert_eq!(l.as_array(), [0.0, 0.5, -0.5, 4.0 / 15.0, 0.0, 0.0]);
        assert_eq!(l.gamma2, 0.0);

        let l = leslie_coefficients(0.8, 0.5, 2.0);
        let expect = [-0.25, 0.6, -1.4, 0.061_904_761_904_761_9, 0.757_142_857_142_857_1, -0.042_857_142_857_142_9];
        for (a, e) in l.as_array().iter().zip(expect) {
            assert!((a - e).abs() < 1e-15, "{a} vs {e}");
        }
        assert_eq!(l.gamma2, -0.8);
        assert!((l.alpha2 + l.alpha3 + 0.8).abs() < 1e-15);
        assert!((l.alpha6 - l.alpha5 + 0.8).abs() < 1e-15);
    }
}
