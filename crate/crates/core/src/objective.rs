//! The energy interface shared by the minimizer, eigen-solver, string method
//! and saddle dynamics, plus two analytic test potentials.

use crate::vecops::{norm2, norm_inf};

/// A smooth energy on `R^n`.
///
/// Implementations must be re-entrant: the solvers call them from several
/// places without synchronization.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn energy(&self, x: &[f64]) -> f64;

    fn gradient_into(&self, x: &[f64], g: &mut [f64]);

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g);
        g
    }

    fn energy_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.energy(x), self.gradient(x))
    }

    /// Central-difference Hessian-vector product
    /// `(grad(x + l v) - grad(x - l v)) / (2 l)`.
    fn hessian_vec(&self, x: &[f64], v: &[f64], l: f64) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        if v.iter().all(|&vi| vi == 0.0) {
            return out;
        }
        let xp: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + l * b).collect();
        let xm: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - l * b).collect();
        let mut gm = vec![0.0; n];
        self.gradient_into(&xp, &mut out);
        self.gradient_into(&xm, &mut gm);
        let inv = 0.5 / l;
        for (o, m) in out.iter_mut().zip(&gm) {
            *o = (*o - m) * inv;
        }
        out
    }

    /// Default finite-difference length: `1e-4 * max(1, |x|_inf) / |v|`.
    fn fd_step(&self, x: &[f64], v: &[f64]) -> f64 {
        let nv = norm2(v);
        if nv == 0.0 {
            return 1e-4;
        }
        1e-4 * norm_inf(x).max(1.0) / nv
    }

    /// Hessian-vector product with the default step.
    fn hvp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let l = self.fd_step(x, v);
        self.hessian_vec(x, v, l)
    }

    /// Images of `x` under the symmetry group of the energy, excluding the
    /// identity. Used only for optional duplicate detection.
    fn symmetry_images(&self, _x: &[f64]) -> Vec<Vec<f64>> {
        Vec::new()
    }
}

/// `E(x, y) = (x^2 - 1)^2 + y^2`: two minima at `(+-1, 0)`, index-1 saddle at
/// the origin with barrier 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleWell;

impl Objective for DoubleWell {
    fn dim(&self) -> usize {
        2
    }

    fn energy(&self, x: &[f64]) -> f64 {
        let u = x[0] * x[0] - 1.0;
        u * u + x[1] * x[1]
    }

    fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        g[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0);
        g[1] = 2.0 * x[1];
    }
}

/// `E(x, y) = (x^2 - 1)^2 + (y^2 - 1)^2`: nine stationary points, one index-2
/// maximum at the origin, four index-1 saddles and four minima.
#[derive(Debug, Clone, Copy, Default)]
pub struct SeparableQuartic;

impl Objective for SeparableQuartic {
    fn dim(&self) -> usize {
        2
    }

    fn energy(&self, x: &[f64]) -> f64 {
        let u = x[0] * x[0] - 1.0;
        let w = x[1] * x[1] - 1.0;
        u * u + w * w
    }

    fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        g[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0);
        g[1] = 4.0 * x[1] * (x[1] * x[1] - 1.0);
    }
}

/// Quadratic energy `x^T A x / 2` with a diagonal `A`; handy for eigen-solver
/// checks with a known spectrum.
#[derive(Debug, Clone)]
pub struct DiagonalQuadratic {
    pub diag: Vec<f64>,
}

impl Objective for DiagonalQuadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn energy(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().zip(&self.diag).map(|(xi, d)| d * xi * xi).sum::<f64>()
    }

    fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        for ((gi, xi), d) in g.iter_mut().zip(x).zip(&self.diag) {
            *gi = d * xi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hessian_vec_of_zero_direction_is_zero() {
        let hv = SeparableQuartic.hessian_vec(&[0.3, 0.2], &[0.0, 0.0], 1e-3);
        assert_eq!(hv, vec![0.0, 0.0]);
    }

    #[test]
    fn toy_hessian_is_diagonal() {
        let h = SeparableQuartic.hvp(&[0.0, 0.0], &[1.0, 0.0]);
        assert!((h[0] + 4.0).abs() < 1e-7);
        assert_eq!(h[1], 0.0);
    }
}
