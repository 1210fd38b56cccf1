use std::sync::Arc;

use lcland::eigen::{dense_hessian, smallest_eigs, sorted_eigen, EigOptions};
use lcland::field::{BoundaryCondition, Domain, ElasticParams, QField, Seed};
use lcland::tensor::BulkParams;
use lcland::vecops::{dot, norm2};
use lcland::Objective;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type M3 = [[f64; 3]; 3];

fn mat(q: &[f64]) -> M3 {
    [[q[0], q[1], q[2]], [q[1], q[3], q[4]], [q[2], q[4], -q[0] - q[3]]]
}

fn uni(s: f64, n: [f64; 3]) -> M3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = s * (n[i] * n[j] - if i == j { 1.0 / 3.0 } else { 0.0 });
        }
    }
    m
}

fn frob2(a: &M3) -> f64 {
    a.iter().flatten().map(|x| x * x).sum()
}

fn tr3(a: &M3) -> f64 {
    let mut t = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                t += a[i][j] * a[j][k] * a[k][i];
            }
        }
    }
    t
}

/// Straightforward re-implementation of the discrete energy on the full grid
/// of 3x3 matrices.
fn oracle_energy(nx: usize, ny: usize, lambda2: f64, p: &BulkParams, el: ElasticParams, s: f64, data: &[f64]) -> f64 {
    let hx = 1.0 / (nx as f64 + 1.0);
    let hy = 1.0 / (ny as f64 + 1.0);
    let mut grid = vec![vec![[[0.0; 3]; 3]; ny + 2]; nx + 2];
    for i in 0..nx + 2 {
        for j in 0..ny + 2 {
            let bx = i == 0 || i == nx + 1;
            let by = j == 0 || j == ny + 1;
            grid[i][j] = if bx && by {
                let a = uni(s, [1.0, 0.0, 0.0]);
                let b = uni(s, [0.0, 1.0, 0.0]);
                let mut m = [[0.0; 3]; 3];
                for r in 0..3 {
                    for c in 0..3 {
                        m[r][c] = 0.5 * (a[r][c] + b[r][c]);
                    }
                }
                m
            } else if bx {
                uni(s, [0.0, 1.0, 0.0])
            } else if by {
                uni(s, [1.0, 0.0, 0.0])
            } else {
                let o = 5 * ((j - 1) * nx + (i - 1));
                mat(&data[o..o + 5])
            };
        }
    }
    let interior = |i: usize, j: usize| i >= 1 && i <= nx && j >= 1 && j <= ny;
    let diff = |a: &M3, b: &M3| {
        let mut d = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                d[r][c] = b[r][c] - a[r][c];
            }
        }
        d
    };
    let mut e = 0.0;
    for i in 0..=nx {
        for j in 0..ny + 2 {
            if interior(i, j) || interior(i + 1, j) {
                e += 0.5 * el.l1 * hy / hx * frob2(&diff(&grid[i][j], &grid[i + 1][j]));
            }
        }
    }
    for i in 0..nx + 2 {
        for j in 0..=ny {
            if interior(i, j) || interior(i, j + 1) {
                e += 0.5 * el.l1 * hx / hy * frob2(&diff(&grid[i][j], &grid[i][j + 1]));
            }
        }
    }
    for i in 0..=nx {
        for j in 0..=ny {
            let (q00, q10, q01, q11) = (&grid[i][j], &grid[i + 1][j], &grid[i][j + 1], &grid[i + 1][j + 1]);
            // d[m][a][b] = d_m Q_ab, m in {x, y}; no z dependence
            let mut d = [[[0.0; 3]; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    d[0][a][b] = (q10[a][b] - q00[a][b] + q11[a][b] - q01[a][b]) / (2.0 * hx);
                    d[1][a][b] = (q01[a][b] - q00[a][b] + q11[a][b] - q10[a][b]) / (2.0 * hy);
                }
            }
            let mut l2 = 0.0;
            for k in 0..3 {
                let div: f64 = (0..3).map(|m| d[m][m][k]).sum();
                l2 += div * div;
            }
            let mut l3 = 0.0;
            for ii in 0..3 {
                for jj in 0..3 {
                    for kk in 0..3 {
                        l3 += d[ii][jj][kk] * d[kk][ii][jj];
                    }
                }
            }
            e += hx * hy * (0.5 * el.l2 * l2 + 0.5 * el.l3 * l3);
        }
    }
    for i in 1..=nx {
        for j in 1..=ny {
            let q = &grid[i][j];
            let n2 = frob2(q);
            e += hx * hy * lambda2 * (0.5 * p.a * n2 - p.b / 3.0 * tr3(q) + 0.25 * p.c * n2 * n2);
        }
    }
    e
}

fn bulk() -> BulkParams {
    BulkParams::new(-1.0, 1.0, 1.0).unwrap()
}

fn domain(nx: usize, ny: usize, lambda2: f64, el: ElasticParams) -> Arc<Domain> {
    Arc::new(Domain::new(nx, ny, lambda2, bulk(), el, BoundaryCondition::Tangent { amplitude: None }).unwrap())
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect()
}

#[test]
fn energy_matches_double_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for el in [
        ElasticParams::default(),
        ElasticParams { l1: 1.3, l2: 0.7, l3: -0.4 },
    ] {
        for (nx, ny) in [(6, 6), (7, 5), (12, 12)] {
            let d = domain(nx, ny, 7.0, el);
            let x = random_vec(d.len(), &mut rng, 0.8);
            let e = d.free_energy(&x).unwrap();
            let o = oracle_energy(nx, ny, 7.0, d.bulk(), el, 1.5, &x);
            assert!((e - o).abs() <= 1e-12 * o.abs().max(1.0), "{e} vs {o}");
        }
    }
}

#[test]
fn zero_field_with_zero_boundary_has_zero_energy_and_gradient() {
    let p = BulkParams { a: 0.3, b: 0.0, c: 1.0 };
    let d = Domain::new(6, 6, 5.0, p, ElasticParams::default(), BoundaryCondition::Zero).unwrap();
    let z = vec![0.0; d.len()];
    assert_eq!(d.free_energy(&z).unwrap(), 0.0);
    assert!(d.free_gradient(&z).unwrap().iter().all(|&g| g == 0.0));
}

#[test]
fn constant_field_has_only_bulk_energy() {
    let p = bulk();
    let q = lcland::QTensor::uniaxial(1.5, [0.6, 0.8, 0.0]);
    let d = Domain::new(9, 7, 5.0, p, ElasticParams::default(), BoundaryCondition::Uniform(q)).unwrap();
    let x: Vec<f64> = (0..d.len()).map(|i| q.0[i % 5]).collect();
    let expect = 5.0 * p.uniaxial_energy(1.5) * d.area();
    assert!((d.free_energy(&x).unwrap() - expect).abs() < 1e-12);
}

#[test]
fn gradient_matches_directional_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = domain(16, 16, 5.0, ElasticParams { l1: 1.0, l2: 0.5, l3: 0.25 });
    for _ in 0..20 {
        let x = random_vec(d.len(), &mut rng, 1.0);
        let g = d.free_gradient(&x).unwrap();
        let v = random_vec(d.len(), &mut rng, 1.0);
        let h = 1e-5;
        let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let fd = (d.energy(&xp) - d.energy(&xm)) / (2.0 * h);
        let an = dot(&g, &v);
        assert!((fd - an).abs() < 1e-6 * an.abs(), "{fd} vs {an}");
    }
}

#[test]
fn shape_mismatch_is_an_error() {
    let d = domain(6, 6, 5.0, ElasticParams::default());
    assert!(d.free_energy(&[0.0; 7]).is_err());
    assert!(QField::from_vec(d.clone(), vec![0.0; 10]).is_err());
}

#[test]
fn gradient_is_local() {
    let d = domain(10, 10, 5.0, ElasticParams { l1: 1.0, l2: 0.3, l3: 0.3 });
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_vec(d.len(), &mut rng, 0.5);
    let g = d.gradient(&x);
    let mut y = x.clone();
    // perturb node (8, 8); node (2, 2) lies outside its stencil
    let o = d.node_offset(8, 8);
    y[o] += 0.3;
    y[o + 4] -= 0.2;
    let g2 = d.gradient(&y);
    let t = d.node_offset(2, 2);
    assert_eq!(&g[t..t + 5], &g2[t..t + 5]);
    assert_ne!(&g[o..o + 5], &g2[o..o + 5]);
}

#[test]
fn boundary_data_enters_the_energy() {
    let p = bulk();
    let x = vec![0.0; 5 * 36];
    let a = Domain::new(6, 6, 5.0, p, ElasticParams::default(), BoundaryCondition::Tangent { amplitude: Some(1.5) }).unwrap();
    let b = Domain::new(6, 6, 5.0, p, ElasticParams::default(), BoundaryCondition::Tangent { amplitude: Some(1.4) }).unwrap();
    assert_ne!(a.energy(&x), b.energy(&x));
}

#[test]
fn quadratic_energy_hessian_is_step_independent() {
    let p = BulkParams { a: 0.5, b: 0.0, c: 0.0 };
    let d = Domain::new(8, 8, 5.0, p, ElasticParams::default(), BoundaryCondition::Zero).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_vec(d.len(), &mut rng, 1.0);
    let v = random_vec(d.len(), &mut rng, 1.0);
    let h1 = d.hessian_vec(&x, &v, 1e-2);
    let h2 = d.hessian_vec(&x, &v, 1e-4);
    for (a, b) in h1.iter().zip(&h2) {
        assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "{a} vs {b}");
    }
    assert!(d.hessian_vec(&x, &vec![0.0; d.len()], 1e-4).iter().all(|&c| c == 0.0));
}

#[test]
fn hessian_is_symmetric() {
    let d = domain(10, 10, 50.0, ElasticParams::default());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_vec(d.len(), &mut rng, 0.7);
    let v = random_vec(d.len(), &mut rng, 1.0);
    let w = random_vec(d.len(), &mut rng, 1.0);
    let hv = d.hvp(&x, &v);
    let hw = d.hvp(&x, &w);
    let scale = lcland::eigen::spectral_scale(&*d, &x, 1);
    assert!((dot(&hv, &w) - dot(&v, &hw)).abs() < 1e-6 * scale * norm2(&v) * norm2(&w));
}

/// Column-by-column Hessian from gradient differences, Richardson
/// extrapolated. The gradient is cubic, so this is exact up to roundoff.
fn fd_hessian(d: &Domain, x: &[f64]) -> Vec<Vec<f64>> {
    let n = d.len();
    let diff = |j: usize, h: f64| {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let gp = d.gradient(&xp);
        let gm = d.gradient(&xm);
        gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>()
    };
    (0..n)
        .map(|j| {
            let (a, b) = (diff(j, 1e-2), diff(j, 5e-3));
            a.iter().zip(&b).map(|(a, b)| (4.0 * b - a) / 3.0).collect()
        })
        .collect()
}

#[test]
fn hessian_vec_matches_dense_oracle() {
    let d = domain(8, 8, 50.0, ElasticParams::default());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = random_vec(d.len(), &mut rng, 0.7);
    let cols = fd_hessian(&d, &x);
    let v = random_vec(d.len(), &mut rng, 1.0);
    let hv = d.hvp(&x, &v);
    let mut oracle = vec![0.0; d.len()];
    for (j, col) in cols.iter().enumerate() {
        for (o, c) in oracle.iter_mut().zip(col) {
            *o += c * v[j];
        }
    }
    let err: f64 = hv.iter().zip(&oracle).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!(err < 1e-5 * norm2(&oracle), "relative error {}", err / norm2(&oracle));
}

#[test]
fn smallest_eigs_match_dense_solver_on_quadratic_energy() {
    let p = BulkParams { a: -2.0, b: 0.0, c: 0.0 };
    let d = Domain::new(8, 8, 5.0, p, ElasticParams::default(), BoundaryCondition::Zero).unwrap();
    let x = vec![0.0; d.len()];
    let (dense, _) = sorted_eigen(dense_hessian(&d, &x));
    let rep = smallest_eigs(&d, &x, 6, None, &EigOptions::default()).unwrap();
    for (a, b) in rep.eigenvalues.iter().zip(&dense) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
    let dense_count = dense.iter().filter(|&&l| l < -rep.tol_eig).count();
    assert_eq!(rep.morse_index, dense_count.min(6));
    assert!(lcland::vecops::orthonormality_defect(&rep.eigenvectors) < 1e-8);
}

#[test]
fn morse_index_agrees_with_dense_count_at_a_saddle() {
    use lcland::minimize::{minimize_projected, MinimizeOptions};
    let d = domain(10, 10, 50.0, ElasticParams::default());
    let dd = d.clone();
    let m = minimize_projected(&*d, d.seed_field(&Seed::Isotropic, 0).into_vec(), &MinimizeOptions::default(), move |g| {
        dd.symmetrize(g)
    })
    .unwrap();
    let (dense, _) = sorted_eigen(dense_hessian(&*d, &m.x));
    let rep = smallest_eigs(&*d, &m.x, 8, None, &EigOptions::default()).unwrap();
    let cols = fd_hessian(&d, &m.x);
    let exact = nalgebra::DMatrix::from_fn(d.len(), d.len(), |i, j| 0.5 * (cols[j][i] + cols[i][j]));
    let (exact, _) = sorted_eigen(exact);
    for (a, b) in rep.eigenvalues.iter().zip(&exact) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
    let dense_count = dense.iter().filter(|&&l| l < -rep.tol_eig).count();
    assert!(dense_count >= 1);
    assert_eq!(rep.morse_index, dense_count);
}
