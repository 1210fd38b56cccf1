//! Acceptance suite. Runs without the libtest harness and prints one
//! `PASS` or `FAIL` line per criterion; the process fails if any criterion
//! fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use lcland::eigen::{smallest_eigs, sorted_eigen, EigOptions};
use lcland::field::{diagonal_profile, Diagonal, Edge};
use lcland::flow::{flow_to_equilibrium, sav_split, sav_step, SavState};
use lcland::hedgehog::{residual, solve_profile};
use lcland::hisd::HisdOptions;
use lcland::landscape::{build_landscape, same_state, LandscapeOptions, SaddleRecord};
use lcland::maier_saupe::{critical_alpha, eta_branches, leslie_coefficients, ratio, solve_branches, Branch};
use lcland::minimize::{minimize, minimize_projected, MinimizeOptions};
use lcland::objective::{DoubleWell, SeparableQuartic};
use lcland::string::{find_mep, is_unimodal, refine_multiscale, StringOptions};
use lcland::vecops::{distance, dot, norm2};
use lcland::{BoundaryCondition, BulkParams, Domain, ElasticParams, Objective, QField, Seed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn bulk() -> BulkParams {
    BulkParams::new(-1.0, 1.0, 1.0).unwrap()
}

fn square(n: usize, lambda2: f64) -> Arc<Domain> {
    Arc::new(Domain::square_tangent(n, lambda2, bulk()).unwrap())
}

fn critical_concentration() -> Outcome {
    let t = Instant::now();
    let (alpha, eta) = critical_alpha();
    let el = t.elapsed();
    check!((alpha - 6.731393).abs() <= 1e-4, "alpha* = {alpha}");
    check!(el < Duration::from_secs(1), "took {el:?}");
    Ok(format!("alpha* = {alpha:.10} at eta* = {eta:.10}, |alpha* - 6.731393| = {:.1e}, {el:?}", (alpha - 6.731393).abs()))
}

fn isotropic_threshold() -> Outcome {
    let t = Instant::now();
    let r0 = ratio(0.0);
    let (_, eta2) = eta_branches(7.5).ok_or("no branches at 7.5")?;
    let el = t.elapsed();
    check!((r0 - 7.5).abs() <= 1e-12, "R(0) = {r0}");
    check!(eta2.abs() <= 1e-8, "eta2(7.5) = {eta2}");
    check!(el < Duration::from_secs(1), "took {el:?}");
    Ok(format!("R(0) = {r0}, eta2(7.5) = {eta2:.1e}, {el:?}"))
}

fn branch_structure() -> Outcome {
    let (_, eta_star) = critical_alpha();
    let mut worst: f64 = 0.0;
    for alpha in [6.8, 7.0, 7.4] {
        let (e1, e2) = eta_branches(alpha).ok_or(format!("no branches at {alpha}"))?;
        check!(e1 > eta_star && eta_star > e2 && e2 > 0.0, "alpha {alpha}: eta1 {e1}, eta2 {e2}");
        let res = (ratio(e1) - alpha).abs().max((ratio(e2) - alpha).abs());
        check!(res < 1e-10, "alpha {alpha}: residual {res}");
        worst = worst.max(res);
        let labels: Vec<(Branch, bool)> = solve_branches(alpha).iter().map(|p| (p.branch, p.stable)).collect();
        check!(
            labels == [(Branch::Isotropic, true), (Branch::Prolate, true), (Branch::Oblate, false)],
            "alpha {alpha}: labels {labels:?}"
        );
    }
    check!(eta_branches(6.0).is_none(), "nonzero branch at alpha = 6");
    check!(solve_branches(6.0).len() == 1, "extra critical points at alpha = 6");
    Ok(format!("three branches at 6.8, 7.0, 7.4 (max residual {worst:.1e}); isotropic only at 6.0"))
}

fn parodi() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let s2 = rng.random_range(-0.5..1.0);
        let s4 = rng.random_range(-0.5..1.0);
        let g1 = rng.random_range(0.0..10.0);
        let l = leslie_coefficients(s2, s4, g1);
        let gap = ((l.alpha2 + l.alpha3) - (l.alpha6 - l.alpha5)).abs();
        let scale: f64 = 1.0 + s2.abs() + s4.abs() + g1;
        check!(gap <= 4.0 * f64::EPSILON * scale, "gap {gap} at ({s2}, {s4}, {g1})");
        worst = worst.max(gap);
    }
    Ok(format!("1000 inputs, largest |(a2 + a3) - (a6 - a5)| = {worst:.1e}"))
}

/// Hessian from gradient differences with Richardson extrapolation. The
/// gradient is a cubic polynomial, so the extrapolated differences are exact
/// up to roundoff.
fn exact_hessian(d: &Domain, x: &[f64]) -> nalgebra::DMatrix<f64> {
    let n = d.len();
    let diff = |j: usize, h: f64| {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let (gp, gm) = (d.gradient(&xp), d.gradient(&xm));
        gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>()
    };
    let mut m = nalgebra::DMatrix::zeros(n, n);
    for j in 0..n {
        let (a, b) = (diff(j, 1e-2), diff(j, 5e-3));
        for i in 0..n {
            m[(i, j)] = (4.0 * b[i] - a[i]) / 3.0;
        }
    }
    let mt = m.transpose();
    (m + mt) * 0.5
}

fn gradient_correctness() -> Outcome {
    let el = ElasticParams { l1: 1.0, l2: 0.5, l3: 0.25 };
    let d = Domain::new(16, 16, 5.0, bulk(), el, BoundaryCondition::Tangent { amplitude: None }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x: Vec<f64> = (0..d.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..d.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = 1e-5;
        let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let fd = (d.energy(&xp) - d.energy(&xm)) / (2.0 * h);
        let an = dot(&d.gradient(&x), &v);
        let rel = (fd - an).abs() / an.abs();
        check!(rel < 1e-6, "relative error {rel}");
        worst = worst.max(rel);
    }
    // eigenvalues at a saddle of the 8x8 problem against the dense Hessian
    let d = square(8, 50.0);
    let dd = d.clone();
    let m = minimize_projected(&*d, d.seed_field(&Seed::Isotropic, 0).into_vec(), &MinimizeOptions::default(), move |g| {
        dd.symmetrize(g)
    })
    .map_err(|e| e.to_string())?;
    let (dense, _) = sorted_eigen(exact_hessian(&d, &m.x));
    let rep = smallest_eigs(&*d, &m.x, 6, None, &EigOptions::default()).map_err(|e| e.to_string())?;
    let mut eig_err: f64 = 0.0;
    for (a, b) in rep.eigenvalues.iter().zip(&dense) {
        eig_err = eig_err.max((a - b).abs());
    }
    check!(eig_err < 1e-8, "eigenvalue error {eig_err}");
    Ok(format!("max directional error {worst:.1e}; 6 smallest eigenvalues within {eig_err:.1e} of the extrapolated Hessian"))
}

fn energy_stability() -> Outcome {
    let d = square(16, 50.0);
    let split = sav_split(d.clone()).map_err(|e| e.to_string())?;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for dt in [1e-3, 1e-1, 1.0, 10.0] {
        for seed in 0..5 {
            let q = d.seed_field(&Seed::Random(0.5), seed).into_vec();
            let mut s = SavState::new(&split, q);
            let mut prev = s.modified_energy(&split);
            for _ in 0..200 {
                s = sav_step(&split, &s, dt).map_err(|e| e.to_string())?;
                let e = s.modified_energy(&split);
                worst = worst.max(e - prev);
                if e > prev + 1e-9 * prev.abs().max(1.0) {
                    violations += 1;
                }
                prev = e;
            }
        }
    }
    check!(violations == 0, "{violations} increases, largest {worst:e}");
    Ok(format!("16x16, 4 step sizes x 5 inits x 200 steps, 0 violations (largest change {worst:.1e})"))
}

fn toy_landscape() -> Outcome {
    let seed = SaddleRecord::verify(&SeparableQuartic, vec![0.0, 0.0], 1e-8, &HisdOptions::default())
        .map_err(|e| e.to_string())?;
    let g = build_landscape(&SeparableQuartic, seed, &LandscapeOptions::default()).map_err(|e| e.to_string())?;
    check!(g.nodes.len() == 9, "{} nodes", g.nodes.len());
    let count = |k| g.with_index(k).count();
    check!((count(2), count(1), count(0)) == (1, 4, 4), "index counts {:?}", (count(2), count(1), count(0)));
    let mut worst: f64 = 0.0;
    for n in &g.nodes {
        let exact: Vec<f64> = n.x.iter().map(|c| c.round()).collect();
        worst = worst.max(distance(&n.x, &exact));
        check!(exact.iter().filter(|c| **c == 0.0).count() == n.morse_index, "node {:?}", n.x);
        let want = [0.0, 1.0, 2.0][n.morse_index];
        check!((n.energy - want).abs() < 1e-8, "energy {} at index {}", n.energy, n.morse_index);
    }
    check!(worst < 1e-6, "location error {worst}");
    Ok(format!("9 nodes {{2:1, 1:4, 0:4}}, location error {worst:.1e}"))
}

fn string_method() -> Outcome {
    let opts = StringOptions::default();
    let r = find_mep(&DoubleWell, &[-1.0, 0.0], &[1.0, 0.0], 8, &opts).map_err(|e| e.to_string())?;
    let ts_err = norm2(&r.ts);
    check!(ts_err < 1e-6, "TS at {:?}", r.ts);
    check!((r.barrier_forward - 1.0).abs() <= 1e-4, "barrier {}", r.barrier_forward);
    check!(is_unimodal(&r.path.energies), "profile {:?}", r.path.energies);
    let fine = refine_multiscale(&DoubleWell, &r.path, 9, &opts).map_err(|e| e.to_string())?;
    check!(
        fine.top_grad_norm < r.top_grad_norm,
        "top gradient {} -> {}",
        r.top_grad_norm,
        fine.top_grad_norm
    );
    Ok(format!(
        "TS error {ts_err:.1e}, barrier {:.8}, top gradient {:.2e} -> {:.2e}",
        r.barrier_forward, r.top_grad_norm, fine.top_grad_norm
    ))
}

fn wors(d: &Arc<Domain>) -> Result<SaddleRecord, String> {
    let dd = d.clone();
    let m = minimize_projected(&**d, d.seed_field(&Seed::Isotropic, 0).into_vec(), &MinimizeOptions::default(), move |g| {
        dd.symmetrize(g)
    })
    .and_then(|m| m.ok())
    .map_err(|e| e.to_string())?;
    SaddleRecord::verify(&**d, m.x, 1e-8, &HisdOptions::default()).map_err(|e| e.to_string())
}

fn square_domain() -> Outcome {
    let t = Instant::now();
    let opts = LandscapeOptions::default();

    // small square: every seed relaxes to the same stable state
    let d5 = square(32, 5.0);
    let w5 = wors(&d5)?;
    let seeds = [
        Seed::Isotropic,
        Seed::Diagonal(Diagonal::D1),
        Seed::Diagonal(Diagonal::D2),
        Seed::Rotated(Edge::Bottom),
        Seed::Rotated(Edge::Left),
        Seed::Random(0.3),
    ];
    let mut stable: Vec<SaddleRecord> = Vec::new();
    for (k, s) in seeds.iter().enumerate() {
        let m = minimize(&*d5, d5.seed_field(s, k as u64).into_vec(), &MinimizeOptions::default())
            .and_then(|m| m.ok())
            .map_err(|e| e.to_string())?;
        let rec = SaddleRecord::verify(&*d5, m.x, 1e-8, &HisdOptions::default()).map_err(|e| e.to_string())?;
        if rec.morse_index == 0 && !stable.iter().any(|r| same_state(&*d5, r, &rec, &opts)) {
            stable.push(rec);
        }
    }
    let g5 = build_landscape(&*d5, w5.clone(), &opts).map_err(|e| e.to_string())?;
    check!(stable.len() == 1, "{} distinct stable states at lambda^2 = 5", stable.len());
    check!(w5.morse_index == 0 && same_state(&*d5, &stable[0], &w5, &opts), "the stable state is not the symmetric one");
    check!(g5.nodes.len() == 1, "landscape at lambda^2 = 5 has {} nodes", g5.nodes.len());
    let f5 = QField::from_vec(d5.clone(), w5.x.clone()).map_err(|e| e.to_string())?;
    let prof = diagonal_profile(&f5);
    check!(prof.max_biaxiality < 0.05, "diagonal biaxiality {}", prof.max_biaxiality);
    check!(
        prof.max_planar_order < 0.1 * prof.field_max_planar_order,
        "diagonal planar order {} vs max {}",
        prof.max_planar_order,
        prof.field_max_planar_order
    );

    // large square: the symmetric state is a saddle above several minima
    let d50 = square(32, 50.0);
    let w50 = wors(&d50)?;
    check!(w50.morse_index >= 2, "symmetric state index {} at lambda^2 = 50", w50.morse_index);
    let g50 = build_landscape(&*d50, w50.clone(), &LandscapeOptions { max_nodes: 40, ..opts.clone() })
        .map_err(|e| e.to_string())?;
    let minima = g50.with_index(0).count();
    check!(minima >= 2, "{minima} stable states at lambda^2 = 50");
    check!(w50.morse_index >= w5.morse_index, "index fell from {} to {}", w5.morse_index, w50.morse_index);
    let el = t.elapsed();
    check!(el < Duration::from_secs(600), "took {el:?}");
    Ok(format!(
        "lambda^2=5: 1 stable state, diagonal beta {:.1e}, planar {:.1e} of max {:.2} (|Q| on diagonals {:.2} of max {:.2}); \
         lambda^2=50: symmetric index {}, {} nodes, {} stable; {:.1?}",
        prof.max_biaxiality,
        prof.max_planar_order,
        prof.field_max_planar_order,
        prof.max_norm,
        prof.field_max_norm,
        w50.morse_index,
        g50.nodes.len(),
        minima,
        el
    ))
}

fn hedgehog() -> Outcome {
    let t = Instant::now();
    let p = bulk();
    let sols: Vec<_> = [256, 512, 1024]
        .iter()
        .map(|&n| solve_profile(&p, 10.0, n))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    for s in &sols {
        let res = residual(&p, s.dr, &s.h).iter().fold(0.0f64, |a, r| a.max(r.abs()));
        check!(res < 1e-8, "residual {res}");
        check!(s.h[0] == 0.0 && *s.h.last().unwrap() == s.s_plus, "boundary values");
    }
    let diff = |a: &[f64], b: &[f64]| (0..a.len()).map(|i| (a[i] - b[2 * i]).abs()).fold(0.0, f64::max);
    let order = (diff(&sols[0].h, &sols[1].h) / diff(&sols[1].h, &sols[2].h)).log2();
    let el = t.elapsed();
    check!(order >= 1.9, "order {order}");
    check!(el < Duration::from_secs(5), "took {el:?}");
    Ok(format!("residual < 1e-8, observed order {order:.3}, {el:?}"))
}

fn cross_method() -> Outcome {
    let d = square(32, 5.0);
    let init = d.seed_field(&Seed::Diagonal(Diagonal::D1), 0);
    let (f, steps) = flow_to_equilibrium(&init, 3.0, 1e-9, 50_000).map_err(|e| e.to_string())?;
    let m = minimize(&*d, init.as_slice().to_vec(), &MinimizeOptions { tol_grad: 1e-9, ..Default::default() })
        .and_then(|m| m.ok())
        .map_err(|e| e.to_string())?;
    let rel = distance(f.as_slice(), &m.x) / norm2(&m.x);
    check!(rel < 1e-5, "relative distance {rel}");
    Ok(format!("relative distance {rel:.1e} ({steps} flow steps, {} L-BFGS iterations)", m.iterations))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("maier-saupe critical concentration", critical_concentration),
        ("exact isotropic threshold", isotropic_threshold),
        ("branch structure", branch_structure),
        ("parodi identity", parodi),
        ("gradient correctness", gradient_correctness),
        ("unconditional energy stability", energy_stability),
        ("toy-potential landscape", toy_landscape),
        ("string method", string_method),
        ("square-domain qualitative reproduction", square_domain),
        ("hedgehog bvp", hedgehog),
        ("cross-method equivalence", cross_method),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match out {
            Ok(msg) => println!("PASS {name}: {msg} [{:.2?}]", t.elapsed()),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg} [{:.2?}]", t.elapsed());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
