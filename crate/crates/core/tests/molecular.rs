use lcland::hedgehog::{residual, solve_profile};
use lcland::maier_saupe::{
    critical_alpha, eta_branches, leslie_coefficients, order_parameters, ratio, ratio_derivative, solve_branches,
    Branch,
};
use lcland::tensor::BulkParams;
use proptest::prelude::*;

/// Composite Simpson on [0, 1] with `m` panels, independent of the crate's
/// adaptive quadrature.
fn simpson<F: Fn(f64) -> f64>(f: F, m: usize) -> f64 {
    let h = 1.0 / m as f64;
    let mut s = f(0.0) + f(1.0);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0
}

fn ratio_oracle(eta: f64) -> f64 {
    let num = simpson(|z| (eta * (z * z - 1.0)).exp(), 40_000);
    let den = simpson(|z| z * z * (1.0 - z * z) * (eta * (z * z - 1.0)).exp(), 40_000);
    num / den
}

#[test]
fn ratio_matches_simpson_oracle() {
    for eta in [-20.0, -3.0, -0.5, 0.7, 2.0, 4.5, 12.0, 40.0] {
        let r = ratio(eta);
        assert!((r - ratio_oracle(eta)).abs() < 1e-10 * r, "eta {eta}");
    }
}

#[test]
fn ratio_derivative_matches_differences() {
    for eta in [-5.0, -1.0, 0.5, 2.1782879748, 3.0, 10.0] {
        let h = 1e-5;
        let fd = (ratio(eta + h) - ratio(eta - h)) / (2.0 * h);
        assert!((fd - ratio_derivative(eta)).abs() < 1e-7 * (1.0 + fd.abs()), "eta {eta}");
    }
}

#[test]
fn critical_alpha_is_the_minimum_of_the_ratio() {
    let (a, e) = critical_alpha();
    // golden-section minimization of the oracle ratio
    let (mut lo, mut hi) = (0.5, 5.0);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    while hi - lo > 1e-7 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if ratio_oracle(m1) < ratio_oracle(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let eta_o = 0.5 * (lo + hi);
    assert!((e - eta_o).abs() < 1e-4);
    assert!((a - ratio_oracle(eta_o)).abs() < 1e-9);
    assert!(ratio(e - 1e-3) > a && ratio(e + 1e-3) > a);
}

#[test]
fn branches_satisfy_the_consistency_equation() {
    let (_, eta_star) = critical_alpha();
    let mut prev: Option<(f64, f64)> = None;
    for alpha in [6.75, 6.8, 7.0, 7.2, 7.4, 7.49] {
        let (e1, e2) = eta_branches(alpha).unwrap();
        assert!(e1 > eta_star && eta_star > e2 && e2 > 0.0);
        assert!((ratio(e1) - alpha).abs() < 1e-10);
        assert!((ratio(e2) - alpha).abs() < 1e-10);
        // prolate root grows and oblate root shrinks with alpha
        if let Some((p1, p2)) = prev {
            assert!(e1 > p1 && e2 < p2);
        }
        prev = Some((e1, e2));
    }
    assert!(eta_branches(6.0).is_none());
}

#[test]
fn stability_labels() {
    for alpha in [6.8, 7.0, 7.4] {
        let pts = solve_branches(alpha);
        let kinds: Vec<_> = pts.iter().map(|p| (p.branch, p.stable)).collect();
        assert_eq!(
            kinds,
            vec![(Branch::Isotropic, true), (Branch::Prolate, true), (Branch::Oblate, false)]
        );
    }
    let pts = solve_branches(7.5);
    assert!(pts[0].marginal);
    assert_eq!(pts.len(), 2);
    let pts = solve_branches(8.0);
    assert!(!pts[0].stable);
    // beyond 7.5 the second root is negative
    assert!(pts.iter().any(|p| p.branch == Branch::Oblate && p.eta < 0.0));
}

#[test]
fn order_parameters_match_simpson() {
    for eta in [-4.0, 1.0, 4.611009267468751] {
        let w = |z: f64| (eta * (z * z - 1.0)).exp();
        let n = simpson(w, 4000);
        let s2 = simpson(|z| 0.5 * (3.0 * z * z - 1.0) * w(z), 4000) / n;
        let s4 = simpson(|z| (35.0 * z.powi(4) - 30.0 * z * z + 3.0) / 8.0 * w(z), 4000) / n;
        let (a, b) = order_parameters(eta);
        assert!((a - s2).abs() < 1e-10 && (b - s4).abs() < 1e-10);
    }
    // regression values at alpha = 7.5
    let (s2, s4) = order_parameters(4.611009267468751);
    assert!((s2 - 0.6148012356625003).abs() < 1e-12);
    assert!((s4 - 0.2561671815260417).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn parodi_relation(s2 in -0.5f64..1.0, s4 in -0.5f64..1.0, g1 in 0.0f64..10.0) {
        let l = leslie_coefficients(s2, s4, g1);
        let scale = 1.0 + s2.abs() + s4.abs() + g1;
        prop_assert!(((l.alpha2 + l.alpha3) - (l.alpha6 - l.alpha5)).abs() <= 4.0 * f64::EPSILON * scale);
        prop_assert!(((l.alpha3 - l.alpha2) + l.gamma1).abs() <= 4.0 * f64::EPSILON * scale);
    }
}

fn bulk() -> BulkParams {
    BulkParams::new(-1.0, 1.0, 1.0).unwrap()
}

#[test]
fn hedgehog_boundary_values_and_residual() {
    let p = solve_profile(&bulk(), 10.0, 512).unwrap();
    assert_eq!(p.h[0], 0.0);
    assert_eq!(*p.h.last().unwrap(), 1.5);
    assert!(p.residual < 1e-8);
    let res = residual(&bulk(), p.dr, &p.h);
    assert!(res.iter().all(|r| r.abs() < 1e-8));
    assert!(p.h.windows(2).all(|w| w[1] >= w[0]));
    // h(r)/r stays bounded near the core
    assert!(p.h.iter().zip(&p.r).skip(1).take(20).all(|(h, r)| h / r < 10.0));
}

#[test]
fn hedgehog_converges_at_second_order() {
    let coarse = solve_profile(&bulk(), 10.0, 256).unwrap();
    let mid = solve_profile(&bulk(), 10.0, 512).unwrap();
    let fine = solve_profile(&bulk(), 10.0, 1024).unwrap();
    let d1 = (0..=256).map(|i| (coarse.h[i] - mid.h[2 * i]).abs()).fold(0.0, f64::max);
    let d2 = (0..=512).map(|i| (mid.h[i] - fine.h[2 * i]).abs()).fold(0.0, f64::max);
    let order = (d1 / d2).log2();
    assert!(order >= 1.9, "order {order}");
}

#[test]
fn hedgehog_rejects_bad_input() {
    assert!(solve_profile(&bulk(), 10.0, 32).is_err());
    assert!(solve_profile(&bulk(), -1.0, 128).is_err());
}
