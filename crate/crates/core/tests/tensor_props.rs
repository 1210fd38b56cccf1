use lcland::tensor::{
    biaxiality, bulk_energy, bulk_energy_and_component_gradient, bulk_gradient, critical_points, critical_temperatures,
    eig_classify, metric_dot, BulkParams, Phase, QTensor, Regime,
};
use nalgebra::Matrix3;
use proptest::prelude::*;

fn qtensor() -> impl Strategy<Value = QTensor> {
    prop::array::uniform5(-1.0f64..1.0).prop_map(QTensor)
}

fn rotation() -> impl Strategy<Value = [[f64; 3]; 3]> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("nonzero quaternion", |q| q.iter().map(|x| x * x).sum::<f64>() > 1e-3)
        .prop_map(|q| {
            let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            let [w, x, y, z] = q.map(|c| c / n);
            [
                [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
                [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
                [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
            ]
        })
}

fn bulk_params() -> impl Strategy<Value = BulkParams> {
    (-3.0f64..3.0, 0.1f64..3.0, 0.1f64..3.0).prop_map(|(a, b, c)| BulkParams { a, b, c })
}

fn nalgebra_eigenvalues(q: &QTensor) -> [f64; 3] {
    let m = q.matrix();
    let mut ev: Vec<f64> = Matrix3::from_fn(|i, j| m[i][j]).symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    [ev[0], ev[1], ev[2]]
}

proptest! {
    #[test]
    fn matrix_is_traceless_and_symmetric(q in qtensor()) {
        let m = q.matrix();
        prop_assert!((m[0][0] + m[1][1] + m[2][2]).abs() < 1e-15);
        for i in 0..3 {
            for j in 0..3 {
                prop_assert_eq!(m[i][j], m[j][i]);
            }
        }
        let fro: f64 = m.iter().flatten().map(|x| x * x).sum();
        prop_assert!((fro - q.norm_sq()).abs() < 1e-14 * (1.0 + fro));
    }

    #[test]
    fn energy_is_frame_indifferent(q in qtensor(), r in rotation(), p in bulk_params()) {
        let e = bulk_energy(&q, &p);
        let er = bulk_energy(&q.rotated(&r), &p);
        prop_assert!((e - er).abs() < 1e-12 * (1.0 + e.abs()));
        prop_assert!((biaxiality(&q) - biaxiality(&q.rotated(&r))).abs() < 1e-8);
    }

    #[test]
    fn tensor_gradient_matches_directional_difference(q in qtensor(), d in qtensor(), p in bulk_params()) {
        let h = 1e-6;
        let fd = (bulk_energy(&q.add(&d.scaled(h)), &p) - bulk_energy(&q.add(&d.scaled(-h)), &p)) / (2.0 * h);
        let an = bulk_gradient(&q, &p).frobenius_dot(&d);
        prop_assert!((fd - an).abs() < 1e-7 * (1.0 + an.abs()), "{} vs {}", fd, an);
    }

    #[test]
    fn component_gradient_agrees_with_tensor_gradient(q in qtensor(), p in bulk_params()) {
        let (e, g) = bulk_energy_and_component_gradient(&q.0, &p);
        prop_assert!((e - bulk_energy(&q, &p)).abs() < 1e-13 * (1.0 + e.abs()));
        // components of the tensor gradient, pulled back through the metric
        let t = bulk_gradient(&q, &p);
        for c in 0..5 {
            let mut ec = [0.0; 5];
            ec[c] = 1.0;
            prop_assert!((g[c] - metric_dot(&t.0, &ec)).abs() < 1e-12 * (1.0 + g[c].abs()));
        }
    }

    #[test]
    fn eigenvalues_match_reference_solver(q in qtensor()) {
        let (ev, vecs) = q.eigen();
        let want = nalgebra_eigenvalues(&q);
        for k in 0..3 {
            prop_assert!((ev[k] - want[k]).abs() < 1e-12);
        }
        let m = q.matrix();
        for k in 0..3 {
            for i in 0..3 {
                let mv: f64 = (0..3).map(|j| m[i][j] * vecs[j][k]).sum();
                prop_assert!((mv - ev[k] * vecs[i][k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn biaxiality_is_bounded_and_vanishes_on_uniaxial(q in qtensor(), s in 0.1f64..2.0, n in prop::array::uniform3(-1.0f64..1.0)) {
        let b = biaxiality(&q);
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assume!(n.iter().map(|x| x * x).sum::<f64>() > 1e-2);
        prop_assert!(biaxiality(&QTensor::uniaxial(s, n)) < 1e-10);
    }

    #[test]
    fn critical_points_are_uniaxial_stationary(p in bulk_params()) {
        prop_assume!(p.b * p.b - 24.0 * p.a * p.c > 1e-6);
        let set = critical_points(&p).unwrap();
        for s in [set.s_plus, set.s_minus] {
            let q = QTensor::uniaxial(s, [0.0, 0.0, 1.0]);
            let g = bulk_gradient(&q, &p);
            prop_assert!(g.norm_sq().sqrt() < 1e-10 * (1.0 + s.abs().powi(3)));
        }
        prop_assert!(p.uniaxial_energy(set.s_plus) <= p.uniaxial_energy(set.s_minus));
    }
}

#[test]
fn classification_of_simple_states() {
    assert!(matches!(eig_classify(&QTensor::ZERO, 1e-10).phase, Phase::Isotropic));
    match eig_classify(&QTensor::uniaxial(0.6, [0.0, 1.0, 0.0]), 1e-10).phase {
        Phase::Uniaxial { s, n } => {
            assert!((s - 0.6).abs() < 1e-12);
            assert!((n[1].abs() - 1.0).abs() < 1e-12);
        }
        p => panic!("unexpected {p:?}"),
    }
    let biax = QTensor::new(0.2, 0.0, 0.0, -0.05, 0.0);
    assert!(matches!(eig_classify(&biax, 1e-10).phase, Phase::Biaxial { .. }));
}

#[test]
fn critical_points_closed_form() {
    let set = critical_points(&BulkParams::new(-1.0, 1.0, 1.0).unwrap()).unwrap();
    assert!((set.s_plus - 1.5).abs() < 1e-14);
    assert!((set.s_minus + 1.0).abs() < 1e-14);
    assert_eq!(set.regime, Regime::BelowSupercooling);
    // above the clearing point the nematic root is metastable
    let b = 1.0;
    let c = 1.0;
    let a = 0.5 * (b * b / (27.0 * c) + b * b / (24.0 * c));
    let set = critical_points(&BulkParams::new(a, b, c).unwrap()).unwrap();
    assert_eq!(set.regime, Regime::Superheated);
    assert!(BulkParams::new(1.0, 1.0, 1.0).map(|p| critical_points(&p)).unwrap().is_err());
}

#[test]
fn transition_temperatures_are_ordered() {
    let (t0, tc, t2) = critical_temperatures(0.13, 307.0, 1.6, 3.9);
    assert!(t0 < tc && tc < t2);
    assert!((tc - t0 - 1.6f64.powi(2) / (27.0 * 0.13 * 3.9)).abs() < 1e-12);
}
