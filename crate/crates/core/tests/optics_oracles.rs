use num_complex::Complex64;
use plasmon_squeeze::optics::{
    characteristic_matrix, reflection_coefficient, reflectivity_sweep, Film, Kretschmann,
    LayerStack, Medium, PrismGeometry, GOLD_PERMITTIVITY_795NM,
};
use proptest::prelude::*;

/// Three-layer Airy summation with TM interface coefficients built from
/// scalar wavevectors, independent of the matrix formalism.
fn airy_three_layer(eps1: f64, eps2: Complex64, eps3: Complex64, h_nm: f64, lambda_nm: f64, theta_deg: f64) -> Complex64 {
    let k0 = 2.0 * std::f64::consts::PI / lambda_nm;
    let kx = k0 * eps1.sqrt() * theta_deg.to_radians().sin();
    let kz = |eps: Complex64| {
        let k = (eps * k0 * k0 - kx * kx).sqrt();
        if k.im < 0.0 { -k } else { k }
    };
    let (k1, k2, k3) = (kz(Complex64::new(eps1, 0.0)), kz(eps2), kz(eps3));
    let e1 = Complex64::new(eps1, 0.0);
    let r_tm = |ka: Complex64, ea: Complex64, kb: Complex64, eb: Complex64| {
        (ka / ea - kb / eb) / (ka / ea + kb / eb)
    };
    let r12 = r_tm(k1, e1, k2, eps2);
    let r23 = r_tm(k2, eps2, k3, eps3);
    let phase = (Complex64::new(0.0, 2.0) * k2 * h_nm).exp();
    (r12 + r23 * phase) / (1.0 + r12 * r23 * phase)
}

fn gold_stack(h: f64, n3: f64) -> LayerStack {
    LayerStack::kretschmann(1.51, GOLD_PERMITTIVITY_795NM, h, n3, 795.0).unwrap()
}

#[test]
fn transfer_matrix_matches_airy_sum_over_dip() {
    let s = gold_stack(50.0, 1.33);
    let mut worst: f64 = 0.0;
    for i in 0..=700 {
        let th = 63.0 + i as f64 * 0.01;
        let r = reflection_coefficient(&s, th).unwrap();
        let oracle = airy_three_layer(
            1.51 * 1.51,
            GOLD_PERMITTIVITY_795NM,
            Complex64::new(1.33 * 1.33, 0.0),
            50.0,
            795.0,
            th,
        );
        worst = worst.max((r - oracle).norm());
    }
    assert!(worst < 1e-10, "max |dr| = {worst}");
}

#[test]
fn film_splitting_reproduces_single_film() {
    let whole = gold_stack(50.0, 1.33);
    let m = characteristic_matrix(&whole, 66.0).unwrap();
    for n in 1..=16usize {
        let mut split = whole.clone();
        split.films = (0..n)
            .map(|_| Film {
                medium: Medium::new("gold", GOLD_PERMITTIVITY_795NM),
                thickness_nm: 50.0 / n as f64,
            })
            .collect();
        let p = characteristic_matrix(&split, 66.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let d = (p.0[i][j] - m.0[i][j]).norm() / m.0[i][j].norm();
                assert!(d < 1e-10, "n = {n}: rel {d}");
            }
        }
    }
}

#[test]
fn dip_moves_right_with_index() {
    let geometry = PrismGeometry::right_angle(1.51).unwrap();
    let base = reflectivity_sweep(
        &Kretschmann::new(gold_stack(50.0, 1.33), geometry, true),
        63.0,
        70.0,
        0.01,
    )
    .unwrap();
    for delta in [0.001, 0.005, 0.01] {
        let shifted = reflectivity_sweep(
            &Kretschmann::new(gold_stack(50.0, 1.33 + delta), geometry, true),
            63.0,
            70.0,
            0.01,
        )
        .unwrap();
        assert!(shifted.resonance_angle_deg > base.resonance_angle_deg, "delta {delta}");
    }
}

proptest! {
    #[test]
    fn determinant_is_one(
        h in 0.0f64..200.0,
        re in -40.0f64..-2.0,
        im in 0.0f64..5.0,
        theta in 1.0f64..89.0,
        n3 in 1.0f64..1.5,
    ) {
        let s = LayerStack::kretschmann(1.51, Complex64::new(re, im), h, n3, 795.0).unwrap();
        let m = characteristic_matrix(&s, theta).unwrap();
        // cos^2 + sin^2 cancels terms of size |m11 m22| for evanescent films
        let scale = (m.m11() * m.m22()).norm().max(1.0);
        prop_assert!((m.determinant() - 1.0).norm() < 1e-12 * scale);
    }

    #[test]
    fn passive_reflectivity_is_bounded(
        h1 in 0.0f64..120.0,
        h2 in 0.0f64..20.0,
        re in -40.0f64..-2.0,
        im in 0.0f64..5.0,
        theta in 1.0f64..89.0,
        n3 in 1.0f64..1.5,
    ) {
        // gold on a thin lossy adhesion layer
        let s = LayerStack::new(
            Medium::from_index("prism", 1.51),
            vec![
                Film { medium: Medium::new("chromium", Complex64::new(-4.0, 22.0)), thickness_nm: h2 },
                Film { medium: Medium::new("gold", Complex64::new(re, im)), thickness_nm: h1 },
            ],
            Medium::from_index("analyte", n3),
            795.0,
        ).unwrap();
        let r = reflection_coefficient(&s, theta).unwrap().norm_sqr();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&r), "R = {}", r);
    }

    #[test]
    fn external_internal_round_trip(phi in -60.0f64..60.0, n in 1.2f64..2.0) {
        let g = PrismGeometry::right_angle(n).unwrap();
        let back = g.internal_to_external(g.external_to_internal(phi).unwrap()).unwrap();
        prop_assert!((back - phi).abs() < 1e-12);
    }
}
