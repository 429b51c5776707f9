use nalgebra::{SymmetricEigen, Vector3};
use proptest::prelude::*;
use qthermo::geometry::{geo_tensor, BiasAxis};
use qthermo::machines::{carnot_cycle, carnot_reference, classify_mode, optimal_strokes, stroke_power};
use qthermo::meq::{build_kernel, frozen_jacobian, frozen_lab_state, frozen_steady_state};
use qthermo::pumping::{chern_number, pumped_heat, Band, PumpField};
use qthermo::transport::{biased_current, landauer_current};
use qthermo::{BathSpec, Coupling, FieldMap, Protocol, Spectrum};

fn axis(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

fn ohmic(label: &str, g: Vector3<f64>, strength: f64, t: f64) -> BathSpec {
    BathSpec::new(label, Coupling::Axis(g), Spectrum::ohmic(strength, 40.0), t).unwrap()
}

/// Couplings with a non-negligible component transverse to every field in the test box.
fn transverse_pair(t: f64, s1: f64, s2: f64) -> Vec<BathSpec> {
    vec![ohmic("z", Vector3::z(), s1, t), ohmic("x", Vector3::x(), s2, t)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn equal_temperatures_give_gibbs_state(
        bx in 0.05f64..4.0, bz in -4.0f64..4.0, t in 0.1f64..5.0,
        th in 0.2f64..2.9, ph in 0.0f64..std::f64::consts::TAU, s1 in 0.001f64..0.2, s2 in 0.0f64..0.2,
    ) {
        let baths = vec![ohmic("a", axis(th, ph), s1, t), ohmic("b", Vector3::x(), s2, t)];
        let k = build_kernel(&FieldMap::planar_xz(), &baths, &[bx, bz]).unwrap();
        let b = (bx * bx + bz * bz).sqrt();
        let r = frozen_steady_state(&k).unwrap();
        prop_assert!((r - Vector3::new(0.0, 0.0, (b / t).tanh())).amax() < 1e-12);
    }

    #[test]
    fn frozen_jacobian_matches_gibbs_derivative(bx in 0.1f64..3.0, bz in -3.0f64..3.0, t in 0.2f64..3.0) {
        let baths = vec![ohmic("x", Vector3::x(), 0.05, t)];
        let map = FieldMap::planar_xz();
        let x = [bx, bz];
        let jac = frozen_jacobian(&map, &baths, &x).unwrap();
        let k = build_kernel(&map, &baths, &x).unwrap();
        // r = tanh(|B|/T) B/|B| in the lab frame.
        let b = Vector3::new(bx, 0.0, bz);
        let m = b.norm();
        let n = b / m;
        for (l, e) in [Vector3::x(), Vector3::z()].iter().enumerate() {
            let dm = n.dot(e);
            let dn = (e - n * dm) / m;
            let exact = (m / t).tanh() * dn + dm / (t * (m / t).cosh().powi(2)) * n;
            let got = k.to_lab(&jac.fixed_view::<3, 1>(0, l).into_owned());
            prop_assert!((got - exact).amax() < 1e-8 * (1.0 + exact.amax()), "{got} vs {exact}");
        }
    }

    #[test]
    fn metric_is_positive_semidefinite(
        bx in 0.05f64..3.0, bz in 0.05f64..3.0, t in 0.2f64..3.0, s1 in 0.01f64..0.2, s2 in 0.01f64..0.2,
    ) {
        let tensor = geo_tensor(&FieldMap::planar_xz(), &transverse_pair(t, s1, s2), &[bx, bz], Some(BiasAxis { hot: 0, cold: 1 })).unwrap();
        let eig = SymmetricEigen::new(tensor.symmetric());
        let scale = tensor.matrix.amax();
        prop_assert!(eig.eigenvalues.iter().all(|v| *v >= -1e-9 * scale), "{:?}", eig.eigenvalues);
    }

    #[test]
    fn onsager_antisymmetry(bx in 0.05f64..3.0, bz in 0.05f64..3.0, t in 0.2f64..3.0, s1 in 0.01f64..0.2, s2 in 0.01f64..0.2) {
        let tensor = geo_tensor(&FieldMap::planar_xz(), &transverse_pair(t, s1, s2), &[bx, bz], Some(BiasAxis { hot: 0, cold: 1 })).unwrap();
        let (row, col) = (tensor.bias_row().unwrap(), tensor.bias_column().unwrap());
        let scale = tensor.matrix.amax();
        for (r, c) in row.iter().zip(&col) {
            prop_assert!((r + c).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn steady_transport_conserves_energy(
        bx in 0.05f64..3.0, bz in 0.05f64..3.0, t in 0.2f64..3.0, frac in -0.95f64..0.95, s1 in 0.01f64..0.2, s2 in 0.01f64..0.2,
    ) {
        let b = transverse_pair(1.0, s1, s2);
        let pair = [b[0].clone(), b[1].clone()];
        let p = biased_current(&FieldMap::planar_xz(), &[bx, bz], &pair, t, 2.0 * t * frac).unwrap();
        // Roundoff floor: the rate terms that cancel in each current are of size B·γ(2B).
        let b2 = bx * bx + bz * bz;
        let floor = 1e-15 * b2 * (s1 + s2);
        let scale = p.current_left.abs().max(p.current_right.abs());
        prop_assert!((p.current_left + p.current_right).abs() <= 1e-10 * scale + floor);
        // Heat flows from the hotter bath into the colder one.
        prop_assert!(p.current_right * frac >= -floor);
    }

    #[test]
    fn unit_transmission_landauer(th in 0.05f64..5.0, tc in 0.05f64..5.0) {
        let j = landauer_current(|_| 1.0, th, tc, &[]).unwrap();
        let exact = std::f64::consts::PI.powi(2) * (th * th - tc * tc) / 6.0;
        prop_assert!((j - exact).abs() <= 1e-9 * exact.abs().max(1e-12));
    }

    #[test]
    fn mode_is_scale_invariant(q in -10.0f64..10.0, w in -10.0f64..10.0, c in 1.0f64..1e3) {
        prop_assume!(q.abs() > 1e-6 || w.abs() > 1e-6);
        prop_assert_eq!(classify_mode(q, w), classify_mode(c * q, c * w));
    }

    #[test]
    fn strokes_optimum_dominates(
        sc in 0.05f64..3.0, sh in 0.05f64..3.0, ds in 0.05f64..2.0, tc in 0.1f64..1.0, ratio in 1.1f64..5.0,
        fa in 0.3f64..3.0, fb in 0.3f64..3.0,
    ) {
        let th = tc * ratio;
        let o = optimal_strokes(sc, sh, ds, tc, th).unwrap();
        let p = stroke_power(sc, sh, ds, tc, th, o.tau_cold * fa, o.tau_hot * fb);
        prop_assert!(p <= o.max_power * (1.0 + 1e-12));
    }

    #[test]
    fn carnot_cycle_reaches_carnot_efficiency(b1 in 0.2f64..2.0, gap in 0.1f64..2.0, tc in 0.2f64..1.0, ratio in 1.2f64..4.0) {
        let th = tc * ratio;
        // The hot isotherm must end at a larger field than the cold one starts from for an engine.
        let r = carnot_cycle(b1, b1 + gap, th, tc).unwrap();
        let (eta, _) = carnot_reference(th, tc).unwrap();
        prop_assert!(r.energy_residual() < 1e-10);
        if let Some(e) = r.efficiency {
            prop_assert!((e - eta).abs() < 1e-8, "{e} vs {eta}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pumped_heat_is_antisymmetric(
        cx in 0.8f64..1.6, cz in 0.8f64..1.6, a in 0.1f64..0.6, b in 0.1f64..0.6, rot in 0.0f64..3.1, t in 0.3f64..2.0,
    ) {
        let field = PumpField { map: FieldMap::planar_xz(), baths: transverse_pair(t, 0.05, 0.08), bath: 0 };
        let p = Protocol::ellipse([cx, cz], [a, b], rot);
        let left = pumped_heat(&p, &field).unwrap().line_integral;
        let right = pumped_heat(&p, &PumpField { bath: 1, ..field.clone() }).unwrap().line_integral;
        let back = pumped_heat(&p.reversed(), &field).unwrap().line_integral;
        let scale = left.abs().max(1e-12);
        prop_assert!((left + right).abs() < 1e-7 * scale);
        prop_assert!((left + back).abs() < 1e-7 * scale);
        prop_assert!(left.abs() < t * std::f64::consts::LN_2);
    }

    #[test]
    fn bands_carry_opposite_chern_numbers(delta in prop::sample::select(vec![-3.3, -2.7, -1.5, -0.5, 0.5, 1.5, -4.5])) {
        let map = FieldMap::synthetic_lattice(1.0, delta);
        let g = chern_number(&map, 40, Band::Ground).unwrap();
        let e = chern_number(&map, 40, Band::Excited).unwrap();
        let expected = if (-2.0..0.0).contains(&delta) { 1 } else if (-4.0..-2.0).contains(&delta) { -1 } else { 0 };
        prop_assert_eq!(g.integer(1e-9), Some(expected));
        prop_assert_eq!(e.integer(1e-9), Some(-expected));
    }

    #[test]
    fn frozen_state_is_physical(bx in -3.0f64..3.0, bz in -3.0f64..3.0, t in 0.1f64..3.0, dt in 0.0f64..1.9) {
        prop_assume!(bx.hypot(bz) > 0.05);
        let b = vec![ohmic("z", Vector3::z(), 0.05, t * (1.0 + dt / 2.0)), ohmic("x", Vector3::x(), 0.05, t * (1.0 - dt / 2.0))];
        let r = frozen_lab_state(&FieldMap::planar_xz(), &b, &[bx, bz]).unwrap();
        prop_assert!(r.norm() <= 1.0 + 1e-12);
    }
}

proptest! {
    #[test]
    fn speed_profile_preserves_duration(amp in 0.0f64..0.9, phase in 0.0f64..std::f64::consts::TAU, tau in 0.1f64..1e3) {
        let p = Protocol::ellipse([1.0, 1.0], [0.3, 0.2], 0.0)
            .with_speed_fn(move |s| 1.0 + amp * (std::f64::consts::TAU * s + phase).sin())
            .unwrap()
            .with_duration(tau);
        prop_assert!((p.time_at(1.0) - tau).abs() < 1e-9 * tau);
        let times: Vec<f64> = (0..=64).map(|k| p.time_at(k as f64 / 64.0)).collect();
        prop_assert!(times.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(p.closure_gap() < 1e-12);
    }
}
