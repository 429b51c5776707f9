use nalgebra::Vector3;
use qthermo::meq::{build_kernel, energy_current, lab_rhs, StatePart};
use qthermo::numeric::ode::{dopri5, OdeOptions};
use qthermo::transport::*;
use qthermo::{BathSpec, Coupling, FieldMap, Spectrum};

fn baths(gl: f64, gr: f64, sl: f64, sr: f64) -> [BathSpec; 2] {
    let spec = |g: f64, s: f64| Spectrum::PowerLaw { strength: g, exponent: s, cutoff: 20.0 };
    [
        BathSpec::new("l", Coupling::Axis(Vector3::z()), spec(gl, sl), 1.0).unwrap(),
        BathSpec::new("r", Coupling::Axis(Vector3::x()), spec(gr, sr), 1.0).unwrap(),
    ]
}

#[test]
fn steady_current_is_long_time_limit() {
    let map = FieldMap::planar_xz();
    let x = [0.6, 0.4];
    let [l, r] = biased_pair(&baths(0.05, 0.03, 1.0, 1.0), 1.0, 0.5).unwrap();
    let pair = vec![l.clone(), r.clone()];
    let rhs = |_t: f64, y: &Vector3<f64>| lab_rhs(&map, &pair, &x, y).unwrap();
    let opts = OdeOptions { rel_tol: 1e-12, abs_tol: 1e-15, ..Default::default() };
    let (y, _) = dopri5(rhs, 0.0, 3000.0, Vector3::zeros(), &[], opts).unwrap();
    let k = build_kernel(&map, &pair, &x).unwrap();
    let j = energy_current(&k, &k.to_frame(&y), StatePart::Frozen);
    let p = steady_current(&map, &x, &l, &r).unwrap();
    assert!((j[1] - p.current_right).abs() < 1e-8 * p.current_right.abs(), "{} vs {}", j[1], p.current_right);
    assert!(p.current_right > 0.0);
}

#[test]
fn conservation_and_mirror_antisymmetry() {
    let map = FieldMap::planar_xz();
    let b = baths(0.05, 0.02, 1.0, 3.0);
    for &(bx, bz) in &[(0.3, 0.2), (1.0, 0.1), (0.05, 2.0)] {
        for &dt in &[-0.8, -0.1, 0.1, 0.8] {
            let p = biased_current(&map, &[bx, bz], &b, 1.0, dt).unwrap();
            assert!(p.conservation_residual() < 1e-10);
            let mirror = [b[1].clone(), b[0].clone()];
            let q = biased_current(&map, &[bx, bz], &mirror, 1.0, -dt).unwrap();
            assert!((q.current_left - p.current_right).abs() < 1e-12 * p.current_right.abs());
        }
    }
}

#[test]
fn conductance_properties() {
    let map = FieldMap::planar_xz();
    let x = [0.5, 0.5];
    let b = baths(0.05, 0.02, 1.0, 1.0);
    let g = thermal_conductance(&map, &x, &b, 1.0).unwrap();
    assert!(g.g_th > 0.0 && g.ratio < 1e-2);
    let mirror = [b[1].clone(), b[0].clone()];
    let gm = thermal_conductance(&map, &[0.5, 0.5], &mirror, 1.0).unwrap();
    assert!((gm.g_th - g.g_th).abs() < 1e-8 * g.g_th);
    let off = baths(0.05, 0.0, 1.0, 1.0);
    assert_eq!(thermal_conductance(&map, &x, &off, 1.0).unwrap().g_th, 0.0);
    for dt in [1e-3, 5e-3] {
        let j = biased_current(&map, &x, &b, 1.0, dt).unwrap().current_right;
        assert!((j - g.g_th * dt).abs() < 1e-2 * j.abs());
    }
}

#[test]
fn rectification_bound_and_small_bias() {
    let map = FieldMap::planar_xz();
    let b = baths(0.08, 0.01, 1.0, 1.0);
    for &(bx, bz) in &[(0.3, 0.3), (0.1, 0.8), (1.5, 0.4)] {
        let x = [bx, bz];
        let lambda = coupling_asymmetry(&map, &x, &b).unwrap();
        for &dt in &[0.1, 0.5, 1.0, 1.8] {
            let r = rectification(&map, &x, &b, 1.0, dt).unwrap();
            assert!(r.abs() <= lambda.abs() * dt / 2.0 * 1.01, "({bx},{bz}) dt {dt}: R {r} lambda {lambda}");
        }
        let r1 = rectification(&map, &x, &b, 1.0, 1e-3).unwrap();
        let r2 = rectification(&map, &x, &b, 1.0, 2e-3).unwrap();
        assert!((r2 / r1 - 2.0).abs() < 1e-2, "{r1} {r2}");
    }
}

#[test]
fn landauer_narrow_window_and_node_doubling() {
    let (e0, w, th, tc) = (1.2, 1e-3, 1.5, 0.8);
    let boxcar = |e: f64| if (e - e0).abs() <= w / 2.0 { 1.0 } else { 0.0 };
    let j = landauer_current(boxcar, th, tc, &[e0 - w / 2.0, e0 + w / 2.0]).unwrap();
    let n = |t: f64| 1.0 / ((e0 / t).exp() - 1.0);
    let approx = e0 * w * (n(th) - n(tc));
    assert!((j - approx).abs() < 1e-6 * approx.abs());
    let smooth = |e: f64| (-(e - 1.0).powi(2)).exp();
    let a = landauer_current(smooth, th, tc, &[]).unwrap();
    let b = landauer_current(smooth, th, tc, &[0.5, 1.0, 1.5, 2.0, 3.0]).unwrap();
    assert!((a - b).abs() < 1e-8 * a.abs());
}

#[test]
fn sweep_table_is_ordered() {
    let b = baths(0.05, 0.02, 1.0, 1.0);
    let pts = [(1.0, 0.0), (1.0, 0.2), (0.5, 0.1)];
    let t = transport_sweep(&FieldMap::planar_xz(), &[0.4, 0.4], &b, &pts).unwrap();
    assert_eq!(t.headers, ["T", "dT", "J_l", "J_r", "G_th", "R"]);
    assert_eq!(t.column("T").unwrap(), vec![1.0, 1.0, 0.5]);
    assert!(t.rows[0][5].is_nan());
}
