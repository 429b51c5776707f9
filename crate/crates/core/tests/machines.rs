use nalgebra::Vector3;
use qthermo::geometry::{BiasAxis, MasterEquationField, TensorField};
use qthermo::machines::*;
use qthermo::{BathSpec, Coupling, FieldMap, Protocol, Spectrum};

fn field() -> MasterEquationField {
    let baths = vec![
        BathSpec::new("hot", Coupling::Axis(Vector3::z()), Spectrum::ohmic(0.05, 50.0), 1.0).unwrap(),
        BathSpec::new("cold", Coupling::Axis(Vector3::x()), Spectrum::ohmic(0.05, 50.0), 1.0).unwrap(),
    ];
    MasterEquationField::new(FieldMap::planar_xz(), baths).with_bias(BiasAxis { hot: 0, cold: 1 })
}

fn ellipse_family() -> Family {
    Family::Ellipse {
        lower: [0.3, 0.3, 0.05, 0.05, 0.0],
        upper: [2.0, 2.0, 1.0, 1.0, std::f64::consts::PI],
    }
}

fn trapezoid_summary(p: &Protocol, f: &MasterEquationField, m: usize) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..m {
        let (x, d) = p.eval(k as f64 / m as f64);
        let t = f.tensor(&x).unwrap();
        let col = t.bias_column().unwrap();
        out[0] += (col[0] * d[0] + col[1] * d[1]) / m as f64;
        out[1] += t.quadratic_form(&d) / m as f64;
        out[2] += t.conductance().unwrap() / m as f64;
    }
    out
}

#[test]
fn summary_matches_node_doubling_oracle() {
    let f = field();
    let p = Protocol::ellipse([1.0, 0.9], [0.5, 0.3], 0.4).reversed();
    let s = machine_summary(&p, &f, 0.05, 40.0).unwrap();
    let coarse = trapezoid_summary(&p, &f, 200);
    let fine = trapezoid_summary(&p, &f, 400);
    for k in 0..3 {
        assert!((coarse[k] - fine[k]).abs() < 1e-9 * fine[k].abs());
    }
    let [a, l2, kappa] = fine;
    let tau_d = l2 / (0.05 * a);
    let tau_k = a / (0.05 * kappa);
    for (got, want) in [(s.area, a), (s.length2, l2), (s.kappa, kappa), (s.tau_d, tau_d), (s.tau_kappa, tau_k)] {
        assert!((got - want).abs() < 1e-6 * want.abs(), "{got} vs {want}");
    }
    assert!(s.area > 0.0 && s.tau_d > 0.0 && s.tau_kappa > 0.0);
}

#[test]
fn zero_bias_reduces_to_pumping() {
    use qthermo::pumping::{pumped_heat, PumpField};
    let f = field();
    let p = Protocol::ellipse([1.2, 0.8], [0.4, 0.6], 0.0).with_duration(30.0);
    let s = machine_summary(&p, &f, 0.0, 30.0).unwrap();
    let pump = PumpField { map: f.map.clone(), baths: f.baths.clone(), bath: 1 };
    let q = pumped_heat(&p, &pump).unwrap();
    assert!((s.heat - q.line_integral).abs() < 1e-8 * q.line_integral.abs());
    assert_eq!(s.heat, s.area);
    let w = qthermo::geometry::dissipated_work(&p, &f, 0.0).unwrap();
    assert!((s.work - w).abs() < 1e-8 * w);
    let r = machine_summary(&p.reversed(), &f, 0.0, 30.0).unwrap();
    assert!((r.area + s.area).abs() < 1e-10 * s.area.abs());
    assert!((r.length2 - s.length2).abs() < 1e-10 * s.length2);
}

#[test]
fn engine_optimum_on_protocol() {
    let f = field();
    let p = Protocol::ellipse([1.0, 0.9], [0.5, 0.3], 0.4).reversed();
    let s = machine_summary(&p, &f, 0.05, 40.0).unwrap();
    let e = engine_performance(&s).unwrap();
    assert!((s.power_at(e.tau_p) - e.max_power).abs() <= 1e-8 * e.max_power);
    for k in 1..400 {
        let tau = e.tau_d * (1.0 + 0.05 * k as f64);
        assert!(s.power_at(tau) <= e.max_power * (1.0 + 1e-12));
        assert!(s.efficiency_at(tau) <= s.efficiency_at(e.tau_eta) * (1.0 + 1e-12));
        assert!(s.efficiency_at(tau) <= s.bias);
    }
}

fn max_power_options(seed: u64) -> OptimizeOptions {
    let mut o = OptimizeOptions::new(ellipse_family(), Objective::MaxPower);
    o.seed = seed;
    o
}

#[test]
fn optimizer_is_deterministic_and_beats_random_search() {
    use rand::{Rng, SeedableRng};
    let f = field();
    let a = optimize_protocol(&f, &max_power_options(7)).unwrap();
    let b = optimize_protocol(&f, &max_power_options(7)).unwrap();
    assert_eq!(a.params.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.params.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.trace, b.trace);
    assert!(a.summary.area > 0.0);
    let Family::Ellipse { lower, upper } = ellipse_family() else { unreachable!() };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mut feasible = 0;
    for _ in 0..1000 {
        let p: Vec<f64> = (0..5).map(|i| lower[i] + rng.random::<f64>() * (upper[i] - lower[i])).collect();
        let c = ellipse_family().curve(&p).unwrap();
        if let Some(s) = score_candidate(&c, &f, 128).unwrap() {
            feasible += 1;
            let power = 0.25 * 0.01 * s.area * s.area / s.length2;
            assert!(power <= a.objective, "{p:?}: {power} > {}", a.objective);
        }
    }
    assert!(feasible > 100);
}

#[test]
fn pumped_heat_grows_with_the_box() {
    let f = field();
    let mut last = 0.0;
    for scale in [0.5, 1.0, 2.0, 3.0] {
        let fam = Family::Ellipse {
            lower: [0.02, 0.02, 0.01, 0.01, 0.0],
            upper: [scale, scale, scale, scale, std::f64::consts::PI],
        };
        let mut o = OptimizeOptions::new(fam, Objective::MaxPumpedHeat);
        o.budget = 4000;
        let r = optimize_protocol(&f, &o).unwrap();
        println!("box {scale}: A = {}", r.objective);
        assert!(r.objective >= last * (1.0 - 1e-6));
        assert!(r.objective < std::f64::consts::LN_2);
        last = r.objective;
    }
}

#[test]
fn small_budget_reports_incumbent() {
    let mut o = max_power_options(1);
    o.budget = 15;
    match optimize_protocol(&field(), &o) {
        Err(qthermo::Error::BudgetExhausted { evaluations, best_params, .. }) => {
            assert_eq!(evaluations, 15);
            assert_eq!(best_params.len(), 5);
        }
        other => panic!("{other:?}"),
    }
}
