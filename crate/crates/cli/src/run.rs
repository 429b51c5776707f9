//! Executes a validated scenario and collects its tables and summary values.

use nalgebra::Vector3;
use qthermo::geometry::{
    constant_rate_reparametrize, dissipated_work, dissipation_bound_check, metric_speed2, BiasAxis,
    MasterEquationField, TensorField,
};
use qthermo::machines::{
    engine_performance, machine_summary, optimize_protocol, AdiabaticMachineSummary, Family, Objective,
    OptimizeOptions,
};
use qthermo::pumping::{chern_number, floquet_pump, golden_convergent, pumped_heat, quarter_plane_protocol, Band, FloquetOptions, PumpField};
use qthermo::table::Table;
use qthermo::transport::transport_sweep;
use qthermo::{BathSpec, Coupling, Error, FieldMap, Protocol, Result, Spectrum};
use serde_json::{json, Map, Value};

use crate::config::{
    BandSpec, BathConfig, Command, CouplingSpec, FamilySpec, MapKind, MapSpec, ObjectiveSpec, ProtocolKind,
    ProtocolSpec, Scenario, SpectrumKind, SpeedKind,
};

/// Files to write, in order, and scalar results for the manifest.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub summary: Map<String, Value>,
}

impl Outcome {
    fn table(&mut self, name: &str, table: &Table) {
        self.files.push((name.to_string(), table.to_csv()));
    }

    fn value(&mut self, key: &str, v: impl Into<Value>) {
        self.summary.insert(key.to_string(), v.into());
    }
}

/// Samples along a protocol for the spline and dissipation tables.
const PROTOCOL_SAMPLES: usize = 201;

pub fn execute(s: &Scenario, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::default();
    match s.command {
        Command::Dissipation => dissipation(s, &mut out)?,
        Command::Pump => pump(s, &mut out)?,
        Command::Chern => chern(s, &mut out)?,
        Command::Floquet => floquet(s, &mut out)?,
        Command::Machine => machine(s, &mut out)?,
        Command::Transport => transport(s, &mut out)?,
        Command::Optimize => optimize(s, seed, &mut out)?,
    }
    Ok(out)
}

pub fn build_map(m: &MapSpec) -> FieldMap {
    let map = match m.kind {
        MapKind::Spherical => FieldMap::spherical(),
        MapKind::PlanarXz => FieldMap::planar_xz(),
        MapKind::SyntheticLattice => FieldMap::synthetic_lattice(m.b0_energy_units.unwrap_or(1.0), m.delta.unwrap_or(0.0)),
    };
    match m.degenerate_threshold_energy_units {
        Some(t) => map.with_threshold(t),
        None => map,
    }
}

pub fn build_bath(b: &BathConfig) -> Result<BathSpec> {
    let coupling = match &b.coupling {
        CouplingSpec::Named(n) => match n.as_str() {
            "x" => Coupling::Axis(Vector3::x()),
            "y" => Coupling::Axis(Vector3::y()),
            "z" => Coupling::Axis(Vector3::z()),
            "transverse" => Coupling::Transverse,
            other => return Err(Error::InvalidInput(format!("unknown coupling \"{other}\""))),
        },
        CouplingSpec::Vector(v) => Coupling::Axis(Vector3::from_column_slice(v)),
    };
    let cutoff = b.cutoff_energy_units.unwrap_or(f64::INFINITY);
    let spectrum = match b.spectrum {
        SpectrumKind::Ohmic => Spectrum::ohmic(b.strength.unwrap_or(0.0), cutoff),
        SpectrumKind::PowerLaw => Spectrum::PowerLaw {
            strength: b.strength.unwrap_or(0.0),
            exponent: b.exponent.unwrap_or(1.0),
            cutoff,
        },
        SpectrumKind::Lorentzian => Spectrum::Lorentzian {
            alpha: b.alpha.unwrap_or(0.0),
            omega: b.resonance_energy_units.unwrap_or(1.0),
            width: b.width_energy_units.unwrap_or(1.0),
        },
    };
    BathSpec::new(b.label.clone(), coupling, spectrum, b.temperature_energy_units)
}

fn baths(s: &Scenario) -> Result<Vec<BathSpec>> {
    s.baths.iter().map(build_bath).collect()
}

fn map(s: &Scenario) -> FieldMap {
    build_map(s.map.as_ref().expect("validated"))
}

pub fn build_protocol(p: &ProtocolSpec) -> Result<Protocol> {
    let curve = match p.kind {
        ProtocolKind::Ellipse => Protocol::ellipse(
            p.center.expect("validated"),
            p.semi_axes.expect("validated"),
            p.rotation_rad.unwrap_or(0.0),
        ),
        ProtocolKind::QuarterPlane => {
            quarter_plane_protocol(p.inner_energy_units.expect("validated"), p.outer_energy_units.expect("validated"))?
        }
        ProtocolKind::Polygon => Protocol::polygon(p.vertices.clone().expect("validated"))?,
        ProtocolKind::Segment => {
            let v = p.vertices.as_ref().expect("validated");
            Protocol::segment(v[0].clone(), v[v.len() - 1].clone())
        }
    };
    let curve = if p.reversed { curve.reversed() } else { curve };
    Ok(curve.with_duration(p.duration_time_units.unwrap_or(1.0)))
}

fn protocol(s: &Scenario, field: &dyn TensorField) -> Result<Protocol> {
    let spec = s.protocol.as_ref().expect("validated");
    let p = build_protocol(spec)?;
    match spec.speed {
        SpeedKind::Uniform => Ok(p),
        SpeedKind::ConstantRate => constant_rate_reparametrize(&p, field),
    }
}

fn protocol_table(p: &Protocol) -> Table {
    let mut headers = vec!["s".to_string(), "t".to_string()];
    headers.extend((0..p.dim()).map(|i| format!("x{}", i + 1)));
    let mut t = Table::new(headers);
    for k in 0..PROTOCOL_SAMPLES {
        let si = k as f64 / (PROTOCOL_SAMPLES - 1) as f64;
        let mut row = vec![si, p.time_at(si)];
        row.extend(p.point(si));
        t.push(row);
    }
    t
}

fn dissipation(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let field = MasterEquationField::new(map(s), baths(s)?);
    let p = protocol(s, &field)?;
    let n = s.dissipation.as_ref().and_then(|d| d.samples).unwrap_or(PROTOCOL_SAMPLES);
    let mut headers = vec!["s".to_string(), "t".to_string()];
    headers.extend((0..p.dim()).map(|i| format!("x{}", i + 1)));
    headers.push("metric_speed2".into());
    let mut t = Table::new(headers);
    for k in 0..n {
        let si = k as f64 / (n - 1) as f64;
        let mut row = vec![si, p.time_at(si)];
        row.extend(p.point(si));
        row.push(metric_speed2(&p, &field, si)?);
        t.push(row);
    }
    let check = dissipation_bound_check(&p, &field)?;
    let mut summary = Table::new(["W_diss", "length2_over_duration", "relative_gap", "saturated"]);
    summary.push(vec![
        check.dissipation,
        check.bound,
        check.relative_gap,
        f64::from(u8::from(check.saturated)),
    ]);
    out.table("dissipation.csv", &summary);
    out.table("dissipation_profile.csv", &t);
    out.value("W_diss", check.dissipation);
    out.value("bound", check.bound);
    out.value("saturated", check.saturated);
    Ok(())
}

fn pump(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let (m, b) = (map(s), baths(s)?);
    let bath = s.pump.as_ref().and_then(|p| p.bath).unwrap_or(0);
    let field = MasterEquationField::new(m.clone(), b.clone());
    let p = protocol(s, &field)?;
    let heat = pumped_heat(&p, &PumpField { map: m, baths: b, bath })?;
    let w = dissipated_work(&p, &field, 0.0)?;
    let mut t = Table::new(["Q_pump", "W_diss", "stokes_flux", "stokes_residual"]);
    t.push(vec![
        heat.line_integral,
        w,
        heat.stokes_flux.unwrap_or(f64::NAN),
        heat.stokes_residual.unwrap_or(f64::NAN),
    ]);
    out.table("pump.csv", &t);
    out.table("protocol.csv", &protocol_table(&p));
    out.value("Q_pump", heat.line_integral);
    out.value("W_diss", w);
    if let Some(r) = heat.stokes_residual {
        let ok = r <= s.tolerances.stokes_residual;
        if !ok {
            log::warn!("Stokes residual {r:e} exceeds tolerance {:e}", s.tolerances.stokes_residual);
        }
        out.value("stokes_residual", r);
        out.value("stokes_consistent", ok);
    }
    Ok(())
}

fn chern(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let c = s.chern.as_ref().expect("validated");
    let res = c.resolution.unwrap_or(200);
    let band = match c.band {
        BandSpec::Ground => Band::Ground,
        BandSpec::Excited => Band::Excited,
    };
    let b0 = c.b0_energy_units.unwrap_or(1.0);
    let mut t = Table::new(["delta", "chern", "integer", "dirac", "excluded"]);
    let mut grids = Vec::new();
    let mut values = Vec::new();
    for (i, &delta) in c.deltas.iter().enumerate() {
        let g = chern_number(&FieldMap::synthetic_lattice(b0, delta), res, band)?;
        let int = g.integer(s.tolerances.chern_integer);
        t.push(vec![
            delta,
            g.chern,
            int.map_or(f64::NAN, |v| v as f64),
            f64::from(u8::from(g.dirac)),
            g.excluded.len() as f64,
        ]);
        values.push(json!({"delta": delta, "chern": g.chern, "integer": int, "dirac": g.dirac}));
        grids.push((format!("curvature_{i}.csv"), g.to_table()));
    }
    out.table("chern.csv", &t);
    for (name, g) in &grids {
        out.table(name, g);
    }
    out.value("chern", values);
    Ok(())
}

fn floquet(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let f = s.floquet.as_ref().expect("validated");
    let omega2 = match (f.omega2, f.convergent) {
        (Some(w), _) => w,
        (None, Some(k)) => {
            let (p, q) = golden_convergent(k);
            f.omega1 * p as f64 / q as f64
        }
        (None, None) => unreachable!("validated"),
    };
    let map = FieldMap::synthetic_lattice(f.b0_energy_units.unwrap_or(1.0), f.delta);
    let mut opts = FloquetOptions::grid(f.omega1, omega2, f.phase_grid.unwrap_or(4), f.slow_periods.unwrap_or(100.0));
    opts.drift_tol = s.tolerances.floquet_drift;
    if let Some(c) = f.checkpoints {
        opts.checkpoints = c;
    }
    let r = floquet_pump(&map, &opts)?;
    let mut t = Table::new(["omega1", "omega2", "mean_pump", "ratio", "drift", "commensurate"]);
    t.push(vec![
        f.omega1,
        omega2,
        r.mean_pump,
        r.ratio,
        r.drift,
        f64::from(u8::from(r.commensurate)),
    ]);
    let mut trace = Table::new(["time", "ratio"]);
    for &(time, ratio) in &r.trace {
        trace.push(vec![time, ratio]);
    }
    out.table("floquet.csv", &t);
    out.table("floquet_trace.csv", &trace);
    out.value("ratio", r.ratio);
    out.value("drift", r.drift);
    out.value("commensurate", r.commensurate);
    Ok(())
}

fn summary_table(m: &AdiabaticMachineSummary) -> Table {
    let mut t = Table::new([
        "area", "length2", "kappa", "bias", "tau", "tau_d", "tau_kappa", "heat", "work", "power", "efficiency", "cop",
    ]);
    t.push(vec![
        m.area,
        m.length2,
        m.kappa,
        m.bias,
        m.tau,
        m.tau_d,
        m.tau_kappa,
        m.heat,
        m.work,
        m.power,
        m.efficiency,
        m.cop.unwrap_or(f64::NAN),
    ]);
    t
}

fn summary_values(out: &mut Outcome, m: &AdiabaticMachineSummary) {
    out.value("mode", m.mode.name());
    out.value("area", m.area);
    out.value("length2", m.length2);
    out.value("work", m.work);
    out.value("heat", m.heat);
    if let Ok(e) = engine_performance(m) {
        out.value("tau_p", e.tau_p);
        out.value("tau_eta", e.tau_eta);
        out.value("max_power", e.max_power);
    }
}

fn machine(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let m = s.machine.as_ref().expect("validated");
    let axis = BiasAxis {
        hot: m.hot_bath.unwrap_or(0),
        cold: m.cold_bath.unwrap_or(1),
    };
    let field = MasterEquationField::new(map(s), baths(s)?).with_bias(axis);
    let p = protocol(s, &field)?;
    let summary = machine_summary(&p, &field, m.bias_ratio, m.duration_time_units)?;
    out.table("machine.csv", &summary_table(&summary));
    out.table("protocol.csv", &protocol_table(&p));
    summary_values(out, &summary);
    Ok(())
}

fn transport(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let t = s.transport.as_ref().expect("validated");
    let b = baths(s)?;
    let pair = [b[0].clone(), b[1].clone()];
    let points: Vec<(f64, f64)> = t.points.iter().map(|p| (p[0], p[1])).collect();
    let table = transport_sweep(&map(s), &t.position, &pair, &points)?;
    out.table("transport.csv", &table);
    out.value("points", points.len());
    Ok(())
}

fn optimize(s: &Scenario, seed: u64, out: &mut Outcome) -> Result<()> {
    let o = s.optimize.as_ref().expect("validated");
    let axis = BiasAxis {
        hot: o.hot_bath.unwrap_or(0),
        cold: o.cold_bath.unwrap_or(1),
    };
    let field = MasterEquationField::new(map(s), baths(s)?).with_bias(axis);
    let family = match o.family {
        FamilySpec::Ellipse => {
            let arr = |v: &Vec<f64>| -> [f64; 5] { [v[0], v[1], v[2], v[3], v[4]] };
            Family::Ellipse {
                lower: arr(o.lower.as_ref().expect("validated")),
                upper: arr(o.upper.as_ref().expect("validated")),
            }
        }
        FamilySpec::PolygonSpline => Family::PolygonSpline {
            center_lower: o.center_lower.expect("validated"),
            center_upper: o.center_upper.expect("validated"),
            radius: (o.radius_min.expect("validated"), o.radius_max.expect("validated")),
            vertices: o.vertices.expect("validated"),
        },
    };
    let objective = match o.objective {
        ObjectiveSpec::MaxPower => Objective::MaxPower,
        ObjectiveSpec::MaxPumpedHeat => Objective::MaxPumpedHeat,
        ObjectiveSpec::MinDissipationAtArea => {
            Objective::MinDissipationAtArea(qthermo::machines::OrderedTarget::new(o.target_area.expect("validated")))
        }
    };
    let mut opts = OptimizeOptions::new(family, objective);
    opts.seed = seed;
    opts.bias = o.bias_ratio;
    opts.tau = o.duration_time_units;
    if let Some(b) = o.budget {
        opts.budget = b;
    }
    if let Some(r) = o.restarts {
        opts.restarts = r;
    }
    if let Some(n) = o.nodes {
        opts.nodes = n;
    }
    let r = optimize_protocol(&field, &opts)?;
    let mut params = Table::new((0..r.params.len()).map(|i| format!("p{i}")));
    params.push(r.params.clone());
    out.table("optimize_summary.csv", &summary_table(&r.summary));
    out.table("optimize_params.csv", &params);
    out.table("optimize_protocol.csv", &protocol_table(&r.protocol));
    out.table("optimize_trace.csv", &r.trace);
    out.value("objective", r.objective);
    out.value("evaluations", r.evaluations);
    summary_values(out, &r.summary);
    Ok(())
}
