//! Scenario files: strict TOML schema, key suggestions and semantic checks.

use std::fmt;

use serde::Deserialize;
use toml::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Dissipation,
    Pump,
    Chern,
    Floquet,
    Machine,
    Transport,
    Optimize,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Dissipation => "dissipation",
            Command::Pump => "pump",
            Command::Chern => "chern",
            Command::Floquet => "floquet",
            Command::Machine => "machine",
            Command::Transport => "transport",
            Command::Optimize => "optimize",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub command: Command,
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Output,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub map: Option<MapSpec>,
    #[serde(default)]
    pub baths: Vec<BathConfig>,
    pub protocol: Option<ProtocolSpec>,
    pub dissipation: Option<DissipationSection>,
    pub pump: Option<PumpSection>,
    pub chern: Option<ChernSection>,
    pub floquet: Option<FloquetSection>,
    pub machine: Option<MachineSection>,
    pub transport: Option<TransportSection>,
    pub optimize: Option<OptimizeSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub directory: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Accepted Floquet running-average drift over the last decade.
    pub floquet_drift: f64,
    /// Largest accepted line-integral vs curl-flux mismatch.
    pub stokes_residual: f64,
    /// Distance from an integer accepted as a quantized Chern number.
    pub chern_integer: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            floquet_drift: 1e-2,
            stokes_residual: 1e-4,
            chern_integer: 1e-6,
        }
    }
}

impl Tolerances {
    pub const KEYS: &'static [&'static str] = &["floquet_drift", "stokes_residual", "chern_integer"];

    pub fn set(&mut self, key: &str, value: f64) -> Result<(), String> {
        match key {
            "floquet_drift" => self.floquet_drift = value,
            "stokes_residual" => self.stokes_residual = value,
            "chern_integer" => self.chern_integer = value,
            _ => return Err(unknown_key_message("tolerances", key, Self::KEYS)),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Spherical,
    PlanarXz,
    SyntheticLattice,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub kind: MapKind,
    pub b0_energy_units: Option<f64>,
    pub delta: Option<f64>,
    pub degenerate_threshold_energy_units: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CouplingSpec {
    Named(String),
    Vector([f64; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    Ohmic,
    PowerLaw,
    Lorentzian,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    pub label: String,
    pub coupling: CouplingSpec,
    pub spectrum: SpectrumKind,
    pub strength: Option<f64>,
    pub exponent: Option<f64>,
    pub cutoff_energy_units: Option<f64>,
    pub alpha: Option<f64>,
    pub resonance_energy_units: Option<f64>,
    pub width_energy_units: Option<f64>,
    pub temperature_energy_units: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Ellipse,
    QuarterPlane,
    Polygon,
    Segment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedKind {
    #[default]
    Uniform,
    ConstantRate,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    pub center: Option<[f64; 2]>,
    pub semi_axes: Option<[f64; 2]>,
    pub rotation_rad: Option<f64>,
    pub inner_energy_units: Option<f64>,
    pub outer_energy_units: Option<f64>,
    pub vertices: Option<Vec<Vec<f64>>>,
    pub duration_time_units: Option<f64>,
    #[serde(default)]
    pub reversed: bool,
    #[serde(default)]
    pub speed: SpeedKind,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipationSection {
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSection {
    pub bath: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandSpec {
    #[default]
    Ground,
    Excited,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChernSection {
    pub deltas: Vec<f64>,
    pub resolution: Option<usize>,
    #[serde(default)]
    pub band: BandSpec,
    pub b0_energy_units: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloquetSection {
    pub delta: f64,
    pub b0_energy_units: Option<f64>,
    pub omega1: f64,
    pub omega2: Option<f64>,
    pub convergent: Option<usize>,
    pub phase_grid: Option<usize>,
    pub slow_periods: Option<f64>,
    pub checkpoints: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineSection {
    pub bias_ratio: f64,
    pub duration_time_units: f64,
    pub hot_bath: Option<usize>,
    pub cold_bath: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSection {
    pub position: Vec<f64>,
    /// (mean temperature, bias) pairs.
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilySpec {
    Ellipse,
    PolygonSpline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveSpec {
    MaxPower,
    MaxPumpedHeat,
    MinDissipationAtArea,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    pub family: FamilySpec,
    pub objective: ObjectiveSpec,
    pub target_area: Option<f64>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub center_lower: Option<[f64; 2]>,
    pub center_upper: Option<[f64; 2]>,
    pub radius_min: Option<f64>,
    pub radius_max: Option<f64>,
    pub vertices: Option<usize>,
    pub budget: Option<usize>,
    pub restarts: Option<usize>,
    pub bias_ratio: f64,
    pub duration_time_units: f64,
    pub nodes: Option<usize>,
    pub hot_bath: Option<usize>,
    pub cold_bath: Option<usize>,
}

/// Known keys per table, used to report every unknown key with a suggestion.
fn known_keys(path: &str) -> Option<&'static [&'static str]> {
    Some(match path {
        "" => &[
            "command", "seed", "output", "tolerances", "map", "baths", "protocol", "dissipation", "pump", "chern",
            "floquet", "machine", "transport", "optimize",
        ],
        "output" => &["directory"],
        "tolerances" => Tolerances::KEYS,
        "map" => &["kind", "b0_energy_units", "delta", "degenerate_threshold_energy_units"],
        "baths" => &[
            "label",
            "coupling",
            "spectrum",
            "strength",
            "exponent",
            "cutoff_energy_units",
            "alpha",
            "resonance_energy_units",
            "width_energy_units",
            "temperature_energy_units",
        ],
        "protocol" => &[
            "kind",
            "center",
            "semi_axes",
            "rotation_rad",
            "inner_energy_units",
            "outer_energy_units",
            "vertices",
            "duration_time_units",
            "reversed",
            "speed",
        ],
        "dissipation" => &["samples"],
        "pump" => &["bath"],
        "chern" => &["deltas", "resolution", "band", "b0_energy_units"],
        "floquet" => &[
            "delta",
            "b0_energy_units",
            "omega1",
            "omega2",
            "convergent",
            "phase_grid",
            "slow_periods",
            "checkpoints",
        ],
        "machine" => &["bias_ratio", "duration_time_units", "hot_bath", "cold_bath"],
        "transport" => &["position", "points"],
        "optimize" => &[
            "family",
            "objective",
            "target_area",
            "lower",
            "upper",
            "center_lower",
            "center_upper",
            "radius_min",
            "radius_max",
            "vertices",
            "budget",
            "restarts",
            "bias_ratio",
            "duration_time_units",
            "nodes",
            "hot_bath",
            "cold_bath",
        ],
        _ => return None,
    })
}

/// Closest known key, if any is reasonably similar.
pub fn suggest(key: &str, candidates: &[&str]) -> Option<String> {
    candidates
        .iter()
        .map(|c| (strsim::jaro_winkler(key, c), *c))
        .filter(|(score, _)| *score > 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c.to_string())
}

fn unknown_key_message(table: &str, key: &str, candidates: &[&str]) -> String {
    let place = if table.is_empty() {
        "top level".to_string()
    } else {
        format!("[{table}]")
    };
    match suggest(key, candidates) {
        Some(s) => format!("unknown key \"{key}\" in {place}; did you mean \"{s}\"?"),
        None => format!("unknown key \"{key}\" in {place}"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// Validation report; empty when the scenario is runnable.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub issues: Vec<Issue>,
}

impl Report {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

fn walk_unknown(value: &Value, path: &str, report: &mut Report) {
    let Some(table) = value.as_table() else { return };
    let Some(known) = known_keys(path) else { return };
    for (key, v) in table {
        if !known.contains(&key.as_str()) {
            let full = if path.is_empty() {
                key.clone()
            } else {
                format!("{path}.{key}")
            };
            report.push(full, unknown_key_message(path, key, known));
            continue;
        }
        let child = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
        match v {
            Value::Table(_) => walk_unknown(v, &child, report),
            Value::Array(items) if key == "baths" => {
                for item in items {
                    walk_unknown(item, "baths", report);
                }
            }
            _ => {}
        }
    }
}

/// Parses and checks a scenario; the scenario is returned only when the report is empty.
pub fn load(text: &str) -> (Option<Scenario>, Report) {
    let mut report = Report::default();
    let value: Value = match text.parse::<toml::Table>() {
        Ok(t) => Value::Table(t),
        Err(e) => {
            report.push("", format!("not valid TOML: {}", e.message()));
            return (None, report);
        }
    };
    walk_unknown(&value, "", &mut report);
    if !report.is_empty() {
        return (None, report);
    }
    let scenario: Scenario = match value.try_into() {
        Ok(s) => s,
        Err(e) => {
            report.push("", e.message().to_string());
            return (None, report);
        }
    };
    check(&scenario, &mut report);
    if report.is_empty() {
        (Some(scenario), report)
    } else {
        (None, report)
    }
}

fn positive(report: &mut Report, path: &str, v: Option<f64>) {
    if let Some(v) = v {
        if !(v > 0.0 && v.is_finite()) {
            report.push(path, format!("must be a positive finite number, got {v}"));
        }
    }
}

fn non_negative(report: &mut Report, path: &str, v: Option<f64>) {
    if let Some(v) = v {
        if !(v >= 0.0 && v.is_finite()) {
            report.push(path, format!("must be non-negative, got {v}"));
        }
    }
}

fn check(s: &Scenario, report: &mut Report) {
    let t = &s.tolerances;
    positive(report, "tolerances.floquet_drift", Some(t.floquet_drift));
    positive(report, "tolerances.stokes_residual", Some(t.stokes_residual));
    positive(report, "tolerances.chern_integer", Some(t.chern_integer));
    if let Some(m) = &s.map {
        if m.kind == MapKind::SyntheticLattice {
            positive(report, "map.b0_energy_units", m.b0_energy_units.or(Some(1.0)));
            if m.delta.is_none() {
                report.push("map.delta", "required for the synthetic lattice map");
            }
        }
        positive(report, "map.degenerate_threshold_energy_units", m.degenerate_threshold_energy_units);
    }
    for (i, b) in s.baths.iter().enumerate() {
        let p = |k: &str| format!("baths[{i}].{k}");
        positive(report, &p("temperature_energy_units"), Some(b.temperature_energy_units));
        match &b.coupling {
            CouplingSpec::Named(n) if !["x", "y", "z", "transverse"].contains(&n.as_str()) => {
                report.push(p("coupling"), format!("expected x, y, z, transverse or a 3-vector, got \"{n}\""));
            }
            CouplingSpec::Vector(v) if v.iter().all(|c| *c == 0.0) => {
                report.push(p("coupling"), "coupling axis must be non-zero");
            }
            _ => {}
        }
        match b.spectrum {
            SpectrumKind::Ohmic | SpectrumKind::PowerLaw => {
                match b.strength {
                    None => report.push(p("strength"), "required for this spectrum"),
                    Some(_) => non_negative(report, &p("strength"), b.strength),
                }
                positive(report, &p("cutoff_energy_units"), b.cutoff_energy_units);
                if b.spectrum == SpectrumKind::PowerLaw {
                    match b.exponent {
                        None => report.push(p("exponent"), "required for a power-law spectrum"),
                        Some(_) => positive(report, &p("exponent"), b.exponent),
                    }
                }
            }
            SpectrumKind::Lorentzian => {
                for (k, v) in [
                    ("alpha", b.alpha),
                    ("resonance_energy_units", b.resonance_energy_units),
                    ("width_energy_units", b.width_energy_units),
                ] {
                    match v {
                        None => report.push(p(k), "required for a Lorentzian spectrum"),
                        Some(_) if k == "alpha" => non_negative(report, &p(k), v),
                        Some(_) => positive(report, &p(k), v),
                    }
                }
            }
        }
    }
    if let Some(pr) = &s.protocol {
        positive(report, "protocol.duration_time_units", pr.duration_time_units);
        match pr.kind {
            ProtocolKind::Ellipse => {
                if pr.center.is_none() {
                    report.push("protocol.center", "required for an ellipse");
                }
                match pr.semi_axes {
                    None => report.push("protocol.semi_axes", "required for an ellipse"),
                    Some([a, b]) => {
                        positive(report, "protocol.semi_axes[0]", Some(a));
                        positive(report, "protocol.semi_axes[1]", Some(b));
                    }
                }
            }
            ProtocolKind::QuarterPlane => match (pr.inner_energy_units, pr.outer_energy_units) {
                (Some(a), Some(b)) if a > 0.0 && b > a => {}
                _ => report.push(
                    "protocol",
                    "quarter_plane needs 0 < inner_energy_units < outer_energy_units",
                ),
            },
            ProtocolKind::Polygon | ProtocolKind::Segment => {
                let n = pr.vertices.as_ref().map(Vec::len).unwrap_or(0);
                let need = if pr.kind == ProtocolKind::Polygon { 3 } else { 2 };
                if n < need {
                    report.push("protocol.vertices", format!("needs at least {need} points"));
                }
            }
        }
    }
    let need = |report: &mut Report, present: bool, what: &str| {
        if !present {
            report.push(what, format!("required by command \"{}\"", s.command.name()));
        }
    };
    let nbaths = s.baths.len();
    let bath_index = |report: &mut Report, path: &str, i: Option<usize>| {
        if let Some(i) = i {
            if i >= nbaths {
                report.push(path, format!("bath index {i} out of range ({nbaths} baths)"));
            }
        }
    };
    match s.command {
        Command::Dissipation | Command::Pump | Command::Machine | Command::Optimize => {
            need(report, s.map.is_some(), "map");
            need(report, nbaths > 0, "baths");
            if s.command != Command::Optimize {
                need(report, s.protocol.is_some(), "protocol");
            }
            if let Some(p) = &s.pump {
                bath_index(report, "pump.bath", p.bath);
            }
            if let Some(d) = &s.dissipation {
                if d.samples.is_some_and(|n| n < 2) {
                    report.push("dissipation.samples", "needs at least 2 samples");
                }
            }
            if matches!(s.command, Command::Machine | Command::Optimize) && nbaths < 2 {
                report.push("baths", "machines need a hot and a cold bath");
            }
            if s.command == Command::Machine {
                need(report, s.machine.is_some(), "machine");
                if let Some(m) = &s.machine {
                    positive(report, "machine.duration_time_units", Some(m.duration_time_units));
                    bath_index(report, "machine.hot_bath", m.hot_bath);
                    bath_index(report, "machine.cold_bath", m.cold_bath);
                }
            }
            if s.command == Command::Optimize {
                need(report, s.optimize.is_some(), "optimize");
                if let Some(o) = &s.optimize {
                    check_optimize(o, report);
                    bath_index(report, "optimize.hot_bath", o.hot_bath);
                    bath_index(report, "optimize.cold_bath", o.cold_bath);
                }
            }
        }
        Command::Chern => {
            need(report, s.chern.is_some(), "chern");
            if let Some(c) = &s.chern {
                if c.deltas.is_empty() {
                    report.push("chern.deltas", "needs at least one value");
                }
                if c.resolution.is_some_and(|n| n < 2) {
                    report.push("chern.resolution", "needs at least 2 points per side");
                }
                positive(report, "chern.b0_energy_units", c.b0_energy_units);
            }
        }
        Command::Floquet => {
            need(report, s.floquet.is_some(), "floquet");
            if let Some(f) = &s.floquet {
                positive(report, "floquet.omega1", Some(f.omega1));
                positive(report, "floquet.omega2", f.omega2);
                positive(report, "floquet.b0_energy_units", f.b0_energy_units);
                positive(report, "floquet.slow_periods", f.slow_periods);
                if f.omega2.is_some() == f.convergent.is_some() {
                    report.push("floquet", "give exactly one of omega2 and convergent");
                }
                if f.phase_grid == Some(0) {
                    report.push("floquet.phase_grid", "needs at least 1");
                }
            }
        }
        Command::Transport => {
            need(report, s.map.is_some(), "map");
            need(report, s.transport.is_some(), "transport");
            if nbaths != 2 {
                report.push("baths", format!("transport needs exactly 2 baths, got {nbaths}"));
            }
            if let Some(t) = &s.transport {
                for (i, [temp, bias]) in t.points.iter().enumerate() {
                    if !(*temp > 0.0 && bias.abs() < 2.0 * temp) {
                        report.push(format!("transport.points[{i}]"), "needs T > 0 and |ΔT| < 2T");
                    }
                }
            }
        }
    }
}

fn check_optimize(o: &OptimizeSection, report: &mut Report) {
    positive(report, "optimize.duration_time_units", Some(o.duration_time_units));
    if o.objective == ObjectiveSpec::MinDissipationAtArea {
        match o.target_area {
            None => report.push("optimize.target_area", "required for min_dissipation_at_area"),
            Some(_) => positive(report, "optimize.target_area", o.target_area),
        }
    }
    match o.family {
        FamilySpec::Ellipse => {
            for (k, v) in [("lower", &o.lower), ("upper", &o.upper)] {
                if v.as_ref().map(Vec::len) != Some(5) {
                    report.push(format!("optimize.{k}"), "ellipse bounds need 5 values [c_x, c_z, a, b, rotation]");
                }
            }
        }
        FamilySpec::PolygonSpline => {
            if o.center_lower.is_none() || o.center_upper.is_none() {
                report.push("optimize", "polygon_spline needs center_lower and center_upper");
            }
            positive(report, "optimize.radius_min", o.radius_min.or(Some(f64::NAN)));
            positive(report, "optimize.radius_max", o.radius_max.or(Some(f64::NAN)));
            if o.vertices.is_none_or(|v| v < 3) {
                report.push("optimize.vertices", "needs at least 3 vertices");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suggestion_for_typo() {
        assert_eq!(
            suggest("temprature_energy_units", known_keys("baths").unwrap()).as_deref(),
            Some("temperature_energy_units")
        );
        assert_eq!(suggest("zzz", &["kind"]), None);
    }

    #[test]
    fn every_unknown_key_is_listed() {
        let text = r#"
command = "chern"
colour = 1
[chern]
deltas = [0.5]
resolutoin = 20
"#;
        let (s, r) = load(text);
        assert!(s.is_none());
        assert_eq!(r.issues.len(), 2);
        assert!(r.issues.iter().any(|i| i.path == "chern.resolutoin" && i.message.contains("\"resolution\"")));
        assert!(r.issues.iter().any(|i| i.path == "colour"));
    }

    #[test]
    fn negative_coupling_is_named() {
        let text = r#"
command = "transport"
[map]
kind = "planar_xz"
[[baths]]
label = "l"
coupling = "z"
spectrum = "ohmic"
strength = -0.1
temperature_energy_units = 1.0
[[baths]]
label = "r"
coupling = "x"
spectrum = "ohmic"
strength = 0.1
temperature_energy_units = 1.0
[transport]
position = [0.5, 0.5]
points = [[1.0, 0.1]]
"#;
        let (_, r) = load(text);
        assert_eq!(r.issues.len(), 1);
        assert_eq!(r.issues[0].path, "baths[0].strength");
    }

    #[test]
    fn tolerance_keys_are_checked() {
        let mut t = Tolerances::default();
        t.set("floquet_drift", 0.05).unwrap();
        assert_eq!(t.floquet_drift, 0.05);
        assert!(t.set("floquet_drfit", 1.0).unwrap_err().contains("floquet_drift"));
    }
}
