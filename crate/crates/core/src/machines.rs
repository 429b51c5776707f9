//! Thermal machines: quasi-static cycles, finite-time strokes, adiabatic
//! machine figures of merit, mode classification and protocol optimization.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{constant_rate_reparametrize, TensorField};
use crate::meq::{build_kernel, frozen_steady_state};
use crate::model::{BathSpec, Coupling, FieldMap, Spectrum};
use crate::numeric::quad::{self, QuadOptions};
use crate::numeric::simplex::{nelder_mead, SimplexOptions};
use crate::numeric::spline::{CubicSpline, SplineKind};
use crate::protocol::{Protocol, CLOSURE_TOL};
use crate::table::Table;

/// Carnot efficiency and heat-pump coefficient of performance.
pub fn carnot_reference(t_hot: f64, t_cold: f64) -> Result<(f64, f64)> {
    check_bias(t_hot, t_cold)?;
    let eta = (t_hot - t_cold) / t_hot;
    Ok((eta, 1.0 / eta))
}

fn check_bias(t_hot: f64, t_cold: f64) -> Result<()> {
    if !(t_cold > 0.0 && t_hot > t_cold) {
        return Err(Error::InvalidBias { t_hot, t_cold });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    HeatEngine,
    Refrigerator,
    Dissipator,
    Idle,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::HeatEngine => "heat-engine",
            Mode::Refrigerator => "refrigerator",
            Mode::Dissipator => "dissipator",
            Mode::Idle => "idle",
        }
    }
}

/// Magnitude below which heat and work count as zero.
pub const IDLE_TOL: f64 = 1e-12;

/// Operation mode from the transported heat (positive into the cold reservoir)
/// and the work (positive into the system).
pub fn classify_mode(heat: f64, work: f64) -> Mode {
    if work.abs() <= IDLE_TOL && heat.abs() <= IDLE_TOL {
        Mode::Idle
    } else if work < 0.0 {
        Mode::HeatEngine
    } else if heat < 0.0 {
        Mode::Refrigerator
    } else {
        Mode::Dissipator
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reservoir {
    Hot,
    Cold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    pub label: &'static str,
    /// Reservoir in contact, none for an isolated stroke.
    pub reservoir: Option<Reservoir>,
    pub field_start: f64,
    pub field_end: f64,
    /// Work done on the qubit.
    pub work: f64,
    /// Heat released into the reservoir.
    pub heat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    pub strokes: Vec<Stroke>,
    pub work: f64,
    pub heat_hot: f64,
    pub heat_cold: f64,
    pub efficiency: Option<f64>,
    pub cop: Option<f64>,
    pub mode: Mode,
}

impl CycleReport {
    fn from_strokes(strokes: Vec<Stroke>) -> Self {
        let work: f64 = strokes.iter().map(|s| s.work).sum();
        let heat_of = |r| {
            strokes
                .iter()
                .filter(|s| s.reservoir == Some(r))
                .map(|s| s.heat)
                .sum::<f64>()
        };
        let heat_hot = heat_of(Reservoir::Hot);
        let heat_cold = heat_of(Reservoir::Cold);
        // Heat into the cold reservoir plays the role of the transported heat.
        let mode = classify_mode(heat_cold, work);
        let efficiency = (mode == Mode::HeatEngine && heat_hot < 0.0).then(|| work / heat_hot);
        let cop = (mode == Mode::Refrigerator).then(|| -heat_cold / work);
        Self {
            strokes,
            work,
            heat_hot,
            heat_cold,
            efficiency,
            cop,
            mode,
        }
    }

    /// |W − (Q_h + Q_c)| relative to the largest stroke scale.
    pub fn energy_residual(&self) -> f64 {
        let scale = self
            .strokes
            .iter()
            .map(|s| s.work.abs().max(s.heat.abs()))
            .fold(f64::MIN_POSITIVE, f64::max);
        (self.work - self.heat_hot - self.heat_cold).abs() / scale
    }
}

/// Thermal polarization ⟨σ·n̂⟩ at field magnitude `b` from the frozen state.
fn thermal_polarization(b: f64, temperature: f64) -> Result<f64> {
    let bath = BathSpec::new("contact", Coupling::Axis(Vector3::x()), Spectrum::ohmic(0.01, 100.0), temperature)?;
    let kernel = build_kernel(&FieldMap::planar_xz(), &[bath], &[0.0, b])?;
    Ok(frozen_steady_state(&kernel)?.z)
}

fn isothermal(label: &'static str, reservoir: Reservoir, b0: f64, b1: f64, temperature: f64) -> Result<Stroke> {
    let opts = QuadOptions {
        rel_tol: 1e-12,
        abs_tol: 1e-15,
        max_intervals: 1000,
    };
    // H = −Bσ_z, so W = ∫⟨∂H/∂B⟩dB = −∫p(B)dB.
    let work = -quad::integrate(|b| thermal_polarization(b, temperature), b0, b1, &[], opts)?;
    let du = -b1 * thermal_polarization(b1, temperature)? + b0 * thermal_polarization(b0, temperature)?;
    Ok(Stroke {
        label,
        reservoir: Some(reservoir),
        field_start: b0,
        field_end: b1,
        work,
        heat: work - du,
    })
}

fn isolated(label: &'static str, b0: f64, b1: f64, polarization: f64) -> Stroke {
    Stroke {
        label,
        reservoir: None,
        field_start: b0,
        field_end: b1,
        work: -(b1 - b0) * polarization,
        heat: 0.0,
    }
}

/// Quasi-static Carnot cycle: isothermal B₁ → B₂ at T_h, isentropic to B₂T_c/T_h,
/// isothermal to B₁T_c/T_h at T_c, isentropic back to B₁.
pub fn carnot_cycle(b1: f64, b2: f64, t_hot: f64, t_cold: f64) -> Result<CycleReport> {
    check_bias(t_hot, t_cold)?;
    check_fields(&[b1, b2])?;
    let r = t_cold / t_hot;
    let p_hot_end = thermal_polarization(b2, t_hot)?;
    let p_cold_end = thermal_polarization(b1 * r, t_cold)?;
    Ok(CycleReport::from_strokes(vec![
        isothermal("hot isotherm", Reservoir::Hot, b1, b2, t_hot)?,
        isolated("expansion", b2, b2 * r, p_hot_end),
        isothermal("cold isotherm", Reservoir::Cold, b2 * r, b1 * r, t_cold)?,
        isolated("compression", b1 * r, b1, p_cold_end),
    ]))
}

/// Quasi-static Otto cycle: thermalize at B_h with the hot bath, sweep isolated to
/// B_c, thermalize with the cold bath, sweep isolated back.
pub fn otto_cycle(b_hot: f64, b_cold: f64, t_hot: f64, t_cold: f64) -> Result<CycleReport> {
    check_bias(t_hot, t_cold)?;
    check_fields(&[b_hot, b_cold])?;
    let p_h = thermal_polarization(b_hot, t_hot)?;
    let p_c = thermal_polarization(b_cold, t_cold)?;
    let contact = |label, reservoir, b: f64, from: f64, to: f64| Stroke {
        label,
        reservoir: Some(reservoir),
        field_start: b,
        field_end: b,
        work: 0.0,
        heat: b * (to - from),
    };
    Ok(CycleReport::from_strokes(vec![
        contact("hot contact", Reservoir::Hot, b_hot, p_c, p_h),
        isolated("expansion", b_hot, b_cold, p_h),
        contact("cold contact", Reservoir::Cold, b_cold, p_h, p_c),
        isolated("compression", b_cold, b_hot, p_c),
    ]))
}

fn check_fields(b: &[f64]) -> Result<()> {
    if b.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput(format!("cycle fields must be positive, got {b:?}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrokeOptimum {
    pub tau_cold: f64,
    pub tau_hot: f64,
    pub max_power: f64,
}

/// Power of a finite-time Carnot cycle with strokes of duration τ_c and τ_h.
pub fn stroke_power(sigma_cold: f64, sigma_hot: f64, entropy: f64, t_cold: f64, t_hot: f64, tau_cold: f64, tau_hot: f64) -> f64 {
    let dt = t_hot - t_cold;
    (entropy * dt - t_cold * sigma_cold / tau_cold - t_hot * sigma_hot / tau_hot) / (tau_cold + tau_hot)
}

/// Stroke durations maximizing the finite-time Carnot power.
pub fn optimal_strokes(sigma_cold: f64, sigma_hot: f64, entropy: f64, t_cold: f64, t_hot: f64) -> Result<StrokeOptimum> {
    check_bias(t_hot, t_cold)?;
    if entropy == 0.0 {
        return Err(Error::ZeroEntropySwing);
    }
    if !(entropy > 0.0) || sigma_cold < 0.0 || sigma_hot < 0.0 {
        return Err(Error::InvalidInput("stroke coefficients must be positive".into()));
    }
    if sigma_cold == 0.0 || sigma_hot == 0.0 {
        return Err(Error::QuasistaticSingular(
            "vanishing dissipation coefficient gives unbounded power".into(),
        ));
    }
    let dt = t_hot - t_cold;
    let ratio = (t_cold * sigma_cold / (t_hot * sigma_hot)).sqrt();
    let tau_hot = 2.0 * t_hot * sigma_hot / (entropy * dt) * (1.0 + ratio);
    let tau_cold = tau_hot * ratio;
    let root = (t_hot * sigma_hot).sqrt() + (t_cold * sigma_cold).sqrt();
    Ok(StrokeOptimum {
        tau_cold,
        tau_hot,
        max_power: entropy * entropy * dt * dt / (4.0 * root * root),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticMachineSummary {
    /// A = ∮Λ⃗·dX.
    pub area: f64,
    /// L² = ∫X′·Λ^S·X′/σ ds.
    pub length2: f64,
    /// ⟨κ⟩ = ∫σΛ_{N+1,N+1} ds.
    pub kappa: f64,
    /// ΔT/T.
    pub bias: f64,
    pub tau: f64,
    /// T/ΔT · L²/A.
    pub tau_d: f64,
    /// T/ΔT · A/⟨κ⟩.
    pub tau_kappa: f64,
    /// Q^(tr) = A + τ⟨κ⟩ΔT/T.
    pub heat: f64,
    /// W = L²/τ − (ΔT/T)A.
    pub work: f64,
    /// −W/τ.
    pub power: f64,
    /// η(τ) = η_C(1 − τ_D/τ)/(1 + τ/τ_κ).
    pub efficiency: f64,
    pub cop: Option<f64>,
    pub mode: Mode,
}

impl AdiabaticMachineSummary {
    fn new(area: f64, length2: f64, kappa: f64, bias: f64, tau: f64) -> Self {
        let tau_d = length2 / (bias * area);
        let tau_kappa = area / (bias * kappa);
        let heat = area + tau * kappa * bias;
        let work = length2 / tau - bias * area;
        let mode = classify_mode(heat, work);
        let mut s = Self {
            area,
            length2,
            kappa,
            bias,
            tau,
            tau_d,
            tau_kappa,
            heat,
            work,
            power: -work / tau,
            efficiency: 0.0,
            cop: (mode == Mode::Refrigerator).then(|| -heat / work),
            mode,
        };
        s.efficiency = s.efficiency_at(tau);
        s
    }

    /// Heat-engine power at cycle duration τ.
    pub fn power_at(&self, tau: f64) -> f64 {
        self.bias * self.area * (1.0 - self.tau_d / tau) / tau
    }

    /// Heat-engine efficiency at cycle duration τ.
    pub fn efficiency_at(&self, tau: f64) -> f64 {
        self.bias * (1.0 - self.tau_d / tau) / (1.0 + tau / self.tau_kappa)
    }

    /// Same cycle run with duration τ.
    pub fn with_duration(&self, tau: f64) -> Self {
        Self::new(self.area, self.length2, self.kappa, self.bias, tau)
    }
}

/// Largest bias for which the linear-response machine is trusted without a warning.
pub const BIAS_WARNING: f64 = 0.2;

/// Adiabatic machine observables of a closed protocol under bias ΔT/T and duration τ.
pub fn machine_summary(protocol: &Protocol, field: &dyn TensorField, bias: f64, tau: f64) -> Result<AdiabaticMachineSummary> {
    let gap = protocol.closure_gap();
    if !protocol.is_closed() || gap > CLOSURE_TOL {
        return Err(Error::OpenProtocol { gap });
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("cycle duration must be positive, got {tau}")));
    }
    if bias.abs() > BIAS_WARNING {
        log::warn!("bias ΔT/T = {bias} is outside the linear-response range");
    }
    let opts = QuadOptions {
        rel_tol: 1e-11,
        abs_tol: 1e-14,
        max_intervals: 4000,
    };
    let integral = |which: usize| {
        quad::integrate(
            |s| {
                let (x, d) = protocol.eval(s);
                let t = field.tensor(&x)?;
                let column = t.bias_column().ok_or_else(|| {
                    Error::InvalidInput("machine analysis needs a tensor field with a bias entry".into())
                })?;
                let sigma = protocol.speed(s);
                Ok(match which {
                    0 => column.iter().zip(&d).map(|(a, b)| a * b).sum(),
                    1 => t.quadratic_form(&d) / sigma,
                    _ => sigma * t.conductance().unwrap_or(0.0),
                })
            },
            0.0,
            1.0,
            protocol.breaks(),
            opts,
        )
    };
    let area = integral(0)?;
    let length2 = integral(1)?;
    let kappa = integral(2)?;
    Ok(AdiabaticMachineSummary::new(area, length2, kappa, bias, tau))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnginePerformance {
    pub power: f64,
    pub efficiency: f64,
    pub tau_d: f64,
    pub tau_kappa: f64,
    /// Duration of maximum power, 2τ_D.
    pub tau_p: f64,
    /// Duration of maximum efficiency.
    pub tau_eta: f64,
    /// (1/4)(ΔT/T)²A²/L².
    pub max_power: f64,
}

/// Heat-engine figures of merit; requires the engine orientation A > 0 and ΔT > 0.
pub fn engine_performance(summary: &AdiabaticMachineSummary) -> Result<EnginePerformance> {
    if !(summary.area > 0.0) {
        return Err(Error::WrongOrientation { area: summary.area });
    }
    if !(summary.bias > 0.0) {
        return Err(Error::InvalidInput("engine analysis needs ΔT > 0".into()));
    }
    let (td, tk) = (summary.tau_d, summary.tau_kappa);
    Ok(EnginePerformance {
        power: summary.power_at(summary.tau),
        efficiency: summary.efficiency_at(summary.tau),
        tau_d: td,
        tau_kappa: tk,
        tau_p: 2.0 * td,
        tau_eta: td + (td * (td + tk)).sqrt(),
        max_power: 0.25 * summary.bias * summary.bias * summary.area * summary.area / summary.length2,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// Ellipses [c_x, c_z, a, b, ψ] within per-parameter bounds.
    Ellipse { lower: [f64; 5], upper: [f64; 5] },
    /// Closed periodic splines r(φ) about a centre, parameters [c_x, c_z, r_1..r_K].
    PolygonSpline {
        center_lower: [f64; 2],
        center_upper: [f64; 2],
        radius: (f64, f64),
        vertices: usize,
    },
}

impl Family {
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Family::Ellipse { lower, upper } => (lower.to_vec(), upper.to_vec()),
            Family::PolygonSpline {
                center_lower,
                center_upper,
                radius,
                vertices,
            } => {
                let mut lo = center_lower.to_vec();
                let mut hi = center_upper.to_vec();
                lo.extend(std::iter::repeat_n(radius.0, *vertices));
                hi.extend(std::iter::repeat_n(radius.1, *vertices));
                (lo, hi)
            }
        }
    }

    fn check(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidInput("family bounds need lower ≤ upper".into()));
        }
        if !(lo[0] > 0.0 && lo[1] > 0.0) {
            return Err(Error::InfeasibleFamily(format!(
                "centre box reaches B_x = {} or B_z = {}, outside the open quadrant",
                lo[0], lo[1]
            )));
        }
        match self {
            Family::Ellipse { .. } if !(lo[2] > 0.0 && lo[3] > 0.0) => {
                Err(Error::InvalidInput("ellipse semi-axes must be positive".into()))
            }
            Family::PolygonSpline { radius, vertices, .. } if !(radius.0 > 0.0) || *vertices < 3 => Err(
                Error::InvalidInput("polygon spline needs ≥ 3 vertices and positive radii".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Counter-clockwise closed curve for a parameter vector.
    pub fn curve(&self, p: &[f64]) -> Result<Protocol> {
        match self {
            Family::Ellipse { .. } => Ok(Protocol::ellipse([p[0], p[1]], [p[2], p[3]], p[4])),
            Family::PolygonSpline { vertices, .. } => {
                let k = *vertices;
                let mut phi: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
                phi[k] = 1.0;
                let mut r = p[2..].to_vec();
                r.push(p[2]);
                let spline = CubicSpline::new(&phi, &r, SplineKind::Periodic)?;
                let (cx, cz) = (p[0], p[1]);
                Protocol::from_closure(2, true, move |s| {
                    let (sn, cs) = (TAU * s).sin_cos();
                    let rv = spline.eval(s);
                    let dr = spline.deriv(s);
                    (
                        vec![cx + rv * cs, cz + rv * sn],
                        vec![dr * cs - TAU * rv * sn, dr * sn + TAU * rv * cs],
                    )
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Maximize (1/4)(ΔT/T)²A²/L² in the engine orientation.
    MaxPower,
    /// Maximize A.
    MaxPumpedHeat,
    /// Minimize L² at A equal to the target.
    MinDissipationAtArea(OrderedTarget),
}

/// Target area stored by bit pattern so the objective stays `Eq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderedTarget(u64);

impl OrderedTarget {
    pub fn new(v: f64) -> Self {
        Self(v.to_bits())
    }

    pub fn value(self) -> f64 {
        f64::from_bits(self.0)
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    pub family: Family,
    pub objective: Objective,
    /// Maximum number of candidate evaluations.
    pub budget: usize,
    pub seed: u64,
    /// Nelder-Mead restarts from random points after the first descent.
    pub restarts: usize,
    pub bias: f64,
    pub tau: f64,
    /// Quadrature nodes per candidate.
    pub nodes: usize,
}

impl OptimizeOptions {
    pub fn new(family: Family, objective: Objective) -> Self {
        Self {
            family,
            objective,
            budget: 2000,
            seed: 0,
            restarts: 2,
            bias: 0.1,
            tau: 100.0,
            nodes: 128,
        }
    }
}

/// Path invariants of a candidate under constant-rate scheduling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    /// Signed area in the given orientation.
    pub area: f64,
    /// Thermodynamic length squared ℒ², the value of L² at constant dissipation rate.
    pub length2: f64,
}

/// A and ℒ² of a smooth closed curve by the periodic trapezoid rule, or `None`
/// when the curve leaves the open quadrant B_x, B_z > 0.
pub fn score_candidate(protocol: &Protocol, field: &dyn TensorField, nodes: usize) -> Result<Option<CandidateScore>> {
    let pts: Vec<(Vec<f64>, Vec<f64>)> = (0..nodes).map(|k| protocol.eval(k as f64 / nodes as f64)).collect();
    if pts.iter().any(|(x, _)| !(x[0] > 0.0 && x[1] > 0.0)) {
        return Ok(None);
    }
    let values = pts
        .par_iter()
        .map(|(x, d)| -> Result<(f64, f64)> {
            let t = field.tensor(x)?;
            let column = t
                .bias_column()
                .ok_or_else(|| Error::InvalidInput("optimization needs a tensor field with a bias entry".into()))?;
            let a: f64 = column.iter().zip(d).map(|(u, v)| u * v).sum();
            Ok((a, t.quadratic_form(d).max(0.0).sqrt()))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = nodes as f64;
    let area = values.iter().map(|v| v.0).sum::<f64>() / m;
    let length = values.iter().map(|v| v.1).sum::<f64>() / m;
    Ok(Some(CandidateScore {
        area,
        length2: length * length,
    }))
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub params: Vec<f64>,
    /// Value of the maximized quantity (minimized L² for the fixed-area objective).
    pub objective: f64,
    /// Incumbent with orientation A > 0, reparametrized to constant dissipation rate.
    pub protocol: Protocol,
    pub summary: AdiabaticMachineSummary,
    pub evaluations: usize,
    /// (evaluation, parameters…, objective) for every candidate.
    pub trace: Table,
}

/// Weight of the squared relative area mismatch in the fixed-area objective.
const AREA_PENALTY: f64 = 1e4;

struct Search<'a> {
    field: &'a dyn TensorField,
    opts: &'a OptimizeOptions,
    lo: Vec<f64>,
    hi: Vec<f64>,
    evals: usize,
    best: Option<(f64, Vec<f64>)>,
    failure: Option<Error>,
    trace: Table,
}

impl<'a> Search<'a> {
    fn new(field: &'a dyn TensorField, opts: &'a OptimizeOptions, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        let mut headers = vec!["evaluation".to_string()];
        headers.extend((0..lo.len()).map(|i| format!("p{i}")));
        headers.push("objective".into());
        Self {
            field,
            opts,
            lo,
            hi,
            evals: 0,
            best: None,
            failure: None,
            trace: Table::new(headers),
        }
    }

    /// Unit-box coordinates to family parameters.
    fn params(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, v)| self.lo[i] + v.clamp(0.0, 1.0) * (self.hi[i] - self.lo[i]))
            .collect()
    }

    /// Minimized loss; infeasible candidates and an exhausted budget score +∞.
    fn loss(&mut self, u: &[f64]) -> f64 {
        if self.evals >= self.opts.budget || self.failure.is_some() {
            return f64::INFINITY;
        }
        if u.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return f64::INFINITY;
        }
        self.evals += 1;
        let p = self.params(u);
        let value = match self
            .opts
            .family
            .curve(&p)
            .and_then(|c| score_candidate(&c, self.field, self.opts.nodes))
        {
            Ok(Some(s)) => objective_loss(self.opts.objective, s, self.opts.bias),
            Ok(None) => f64::INFINITY,
            Err(Error::InvalidInput(m)) => {
                self.failure = Some(Error::InvalidInput(m));
                f64::INFINITY
            }
            Err(_) => f64::INFINITY,
        };
        let mut row = vec![self.evals as f64];
        row.extend(&p);
        row.push(value);
        self.trace.push(row);
        if value.is_finite() && self.best.as_ref().is_none_or(|b| value < b.0) {
            self.best = Some((value, u.to_vec()));
        }
        value
    }
}

/// Derivative-free search over a protocol family: coordinate descent followed by
/// Nelder-Mead from the incumbent and from seeded random restarts.
pub fn optimize_protocol(field: &dyn TensorField, opts: &OptimizeOptions) -> Result<OptimizationResult> {
    opts.family.check()?;
    let (lo, hi) = opts.family.bounds();
    let dim = lo.len();
    let mut search = Search::new(field, opts, lo, hi);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut u = vec![0.5; dim];
    let mut fu = search.loss(&u);
    // Coordinate descent with halving steps.
    let mut step = 0.25;
    while step > 1e-3 && search.evals < opts.budget / 3 {
        let mut improved = false;
        for i in 0..dim {
            for dir in [1.0, -1.0] {
                let mut v = u.clone();
                v[i] = (v[i] + dir * step).clamp(0.0, 1.0);
                let fv = search.loss(&v);
                if fv < fu {
                    u = v;
                    fu = fv;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let simplex = |rem: usize| SimplexOptions {
        max_evals: rem,
        f_tol: 1e-10,
        x_tol: 1e-8,
    };
    for _ in 0..opts.restarts {
        let start: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let rem = opts.budget.saturating_sub(search.evals);
        if rem == 0 {
            break;
        }
        nelder_mead(|v| search.loss(v), &start, &vec![0.1; dim], simplex(rem));
    }
    let mut converged = false;
    if let Some((_, incumbent)) = search.best.clone() {
        let rem = opts.budget.saturating_sub(search.evals);
        if rem > 0 {
            let r = nelder_mead(|v| search.loss(v), &incumbent, &vec![0.02; dim], simplex(rem));
            converged = r.converged && search.evals < opts.budget;
        }
    }
    if let Some(e) = search.failure.take() {
        return Err(e);
    }
    let Some((value, u_best)) = search.best.clone() else {
        return Err(Error::InfeasibleFamily(
            "no candidate stays inside the non-degenerate quadrant".into(),
        ));
    };
    let evals = search.evals;
    let trace = std::mem::take(&mut search.trace);
    let params = search.params(&u_best);
    let objective = match opts.objective {
        Objective::MinDissipationAtArea(_) => value,
        _ => -value,
    };
    if !converged {
        return Err(Error::BudgetExhausted {
            evaluations: evals,
            best_objective: objective,
            best_params: params,
        });
    }
    let mut curve = opts.family.curve(&params)?;
    if score_candidate(&curve, field, opts.nodes)?.is_some_and(|s| s.area < 0.0) {
        curve = curve.reversed();
    }
    let protocol = constant_rate_reparametrize(&curve, field)?.with_duration(opts.tau);
    let summary = machine_summary(&protocol, field, opts.bias, opts.tau)?;
    Ok(OptimizationResult {
        params,
        objective,
        protocol,
        summary,
        evaluations: evals,
        trace,
    })
}

fn objective_loss(objective: Objective, s: CandidateScore, bias: f64) -> f64 {
    let a = s.area.abs();
    match objective {
        Objective::MaxPower => {
            if s.length2 > 0.0 {
                -0.25 * bias * bias * a * a / s.length2
            } else {
                f64::INFINITY
            }
        }
        Objective::MaxPumpedHeat => -a,
        Objective::MinDissipationAtArea(target) => {
            let t = target.value();
            s.length2 * (1.0 + AREA_PENALTY * ((a - t) / t).powi(2))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn carnot_reference_values() {
        let (eta, cop) = carnot_reference(2.0, 1.0).unwrap();
        assert_eq!((eta, cop), (0.5, 2.0));
        assert!(matches!(carnot_reference(1.0, 1.0), Err(Error::InvalidBias { .. })));
        assert!(carnot_reference(1.0, 1e-12).unwrap().0 > 1.0 - 1e-11);
    }

    #[test]
    fn mode_table() {
        assert_eq!(classify_mode(-1.0, 0.2), Mode::Refrigerator);
        assert_eq!(classify_mode(0.3, -0.1), Mode::HeatEngine);
        assert_eq!(classify_mode(0.0, 0.0), Mode::Idle);
        assert_eq!(classify_mode(0.5, 0.1), Mode::Dissipator);
    }

    #[test]
    fn quasistatic_carnot_reaches_carnot_efficiency() {
        let r = carnot_cycle(2.0, 0.5, 2.0, 1.0).unwrap();
        assert_eq!(r.mode, Mode::HeatEngine);
        assert!(r.energy_residual() < 1e-8);
        assert_relative_eq!(r.efficiency.unwrap(), 0.5, max_relative = 1e-9);
        let f = carnot_cycle(0.5, 2.0, 2.0, 1.0).unwrap();
        assert_eq!(f.mode, Mode::Refrigerator);
        assert_relative_eq!(f.cop.unwrap(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn otto_efficiency_is_field_ratio() {
        let r = otto_cycle(2.0, 0.5, 4.0, 0.5).unwrap();
        assert_eq!(r.mode, Mode::HeatEngine);
        assert!(r.energy_residual() < 1e-12);
        assert_relative_eq!(r.efficiency.unwrap(), 1.0 - 0.5 / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn stroke_errors() {
        assert!(matches!(optimal_strokes(1.0, 1.0, 0.0, 1.0, 2.0), Err(Error::ZeroEntropySwing)));
        assert!(matches!(optimal_strokes(0.0, 1.0, 1.0, 1.0, 2.0), Err(Error::QuasistaticSingular(_))));
        assert!(matches!(optimal_strokes(1.0, 1.0, 1.0, 2.0, 2.0), Err(Error::InvalidBias { .. })));
        let o = optimal_strokes(0.7, 0.7, 1.0, 1.0 - 1e-6, 1.0).unwrap();
        assert_relative_eq!(o.tau_cold, o.tau_hot, max_relative = 1e-6);
        let p = stroke_power(0.7, 0.7, 1.0, 1.0 - 1e-6, 1.0, o.tau_cold, o.tau_hot);
        assert_relative_eq!(p, o.max_power, max_relative = 1e-9);
    }

    #[test]
    fn engine_identities() {
        let s = AdiabaticMachineSummary::new(0.3, 0.02, 0.05, 0.1, 10.0);
        let e = engine_performance(&s).unwrap();
        assert_relative_eq!(s.power_at(e.tau_p), e.max_power, max_relative = 1e-12);
        assert_eq!(s.power_at(e.tau_d), 0.0);
        let h = 1e-4 * e.tau_eta;
        let d = (s.efficiency_at(e.tau_eta + h) - s.efficiency_at(e.tau_eta - h)) / (2.0 * h);
        assert!(d.abs() < 1e-6 * s.bias / e.tau_d);
        let r = AdiabaticMachineSummary::new(-0.3, 0.02, 0.05, 0.1, 10.0);
        assert!(matches!(engine_performance(&r), Err(Error::WrongOrientation { .. })));
    }

    #[test]
    fn box_crossing_zero_is_infeasible() {
        use crate::geometry::MasterEquationField;
        let field = MasterEquationField::new(FieldMap::planar_xz(), vec![]);
        let fam = Family::Ellipse {
            lower: [-0.5, 0.5, 0.1, 0.1, 0.0],
            upper: [1.0, 1.0, 0.3, 0.3, 1.0],
        };
        let e = optimize_protocol(&field, &OptimizeOptions::new(fam, Objective::MaxPower)).unwrap_err();
        assert_eq!(e.name(), "InfeasibleFamily");
    }
}
