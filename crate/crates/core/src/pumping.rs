//! Heat pumping between baths, power pumping between drives, Berry curvature and Chern numbers.

use std::f64::consts::{PI, TAU};

use nalgebra::{SVector, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{bath_heat_response, GeoTensor};
use crate::meq::control_step;
use crate::model::{BathSpec, FieldMap};
use crate::numeric::ode::{dopri5, OdeOptions};
use crate::numeric::quad::{self, gauss_legendre_on, QuadOptions};
use crate::protocol::{Protocol, CLOSURE_TOL};
use crate::table::Table;

/// A vector field over control space, e.g. the pumped-heat response of one bath.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn vector(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// Finite-difference step for derivatives along control `l` at `x`.
    fn step(&self, _x: &[f64], _l: usize) -> f64 {
        1e-3
    }
}

/// Λ⃗(X) = ∂J_α^(a)/∂Ẋ from the master equation, for bath `bath`.
#[derive(Debug, Clone)]
pub struct PumpField {
    pub map: FieldMap,
    pub baths: Vec<BathSpec>,
    pub bath: usize,
}

impl VectorField for PumpField {
    fn dim(&self) -> usize {
        self.map.dim()
    }

    fn vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        bath_heat_response(&self.map, &self.baths, x, self.bath)
    }

    fn step(&self, x: &[f64], l: usize) -> f64 {
        control_step(&self.map, x, l)
    }
}

/// Vector field given by a closure.
pub struct FnVectorField<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> VectorField for FnVectorField<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok((self.f)(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpedHeat {
    /// ∮Λ⃗·dX.
    pub line_integral: f64,
    /// ∬ curl Λ⃗ over the enclosed region (two controls only).
    pub stokes_flux: Option<f64>,
    /// |line − flux| / |line|.
    pub stokes_residual: Option<f64>,
}

/// Line integral of a vector field along a curve.
pub fn line_integral(protocol: &Protocol, field: &dyn VectorField) -> Result<f64> {
    quad::integrate(
        |s| {
            let (x, d) = protocol.eval(s);
            let v = field.vector(&x)?;
            Ok(v.iter().zip(&d).map(|(a, b)| a * b).sum())
        },
        0.0,
        1.0,
        protocol.breaks(),
        QuadOptions {
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            max_intervals: 4000,
        },
    )
}

fn curl2(field: &dyn VectorField, x: &[f64]) -> Result<f64> {
    let mut out = 0.0;
    for (l, comp, sign) in [(0usize, 1usize, 1.0), (1, 0, -1.0)] {
        let h = field.step(x, l);
        let mut p = x.to_vec();
        let mut at = |d: f64| -> Result<f64> {
            p[l] = x[l] + d;
            Ok(field.vector(&p)?[comp])
        };
        let d = (8.0 * (at(h)? - at(-h)?) - (at(2.0 * h)? - at(-2.0 * h)?)) / (12.0 * h);
        out += sign * d;
    }
    Ok(out)
}

/// Flux of the curl through the cone spanned from the curve centroid,
/// P(r, s) = c + r(X(s) − c), which equals the line integral by Stokes.
pub fn stokes_flux(protocol: &Protocol, field: &dyn VectorField) -> Result<f64> {
    let m = 512;
    let mut c = [0.0; 2];
    for k in 0..m {
        let x = protocol.point(k as f64 / m as f64);
        c[0] += x[0] / m as f64;
        c[1] += x[1] / m as f64;
    }
    let mut cuts = vec![0.0];
    if protocol.breaks().is_empty() {
        cuts.extend([0.25, 0.5, 0.75]);
    } else {
        cuts.extend(protocol.breaks().iter().copied());
    }
    cuts.push(1.0);
    let mut s_nodes = Vec::new();
    for w in cuts.windows(2) {
        s_nodes.extend(gauss_legendre_on(40, w[0], w[1]));
    }
    let r_nodes = gauss_legendre_on(32, 0.0, 1.0);
    let parts = s_nodes
        .par_iter()
        .map(|&(s, ws)| -> Result<f64> {
            let (x, d) = protocol.eval(s);
            let rel = [x[0] - c[0], x[1] - c[1]];
            let jac = rel[0] * d[1] - rel[1] * d[0];
            let mut acc = 0.0;
            for &(r, wr) in &r_nodes {
                let p = [c[0] + r * rel[0], c[1] + r * rel[1]];
                acc += wr * r * curl2(field, &p)?;
            }
            Ok(ws * jac * acc)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum())
}

/// Pumped heat Q = ∮Λ⃗·dX with an independent Stokes cross-check for planar controls.
pub fn pumped_heat(protocol: &Protocol, field: &dyn VectorField) -> Result<PumpedHeat> {
    let gap = protocol.closure_gap();
    if !protocol.is_closed() || gap > CLOSURE_TOL {
        return Err(Error::OpenProtocol { gap });
    }
    let line = line_integral(protocol, field)?;
    let (stokes_flux, stokes_residual) = if field.dim() == 2 {
        let flux = stokes_flux(protocol, field)?;
        let scale = line.abs().max(flux.abs());
        let residual = if scale > 0.0 {
            (line - flux).abs() / scale
        } else {
            0.0
        };
        (Some(flux), Some(residual))
    } else {
        (None, None)
    };
    Ok(PumpedHeat {
        line_integral: line,
        stokes_flux,
        stokes_residual,
    })
}

/// Closed path in the (B_x, B_z) quadrant: out along the B_x axis from `inner` to
/// `outer`, a quarter arc to the B_z axis, back down to `inner`, and a quarter arc home.
pub fn quarter_plane_protocol(inner: f64, outer: f64) -> Result<Protocol> {
    if !(inner > 0.0 && outer > inner) {
        return Err(Error::InvalidInput(format!(
            "quarter-plane radii need 0 < inner < outer, got {inner}, {outer}"
        )));
    }
    let p = Protocol::from_closure(2, true, move |s| {
        let u = (4.0 * s).clamp(0.0, 4.0);
        let (leg, w) = if u >= 4.0 {
            (3, 1.0)
        } else {
            (u.floor() as usize, u - u.floor())
        };
        let span = outer - inner;
        match leg {
            0 => (vec![inner + w * span, 0.0], vec![4.0 * span, 0.0]),
            1 => {
                let a = 0.5 * PI * w;
                let da = 2.0 * PI;
                (
                    vec![outer * a.cos(), outer * a.sin()],
                    vec![-outer * a.sin() * da, outer * a.cos() * da],
                )
            }
            2 => (vec![0.0, outer - w * span], vec![0.0, -4.0 * span]),
            _ => {
                let a = 0.5 * PI * (1.0 - w);
                let da = -2.0 * PI;
                (
                    vec![inner * a.cos(), inner * a.sin()],
                    vec![-inner * a.sin() * da, inner * a.cos() * da],
                )
            }
        }
    })?;
    Ok(p.with_breaks(vec![0.25, 0.5, 0.75]))
}

/// F(y) = y tanh y − ln cosh y, the per-leg pumped heat in units of T.
pub fn landauer_leg(y: f64) -> f64 {
    let y = y.abs();
    let e = (-2.0 * y).exp();
    std::f64::consts::LN_2 - 2.0 * y * e / (1.0 + e) - e.ln_1p()
}

/// Pointwise pumped power (P_a − P_b)/2 from sampled drive powers.
pub fn power_pump(p_a: &[f64], p_b: &[f64]) -> Vec<f64> {
    p_a.iter().zip(p_b).map(|(a, b)| 0.5 * (a - b)).collect()
}

/// Adiabatic pumped power Ẋ_a Λ^A_{a,b} Ẋ_b between drives a and b.
pub fn adiabatic_power_pump(tensor: &GeoTensor, a: usize, b: usize, velocity: &[f64]) -> f64 {
    velocity[a] * tensor.antisymmetric()[(a, b)] * velocity[b]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Ground,
    Excited,
}

/// Berry curvature Ω_{a,b} = i[⟨∂_a u|∂_b u⟩ − ⟨∂_b u|∂_a u⟩] of a band.
///
/// For a two-level system the projector formula reduces to
/// Ω_{a,b} = ∓(1/2) n̂·(∂_a n̂ × ∂_b n̂) for the ground (−) and excited (+) band.
pub fn berry_curvature(map: &FieldMap, x: &[f64], band: Band, pair: (usize, usize)) -> Result<f64> {
    let (b, db) = map.eval(x);
    let m = b.norm();
    if !(2.0 * m > 1e-8) {
        return Err(Error::GapClosure { point: x.to_vec() });
    }
    let n = b / m;
    let dn = |l: usize| (db[l] - n * n.dot(&db[l])) / m;
    let triple = n.dot(&dn(pair.0).cross(&dn(pair.1)));
    Ok(match band {
        Band::Ground => -0.5 * triple,
        Band::Excited => 0.5 * triple,
    })
}

/// (1/2π) ∬ Ω_{a,b} dX_a dX_b over a rectangle, other controls fixed at `base`.
pub fn curvature_integral(
    map: &FieldMap,
    base: &[f64],
    band: Band,
    pair: (usize, usize),
    ranges: [(f64, f64); 2],
    nodes: usize,
) -> Result<f64> {
    let ra = gauss_legendre_on(nodes, ranges[0].0, ranges[0].1);
    let rb = gauss_legendre_on(nodes, ranges[1].0, ranges[1].1);
    let mut acc = 0.0;
    let mut p = base.to_vec();
    for &(xa, wa) in &ra {
        for &(xb, wb) in &rb {
            p[pair.0] = xa;
            p[pair.1] = xb;
            acc += wa * wb * berry_curvature(map, &p, band, pair)?;
        }
    }
    Ok(acc / TAU)
}

/// Ground-band eigenvector of −B·σ in a gauge that is regular except at n̂ = −ẑ.
fn ground_state(n: &Vector3<f64>) -> [Complex64; 2] {
    if n.z >= 0.0 {
        let v = [Complex64::new(1.0 + n.z, 0.0), Complex64::new(n.x, n.y)];
        let nrm = (2.0 * (1.0 + n.z)).sqrt();
        [v[0] / nrm, v[1] / nrm]
    } else {
        let v = [Complex64::new(n.x, -n.y), Complex64::new(1.0 - n.z, 0.0)];
        let nrm = (2.0 * (1.0 - n.z)).sqrt();
        [v[0] / nrm, v[1] / nrm]
    }
}

fn band_state(n: &Vector3<f64>, band: Band) -> [Complex64; 2] {
    let g = ground_state(n);
    match band {
        Band::Ground => g,
        Band::Excited => [-g[1].conj(), g[0].conj()],
    }
}

fn overlap(a: &[Complex64; 2], b: &[Complex64; 2]) -> Complex64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

/// Plaquette Berry phases on the synthetic Brillouin zone [−π, π)².
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureGrid {
    pub resolution: usize,
    pub band: Band,
    /// Berry phase of plaquette (i, j), row-major in i; NaN where excluded.
    pub flux: Vec<f64>,
    /// Σ flux / 2π over the included plaquettes.
    pub chern: f64,
    /// A vertex sits on a gap closing.
    pub dirac: bool,
    /// Plaquettes left out because the gap closes at a vertex or the phase is unresolved.
    pub excluded: Vec<(usize, usize)>,
}

impl CurvatureGrid {
    /// Nearest integer when the sum is within `tol` of one.
    pub fn integer(&self, tol: f64) -> Option<i64> {
        let r = self.chern.round();
        ((self.chern - r).abs() <= tol).then_some(r as i64)
    }

    /// Plaquette centres, Berry phase and curvature per unit area.
    pub fn to_table(&self) -> Table {
        let n = self.resolution;
        let h = TAU / n as f64;
        let mut t = Table::new(["x1", "x2", "berry_phase", "curvature"]);
        for i in 0..n {
            for j in 0..n {
                let f = self.flux[i * n + j];
                t.push(vec![-PI + (i as f64 + 0.5) * h, -PI + (j as f64 + 0.5) * h, f, f / (h * h)]);
            }
        }
        t
    }
}

/// Largest plaquette phase accepted as resolved.
pub const MAX_PLAQUETTE_PHASE: f64 = PI / 2.0;

/// Chern number of a band by the link-variable (U(1) plaquette holonomy) method
/// on a `resolution`² grid with vertices at −π + 2πk/resolution.
///
/// Plaquettes touching a degenerate vertex are excluded and flagged; the
/// remaining sum is the principal value reported at gap closings.
pub fn chern_number(map: &FieldMap, resolution: usize, band: Band) -> Result<CurvatureGrid> {
    if map.dim() != 2 {
        return Err(Error::InvalidInput("Chern number needs a two-parameter map".into()));
    }
    if resolution < 2 {
        return Err(Error::InvalidInput("Chern grid needs at least 2 points per side".into()));
    }
    let n = resolution;
    let h = TAU / n as f64;
    let vertex = |k: usize| -PI + (k % n) as f64 * h;
    let states: Vec<Option<[Complex64; 2]>> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            let b = map.field(&[vertex(i), vertex(j)]);
            let m = b.norm();
            (m >= map.degenerate_threshold).then(|| band_state(&(b / m), band))
        })
        .collect();
    let at = |i: usize, j: usize| states[(i % n) * n + (j % n)];
    let rows: Vec<Vec<(f64, bool, bool)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let corners = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
                    if corners.iter().any(Option::is_none) {
                        return (f64::NAN, true, true);
                    }
                    let c: Vec<[Complex64; 2]> = corners.iter().map(|s| s.unwrap()).collect();
                    let loop_product = overlap(&c[0], &c[1])
                        * overlap(&c[1], &c[2])
                        * overlap(&c[2], &c[3])
                        * overlap(&c[3], &c[0]);
                    // Berry phase of the loop is −arg of the overlap product.
                    let phase = -loop_product.arg();
                    if phase.abs() > MAX_PLAQUETTE_PHASE || loop_product.norm() < 1e-12 {
                        (f64::NAN, true, false)
                    } else {
                        (phase, false, false)
                    }
                })
                .collect()
        })
        .collect();
    let mut flux = Vec::with_capacity(n * n);
    let mut excluded = Vec::new();
    let mut dirac = false;
    let mut total = 0.0;
    for (i, row) in rows.iter().enumerate() {
        for (j, &(phase, skip, degenerate)) in row.iter().enumerate() {
            flux.push(phase);
            if skip {
                excluded.push((i, j));
                dirac |= degenerate;
            } else {
                total += phase;
            }
        }
    }
    if !excluded.is_empty() {
        log::warn!("{} plaquettes excluded from the Chern sum", excluded.len());
    }
    Ok(CurvatureGrid {
        resolution: n,
        band,
        flux,
        chern: total / TAU,
        dirac,
        excluded,
    })
}

/// ω₂/ω₁ → golden mean through Fibonacci convergents F_{k+1}/F_k.
pub fn golden_convergent(k: usize) -> (u64, u64) {
    let (mut a, mut b) = (1u64, 1u64);
    for _ in 0..k {
        let c = a + b;
        a = b;
        b = c;
    }
    (b, a)
}

#[derive(Debug, Clone)]
pub struct FloquetOptions {
    pub omega1: f64,
    pub omega2: f64,
    /// Initial phases (φ₁, φ₂) averaged over.
    pub phases: Vec<(f64, f64)>,
    /// Integration horizon in time units.
    pub horizon: f64,
    /// Running-average samples recorded per phase.
    pub checkpoints: usize,
    /// Accepted relative drift of the running ratio over the last decade.
    pub drift_tol: f64,
    pub ode: OdeOptions,
}

impl FloquetOptions {
    /// K×K phase grid over [0, 2π)² and a horizon of `slow_periods` periods of the slower drive.
    pub fn grid(omega1: f64, omega2: f64, k: usize, slow_periods: f64) -> Self {
        let phases = (0..k * k)
            .map(|i| (TAU * (i / k) as f64 / k as f64, TAU * (i % k) as f64 / k as f64))
            .collect();
        Self {
            omega1,
            omega2,
            phases,
            horizon: slow_periods * TAU / omega1.min(omega2),
            checkpoints: 200,
            drift_tol: 1e-2,
            ode: OdeOptions {
                rel_tol: 1e-9,
                abs_tol: 1e-12,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloquetResult {
    /// Time- and phase-averaged (P₁ − P₂)/2.
    pub mean_pump: f64,
    /// 2π P̄/(ω₁ω₂), which approaches the Chern number.
    pub ratio: f64,
    /// (time, running ratio) averaged over phases.
    pub trace: Vec<(f64, f64)>,
    /// |ratio(T) − ratio(T/10)| / max(|ratio(T)|, 1).
    pub drift: f64,
    /// ω₂/ω₁ is close to a low-order rational.
    pub commensurate: bool,
}

fn is_commensurate(r: f64) -> bool {
    (1..=12u32).any(|q| {
        let p = (r * q as f64).round();
        (r * q as f64 - p).abs() < 1e-9
    })
}

/// Closed-system two-tone pumping X_ℓ(t) = ω_ℓ t + φ_ℓ starting in the ground band.
///
/// The Bloch vector obeys ṙ = −2B×r; P_ℓ = ω_ℓ f⃗_ℓ·r is the power of force ℓ.
pub fn floquet_pump(map: &FieldMap, opts: &FloquetOptions) -> Result<FloquetResult> {
    if map.dim() != 2 {
        return Err(Error::InvalidInput("Floquet pumping needs a two-parameter map".into()));
    }
    let (w1, w2) = (opts.omega1, opts.omega2);
    let m = opts.checkpoints.max(10);
    let times: Vec<f64> = (1..=m).map(|k| opts.horizon * k as f64 / m as f64).collect();
    let runs = opts
        .phases
        .par_iter()
        .map(|&(p1, p2)| -> Result<Vec<f64>> {
            let x0 = [p1, p2];
            let b0 = map.checked_field(&x0)?;
            let n0 = b0 / b0.norm();
            let y0 = SVector::<f64, 4>::new(n0.x, n0.y, n0.z, 0.0);
            let rhs = |t: f64, y: &SVector<f64, 4>| {
                let (b, db) = map.eval(&[w1 * t + p1, w2 * t + p2]);
                let r = Vector3::new(y[0], y[1], y[2]);
                let dr = -2.0 * b.cross(&r);
                let pump = 0.5 * (w1 * db[0].dot(&r) - w2 * db[1].dot(&r));
                SVector::<f64, 4>::new(dr.x, dr.y, dr.z, pump)
            };
            let mut o = opts.ode;
            o.max_step = o.max_step.min(0.25);
            let (_, samples) = dopri5(rhs, 0.0, opts.horizon, y0, &times, o)?;
            Ok(samples.iter().map(|y| y[3]).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let k = runs.len() as f64;
    let scale = TAU / (w1 * w2);
    let trace: Vec<(f64, f64)> = times
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, scale * runs.iter().map(|r| r[i]).sum::<f64>() / (k * t)))
        .collect();
    let ratio = trace.last().map(|p| p.1).unwrap_or(0.0);
    let early = trace[(m / 10).saturating_sub(1)].1;
    let drift = (ratio - early).abs() / ratio.abs().max(1.0);
    let commensurate = is_commensurate(w2 / w1);
    if commensurate {
        log::warn!("commensurate drive ratio {}: no quantization expected", w2 / w1);
    }
    if drift > opts.drift_tol {
        return Err(Error::HorizonTooShort { drift });
    }
    Ok(FloquetResult {
        mean_pump: ratio / scale,
        ratio,
        trace,
        drift,
        commensurate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Coupling, Spectrum};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, LN_2};

    #[test]
    fn sphere_curvature() {
        let map = FieldMap::spherical();
        let o = berry_curvature(&map, &[1.3, FRAC_PI_2, 0.4], Band::Ground, (2, 1)).unwrap();
        assert_relative_eq!(o, 0.5, epsilon = 1e-14);
        let o = berry_curvature(&map, &[1.3, 0.0, 0.4], Band::Ground, (2, 1)).unwrap();
        assert_eq!(o, 0.0);
        let e = berry_curvature(&map, &[1.3, 0.7, 0.4], Band::Excited, (2, 1)).unwrap();
        assert_relative_eq!(e, -0.5 * 0.7f64.sin(), epsilon = 1e-14);
        assert!(matches!(
            berry_curvature(&FieldMap::synthetic_lattice(1.0, 0.0), &[0.0, 0.0], Band::Ground, (0, 1)),
            Err(Error::GapClosure { .. })
        ));
    }

    #[test]
    fn small_plaquette_matches_curvature_in_any_gauge() {
        let map = FieldMap::synthetic_lattice(1.0, -0.5);
        let x = [0.3, -0.8];
        let h = 1e-4;
        let corners = [[x[0], x[1]], [x[0] + h, x[1]], [x[0] + h, x[1] + h], [x[0], x[1] + h]];
        let phases = [0.3, 2.1, -1.4, 0.9];
        let states: Vec<[Complex64; 2]> = corners
            .iter()
            .zip(phases)
            .map(|(c, ph)| {
                let b = map.field(c);
                let s = band_state(&(b / b.norm()), Band::Ground);
                let g = Complex64::from_polar(1.0, ph);
                [s[0] * g, s[1] * g]
            })
            .collect();
        let prod = (0..4).fold(Complex64::new(1.0, 0.0), |acc, k| acc * overlap(&states[k], &states[(k + 1) % 4]));
        let omega = berry_curvature(&map, &[x[0] + h / 2.0, x[1] + h / 2.0], Band::Ground, (0, 1)).unwrap();
        assert_relative_eq!(-prod.arg() / (h * h), omega, max_relative = 1e-6);
    }

    #[test]
    fn chern_phases() {
        for (delta, c) in [(0.5, 0), (-0.5, 1), (-1.5, 1), (-3.0, -1), (-5.0, 0)] {
            let g = chern_number(&FieldMap::synthetic_lattice(1.0, delta), 60, Band::Ground).unwrap();
            assert_eq!(g.integer(1e-9), Some(c), "delta {delta}: {}", g.chern);
            let e = chern_number(&FieldMap::synthetic_lattice(1.0, delta), 60, Band::Excited).unwrap();
            assert_eq!(g.chern + e.chern, 0.0);
        }
    }

    #[test]
    fn landauer_leg_limits() {
        assert_relative_eq!(landauer_leg(40.0), LN_2, epsilon = 1e-15);
        assert!(landauer_leg(1e-3).abs() < 1e-6);
        let h = 1e-5;
        let y: f64 = 0.8;
        let d = (landauer_leg(y + h) - landauer_leg(y - h)) / (2.0 * h);
        assert_relative_eq!(d, y / y.cosh().powi(2), max_relative = 1e-8);
    }

    #[test]
    fn stokes_agrees_for_analytic_field() {
        let field = FnVectorField {
            dim: 2,
            f: |x: &[f64]| vec![-x[1] * x[0] * x[0], x[0] + x[1].sin()],
        };
        let p = Protocol::ellipse([0.4, -0.2], [0.7, 0.3], 0.5);
        let q = pumped_heat(&p, &field).unwrap();
        assert_relative_eq!(q.line_integral, q.stokes_flux.unwrap(), max_relative = 1e-10);
    }

    #[test]
    fn open_curve_is_rejected() {
        let field = FnVectorField { dim: 2, f: |_: &[f64]| vec![1.0, 0.0] };
        let p = Protocol::segment(vec![0.0, 0.0], vec![1.0, 0.0]);
        assert!(matches!(pumped_heat(&p, &field), Err(Error::OpenProtocol { .. })));
    }

    #[test]
    fn circular_arc_pumps_nothing() {
        let baths = vec![
            BathSpec::new("l", Coupling::Axis(Vector3::z()), Spectrum::ohmic(0.1, 100.0), 1.0).unwrap(),
            BathSpec::new("r", Coupling::Axis(Vector3::x()), Spectrum::ohmic(0.1, 100.0), 1.0).unwrap(),
        ];
        let field = PumpField { map: FieldMap::planar_xz(), baths, bath: 0 };
        let q = pumped_heat(&Protocol::ellipse([0.0, 0.0], [1.0, 1.0], 0.0), &field).unwrap();
        assert!(q.line_integral.abs() < 1e-12);
    }

    #[test]
    fn power_pump_antisymmetry() {
        let a = [1.0, 2.0];
        let b = [0.5, -1.0];
        let ab = power_pump(&a, &b);
        let ba = power_pump(&b, &a);
        assert!(ab.iter().zip(&ba).all(|(x, y)| *x == -*y));
    }
}
