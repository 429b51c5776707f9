//! Thermal geometric tensor, dissipated work and thermodynamic length.
//!
//! Index order: Λ_{a,b} links cause a (a control velocity Ẋ_a, or the bias
//! x = ΔT/T for a = N+1) to response b (the force F_b = −∂H/∂X_b = f⃗_b·σ, or
//! the heat current for b = N+1). With P_ℓ = ⟨F_ℓ⟩Ẋ_ℓ the power developed by
//! force ℓ, the non-conservative part is
//! ⟨F_ℓ⟩^(nc) = −Σ_a Λ_{a,ℓ}Ẋ_a − Λ_{N+1,ℓ} x, and the antisymmetrized heat
//! current is (J_c − J_h)/2 = Σ_a Λ_{a,N+1}Ẋ_a + Λ_{N+1,N+1} x with
//! T_h = T(1 + x/2), T_c = T(1 − x/2). The dissipated work ∫Ẋ·Λ·Ẋ dt is then
//! non-negative and Λ^A_{a,b} is the Berry curvature Ω_{a,b} in the closed limit.

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::meq::{build_kernel, energy_current, frozen_jacobian, frozen_steady_state, Kernel, StatePart};
use crate::model::{BathSpec, FieldMap};
use crate::numeric::quad::{self, QuadOptions};
use crate::protocol::Protocol;
use crate::table::Table;

/// Relative temperature step of the bias differencing.
pub const BIAS_STEP: f64 = 1e-4;
/// Largest accepted ratio of quadratic to linear bias response.
pub const BIAS_NONLINEARITY: f64 = 1e-3;

/// Which baths play the hot and cold roles of the thermal bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiasAxis {
    pub hot: usize,
    pub cold: usize,
}

impl Default for BiasAxis {
    fn default() -> Self {
        Self { hot: 0, cold: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoTensor {
    pub point: Vec<f64>,
    /// N×N, or (N+1)×(N+1) when the bias entry is present.
    pub matrix: DMatrix<f64>,
    pub has_bias: bool,
}

impl GeoTensor {
    /// Number of control parameters N.
    pub fn controls(&self) -> usize {
        self.matrix.nrows() - usize::from(self.has_bias)
    }

    pub fn symmetric(&self) -> DMatrix<f64> {
        (&self.matrix + self.matrix.transpose()) * 0.5
    }

    pub fn antisymmetric(&self) -> DMatrix<f64> {
        (&self.matrix - self.matrix.transpose()) * 0.5
    }

    /// Symmetric control block Λ^S (the thermodynamic metric).
    pub fn metric(&self) -> DMatrix<f64> {
        let n = self.controls();
        self.symmetric().view((0, 0), (n, n)).into_owned()
    }

    /// Λ_{N+1,ℓ}: force response to the bias.
    pub fn bias_row(&self) -> Option<Vec<f64>> {
        let n = self.controls();
        self.has_bias
            .then(|| (0..n).map(|l| self.matrix[(n, l)]).collect())
    }

    /// Λ_{ℓ,N+1}: heat response to control velocities (the pump vector).
    pub fn bias_column(&self) -> Option<Vec<f64>> {
        let n = self.controls();
        self.has_bias
            .then(|| (0..n).map(|l| self.matrix[(l, n)]).collect())
    }

    /// Λ_{N+1,N+1}, the linear thermal conductance per unit ΔT/T.
    pub fn conductance(&self) -> Option<f64> {
        let n = self.controls();
        self.has_bias.then(|| self.matrix[(n, n)])
    }

    /// Ẋ·Λ^S·Ẋ along a direction.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let m = self.metric();
        let mut acc = 0.0;
        for i in 0..v.len() {
            for j in 0..v.len() {
                acc += v[i] * m[(i, j)] * v[j];
            }
        }
        acc
    }
}

/// Response data at one point shared by the tensor and the pump fields.
struct Response {
    kernel: Kernel,
    /// f⃗_ℓ in frame components.
    forces: Vec<Vector3<f64>>,
    /// (E + ΣM)⁻¹ ∂_ℓρ^(f) per unit velocity.
    adiabatic: Vec<Vector3<f64>>,
}

fn response(map: &FieldMap, baths: &[BathSpec], x: &[f64]) -> Result<Response> {
    let kernel = build_kernel(map, baths, x)?;
    let jac = frozen_jacobian(map, baths, x)?;
    let (_, df) = map.eval(x);
    let forces: Vec<Vector3<f64>> = df.iter().map(|d| kernel.to_frame(d)).collect();
    let adiabatic = (0..map.dim())
        .map(|l| kernel.solve(&jac.fixed_view::<3, 1>(0, l).into_owned()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Response {
        kernel,
        forces,
        adiabatic,
    })
}

/// ∂J_α^(a)/∂Ẋ_ℓ for one bath: the pumped-heat field of that bath.
pub fn bath_heat_response(map: &FieldMap, baths: &[BathSpec], x: &[f64], bath: usize) -> Result<Vec<f64>> {
    if bath >= baths.len() {
        return Err(Error::InvalidInput(format!("bath index {bath} out of range")));
    }
    let r = response(map, baths, x)?;
    Ok(r
        .adiabatic
        .iter()
        .map(|ra| energy_current(&r.kernel, ra, StatePart::Adiabatic)[bath])
        .collect())
}

fn check_bias(baths: &[BathSpec], axis: BiasAxis) -> Result<f64> {
    if axis.hot >= baths.len() || axis.cold >= baths.len() || axis.hot == axis.cold {
        return Err(Error::InvalidInput(format!(
            "bias axis {axis:?} needs two distinct baths out of {}",
            baths.len()
        )));
    }
    let (th, tc) = (baths[axis.hot].temperature, baths[axis.cold].temperature);
    if (th - tc).abs() > 1e-12 * th {
        return Err(Error::InvalidBias {
            t_hot: th,
            t_cold: tc,
        });
    }
    Ok(th)
}

/// Baths with T_h = T(1 + x/2), T_c = T(1 − x/2).
pub fn biased_baths(baths: &[BathSpec], axis: BiasAxis, t: f64, x: f64) -> Result<Vec<BathSpec>> {
    let mut out = baths.to_vec();
    out[axis.hot] = baths[axis.hot].with_temperature(t * (1.0 + 0.5 * x))?;
    out[axis.cold] = baths[axis.cold].with_temperature(t * (1.0 - 0.5 * x))?;
    Ok(out)
}

/// Steady state (frame), antisymmetrized heat current at bias x, and the
/// magnitude B·ΣΓ₁ of the terms that cancel in each bath current.
fn biased_steady(map: &FieldMap, baths: &[BathSpec], axis: BiasAxis, t: f64, x: &[f64], bias: f64) -> Result<(Vector3<f64>, f64, f64)> {
    let b = biased_baths(baths, axis, t, bias)?;
    let k = build_kernel(map, &b, x)?;
    let r = frozen_steady_state(&k)?;
    let j = energy_current(&k, &r, StatePart::Frozen);
    let scale = k.magnitude() * k.baths.iter().map(|b| b.relaxation_rate()).sum::<f64>();
    Ok((r, 0.5 * (j[axis.cold] - j[axis.hot]), scale))
}

/// Quadratic residuals below this multiple of the current scale are roundoff.
const BIAS_NOISE: f64 = 1e-12;

/// Bias derivatives of the steady state and of the antisymmetrized current,
/// by symmetric differences at δ and 2δ combined by Richardson extrapolation.
fn bias_derivatives(map: &FieldMap, baths: &[BathSpec], axis: BiasAxis, t: f64, x: &[f64]) -> Result<(Vector3<f64>, f64)> {
    let d = BIAS_STEP;
    let (_, j0, scale) = biased_steady(map, baths, axis, t, x, 0.0)?;
    let (rp, jp, _) = biased_steady(map, baths, axis, t, x, d)?;
    let (rm, jm, _) = biased_steady(map, baths, axis, t, x, -d)?;
    let (rp2, jp2, _) = biased_steady(map, baths, axis, t, x, 2.0 * d)?;
    let (rm2, jm2, _) = biased_steady(map, baths, axis, t, x, -2.0 * d)?;
    let linear = 0.5 * (jp - jm).abs();
    let quadratic = 0.5 * (jp + jm - 2.0 * j0).abs();
    if quadratic > BIAS_NONLINEARITY * linear && quadratic > BIAS_NOISE * scale {
        return Err(Error::BiasNonlinearity {
            ratio: quadratic / linear,
        });
    }
    let dr = (4.0 * (rp - rm) / (2.0 * d) - (rp2 - rm2) / (4.0 * d)) / 3.0;
    let dj = (4.0 * (jp - jm) / (2.0 * d) - (jp2 - jm2) / (4.0 * d)) / 3.0;
    Ok((dr, dj))
}

/// Thermal geometric tensor at `x`; the bias entry is added when `bias` is given.
pub fn geo_tensor(map: &FieldMap, baths: &[BathSpec], x: &[f64], bias: Option<BiasAxis>) -> Result<GeoTensor> {
    let n = map.dim();
    let t = bias.map(|a| check_bias(baths, a)).transpose()?;
    let r = response(map, baths, x)?;
    let size = n + usize::from(bias.is_some());
    let mut m = DMatrix::zeros(size, size);
    for a in 0..n {
        for b in 0..n {
            m[(a, b)] = -r.forces[b].dot(&r.adiabatic[a]);
        }
    }
    if let (Some(axis), Some(t)) = (bias, t) {
        for a in 0..n {
            let j = energy_current(&r.kernel, &r.adiabatic[a], StatePart::Adiabatic);
            m[(a, n)] = 0.5 * (j[axis.cold] - j[axis.hot]);
        }
        let (dr, dj) = bias_derivatives(map, baths, axis, t, x)?;
        for b in 0..n {
            m[(n, b)] = -r.forces[b].dot(&dr);
        }
        m[(n, n)] = dj;
    }
    Ok(GeoTensor {
        point: x.to_vec(),
        matrix: m,
        has_bias: bias.is_some(),
    })
}

/// A control-space field of geometric tensors.
pub trait TensorField: Sync {
    fn dim(&self) -> usize;
    fn tensor(&self, x: &[f64]) -> Result<GeoTensor>;
}

/// Tensor field computed from the master equation.
#[derive(Debug, Clone)]
pub struct MasterEquationField {
    pub map: FieldMap,
    pub baths: Vec<BathSpec>,
    pub bias: Option<BiasAxis>,
}

impl MasterEquationField {
    pub fn new(map: FieldMap, baths: Vec<BathSpec>) -> Self {
        Self {
            map,
            baths,
            bias: None,
        }
    }

    pub fn with_bias(mut self, axis: BiasAxis) -> Self {
        self.bias = Some(axis);
        self
    }
}

impl TensorField for MasterEquationField {
    fn dim(&self) -> usize {
        self.map.dim()
    }

    fn tensor(&self, x: &[f64]) -> Result<GeoTensor> {
        geo_tensor(&self.map, &self.baths, x, self.bias)
    }
}

/// Tensor field given by a closure returning the full matrix.
pub struct FnTensorField<F> {
    pub dim: usize,
    pub has_bias: bool,
    pub f: F,
}

impl<F> TensorField for FnTensorField<F>
where
    F: Fn(&[f64]) -> DMatrix<f64> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn tensor(&self, x: &[f64]) -> Result<GeoTensor> {
        Ok(GeoTensor {
            point: x.to_vec(),
            matrix: (self.f)(x),
            has_bias: self.has_bias,
        })
    }
}

fn quad_opts() -> QuadOptions {
    QuadOptions {
        rel_tol: 1e-11,
        abs_tol: 1e-300,
        max_intervals: 4000,
    }
}

/// X′·Λ^S·X′ at curve parameter s.
pub fn metric_speed2(protocol: &Protocol, field: &dyn TensorField, s: f64) -> Result<f64> {
    let (x, d) = protocol.eval(s);
    Ok(field.tensor(&x)?.quadratic_form(&d))
}

/// W^(diss) = ∫Ẋ·Λ^S·Ẋ dt + (ΔT/T)² ∫Λ_{N+1,N+1} dt.
pub fn dissipated_work(protocol: &Protocol, field: &dyn TensorField, bias_ratio: f64) -> Result<f64> {
    let tau = protocol.duration();
    let w = quad::integrate(
        |s| {
            let (x, d) = protocol.eval(s);
            let t = field.tensor(&x)?;
            let mut v = t.quadratic_form(&d) / (tau * protocol.speed(s));
            if bias_ratio != 0.0 {
                let k = t.conductance().ok_or_else(|| {
                    Error::InvalidInput("bias term needs a tensor field with a bias entry".into())
                })?;
                v += bias_ratio * bias_ratio * k * tau * protocol.speed(s);
            }
            Ok(v)
        },
        0.0,
        1.0,
        protocol.breaks(),
        quad_opts(),
    )?;
    Ok(w)
}

/// L = ∫ sqrt(Ẋ·Λ^S·Ẋ) dt, independent of the speed profile.
pub fn thermodynamic_length(protocol: &Protocol, field: &dyn TensorField) -> Result<f64> {
    quad::integrate(
        |s| Ok(metric_speed2(protocol, field, s)?.max(0.0).sqrt()),
        0.0,
        1.0,
        protocol.breaks(),
        quad_opts(),
    )
}

/// Relative gap below which the bound counts as saturated.
pub const SATURATION_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    /// TΣ = W^(diss).
    pub dissipation: f64,
    /// L²/δt.
    pub bound: f64,
    pub relative_gap: f64,
    pub saturated: bool,
}

/// Both sides of TΣ ≥ L²/δt.
pub fn dissipation_bound_check(protocol: &Protocol, field: &dyn TensorField) -> Result<BoundCheck> {
    let dissipation = dissipated_work(protocol, field, 0.0)?;
    let l = thermodynamic_length(protocol, field)?;
    let bound = l * l / protocol.duration();
    let relative_gap = if dissipation > 0.0 {
        (dissipation - bound) / dissipation
    } else {
        0.0
    };
    Ok(BoundCheck {
        dissipation,
        bound,
        relative_gap,
        saturated: relative_gap.abs() < SATURATION_GAP,
    })
}

/// Nodes of the tabulated constant-rate speed profile.
pub const REPARAM_NODES: usize = 1025;

/// Same path with dt/ds ∝ sqrt(X′·Λ^S·X′), i.e. constant dissipation rate.
pub fn constant_rate_reparametrize(protocol: &Protocol, field: &dyn TensorField) -> Result<Protocol> {
    let m = REPARAM_NODES;
    let s: Vec<f64> = (0..m).map(|k| k as f64 / (m - 1) as f64).collect();
    let speeds = s
        .par_iter()
        .map(|&si| metric_speed2(protocol, field, si).map(|v| v.max(0.0).sqrt()))
        .collect::<Result<Vec<f64>>>()?;
    let top = speeds.iter().copied().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(Error::ZeroMetricSegment {
            s: 0.0,
            direction: protocol.tangent(0.0),
        });
    }
    if let Some(k) = speeds.iter().position(|v| *v <= 1e-9 * top) {
        let d = protocol.tangent(s[k]);
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        return Err(Error::ZeroMetricSegment {
            s: s[k],
            direction: d.into_iter().map(|v| v / norm).collect(),
        });
    }
    let mut sigma = speeds;
    if protocol.is_closed() {
        sigma[m - 1] = sigma[0];
    }
    protocol.clone().with_speed_table(&s, &sigma)
}

/// Exponential relaxation mode of the force-force response Ψ(s) = Σ_k w_k e^{λ_k s}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationMode {
    pub rate: Complex64,
    pub weight: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallAmplitudeResult {
    pub work: f64,
    pub modes: Vec<RelaxationMode>,
    /// |δB| exceeds 5% of |B| at X₀.
    pub large_amplitude: bool,
}

fn null_vector(m: &nalgebra::Matrix3<Complex64>) -> Option<nalgebra::Vector3<Complex64>> {
    let rows: Vec<nalgebra::Vector3<Complex64>> = (0..3).map(|i| m.row(i).transpose()).collect();
    let mut best: Option<nalgebra::Vector3<Complex64>> = None;
    let mut best_norm = 0.0;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let c = rows[i].cross(&rows[j]).map(|z| z.conj());
        let nrm = c.norm();
        if nrm > best_norm {
            best_norm = nrm;
            best = Some(c / Complex64::from(nrm));
        }
    }
    best
}

/// Eigen-decomposition of a real 3×3 generator into relaxation modes.
fn relaxation_modes(k: &Matrix3<f64>, u: &Vector3<f64>, v: &Vector3<f64>) -> Result<Vec<RelaxationMode>> {
    let lambdas = k.complex_eigenvalues();
    let kc = k.map(Complex64::from);
    let mut p = nalgebra::Matrix3::<Complex64>::zeros();
    for (i, lam) in lambdas.iter().enumerate() {
        let shifted = kc - nalgebra::Matrix3::identity() * *lam;
        let vec = null_vector(&shifted)
            .ok_or_else(|| Error::SingularKernel("eigenvector extraction failed".into()))?;
        p.set_column(i, &vec);
    }
    let pinv = p
        .try_inverse()
        .ok_or_else(|| Error::SingularKernel("relaxation modes are not complete".into()))?;
    let uc = u.map(Complex64::from);
    let vc = v.map(Complex64::from);
    Ok((0..3)
        .map(|i| RelaxationMode {
            rate: lambdas[i],
            weight: uc.dot(&p.column(i)) * pinv.row(i).transpose().dot(&vc),
        })
        .collect())
}

fn phi12(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < 1e-4 {
        (
            1.0 + z / 2.0 + z * z / 6.0,
            0.5 + z / 6.0 + z * z / 24.0,
        )
    } else {
        let e = z.exp();
        ((e - 1.0) / z, (e - 1.0 - z) / (z * z))
    }
}

/// Linear-response dissipated work for X(t) = X₀ + g(t)δX:
/// W = ∫dt ∫^t dt′ ġ(t) Ψ(t − t′) ġ(t′) with Ψ(s) = δX·f⃗·e^{(E+ΣM)s}·∂ρ^(f)·δX.
///
/// `ramp` returns ġ(t); the double integral is evaluated on `steps` uniform
/// intervals (rounded up to even) with ġ interpolated linearly.
pub fn small_amplitude_diss<G>(
    map: &FieldMap,
    baths: &[BathSpec],
    x0: &[f64],
    dx: &[f64],
    ramp: G,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<SmallAmplitudeResult>
where
    G: Fn(f64) -> f64,
{
    let r = response(map, baths, x0)?;
    let jac = frozen_jacobian(map, baths, x0)?;
    let mut u = Vector3::zeros();
    let mut v = Vector3::zeros();
    for (l, d) in dx.iter().enumerate() {
        u += r.forces[l] * *d;
        v += jac.fixed_view::<3, 1>(0, l) * *d;
    }
    let (b, db) = map.eval(x0);
    let shift: Vector3<f64> = db.iter().zip(dx).map(|(g, d)| g * *d).sum();
    let large_amplitude = shift.norm() > 0.05 * b.norm();
    if large_amplitude {
        log::warn!("small-amplitude response used with |δB|/|B| = {:.3}", shift.norm() / b.norm());
    }
    let modes = relaxation_modes(&r.kernel.generator(), &u, &v)?;

    let n = steps.max(2).div_ceil(2) * 2;
    let h = (t1 - t0) / n as f64;
    let gd: Vec<f64> = (0..=n).map(|i| ramp(t0 + i as f64 * h)).collect();
    let mut work = Complex64::new(0.0, 0.0);
    for mode in &modes {
        let z = mode.rate * h;
        let ez = z.exp();
        let (p1, p2) = phi12(z);
        let mut s = Complex64::new(0.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..=n {
            if i > 0 {
                s = ez * s + h * (gd[i - 1] * p1 + (gd[i] - gd[i - 1]) * p2);
            }
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * gd[i] * s;
        }
        work += mode.weight * acc * (h / 3.0);
    }
    Ok(SmallAmplitudeResult {
        work: work.re,
        modes,
        large_amplitude,
    })
}

/// Ψ(0⁺) = δX·f⃗·∂ρ^(f)·δX, the quench limit of the relaxation function.
pub fn relaxation_at_zero(modes: &[RelaxationMode]) -> f64 {
    modes.iter().map(|m| m.weight.re).sum()
}

/// Tensor field on a list of points as a CSV-ready table (coordinates, then Λ row-major).
pub fn tensor_grid(field: &dyn TensorField, points: &[Vec<f64>]) -> Result<Table> {
    let n = field.dim();
    let tensors = points
        .par_iter()
        .map(|p| field.tensor(p))
        .collect::<Result<Vec<_>>>()?;
    let size = tensors.first().map(|t| t.matrix.nrows()).unwrap_or(n);
    let mut headers: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    for i in 0..size {
        for j in 0..size {
            headers.push(format!("lambda_{i}_{j}"));
        }
    }
    let mut table = Table::new(headers);
    for (p, t) in points.iter().zip(&tensors) {
        let mut row = p.clone();
        for i in 0..size {
            for j in 0..size {
                row.push(t.matrix[(i, j)]);
            }
        }
        table.push(row);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Coupling, Spectrum};
    use approx::assert_relative_eq;

    fn transverse(t: f64) -> BathSpec {
        BathSpec::new("b", Coupling::Transverse, Spectrum::ohmic(0.1, f64::INFINITY), t).unwrap()
    }

    #[test]
    fn radial_entry_matches_closed_form() {
        let map = FieldMap::spherical();
        let t = 0.7;
        let x = [0.9, 1.0, 0.3];
        let g = geo_tensor(&map, &[transverse(t)], &x, None).unwrap();
        let bb: f64 = 0.9 / t;
        let gamma = 0.1 * 1.8;
        let expected = (1.0 / t) * bb.sinh() / (gamma * bb.cosh().powi(3));
        assert_relative_eq!(g.matrix[(0, 0)], expected, max_relative = 1e-9);
    }

    #[test]
    fn angular_block_and_curvature() {
        let map = FieldMap::spherical();
        let t = 0.2;
        let x = [1.0, 0.8, 0.1];
        let g = geo_tensor(&map, &[transverse(t)], &x, None).unwrap();
        let a = 0.5 * 0.1 * 2.0 / (1.0f64 / t).tanh();
        let th = (1.0f64 / t).tanh();
        let qq = th * a / (a * a + 4.0);
        assert_relative_eq!(g.matrix[(1, 1)], qq, max_relative = 1e-8);
        assert_relative_eq!(g.matrix[(2, 2)], qq * 0.8f64.sin().powi(2), max_relative = 1e-8);
        let anti = g.antisymmetric();
        let expected = 0.5 * 0.8f64.sin() * th * 4.0 / (a * a + 4.0);
        assert_relative_eq!(anti[(2, 1)], expected, max_relative = 1e-8);
    }

    #[test]
    fn onsager_bias_entries() {
        let map = FieldMap::planar_xz();
        let baths = vec![
            BathSpec::new("l", Coupling::Axis(Vector3::z()), Spectrum::ohmic(0.05, 30.0), 0.5).unwrap(),
            BathSpec::new("r", Coupling::Axis(Vector3::x()), Spectrum::ohmic(0.08, 30.0), 0.5).unwrap(),
        ];
        let g = geo_tensor(&map, &baths, &[0.3, 0.45], Some(BiasAxis::default())).unwrap();
        let row = g.bias_row().unwrap();
        let col = g.bias_column().unwrap();
        for l in 0..2 {
            assert_relative_eq!(row[l], -col[l], max_relative = 1e-8);
        }
        assert!(g.conductance().unwrap() > 0.0);
        let eig = g.symmetric().symmetric_eigenvalues();
        assert!(eig.min() > -1e-12 * eig.max());
    }

    #[test]
    fn length_is_speed_invariant() {
        let field = MasterEquationField::new(FieldMap::planar_xz(), vec![transverse(0.5)]);
        let p = Protocol::ellipse([1.0, 1.0], [0.4, 0.2], 0.3).with_duration(10.0);
        let l0 = thermodynamic_length(&p, &field).unwrap();
        let q = p
            .clone()
            .with_duration(3.0)
            .with_speed_fn(|s| 1.5 + (6.0 * s).cos())
            .unwrap();
        assert_relative_eq!(thermodynamic_length(&q, &field).unwrap(), l0, max_relative = 1e-9);
        let chk = dissipation_bound_check(&q, &field).unwrap();
        assert!(chk.dissipation > chk.bound && !chk.saturated);
        let opt = constant_rate_reparametrize(&q, &field).unwrap();
        let chk = dissipation_bound_check(&opt, &field).unwrap();
        assert!(chk.saturated, "gap {}", chk.relative_gap);
    }

    #[test]
    fn zero_metric_segment_is_reported() {
        let field = FnTensorField {
            dim: 2,
            has_bias: false,
            f: |x: &[f64]| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![x[0] * x[0], 1.0])),
        };
        let p = Protocol::segment(vec![-1.0, 0.0], vec![1.0, 0.0]);
        let err = constant_rate_reparametrize(&p, &field).unwrap_err();
        match err {
            Error::ZeroMetricSegment { s, direction } => {
                assert_relative_eq!(s, 0.5);
                assert_eq!(direction, vec![1.0, 0.0]);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn quench_and_slow_limits() {
        let map = FieldMap::planar_xz();
        let baths = [transverse(0.5)];
        let x0 = [0.2, 0.5];
        let dx = [0.004, 0.003];
        let none = small_amplitude_diss(&map, &baths, &x0, &dx, |_| 0.0, 0.0, 10.0, 100).unwrap();
        assert_eq!(none.work, 0.0);
        // Ramp of width w as ġ = (π/2w) sin(πt/w).
        let w = 1e-4;
        let quench = small_amplitude_diss(
            &map,
            &baths,
            &x0,
            &dx,
            |t| if t < w { std::f64::consts::PI / (2.0 * w) * (std::f64::consts::PI * t / w).sin() } else { 0.0 },
            0.0,
            w,
            4000,
        )
        .unwrap();
        let psi0 = relaxation_at_zero(&quench.modes);
        assert_relative_eq!(quench.work, 0.5 * psi0, max_relative = 1e-3);
    }
}
