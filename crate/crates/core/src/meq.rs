//! Weak-coupling master equation for the driven qubit in the instantaneous eigenbasis.
//!
//! Vectors carrying frame components are expressed in the orthonormal frame
//! [e_θ, e_φ, n̂] returned by [`field_frame`]. The Bloch equation there reads
//! ṙ = (E + Σ_α M_α) r − Σ_α γ⃗_α with secular (Davies) dissipators.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::model::{
    bose_einstein, field_frame, spectral_rate, zero_frequency_rate, BathSpec, Coupling, FieldMap,
};
use crate::numeric::ode::{dopri5, OdeOptions};
use crate::protocol::Protocol;

/// Largest accepted condition number of the total generator.
pub const MAX_CONDITION: f64 = 1e12;

/// Dissipative contribution of one bath at a control point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathTerms {
    pub matrix: Matrix3<f64>,
    pub inhomogeneity: Vector3<f64>,
    /// Downward rate t²γ(2B)(1 + n).
    pub emission: f64,
    /// Upward rate t²γ(2B)n.
    pub absorption: f64,
    /// Pure-dephasing contribution 2a_z²S(0).
    pub dephasing: f64,
    /// Transverse coupling weight t² = a_x² + a_y².
    pub transverse_weight: f64,
}

impl BathTerms {
    pub fn relaxation_rate(&self) -> f64 {
        self.emission + self.absorption
    }

    /// t²γ(2B), the bath's effective transition rate.
    pub fn transition_rate(&self) -> f64 {
        self.emission - self.absorption
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub point: Vec<f64>,
    pub field: Vector3<f64>,
    /// Columns e_θ, e_φ, n̂ in lab coordinates.
    pub frame: Matrix3<f64>,
    pub drive: Matrix3<f64>,
    pub baths: Vec<BathTerms>,
}

impl Kernel {
    pub fn magnitude(&self) -> f64 {
        self.field.norm()
    }

    pub fn splitting(&self) -> f64 {
        2.0 * self.magnitude()
    }

    pub fn dissipator(&self) -> Matrix3<f64> {
        self.baths.iter().map(|b| b.matrix).sum()
    }

    /// E + Σ M_α.
    pub fn generator(&self) -> Matrix3<f64> {
        self.drive + self.dissipator()
    }

    pub fn inhomogeneity(&self) -> Vector3<f64> {
        self.baths.iter().map(|b| b.inhomogeneity).sum()
    }

    pub fn to_lab(&self, r: &Vector3<f64>) -> Vector3<f64> {
        self.frame * r
    }

    pub fn to_frame(&self, r: &Vector3<f64>) -> Vector3<f64> {
        self.frame.transpose() * r
    }

    /// Solves (E + ΣM) x = rhs, refusing ill-conditioned generators.
    pub fn solve(&self, rhs: &Vector3<f64>) -> Result<Vector3<f64>> {
        let g = self.generator();
        let sv = g.singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        if !(lo > 0.0) || hi / lo > MAX_CONDITION {
            return Err(Error::SingularKernel(format!(
                "condition number {:e} at X = {:?}",
                hi / lo,
                self.point
            )));
        }
        g.lu()
            .solve(rhs)
            .ok_or_else(|| Error::SingularKernel(format!("LU failed at X = {:?}", self.point)))
    }
}

fn bath_terms(bath: &BathSpec, frame: &Matrix3<f64>, b: f64) -> Result<BathTerms> {
    let a = match bath.coupling {
        Coupling::Axis(g) => frame.transpose() * g,
        Coupling::Transverse => Vector3::x(),
    };
    let t2 = a.x * a.x + a.y * a.y;
    let az2 = a.z * a.z;
    let energy = 2.0 * b;
    let gamma = spectral_rate(bath, energy)?;
    let n = bose_einstein(energy, bath.temperature)?;
    let emission = t2 * gamma * (1.0 + n);
    let absorption = t2 * gamma * n;
    let dephasing = if az2 > 0.0 {
        let s0 = zero_frequency_rate(bath);
        if !s0.is_finite() {
            return Err(Error::InvalidInput(format!(
                "pure dephasing diverges for sub-Ohmic bath '{}' with longitudinal coupling",
                bath.label
            )));
        }
        2.0 * az2 * s0
    } else {
        0.0
    };
    let g1 = emission + absorption;
    let g2 = 0.5 * g1 + dephasing;
    Ok(BathTerms {
        matrix: Matrix3::from_diagonal(&Vector3::new(-g2, -g2, -g1)),
        inhomogeneity: Vector3::new(0.0, 0.0, -(emission - absorption)),
        emission,
        absorption,
        dephasing,
        transverse_weight: t2,
    })
}

/// Assembles the kernel at control point `x`.
pub fn build_kernel(map: &FieldMap, baths: &[BathSpec], x: &[f64]) -> Result<Kernel> {
    let field = map.checked_field(x)?;
    let b = field.norm();
    let frame = field_frame(&(field / b));
    let w = 2.0 * b;
    let drive = Matrix3::new(0.0, w, 0.0, -w, 0.0, 0.0, 0.0, 0.0, 0.0);
    let baths = baths
        .iter()
        .map(|bath| bath_terms(bath, &frame, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(Kernel {
        point: x.to_vec(),
        field,
        frame,
        drive,
        baths,
    })
}

/// Fixed point of the frozen Bloch equation, in frame components.
pub fn frozen_steady_state(kernel: &Kernel) -> Result<Vector3<f64>> {
    if kernel.baths.iter().all(|b| b.relaxation_rate() == 0.0) {
        return Err(Error::SingularKernel("no bath exchanges energy with the qubit".into()));
    }
    kernel.solve(&kernel.inhomogeneity())
}

/// Frozen state in lab coordinates.
pub fn frozen_lab_state(map: &FieldMap, baths: &[BathSpec], x: &[f64]) -> Result<Vector3<f64>> {
    let k = build_kernel(map, baths, x)?;
    Ok(k.to_lab(&frozen_steady_state(&k)?))
}

/// Relative stencil size: the field changes by about this fraction per step.
pub const JACOBIAN_STEP: f64 = 1e-3;

/// Step for control `l` chosen so the field moves by a fixed fraction of |B|.
pub(crate) fn control_step(map: &FieldMap, x: &[f64], l: usize) -> f64 {
    let (b, db) = map.eval(x);
    let rate = db[l].norm();
    if rate > 0.0 {
        JACOBIAN_STEP * b.norm() / rate
    } else {
        JACOBIAN_STEP
    }
}

/// Five-point central difference of a vector function along control `l`.
pub(crate) fn central_difference<F>(x: &[f64], l: usize, h: f64, mut f: F) -> Result<Vector3<f64>>
where
    F: FnMut(&[f64]) -> Result<Vector3<f64>>,
{
    let mut p = x.to_vec();
    let mut at = |d: f64| {
        p[l] = x[l] + d;
        f(&p)
    };
    let f2 = at(2.0 * h)?;
    let f1 = at(h)?;
    let m1 = at(-h)?;
    let m2 = at(-2.0 * h)?;
    Ok((8.0 * (f1 - m1) - (f2 - m2)) / (12.0 * h))
}

/// ∂ρ^(f)/∂X_ℓ as frame components (3 × N).
///
/// The lab-frame frozen vector is differentiated and then projected on the frame at `x`,
/// so the result contains both the population and the basis-rotation contributions and
/// does not depend on the gauge of the frame.
pub fn frozen_jacobian(map: &FieldMap, baths: &[BathSpec], x: &[f64]) -> Result<DMatrix<f64>> {
    let n = map.dim();
    let kernel = build_kernel(map, baths, x)?;
    let mut jac = DMatrix::zeros(3, n);
    for l in 0..n {
        let h = control_step(map, x, l);
        let d = central_difference(x, l, h, |p| frozen_lab_state(map, baths, p))?;
        jac.set_column(l, &kernel.to_frame(&d));
    }
    Ok(jac)
}

/// Solves (E + ΣM) ρ^(a) = Σ_ℓ ∂_ℓρ^(f) Ẋ_ℓ.
pub fn adiabatic_correction(
    kernel: &Kernel,
    jacobian: &DMatrix<f64>,
    velocity: &[f64],
) -> Result<Vector3<f64>> {
    if velocity.len() != jacobian.ncols() {
        return Err(Error::InvalidInput(format!(
            "velocity has {} components, Jacobian {}",
            velocity.len(),
            jacobian.ncols()
        )));
    }
    let mut rhs = Vector3::zeros();
    for (l, v) in velocity.iter().enumerate() {
        rhs += jacobian.fixed_view::<3, 1>(0, l) * *v;
    }
    if rhs == Vector3::zeros() {
        return Ok(rhs);
    }
    kernel.solve(&rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatePart {
    /// A full density matrix: the inhomogeneous term is included.
    Frozen,
    /// A traceless correction: only the linear part acts.
    Adiabatic,
}

/// Energy flux into each bath (positive when energy enters the bath).
pub fn energy_current(kernel: &Kernel, r: &Vector3<f64>, part: StatePart) -> Vec<f64> {
    let b = kernel.magnitude();
    kernel
        .baths
        .iter()
        .map(|t| {
            let lin = (t.matrix * r).z;
            match part {
                StatePart::Frozen => b * (lin - t.inhomogeneity.z),
                StatePart::Adiabatic => b * lin,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurrentSample {
    pub time: f64,
    /// Energy flux into each bath.
    pub bath_currents: Vec<f64>,
    /// Σ_ℓ ⟨F_ℓ⟩_frozen Ẋ_ℓ (NaN when no bath exchanges energy).
    pub power_conservative: f64,
    /// Σ_ℓ (⟨F_ℓ⟩ − ⟨F_ℓ⟩_frozen) Ẋ_ℓ.
    pub power_nonconservative: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct FullOptions {
    pub ode: OdeOptions,
    pub max_cycles: usize,
    /// Periodicity threshold on the cycle-to-cycle state distance.
    pub cycle_tol: f64,
    /// Uniform s-samples recorded in the final cycle.
    pub samples: usize,
}

impl Default for FullOptions {
    fn default() -> Self {
        Self {
            ode: OdeOptions::default(),
            max_cycles: 1000,
            cycle_tol: 1e-10,
            samples: 201,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Curve parameter of each sample.
    pub s: Vec<f64>,
    /// Lab-frame Bloch vectors.
    pub states: Vec<Vector3<f64>>,
    pub currents: Vec<CurrentSample>,
    /// Cycles integrated (1 for open protocols).
    pub cycles: usize,
}

/// Lab-frame right-hand side ṙ at control point `x`.
pub fn lab_rhs(map: &FieldMap, baths: &[BathSpec], x: &[f64], r: &Vector3<f64>) -> Result<Vector3<f64>> {
    let k = build_kernel(map, baths, x)?;
    let rf = k.to_frame(r);
    Ok(k.to_lab(&(k.generator() * rf - k.inhomogeneity())))
}

fn one_pass(
    map: &FieldMap,
    baths: &[BathSpec],
    protocol: &Protocol,
    r0: Vector3<f64>,
    outputs: &[f64],
    opts: &OdeOptions,
) -> Result<(Vector3<f64>, Vec<Vector3<f64>>)> {
    let tau = protocol.duration();
    let mut failure = None;
    let rhs = |s: f64, r: &Vector3<f64>| {
        let x = protocol.point(s);
        match lab_rhs(map, baths, &x, r) {
            Ok(v) => v * (tau * protocol.speed(s)),
            Err(e) => {
                failure.get_or_insert(e);
                Vector3::repeat(f64::NAN)
            }
        }
    };
    let mut o = *opts;
    o.max_step = o.max_step.min(0.05);
    let out = dopri5(rhs, 0.0, 1.0, r0, outputs, o);
    if let Some(e) = failure {
        return Err(e);
    }
    out
}

/// Direct integration of the time-dependent Bloch equation along `protocol`.
///
/// Closed protocols are repeated until the state returns to itself within
/// `cycle_tol`; the recorded samples belong to the last cycle.
pub fn integrate_full(
    map: &FieldMap,
    baths: &[BathSpec],
    protocol: &Protocol,
    r0: Vector3<f64>,
    opts: FullOptions,
) -> Result<Trajectory> {
    let m = opts.samples.max(2);
    let s_out: Vec<f64> = (0..m).map(|k| k as f64 / (m - 1) as f64).collect();
    let mut start = r0;
    let mut cycles = 0;
    let states = loop {
        cycles += 1;
        let (end, states) = one_pass(map, baths, protocol, start, &s_out, &opts.ode)?;
        if !protocol.is_closed() || (end - start).norm() < opts.cycle_tol {
            break states;
        }
        if cycles >= opts.max_cycles {
            return Err(Error::NoConvergence(format!(
                "no periodic state after {cycles} cycles (distance {:e})",
                (end - start).norm()
            )));
        }
        start = end;
    };
    let currents = s_out
        .iter()
        .zip(&states)
        .map(|(&s, r)| current_sample(map, baths, protocol, s, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        s: s_out,
        states,
        currents,
        cycles,
    })
}

fn current_sample(
    map: &FieldMap,
    baths: &[BathSpec],
    protocol: &Protocol,
    s: f64,
    r_lab: &Vector3<f64>,
) -> Result<CurrentSample> {
    let x = protocol.point(s);
    let v = protocol.velocity(s);
    let k = build_kernel(map, baths, &x)?;
    let r = k.to_frame(r_lab);
    // Without energy exchange there is no frozen reference and the split is undefined.
    let rf = frozen_steady_state(&k)
        .ok()
        .unwrap_or_else(|| Vector3::repeat(f64::NAN));
    let (_, df) = map.eval(&x);
    let mut cons = 0.0;
    let mut noncons = 0.0;
    for (l, vl) in v.iter().enumerate() {
        let f = k.to_frame(&df[l]);
        cons += f.dot(&rf) * vl;
        noncons += f.dot(&(r - rf)) * vl;
    }
    Ok(CurrentSample {
        time: protocol.time_at(s),
        bath_currents: energy_current(&k, &r, StatePart::Frozen),
        power_conservative: cons,
        power_nonconservative: noncons,
    })
}
