//! Field maps, bath spectra and Bloch-vector states.
//!
//! Units: ħ = k_B = 1. The qubit Hamiltonian is H = −B(X)·σ, so the ground
//! state is aligned with n̂ = B/|B| and the level splitting is 2|B|.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default |B| below which a field is treated as degenerate.
pub const DEGENERATE_FIELD: f64 = 1e-10;

/// Bose-Einstein occupation 1/(e^{ε/T} − 1).
pub fn bose_einstein(energy: f64, temperature: f64) -> Result<f64> {
    if !(energy > 0.0) {
        return Err(Error::DegenerateEnergy(format!(
            "occupation diverges at energy {energy}"
        )));
    }
    if !(temperature >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "temperature must be non-negative, got {temperature}"
        )));
    }
    Ok(1.0 / (energy / temperature).exp_m1())
}

/// ε·n(ε, T), continuous through ε = 0 where it tends to T.
pub fn energy_weighted_occupation(energy: f64, temperature: f64) -> f64 {
    if energy == 0.0 {
        return temperature;
    }
    energy / (energy / temperature).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spectrum {
    /// γ₀ ε^s e^{−ε/ε_C}; `cutoff` may be infinite.
    PowerLaw {
        strength: f64,
        exponent: f64,
        cutoff: f64,
    },
    /// 2αεΩ² / [(Ω² − ε²)² + (2γε)²], a bath filtered through a resonator.
    Lorentzian { alpha: f64, omega: f64, width: f64 },
}

impl Spectrum {
    pub fn ohmic(strength: f64, cutoff: f64) -> Self {
        Spectrum::PowerLaw {
            strength,
            exponent: 1.0,
            cutoff,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Spectrum::PowerLaw {
                strength,
                exponent,
                cutoff,
            } => strength >= 0.0 && exponent > 0.0 && cutoff > 0.0,
            Spectrum::Lorentzian {
                alpha,
                omega,
                width,
            } => alpha >= 0.0 && omega > 0.0 && width > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid spectrum {self:?}")))
        }
    }
}

/// How a bath couples to the qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// Fixed lab-frame Pauli direction ĝ in H_cont = ĝ·σ ⊗ bath operator.
    Axis(Vector3<f64>),
    /// Always perpendicular to the instantaneous field (pure σ^± exchange).
    Transverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    pub label: String,
    pub coupling: Coupling,
    pub spectrum: Spectrum,
    pub temperature: f64,
}

impl BathSpec {
    /// Builds a bath, normalizing the coupling axis.
    pub fn new(
        label: impl Into<String>,
        coupling: Coupling,
        spectrum: Spectrum,
        temperature: f64,
    ) -> Result<Self> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::InvalidInput(format!(
                "bath temperature must be positive, got {temperature}"
            )));
        }
        spectrum.validate()?;
        let coupling = match coupling {
            Coupling::Axis(g) => {
                let norm = g.norm();
                if !(norm > 0.0) || !norm.is_finite() {
                    return Err(Error::InvalidInput("coupling axis must be nonzero".into()));
                }
                Coupling::Axis(g / norm)
            }
            Coupling::Transverse => Coupling::Transverse,
        };
        Ok(Self {
            label: label.into(),
            coupling,
            spectrum,
            temperature,
        })
    }

    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        Self::new(
            self.label.clone(),
            self.coupling,
            self.spectrum,
            temperature,
        )
    }
}

/// Spectral rate γ(ε) of a bath.
pub fn spectral_rate(bath: &BathSpec, energy: f64) -> Result<f64> {
    if !(energy >= 0.0) {
        return Err(Error::DegenerateEnergy(format!(
            "spectral rate undefined at energy {energy}"
        )));
    }
    Ok(match bath.spectrum {
        Spectrum::PowerLaw {
            strength,
            exponent,
            cutoff,
        } => {
            if energy == 0.0 {
                0.0
            } else {
                strength * energy.powf(exponent) * (-energy / cutoff).exp()
            }
        }
        Spectrum::Lorentzian {
            alpha,
            omega,
            width,
        } => {
            let w2 = omega * omega;
            2.0 * alpha * energy * w2
                / ((w2 - energy * energy).powi(2) + (2.0 * width * energy).powi(2))
        }
    })
}

/// lim_{ε→0} γ(ε)(1 + n(ε)), the pure-dephasing rate per unit longitudinal coupling.
pub fn zero_frequency_rate(bath: &BathSpec) -> f64 {
    let t = bath.temperature;
    match bath.spectrum {
        Spectrum::PowerLaw {
            strength, exponent, ..
        } => {
            if exponent == 1.0 {
                strength * t
            } else if exponent > 1.0 {
                0.0
            } else {
                f64::INFINITY
            }
        }
        Spectrum::Lorentzian { alpha, omega, .. } => 2.0 * alpha * t / (omega * omega),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapKind {
    /// X = (B, θ, φ), B(X) = B (sinθ cosφ, sinθ sinφ, cosθ).
    Spherical,
    /// X = (B_x, B_z), B(X) = (B_x, 0, B_z).
    PlanarXz,
    /// X = (X₁, X₂), B(X) = (B₀/2)(sin X₁, sin X₂, 2 + δ − cos X₁ − cos X₂).
    SyntheticLattice { b0: f64, delta: f64 },
    Custom,
}

type CustomField = dyn Fn(&[f64]) -> (Vector3<f64>, Vec<Vector3<f64>>) + Send + Sync;

/// Control-to-field map X ↦ B(X) with analytic Jacobian.
#[derive(Clone)]
pub struct FieldMap {
    kind: MapKind,
    dim: usize,
    custom: Option<Arc<CustomField>>,
    pub degenerate_threshold: f64,
}

impl fmt::Debug for FieldMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldMap")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .field("degenerate_threshold", &self.degenerate_threshold)
            .finish()
    }
}

impl FieldMap {
    fn with_kind(kind: MapKind, dim: usize) -> Self {
        Self {
            kind,
            dim,
            custom: None,
            degenerate_threshold: DEGENERATE_FIELD,
        }
    }

    pub fn spherical() -> Self {
        Self::with_kind(MapKind::Spherical, 3)
    }

    pub fn planar_xz() -> Self {
        Self::with_kind(MapKind::PlanarXz, 2)
    }

    pub fn synthetic_lattice(b0: f64, delta: f64) -> Self {
        Self::with_kind(MapKind::SyntheticLattice { b0, delta }, 2)
    }

    /// Wraps a closure returning the field and its partial derivatives.
    pub fn custom<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> (Vector3<f64>, Vec<Vector3<f64>>) + Send + Sync + 'static,
    {
        Self {
            kind: MapKind::Custom,
            dim,
            custom: Some(Arc::new(f)),
            degenerate_threshold: DEGENERATE_FIELD,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.degenerate_threshold = threshold;
        self
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Field and ∂B/∂X_ℓ for every control.
    pub fn eval(&self, x: &[f64]) -> (Vector3<f64>, Vec<Vector3<f64>>) {
        debug_assert_eq!(x.len(), self.dim);
        match self.kind {
            MapKind::Spherical => {
                let (b, th, ph) = (x[0], x[1], x[2]);
                let (st, ct) = th.sin_cos();
                let (sp, cp) = ph.sin_cos();
                let n = Vector3::new(st * cp, st * sp, ct);
                let e_th = Vector3::new(ct * cp, ct * sp, -st);
                let d_ph = Vector3::new(-st * sp, st * cp, 0.0);
                (b * n, vec![n, b * e_th, b * d_ph])
            }
            MapKind::PlanarXz => (
                Vector3::new(x[0], 0.0, x[1]),
                vec![Vector3::x(), Vector3::z()],
            ),
            MapKind::SyntheticLattice { b0, delta } => {
                let h = 0.5 * b0;
                let (s1, c1) = x[0].sin_cos();
                let (s2, c2) = x[1].sin_cos();
                (
                    h * Vector3::new(s1, s2, 2.0 + delta - c1 - c2),
                    vec![h * Vector3::new(c1, 0.0, s1), h * Vector3::new(0.0, c2, s2)],
                )
            }
            MapKind::Custom => (self.custom.as_ref().expect("custom closure"))(x),
        }
    }

    pub fn field(&self, x: &[f64]) -> Vector3<f64> {
        self.eval(x).0
    }

    /// Checked field: fails with `DegenerateField` below the threshold.
    pub fn checked_field(&self, x: &[f64]) -> Result<Vector3<f64>> {
        let b = self.field(x);
        let m = b.norm();
        if !(m >= self.degenerate_threshold) {
            return Err(Error::DegenerateField {
                magnitude: m,
                point: x.to_vec(),
            });
        }
        Ok(b)
    }
}

/// Polar decomposition of the field at a control point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polar {
    pub magnitude: f64,
    pub theta: f64,
    pub phi: f64,
    pub direction: Vector3<f64>,
}

/// |B|, angles and n̂ at `x`. The planar map reports a signed θ = atan2(B_x, B_z)
/// in (−π, π] with φ = 0; other maps use spherical angles.
pub fn field_polar(map: &FieldMap, x: &[f64]) -> Result<Polar> {
    let b = map.checked_field(x)?;
    let magnitude = b.norm();
    let n = b / magnitude;
    let (theta, phi) = match map.kind {
        MapKind::PlanarXz => (n.x.atan2(n.z), 0.0),
        _ => (n.z.clamp(-1.0, 1.0).acos(), n.y.atan2(n.x)),
    };
    Ok(Polar {
        magnitude,
        theta,
        phi,
        direction: n,
    })
}

/// Orthonormal frame [e_θ, e_φ, n̂] (columns) attached to the field direction.
pub fn field_frame(n: &Vector3<f64>) -> Matrix3<f64> {
    let theta = n.z.clamp(-1.0, 1.0).acos();
    let phi = n.y.atan2(n.x);
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let e_th = Vector3::new(ct * cp, ct * sp, -st);
    let e_ph = Vector3::new(-sp, cp, 0.0);
    Matrix3::from_columns(&[e_th, e_ph, *n])
}

/// Frozen and first-order adiabatic Bloch vectors, ρ = (1 + r·σ)/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub frozen: Vector3<f64>,
    pub adiabatic: Vector3<f64>,
}

impl BlochState {
    pub fn total(&self) -> Vector3<f64> {
        self.frozen + self.adiabatic
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.frozen.norm() <= 1.0 + tol
    }

    /// Density matrix of the frozen part, optionally including the adiabatic correction.
    pub fn density_matrix(&self, with_adiabatic: bool) -> Matrix2<Complex64> {
        let r = if with_adiabatic {
            self.total()
        } else {
            self.frozen
        };
        bloch_to_density(&r)
    }
}

pub fn bloch_to_density(r: &Vector3<f64>) -> Matrix2<Complex64> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    Matrix2::new(
        c(0.5 * (1.0 + r.z), 0.0),
        c(0.5 * r.x, -0.5 * r.y),
        c(0.5 * r.x, 0.5 * r.y),
        c(0.5 * (1.0 - r.z), 0.0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, LN_2};

    #[test]
    fn occupation_examples() {
        assert_relative_eq!(bose_einstein(LN_2, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(bose_einstein(1.0, 0.0).unwrap(), 0.0);
        assert!(bose_einstein(1.0, 1e-3).unwrap() < 1e-300);
        assert!(matches!(
            bose_einstein(0.0, 1.0),
            Err(Error::DegenerateEnergy(_))
        ));
        // Reference from a 50-digit evaluation of 1/(e^{0.3} − 1).
        let reference = 2.858_295_913_510_082_6;
        assert_relative_eq!(bose_einstein(0.3, 1.0).unwrap(), reference, max_relative = 1e-15);
    }

    #[test]
    fn rate_examples() {
        let bath = BathSpec::new("b", Coupling::Transverse, Spectrum::ohmic(1.0, 10.0), 1.0).unwrap();
        assert_eq!(spectral_rate(&bath, 0.0).unwrap(), 0.0);
        assert_relative_eq!(spectral_rate(&bath, 1.0).unwrap(), (-0.1f64).exp(), epsilon = 1e-15);
        assert!(spectral_rate(&bath, -1.0).is_err());
    }

    #[test]
    fn lorentzian_peak_near_resonance() {
        let bath = BathSpec::new(
            "res",
            Coupling::Transverse,
            Spectrum::Lorentzian {
                alpha: 0.1,
                omega: 2.0,
                width: 0.01,
            },
            1.0,
        )
        .unwrap();
        let (mut best, mut arg) = (0.0, 0.0);
        for k in 1..40000 {
            let e = k as f64 * 1e-4;
            let v = spectral_rate(&bath, e).unwrap();
            if v > best {
                best = v;
                arg = e;
            }
        }
        assert!((arg - 2.0).abs() < 1e-3, "peak at {arg}");
    }

    #[test]
    fn polar_examples() {
        let planar = FieldMap::planar_xz();
        let p = field_polar(&planar, &[0.0, 1.0]).unwrap();
        assert_eq!((p.magnitude, p.theta), (1.0, 0.0));
        let p = field_polar(&planar, &[1.0, 0.0]).unwrap();
        assert_relative_eq!(p.theta, FRAC_PI_2);
        let p = field_polar(&planar, &[-1.0, -1e-17]).unwrap();
        assert!(p.theta < 0.0 && p.theta > -std::f64::consts::PI);
        let dirac = FieldMap::synthetic_lattice(1.0, 0.0);
        assert!(matches!(
            field_polar(&dirac, &[0.0, 0.0]),
            Err(Error::DegenerateField { .. })
        ));
    }

    #[test]
    fn frame_is_right_handed() {
        for n in [
            Vector3::new(0.3, -0.4, 0.5).normalize(),
            Vector3::z(),
            -Vector3::z(),
            Vector3::x(),
        ] {
            let r = field_frame(&n);
            assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-14);
            assert_relative_eq!((r.transpose() * r - Matrix3::identity()).norm(), 0.0, epsilon = 1e-14);
            assert_relative_eq!((r.column(2) - n).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn density_matrix_has_unit_trace() {
        let s = BlochState {
            frozen: Vector3::new(0.1, 0.2, 0.3),
            adiabatic: Vector3::new(0.01, 0.0, -0.02),
        };
        let rho = s.density_matrix(true);
        assert_relative_eq!(rho.trace().re, 1.0);
        assert_relative_eq!(rho[(0, 1)].re, 0.055);
        assert!(s.is_physical(0.0));
    }
}
