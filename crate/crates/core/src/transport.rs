//! Steady-state heat transport through a static qubit between two baths.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::BIAS_NONLINEARITY;
use crate::meq::{build_kernel, energy_current, frozen_steady_state, StatePart};
use crate::model::{energy_weighted_occupation, BathSpec, FieldMap};
use crate::numeric::quad::{self, QuadOptions};
use crate::table::Table;

/// Relative temperature step of the conductance difference quotient.
pub const CONDUCTANCE_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportPoint {
    /// Mean temperature (T_l + T_r)/2.
    pub temperature: f64,
    /// T_l − T_r.
    pub bias: f64,
    /// Energy flux into the left bath.
    pub current_left: f64,
    /// Energy flux into the right bath.
    pub current_right: f64,
}

impl TransportPoint {
    /// |J_l + J_r| relative to the larger current.
    pub fn conservation_residual(&self) -> f64 {
        let scale = self.current_left.abs().max(self.current_right.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.current_left + self.current_right).abs() / scale
        }
    }
}

/// Steady currents with each bath at its own temperature.
pub fn steady_current(map: &FieldMap, x: &[f64], left: &BathSpec, right: &BathSpec) -> Result<TransportPoint> {
    let (p, _) = steady_with_scale(map, x, left, right)?;
    Ok(p)
}

/// Steady point and the magnitude B·ΣΓ₁ of the terms that cancel in each current.
fn steady_with_scale(map: &FieldMap, x: &[f64], left: &BathSpec, right: &BathSpec) -> Result<(TransportPoint, f64)> {
    let k = build_kernel(map, &[left.clone(), right.clone()], x)?;
    let r = frozen_steady_state(&k)?;
    let j = energy_current(&k, &r, StatePart::Frozen);
    let scale = k.magnitude() * k.baths.iter().map(|b| b.relaxation_rate()).sum::<f64>();
    Ok((
        TransportPoint {
            temperature: 0.5 * (left.temperature + right.temperature),
            bias: left.temperature - right.temperature,
            current_left: j[0],
            current_right: j[1],
        },
        scale,
    ))
}

/// Baths at T_l = T + ΔT/2 and T_r = T − ΔT/2.
pub fn biased_pair(baths: &[BathSpec; 2], temperature: f64, bias: f64) -> Result<[BathSpec; 2]> {
    if !(temperature > 0.0) || !(bias.abs() < 2.0 * temperature) {
        return Err(Error::InvalidBias {
            t_hot: temperature + 0.5 * bias.abs(),
            t_cold: temperature - 0.5 * bias.abs(),
        });
    }
    Ok([
        baths[0].with_temperature(temperature + 0.5 * bias)?,
        baths[1].with_temperature(temperature - 0.5 * bias)?,
    ])
}

/// Steady point at mean temperature T and bias ΔT = T_l − T_r.
pub fn biased_current(map: &FieldMap, x: &[f64], baths: &[BathSpec; 2], temperature: f64, bias: f64) -> Result<TransportPoint> {
    let [l, r] = biased_pair(baths, temperature, bias)?;
    steady_current(map, x, &l, &r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conductance {
    /// dJ_r/dΔT at ΔT = 0.
    pub g_th: f64,
    /// π²T/3.
    pub g_quantum: f64,
    pub ratio: f64,
}

/// Quadratic residuals below this multiple of the current scale are roundoff.
const BIAS_NOISE: f64 = 1e-12;

/// Linear thermal conductance by a symmetric difference with δ = 10⁻⁴T.
pub fn thermal_conductance(map: &FieldMap, x: &[f64], baths: &[BathSpec; 2], temperature: f64) -> Result<Conductance> {
    let d = CONDUCTANCE_STEP * temperature;
    let at = |bias: f64| -> Result<(f64, f64)> {
        let [l, r] = biased_pair(baths, temperature, bias)?;
        let (p, scale) = steady_with_scale(map, x, &l, &r)?;
        Ok((p.current_right, scale))
    };
    let (j0, scale) = at(0.0)?;
    let (jp, _) = at(d)?;
    let (jm, _) = at(-d)?;
    let linear = 0.5 * (jp - jm).abs();
    let quadratic = 0.5 * (jp + jm - 2.0 * j0).abs();
    if quadratic > BIAS_NONLINEARITY * linear && quadratic > BIAS_NOISE * scale {
        return Err(Error::BiasNonlinearity {
            ratio: quadratic / linear,
        });
    }
    let g_th = (jp - jm) / (2.0 * d);
    let g_quantum = PI * PI * temperature / 3.0;
    Ok(Conductance {
        g_th,
        g_quantum,
        ratio: g_th / g_quantum,
    })
}

/// R = [J(ΔT) + J(−ΔT)]/[J(ΔT) − J(−ΔT)] with J the flux into the right bath.
pub fn rectification(map: &FieldMap, x: &[f64], baths: &[BathSpec; 2], temperature: f64, bias: f64) -> Result<f64> {
    let forward = biased_current(map, x, baths, temperature, bias)?.current_right;
    let backward = biased_current(map, x, baths, temperature, -bias)?.current_right;
    let den = forward - backward;
    let scale = forward.abs().max(backward.abs());
    if !(den.abs() > 1e-14 * scale) || den == 0.0 {
        return Err(Error::ZeroCurrent);
    }
    Ok((forward + backward) / den)
}

/// λ = (Γ_l − Γ_r)/(Γ_l + Γ_r) from the bare transition rates t²γ(2B).
pub fn coupling_asymmetry(map: &FieldMap, x: &[f64], baths: &[BathSpec; 2]) -> Result<f64> {
    let k = build_kernel(map, baths, x)?;
    let (gl, gr) = (k.baths[0].transition_rate(), k.baths[1].transition_rate());
    if gl + gr == 0.0 {
        return Err(Error::ZeroCurrent);
    }
    Ok((gl - gr) / (gl + gr))
}

/// Landauer-Büttiker current ∫₀^∞ ε𝒯(ε)[n_h(ε) − n_c(ε)] dε.
///
/// The integrand stays finite at ε = 0; the range is split at both temperatures
/// and at `breaks`, and cut at 60 T_h or the last break beyond it.
pub fn landauer_current<F>(transmission: F, t_hot: f64, t_cold: f64, breaks: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(t_hot > 0.0 && t_cold > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Landauer temperatures must be positive, got {t_hot}, {t_cold}"
        )));
    }
    let top = t_hot.max(t_cold);
    let upper = breaks.iter().copied().fold(60.0 * top, f64::max) * (1.0 + 1e-12);
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|b| *b > 0.0 && *b < upper).collect();
    cuts.extend([t_hot.min(t_cold), top]);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    quad::integrate(
        |e| {
            let w = energy_weighted_occupation(e, t_hot) - energy_weighted_occupation(e, t_cold);
            Ok(transmission(e) * w)
        },
        0.0,
        upper,
        &cuts,
        QuadOptions {
            rel_tol: 1e-11,
            abs_tol: 1e-300,
            max_intervals: 4000,
        },
    )
}

/// Columns (T, ΔT, J_l, J_r, G_th, R) for each (T, ΔT); R is NaN at ΔT = 0.
pub fn transport_sweep(map: &FieldMap, x: &[f64], baths: &[BathSpec; 2], points: &[(f64, f64)]) -> Result<Table> {
    let rows = points
        .par_iter()
        .map(|&(t, dt)| -> Result<Vec<f64>> {
            let p = biased_current(map, x, baths, t, dt)?;
            let g = thermal_conductance(map, x, baths, t)?;
            let r = if dt == 0.0 {
                f64::NAN
            } else {
                rectification(map, x, baths, t, dt)?
            };
            Ok(vec![t, dt, p.current_left, p.current_right, g.g_th, r])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(["T", "dT", "J_l", "J_r", "G_th", "R"]);
    for r in rows {
        table.push(r);
    }
    Ok(table)
}
