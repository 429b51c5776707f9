//! Dormand-Prince 5(4) integrator with dense output.

use nalgebra::SVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial step; zero picks one from the interval length.
    pub first_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            first_step: 0.0,
            max_step: f64::INFINITY,
            max_steps: 10_000_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates `y' = f(t, y)` from `t0` to `t1` and returns the final state
/// together with dense-output samples at the sorted times `outputs`.
pub fn dopri5<const D: usize, F>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: SVector<f64, D>,
    outputs: &[f64],
    opts: OdeOptions,
) -> Result<(SVector<f64, D>, Vec<SVector<f64, D>>)>
where
    F: FnMut(f64, &SVector<f64, D>) -> SVector<f64, D>,
{
    let mut samples = Vec::with_capacity(outputs.len());
    let mut next_out = 0;
    while next_out < outputs.len() && outputs[next_out] <= t0 {
        samples.push(y0);
        next_out += 1;
    }
    let span = t1 - t0;
    if span <= 0.0 {
        while next_out < outputs.len() {
            samples.push(y0);
            next_out += 1;
        }
        return Ok((y0, samples));
    }
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = if opts.first_step > 0.0 {
        opts.first_step
    } else {
        let scale = y.abs().map(|v| opts.abs_tol + opts.rel_tol * v);
        let d0 = y.component_div(&scale).norm() / (D as f64).sqrt();
        let d1 = k1.component_div(&scale).norm() / (D as f64).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(span)
    };
    h = h.min(opts.max_step);
    let mut steps = 0usize;
    let mut fac_old = 1e-4f64;
    while t < t1 {
        if steps >= opts.max_steps {
            return Err(Error::NoConvergence(format!(
                "step limit {} reached at t = {t}",
                opts.max_steps
            )));
        }
        steps += 1;
        let last = t + h >= t1 - 1e-14 * t1.abs().max(1.0);
        if last {
            h = t1 - t;
        }
        let k2 = f(t + C2 * h, &(y + k1 * (h * A21)));
        let k3 = f(t + C3 * h, &(y + (k1 * A31 + k2 * A32) * h));
        let k4 = f(t + C4 * h, &(y + (k1 * A41 + k2 * A42 + k3 * A43) * h));
        let k5 = f(
            t + C5 * h,
            &(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h),
        );
        let k6 = f(
            t + h,
            &(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h),
        );
        let y_new = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
        let k7 = f(t + h, &y_new);
        let err_vec = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
        let mut err = 0.0;
        for i in 0..D {
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
            err += (err_vec[i] / sc).powi(2);
        }
        let err = (err / D as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::NoConvergence(format!("non-finite state at t = {t}")));
        }
        if err <= 1.0 {
            let t_new = if last { t1 } else { t + h };
            if next_out < outputs.len() && outputs[next_out] <= t_new {
                let ydiff = y_new - y;
                let bspl = k1 * h - ydiff;
                let rc4 = ydiff - k7 * h - bspl;
                let rc5 = (k1 * D1 + k3 * D3 + k4 * D4 + k5 * D5 + k6 * D6 + k7 * D7) * h;
                while next_out < outputs.len() && outputs[next_out] <= t_new {
                    let th = ((outputs[next_out] - t) / h).clamp(0.0, 1.0);
                    let th1 = 1.0 - th;
                    samples.push(y + (ydiff + (bspl + (rc4 + rc5 * th1) * th) * th1) * th);
                    next_out += 1;
                }
            }
            t = t_new;
            y = y_new;
            k1 = k7;
            // PI step-size control (Hairer & Wanner, beta = 0.04).
            let fac = (err.max(1e-10).powf(0.17) / fac_old.powf(0.04) / 0.9).clamp(0.2, 10.0);
            fac_old = err.max(1e-4);
            h = (h / fac).min(opts.max_step);
        } else {
            h /= (err.powf(0.2) / 0.9).min(5.0);
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::NoConvergence(format!("step size underflow at t = {t}")));
        }
    }
    while next_out < outputs.len() {
        samples.push(y);
        next_out += 1;
    }
    Ok((y, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;

    #[test]
    fn harmonic_oscillator() {
        let outs: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
        let (end, samples) = dopri5(
            |_, y: &Vector2<f64>| Vector2::new(y[1], -y[0]),
            0.0,
            10.0,
            Vector2::new(1.0, 0.0),
            &outs,
            OdeOptions {
                rel_tol: 1e-11,
                abs_tol: 1e-13,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((end[0] - 10f64.cos()).abs() < 1e-9);
        for (t, y) in outs.iter().zip(&samples) {
            assert!((y[0] - t.cos()).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn exponential_growth() {
        let (end, _) = dopri5(
            |_, y: &SVector<f64, 1>| *y,
            0.0,
            2.0,
            SVector::<f64, 1>::new(1.0),
            &[],
            OdeOptions::default(),
        )
        .unwrap();
        assert!((end[0] - 2f64.exp()).abs() < 1e-7);
    }
}
