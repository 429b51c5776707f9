//! Cubic interpolating splines (natural or periodic).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplineKind {
    Natural,
    Periodic,
}

/// Scalar cubic spline through `(x_i, y_i)` stored with its second derivatives.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
    cumulative: Vec<f64>,
}

fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Solves a cyclic tridiagonal system via Sherman-Morrison.
fn solve_cyclic(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let alpha = a[0];
    let beta = c[n - 1];
    let gamma = -b[0];
    let mut bb = b.to_vec();
    bb[0] = b[0] - gamma;
    bb[n - 1] = b[n - 1] - alpha * beta / gamma;
    let x = solve_tridiagonal(a, &bb, c, d);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = beta;
    let z = solve_tridiagonal(a, &bb, c, &u);
    let fact = (x[0] + alpha * x[n - 1] / gamma) / (1.0 + z[0] + alpha * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

impl CubicSpline {
    pub fn new(x: &[f64], y: &[f64], kind: SplineKind) -> Result<Self> {
        let n = x.len();
        if n != y.len() || n < 3 {
            return Err(Error::InvalidInput(format!(
                "spline needs >= 3 matching samples, got {} and {}",
                n,
                y.len()
            )));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("spline knots must increase".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let slope: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let m = match kind {
            SplineKind::Natural => {
                let k = n - 2;
                let mut m = vec![0.0; n];
                if k > 0 {
                    let a: Vec<f64> = (0..k).map(|i| if i == 0 { 0.0 } else { h[i] }).collect();
                    let b: Vec<f64> = (0..k).map(|i| 2.0 * (h[i] + h[i + 1])).collect();
                    let c: Vec<f64> = (0..k)
                        .map(|i| if i + 1 == k { 0.0 } else { h[i + 1] })
                        .collect();
                    let d: Vec<f64> = (0..k).map(|i| 6.0 * (slope[i + 1] - slope[i])).collect();
                    let inner = solve_tridiagonal(&a, &b, &c, &d);
                    m[1..n - 1].copy_from_slice(&inner);
                }
                m
            }
            SplineKind::Periodic => {
                if (y[n - 1] - y[0]).abs() > 1e-12 * y[0].abs().max(1.0) {
                    return Err(Error::InvalidInput(
                        "periodic spline needs equal end values".into(),
                    ));
                }
                let k = n - 1;
                let prev = |i: usize| (i + k - 1) % k;
                let a: Vec<f64> = (0..k).map(|i| h[prev(i)]).collect();
                let b: Vec<f64> = (0..k).map(|i| 2.0 * (h[prev(i)] + h[i])).collect();
                let c: Vec<f64> = (0..k).map(|i| h[i]).collect();
                let d: Vec<f64> = (0..k)
                    .map(|i| 6.0 * (slope[i] - slope[prev(i)]))
                    .collect();
                let mut m = if k == 2 {
                    // Two distinct knots: the cyclic system is 2x2 and dense.
                    let (p, q) = (b[0], a[0] + c[0]);
                    let (r, s) = (a[1] + c[1], b[1]);
                    let det = p * s - q * r;
                    vec![(d[0] * s - q * d[1]) / det, (p * d[1] - r * d[0]) / det]
                } else {
                    solve_cyclic(&a, &b, &c, &d)
                };
                m.push(m[0]);
                m
            }
        };
        let mut cumulative = vec![0.0; n];
        for i in 0..n - 1 {
            let seg = 0.5 * h[i] * (y[i] + y[i + 1]) - h[i].powi(3) * (m[i] + m[i + 1]) / 24.0;
            cumulative[i + 1] = cumulative[i] + seg;
        }
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
            cumulative,
        })
    }

    fn locate(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a.powi(3) - a) * self.m[i] + (b.powi(3) - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        (self.y[i + 1] - self.y[i]) / h
            + ((1.0 - 3.0 * a * a) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * h / 6.0
    }

    /// Exact integral of the spline from the first knot to `t`.
    pub fn integral_to(&self, t: f64) -> f64 {
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let u = t - self.x[i];
        let (yi, yj, mi, mj) = (self.y[i], self.y[i + 1], self.m[i], self.m[i + 1]);
        // Antiderivative of the cubic on [x_i, x_i + u].
        let a_int = h / 2.0 * (1.0 - (1.0 - u / h).powi(2));
        let b_int = u * u / (2.0 * h);
        let a3 = h / 4.0 * (1.0 - (1.0 - u / h).powi(4));
        let b3 = u.powi(4) / (4.0 * h.powi(3));
        self.cumulative[i]
            + yi * a_int
            + yj * b_int
            + (mi * (a3 - a_int) + mj * (b3 - b_int)) * h * h / 6.0
    }

    pub fn integral(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn periodic_reproduces_sine() {
        let n = 201;
        let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let y: Vec<f64> = x.iter().map(|t| (TAU * t).sin()).collect();
        let s = CubicSpline::new(&x, &y, SplineKind::Periodic).unwrap();
        for k in 0..97 {
            let t = k as f64 / 96.0;
            assert!((s.eval(t) - (TAU * t).sin()).abs() < 1e-7);
            assert!((s.deriv(t) - TAU * (TAU * t).cos()).abs() < 1e-4);
        }
        assert!(s.integral().abs() < 1e-12);
    }

    #[test]
    fn natural_integral_matches_quadrature() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 / 49.0).powf(1.3)).collect();
        let y: Vec<f64> = x.iter().map(|t| t.exp()).collect();
        let s = CubicSpline::new(&x, &y, SplineKind::Natural).unwrap();
        let q = crate::numeric::quad::integrate(
            |t| Ok(s.eval(t)),
            0.0,
            0.63,
            s.knots(),
            Default::default(),
        )
        .unwrap();
        assert!((s.integral_to(0.63) - q).abs() < 1e-13);
        assert!((s.integral() - (1f64.exp() - 1.0)).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(CubicSpline::new(&[0.0, 0.0, 1.0], &[1.0, 2.0, 3.0], SplineKind::Natural).is_err());
        assert!(CubicSpline::new(&[0.0, 0.5, 1.0], &[1.0, 2.0, 3.0], SplineKind::Periodic).is_err());
    }
}
