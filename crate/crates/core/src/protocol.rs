//! Driving protocols: a curve X(s), s ∈ [0, 1], a speed profile σ(s) and a duration τ.
//!
//! Physical time is t(s) = τ ∫₀^s σ, so the control velocity is Ẋ = X′(s)/(τσ(s)).

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::quad::{self, QuadOptions};
use crate::numeric::spline::{CubicSpline, SplineKind};

type CurveFn = dyn Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync;
type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

#[derive(Clone)]
enum Curve {
    /// Returns (X(s), X′(s)).
    Closure(Arc<CurveFn>),
    Table(Vec<CubicSpline>),
}

#[derive(Clone)]
enum Speed {
    Uniform,
    Table { spline: CubicSpline, norm: f64 },
    Closure { f: Arc<ScalarFn>, norm: f64 },
}

#[derive(Clone)]
pub struct Protocol {
    dim: usize,
    curve: Curve,
    speed: Speed,
    duration: f64,
    closed: bool,
    breaks: Vec<f64>,
}

impl fmt::Debug for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Protocol")
            .field("dim", &self.dim)
            .field("duration", &self.duration)
            .field("closed", &self.closed)
            .field("breaks", &self.breaks)
            .finish_non_exhaustive()
    }
}

/// Tolerance on |X(1) − X(0)| for a closed curve.
pub const CLOSURE_TOL: f64 = 1e-12;

impl Protocol {
    /// Curve from a closure returning the point and its s-derivative.
    pub fn from_closure<F>(dim: usize, closed: bool, f: F) -> Result<Self>
    where
        F: Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync + 'static,
    {
        let p = Self {
            dim,
            curve: Curve::Closure(Arc::new(f)),
            speed: Speed::Uniform,
            duration: 1.0,
            closed,
            breaks: Vec::new(),
        };
        p.check_closure()?;
        Ok(p)
    }

    /// Cubic-spline curve through samples; periodic when `closed`.
    pub fn from_samples(s: &[f64], points: &[Vec<f64>], closed: bool) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidInput("protocol samples need a common dimension".into()));
        }
        if s.first() != Some(&0.0) || s.last() != Some(&1.0) {
            return Err(Error::InvalidInput("protocol samples must span s = 0..1".into()));
        }
        let kind = if closed {
            SplineKind::Periodic
        } else {
            SplineKind::Natural
        };
        let mut comps = Vec::with_capacity(dim);
        for d in 0..dim {
            let y: Vec<f64> = points.iter().map(|p| p[d]).collect();
            if closed && (y[y.len() - 1] - y[0]).abs() > CLOSURE_TOL {
                return Err(Error::OpenProtocol {
                    gap: (y[y.len() - 1] - y[0]).abs(),
                });
            }
            comps.push(CubicSpline::new(s, &y, kind)?);
        }
        Ok(Self {
            dim,
            curve: Curve::Table(comps),
            speed: Speed::Uniform,
            duration: 1.0,
            closed,
            breaks: Vec::new(),
        })
    }

    /// Closed ellipse c + R(ψ)(a cos 2πs, b sin 2πs), counter-clockwise for a, b > 0.
    pub fn ellipse(center: [f64; 2], semi_axes: [f64; 2], rotation: f64) -> Self {
        let (sr, cr) = rotation.sin_cos();
        let [a, b] = semi_axes;
        Self::from_closure(2, true, move |s| {
            let (sn, cs) = (TAU * s).sin_cos();
            let (u, v) = (a * cs, b * sn);
            let (du, dv) = (-TAU * a * sn, TAU * b * cs);
            (
                vec![center[0] + cr * u - sr * v, center[1] + sr * u + cr * v],
                vec![cr * du - sr * dv, sr * du + cr * dv],
            )
        })
        .expect("ellipse closes by construction")
    }

    /// Straight segment from `a` to `b`.
    pub fn segment(a: Vec<f64>, b: Vec<f64>) -> Self {
        let dim = a.len();
        let d: Vec<f64> = b.iter().zip(&a).map(|(y, x)| y - x).collect();
        Self::from_closure(dim, false, move |s| {
            (a.iter().zip(&d).map(|(x, dx)| x + s * dx).collect(), d.clone())
        })
        .expect("open segment")
    }

    /// Closed polygon through `vertices` traversed in order, equal s per edge.
    pub fn polygon(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let k = vertices.len();
        if k < 3 {
            return Err(Error::InvalidInput("polygon needs at least 3 vertices".into()));
        }
        let dim = vertices[0].len();
        let breaks: Vec<f64> = (1..k).map(|i| i as f64 / k as f64).collect();
        let p = Self::from_closure(dim, true, move |s| {
            let u = (s.clamp(0.0, 1.0) * k as f64).min(k as f64 - 1e-15);
            let i = (u.floor() as usize).min(k - 1);
            let w = u - i as f64;
            let a = &vertices[i];
            let b = &vertices[(i + 1) % k];
            let x = a.iter().zip(b).map(|(p, q)| p + w * (q - p)).collect();
            let dx = a.iter().zip(b).map(|(p, q)| k as f64 * (q - p)).collect();
            (x, dx)
        })?;
        Ok(p.with_breaks(breaks))
    }

    fn check_closure(&self) -> Result<()> {
        if self.closed {
            let a = self.point(0.0);
            let b = self.point(1.0);
            let gap = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            if gap > CLOSURE_TOL * a.iter().fold(1.0f64, |m, v| m.max(v.abs())) {
                return Err(Error::OpenProtocol { gap });
            }
        }
        Ok(())
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    /// Parameter values where X′ may be discontinuous.
    pub fn with_breaks(mut self, mut breaks: Vec<f64>) -> Self {
        breaks.retain(|b| *b > 0.0 && *b < 1.0);
        breaks.sort_by(f64::total_cmp);
        self.breaks = breaks;
        self
    }

    /// Replaces the speed profile by a strictly positive function, normalized to unit integral.
    pub fn with_speed_fn<F>(mut self, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mut min = f64::INFINITY;
        for k in 0..=256 {
            min = min.min(f(k as f64 / 256.0));
        }
        if !(min > 0.0) {
            return Err(Error::InvalidInput("speed profile must be positive".into()));
        }
        let norm = quad::integrate(|s| Ok(f(s)), 0.0, 1.0, &self.breaks, QuadOptions::default())?;
        self.speed = Speed::Closure {
            f: Arc::new(f),
            norm,
        };
        Ok(self)
    }

    /// Replaces the speed profile by a spline through positive samples.
    pub fn with_speed_table(mut self, s: &[f64], sigma: &[f64]) -> Result<Self> {
        if sigma.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidInput("speed profile must be positive".into()));
        }
        let kind = if self.closed && (sigma[0] - sigma[sigma.len() - 1]).abs() <= 1e-12 * sigma[0] {
            SplineKind::Periodic
        } else {
            SplineKind::Natural
        };
        let spline = CubicSpline::new(s, sigma, kind)?;
        let norm = spline.integral();
        self.speed = Speed::Table { spline, norm };
        Ok(self)
    }

    pub fn with_uniform_speed(mut self) -> Self {
        self.speed = Speed::Uniform;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn has_uniform_speed(&self) -> bool {
        matches!(self.speed, Speed::Uniform)
    }

    /// X(s) and X′(s).
    pub fn eval(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        match &self.curve {
            Curve::Closure(f) => f(s),
            Curve::Table(c) => (
                c.iter().map(|sp| sp.eval(s)).collect(),
                c.iter().map(|sp| sp.deriv(s)).collect(),
            ),
        }
    }

    pub fn point(&self, s: f64) -> Vec<f64> {
        self.eval(s).0
    }

    pub fn tangent(&self, s: f64) -> Vec<f64> {
        self.eval(s).1
    }

    /// Normalized speed profile σ(s).
    pub fn speed(&self, s: f64) -> f64 {
        match &self.speed {
            Speed::Uniform => 1.0,
            Speed::Table { spline, norm } => spline.eval(s) / norm,
            Speed::Closure { f, norm } => f(s) / norm,
        }
    }

    /// Physical time t(s) = τ ∫₀^s σ.
    pub fn time_at(&self, s: f64) -> f64 {
        let frac = match &self.speed {
            Speed::Uniform => s,
            Speed::Table { spline, norm } => spline.integral_to(s) / norm,
            Speed::Closure { f, norm } => {
                quad::integrate(|u| Ok(f(u)), 0.0, s, &self.breaks, QuadOptions::default())
                    .unwrap_or(f64::NAN)
                    / norm
            }
        };
        self.duration * frac
    }

    /// Control velocity dX/dt at parameter s.
    pub fn velocity(&self, s: f64) -> Vec<f64> {
        let scale = 1.0 / (self.duration * self.speed(s));
        self.tangent(s).into_iter().map(|d| d * scale).collect()
    }

    /// Distance between the end points.
    pub fn closure_gap(&self) -> f64 {
        let a = self.point(0.0);
        let b = self.point(1.0);
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Same curve traversed backwards, s ↦ 1 − s.
    pub fn reversed(&self) -> Self {
        let inner = self.clone();
        let mut out = Self::from_closure(self.dim, self.closed, move |s| {
            let (x, d) = inner.eval(1.0 - s);
            (x, d.into_iter().map(|v| -v).collect())
        })
        .expect("reversal keeps closure")
        .with_duration(self.duration)
        .with_breaks(self.breaks.iter().map(|b| 1.0 - b).collect());
        if !self.has_uniform_speed() {
            let inner = self.clone();
            out = out
                .with_speed_fn(move |s| inner.speed(1.0 - s))
                .expect("positive profile");
        }
        out
    }
}
