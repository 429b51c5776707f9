//! Numerical primitives: quadrature, ODE integration, splines and simplex search.

pub mod ode;
pub mod quad;
pub mod simplex;
pub mod spline;
