//! Shared numerical kernels: special functions, adaptive quadrature, and an
//! embedded Runge-Kutta integrator with dense output.
//!
//! Everything here is deterministic and allocation-light; the domain modules
//! build on these primitives and own the model-specific mathematics.

pub mod quad;
pub mod rk45;
pub mod special;
