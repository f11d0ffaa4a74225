//! Long-time behaviour of a Lotka-Volterra competition system whose
//! environment switches at random between two parameter sets.
//!
//! Two species with densities `x` and `y` follow the competitive
//! Lotka-Volterra flow
//!
//! ```text
//! dx/dt = alpha x (1 - a x - b y)
//! dy/dt = beta  y (1 - c x - d y)
//! ```
//!
//! where the coefficient vector `E = (a, b, c, d, alpha, beta)` is not fixed:
//! a continuous-time Markov chain flips between two environments `E0` and
//! `E1` at rates `lambda0` (leaving 0) and `lambda1` (leaving 1). Both
//! environments individually satisfy `a < c`, `b < d`, so under either flow
//! alone species `y` dies out. Random switching can nevertheless produce
//! four different long-run regimes — extinction of `y`, extinction of `x`,
//! persistence of both, or extinction of a random species — and this crate
//! computes which one occurs, where the regime boundaries lie, and what the
//! invariant measure's support looks like:
//!
//! * [`env`] — environments, mixed environments `E_s`, phase-portrait
//!   classification, the critical intervals `I` and `J`, and the `(s,t)`
//!   vs `(u,v)` parametrizations of the switching rates.
//! * [`invasion`] — closed-form invasion growth rates `Lambda_x`,
//!   `Lambda_y` via Beta-distribution expectations (series and quadrature
//!   evaluation paths, a direct-integral cross-check, and a Monte-Carlo
//!   oracle), plus the Beta convex-order check behind their monotonicity.
//! * [`atlas`] — sign-based regime classification, critical jump-rate
//!   curves `t_y(s)`, `t_x(s)` by bracketed bisection, regime maps over
//!   `(s,t)` grids, and the quasi-convexity check for transported curves.
//! * [`pdmp`] — the piecewise deterministic Markov process itself: exact
//!   switching simulation driven by adaptive Runge-Kutta flow integration,
//!   occupation statistics, and unstable-manifold tracing.
//! * [`support`] — support geometry of the invariant measure: the
//!   collinearity conic `G`, the equilibrium curve, tangency points, and
//!   the candidate support regions `Gamma'` and `C(z)`.
//!
//! The crate is organised examples-first: each major capability has a
//! runnable program under `examples/`, and those are the recommended entry
//! points to the API:
//!
//! ```text
//! cargo run --release --example phase_portraits
//! cargo run --release --example invasion_rates
//! cargo run --release --example critical_curves
//! cargo run --release --example regime_map
//! cargo run --release --example simulate_pdmp
//! cargo run --release --example support_geometry
//! cargo run --release --example convex_order
//! ```
//!
//! A thin command-line binary (`lv-switch`) exposes the same computations
//! for scripted use; see the README or `lv-switch --help`.

pub mod atlas;
pub mod cli;
pub mod env;
pub mod invasion;
pub mod numeric;
pub mod pdmp;
pub mod support;

mod emit;

pub use emit::fmt_g17;

/// A point of the (x, y) phase plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub const ORIGIN: Point = Point::new(0.0, 0.0);

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product, i.e. `det([self, other])`.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(k * self.x, k * self.y)
    }

    pub fn in_closed_quadrant(self) -> bool {
        self.x >= 0.0 && self.y >= 0.0
    }

    pub fn in_open_quadrant(self) -> bool {
        self.x > 0.0 && self.y > 0.0
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::fmt::Display for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}
