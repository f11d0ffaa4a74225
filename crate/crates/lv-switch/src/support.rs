//! Geometry of the invariant measure's support.
//!
//! The two vector fields are collinear exactly on `{x y G(x, y) = 0}`
//! where `G` is a conic; the branch of `{G = 0}` through the quadrant is
//! the closure of the equilibrium curve `s -> zbar(s)` of the mixed
//! environments. On that branch the *tangency set*
//! `T = {G = 0, F_0 . grad G = 0}` collects the points where the common
//! flow direction is tangent to the conic — the candidate corners of the
//! invariant-measure support. This module computes `G`, traces `zbar`,
//! finds `T`, and assembles the two bounded regions of interest: `Gamma'`
//! (between the unstable manifolds `Sigma_1`, `Sigma_0` and the axes) and
//! the Jordan region `C(z)` swept from a tangency point by both flows.

use crate::env::{EnvPair, Environment};
use crate::emit::{json_array, JsonObject};
use crate::fmt_g17;
use crate::pdmp::{
    point_polyline_dist, resample_steps, trace_to_point, unstable_manifold, PdmpError,
    MANIFOLD_MIN_SAMPLES,
};
use crate::Point;
use thiserror::Error;

/// Per-step tolerance for the flow traces that build region boundaries.
const REGION_FLOW_TOL: f64 = 1e-10;

/// Number of points on each straight axis arc (matches the minimum arc
/// resolution of the flow arcs).
const AXIS_ARC_SAMPLES: usize = 512;

/// Distance to the boundary polyline below which a query point counts as
/// inside (resolution of the containment test).
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Both defining residuals of a reported tangency point stay below this.
pub const TANGENCY_RESIDUAL_LIMIT: f64 = 1e-8;

/// Bezout bound for `{conic = 0} ∩ {cubic = 0}`.
pub const TANGENCY_CAP: usize = 6;

const TRACE_S_LO: f64 = -10.0;
const TRACE_S_HI: f64 = 11.0;
const TRACE_STEPS: usize = 2100;
const S_BISECT_TOL: f64 = 1e-12;
const TANGENCY_DEDUPE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SupportError {
    #[error("Gamma' requires I ∩ J to be non-empty; {detail}")]
    PreconditionViolated { detail: &'static str },
    #[error(
        "equilibrium branch could not be traced: only {valid_samples} usable \
         samples on the continuation grid"
    )]
    ContinuationFailure { valid_samples: usize },
    #[error("collinearity conic is identically zero; the pair has everywhere-parallel fields")]
    DegenerateConic,
    #[error("flow of environment {which} did not reach its axis attractor: {source}")]
    NonConvergentTrajectory { which: usize, source: PdmpError },
    #[error("invalid parameter `{name}`: {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error(transparent)]
    Flow(#[from] PdmpError),
}

/// The collinearity conic `G(x,y) = g20 x^2 + g11 x y + g02 y^2 + g10 x +
/// g01 y + g00`, defined by `det(F_0(z), F_1(z)) = x y G(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConicG {
    pub g20: f64,
    pub g11: f64,
    pub g02: f64,
    pub g10: f64,
    pub g01: f64,
    pub g00: f64,
}

impl ConicG {
    /// Expand `alpha0 beta1 (1-a0x-b0y)(1-c1x-d1y) - alpha1 beta0
    /// (1-a1x-b1y)(1-c0x-d0y)` into the six coefficients.
    pub fn from_envs(e0: &Environment, e1: &Environment) -> ConicG {
        let p = e0.alpha * e1.beta;
        let q = e1.alpha * e0.beta;
        ConicG {
            g00: p - q,
            g10: -p * (e0.a + e1.c) + q * (e1.a + e0.c),
            g01: -p * (e0.b + e1.d) + q * (e1.b + e0.d),
            g20: p * e0.a * e1.c - q * e1.a * e0.c,
            g02: p * e0.b * e1.d - q * e1.b * e0.d,
            g11: p * (e0.a * e1.d + e0.b * e1.c) - q * (e1.a * e0.d + e1.b * e0.c),
        }
    }

    pub fn eval(&self, z: Point) -> f64 {
        (self.g20 * z.x + self.g11 * z.y + self.g10) * z.x
            + (self.g02 * z.y + self.g01) * z.y
            + self.g00
    }

    pub fn gradient(&self, z: Point) -> Point {
        Point::new(
            2.0 * self.g20 * z.x + self.g11 * z.y + self.g10,
            2.0 * self.g02 * z.y + self.g11 * z.x + self.g01,
        )
    }

    /// Constant Hessian `[[2 g20, g11], [g11, 2 g02]]`.
    pub fn hessian(&self) -> [[f64; 2]; 2] {
        [[2.0 * self.g20, self.g11], [self.g11, 2.0 * self.g02]]
    }

    /// All six coefficients vanish (identical environments up to scaling).
    pub fn is_degenerate(&self) -> bool {
        let m = self
            .g20
            .abs()
            .max(self.g11.abs())
            .max(self.g02.abs())
            .max(self.g10.abs())
            .max(self.g01.abs())
            .max(self.g00.abs());
        m < 1e-12
    }

    /// Total degree of the polynomial (2 unless the pair is degenerate).
    pub fn total_degree(&self) -> usize {
        let tol = 1e-12;
        if self.g20.abs() > tol || self.g11.abs() > tol || self.g02.abs() > tol {
            2
        } else if self.g10.abs() > tol || self.g01.abs() > tol {
            1
        } else {
            0
        }
    }
}

/// The conic of a validated pair (in its canonical environment order).
pub fn conic_coeffs(pair: &EnvPair) -> ConicG {
    ConicG::from_envs(pair.env(0), pair.env(1))
}

/// The tangency directional derivative `h(z) = F_0(z) . grad G(z)`.
fn tangency_h(pair: &EnvPair, conic: &ConicG, z: Point) -> f64 {
    let f0 = pair.env(0).vector_field(z);
    let g = conic.gradient(z);
    f0.dot(g)
}

/// Interior equilibrium `zbar(s)` of the mixed field `(1-s) F_0 + s F_1`,
/// solved from the raw isocline system `A_s x + B_s y = alpha_s`,
/// `C_s x + D_s y = beta_s`. Written without dividing by `alpha_s` or
/// `beta_s` so the continuation extends to every real `s` (outside `[0,1]`
/// the mixture weights are negative — the formula is the analytic
/// continuation the tangency trace needs). `None` when the isoclines are
/// parallel at this `s`.
fn zbar(pair: &EnvPair, s: f64) -> Option<Point> {
    let e0 = pair.env(0);
    let e1 = pair.env(1);
    let w0 = (1.0 - s) * e0.alpha;
    let w1 = s * e1.alpha;
    let v0 = (1.0 - s) * e0.beta;
    let v1 = s * e1.beta;
    let a = w0 * e0.a + w1 * e1.a;
    let b = w0 * e0.b + w1 * e1.b;
    let c = v0 * e0.c + v1 * e1.c;
    let d = v0 * e0.d + v1 * e1.d;
    let alpha = w0 + w1;
    let beta = v0 + v1;
    let det = a * d - b * c;
    let scale = (a * d).abs() + (b * c).abs();
    if det.abs() <= 1e-14 * scale {
        return None;
    }
    let z = Point::new((alpha * d - b * beta) / det, (a * beta - alpha * c) / det);
    if z.is_finite() {
        Some(z)
    } else {
        None
    }
}

/// Equilibrium-curve samples: quadrant points of `zbar` over a grid, with
/// the `s` values whose isocline system was singular reported separately.
#[derive(Clone, Debug)]
pub struct EquilibriumCurve {
    /// `(s, zbar(s))` for grid values with an equilibrium in the open
    /// quadrant.
    pub samples: Vec<(f64, Point)>,
    /// Grid values skipped because the isoclines were parallel.
    pub skipped: Vec<f64>,
}

/// Evaluate `zbar` over `s_grid`, keeping open-quadrant samples.
pub fn equilibrium_curve(pair: &EnvPair, s_grid: &[f64]) -> EquilibriumCurve {
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for &s in s_grid {
        match zbar(pair, s) {
            Some(z) if z.in_open_quadrant() => samples.push((s, z)),
            Some(_) => {}
            None => skipped.push(s),
        }
    }
    EquilibriumCurve { samples, skipped }
}

/// A tangency point with the residuals of its two defining equations.
#[derive(Clone, Copy, Debug)]
pub struct TangencyPoint {
    pub point: Point,
    pub residual_g: f64,
    pub residual_tangency: f64,
}

/// The tangency set `T`, capped at the Bezout bound of six points.
#[derive(Clone, Debug, Default)]
pub struct TangencySet {
    pub points: Vec<TangencyPoint>,
}

/// One Newton step on `(G, h)`; returns the updated point and whether the
/// step was below the convergence threshold.
fn newton_step(pair: &EnvPair, conic: &ConicG, z: Point) -> Option<(Point, bool)> {
    let e0 = pair.env(0);
    let g = conic.eval(z);
    let grad = conic.gradient(z);
    let f0 = e0.vector_field(z);
    let h = f0.dot(grad);
    let jac_f = e0.jacobian(z);
    let hess = conic.hessian();
    // dh/dx = dF0x/dx Gx + F0x Gxx + dF0y/dx Gy + F0y Gxy, same pattern in y.
    let hx = jac_f[0][0] * grad.x + f0.x * hess[0][0] + jac_f[1][0] * grad.y + f0.y * hess[0][1];
    let hy = jac_f[0][1] * grad.x + f0.x * hess[0][1] + jac_f[1][1] * grad.y + f0.y * hess[1][1];
    let det = grad.x * hy - grad.y * hx;
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let dx = (g * hy - h * grad.y) / det;
    let dy = (h * grad.x - g * hx) / det;
    let next = Point::new(z.x - dx, z.y - dy);
    let converged = dx.abs() + dy.abs() <= 1e-15 * (1.0 + z.x.abs() + z.y.abs());
    Some((next, converged))
}

/// Compute the tangency set by tracing the quadrant branch of `{G = 0}`
/// through the equilibrium-curve parametrization.
///
/// `h(s) = (F_0 . grad G)(zbar(s))` is scanned on a fixed grid over
/// `s ∈ [-10, 11]` (the continuation beyond `[0, 1]` covers the branch
/// ends); sign changes between quadrant-valid samples are bisected to
/// `1e-12` in `s` and polished with a 2-D Newton iteration on `(G, h)`.
/// Candidates must pass the residual gate [`TANGENCY_RESIDUAL_LIMIT`] on
/// both equations, which also discards brackets caused by poles of the
/// parametrization rather than roots of `h`.
pub fn tangency_set(pair: &EnvPair) -> Result<TangencySet, SupportError> {
    let conic = conic_coeffs(pair);
    if conic.is_degenerate() {
        return Err(SupportError::DegenerateConic);
    }

    let mut valid_samples = 0usize;
    let mut prev: Option<(f64, f64)> = None;
    let mut brackets: Vec<(f64, f64)> = Vec::new();
    for k in 0..=TRACE_STEPS {
        let s = TRACE_S_LO + (TRACE_S_HI - TRACE_S_LO) * (k as f64 / TRACE_STEPS as f64);
        let sample = zbar(pair, s).filter(|z| z.in_open_quadrant());
        match sample {
            Some(z) => {
                valid_samples += 1;
                let h = tangency_h(pair, &conic, z);
                if !h.is_finite() {
                    prev = None;
                    continue;
                }
                if let Some((s_prev, h_prev)) = prev {
                    if h_prev * h < 0.0 {
                        brackets.push((s_prev, s));
                    }
                }
                if h == 0.0 {
                    brackets.push((s, s));
                }
                prev = Some((s, h));
            }
            None => prev = None,
        }
    }
    if valid_samples < 2 {
        return Err(SupportError::ContinuationFailure { valid_samples });
    }

    let mut points: Vec<TangencyPoint> = Vec::new();
    'bracket: for (mut lo, mut hi) in brackets {
        // Bisect h along the branch parameter.
        if lo < hi {
            let h_lo = match zbar(pair, lo).map(|z| tangency_h(pair, &conic, z)) {
                Some(h) => h,
                None => continue,
            };
            while hi - lo > S_BISECT_TOL {
                let mid = 0.5 * (lo + hi);
                let z_mid = match zbar(pair, mid) {
                    Some(z) => z,
                    None => continue 'bracket,
                };
                let h_mid = tangency_h(pair, &conic, z_mid);
                if h_mid == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if h_lo * h_mid < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        }
        let s_root = 0.5 * (lo + hi);
        let mut z = match zbar(pair, s_root) {
            Some(z) => z,
            None => continue,
        };
        // Newton polish on the full 2-D system.
        for _ in 0..25 {
            match newton_step(pair, &conic, z) {
                Some((next, converged)) => {
                    z = next;
                    if converged {
                        break;
                    }
                }
                None => continue 'bracket,
            }
        }
        if !z.in_open_quadrant() || !z.is_finite() {
            continue;
        }
        let residual_g = conic.eval(z).abs();
        let residual_tangency = tangency_h(pair, &conic, z).abs();
        if residual_g >= TANGENCY_RESIDUAL_LIMIT || residual_tangency >= TANGENCY_RESIDUAL_LIMIT
        {
            continue;
        }
        if points.iter().any(|p| p.point.dist(z) < TANGENCY_DEDUPE) {
            continue;
        }
        points.push(TangencyPoint { point: z, residual_g, residual_tangency });
    }

    debug_assert!(points.len() <= TANGENCY_CAP, "Bezout bound exceeded: numerical duplicates?");
    points.truncate(TANGENCY_CAP);
    Ok(TangencySet { points })
}

/// How a [`SupportRegion`] boundary was built.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionKind {
    GammaPrime,
    CzRegion,
}

/// One named boundary arc (flow trace or axis segment).
#[derive(Clone, Debug)]
pub struct Arc {
    pub name: &'static str,
    pub points: Vec<Point>,
}

/// A bounded region enclosed by named arcs.
///
/// `boundary` is the closed concatenation of the arcs, traversed
/// counter-clockwise, with duplicate join points removed and
/// `boundary.first() == boundary.last()` exactly. Flow arcs are traced
/// to within `1e-6` of their axis anchors and their endpoints then
/// snapped onto the exact anchor points, so the axis arcs lie exactly on
/// the axes and adjacent arcs join exactly.
#[derive(Clone, Debug)]
pub struct SupportRegion {
    pub arcs: Vec<Arc>,
    pub boundary: Vec<Point>,
    pub construction: RegionKind,
    /// The tangency point a `CzRegion` was grown from.
    pub generator_point: Option<Point>,
}

impl SupportRegion {
    pub fn arc(&self, name: &str) -> Option<&Arc> {
        self.arcs.iter().find(|a| a.name == name)
    }
}

/// Overwrite the first and last sample with exact anchor points.
fn snap_ends(mut samples: Vec<Point>, start: Point, end: Point) -> Vec<Point> {
    if let Some(first) = samples.first_mut() {
        *first = start;
    }
    if let Some(last) = samples.last_mut() {
        *last = end;
    }
    samples
}

/// `n` points from `a` to `b` inclusive; the final point is exactly `b`.
fn linspace_points(a: Point, b: Point, n: usize) -> Vec<Point> {
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        if j + 1 == n {
            out.push(b);
        } else {
            let frac = j as f64 / (n - 1) as f64;
            out.push(a.add(b.sub(a).scale(frac)));
        }
    }
    out
}

fn close_region(
    arcs: Vec<Arc>,
    construction: RegionKind,
    generator_point: Option<Point>,
) -> SupportRegion {
    let mut boundary: Vec<Point> = Vec::new();
    for arc in &arcs {
        for (i, &p) in arc.points.iter().enumerate() {
            if i == 0 {
                if let Some(&last) = boundary.last() {
                    if last == p {
                        continue;
                    }
                }
            }
            boundary.push(p);
        }
    }
    debug_assert!(
        boundary.first() == boundary.last(),
        "arc chain must close exactly by construction"
    );
    SupportRegion { arcs, boundary, construction, generator_point }
}

/// Assemble the `Gamma'`-shaped boundary (no precondition check): the
/// counter-clockwise chain `Sigma_1`, x-axis chord, reversed `Sigma_0`,
/// y-axis chord.
fn assemble_gamma(pair: &EnvPair) -> Result<SupportRegion, SupportError> {
    let e0 = pair.env(0);
    let e1 = pair.env(1);
    let sigma1 = unstable_manifold(e1, REGION_FLOW_TOL)?;
    let sigma0 = unstable_manifold(e0, REGION_FLOW_TOL)?;

    // The traces stop within 1e-6 of the axis fixed points; pin their
    // endpoints to the exact anchors so the axis chords are genuinely on
    // the axes (otherwise chord and near-axis manifold tail can interleave
    // at the 1e-8 scale and the assembled polyline stops being simple).
    let s1 = snap_ends(
        sigma1.samples,
        Point::new(0.0, 1.0 / e1.d),
        Point::new(1.0 / e1.a, 0.0),
    );
    let mut s0 = snap_ends(
        sigma0.samples,
        Point::new(0.0, 1.0 / e0.d),
        Point::new(1.0 / e0.a, 0.0),
    );
    let axis_x = linspace_points(*s1.last().expect("non-empty"), *s0.last().expect("non-empty"), AXIS_ARC_SAMPLES);
    s0.reverse();
    let axis_y = linspace_points(*s0.last().expect("non-empty"), s1[0], AXIS_ARC_SAMPLES);

    let arcs = vec![
        Arc { name: "sigma1", points: s1 },
        Arc { name: "axis_x", points: axis_x },
        Arc { name: "sigma0", points: s0 },
        Arc { name: "axis_y", points: axis_y },
    ];
    Ok(close_region(arcs, RegionKind::GammaPrime, None))
}

/// The candidate support region `Gamma'`: bounded by the unstable
/// manifold of each environment and the two axis segments between their
/// endpoints.
///
/// Requires `I ∩ J` to be non-empty (the persistence-capable ordering);
/// use the tangency machinery for pairs outside that regime.
pub fn gamma_prime(pair: &EnvPair) -> Result<SupportRegion, SupportError> {
    if pair.intervals().i_intersect_j().is_none() {
        return Err(SupportError::PreconditionViolated {
            detail: "the critical intervals of this pair are disjoint",
        });
    }
    assemble_gamma(pair)
}

fn trace_arm(
    env: &Environment,
    which: usize,
    z: Point,
    target: Point,
) -> Result<Vec<Point>, SupportError> {
    match trace_to_point(env, z, target, REGION_FLOW_TOL) {
        Ok(steps) => {
            let mut arm = resample_steps(&steps, MANIFOLD_MIN_SAMPLES);
            if let Some(last) = arm.last_mut() {
                // Pin the far end to the exact axis sink (see snap_ends).
                *last = target;
            }
            Ok(arm)
        }
        Err(e @ PdmpError::ManifoldStalled { .. }) => {
            Err(SupportError::NonConvergentTrajectory { which, source: e })
        }
        Err(e) => Err(SupportError::Flow(e)),
    }
}

/// The Jordan region `C(z)`: both flows forward from `z` to their axis
/// attractors, closed by the x-axis chord between `(1/a_1, 0)` and
/// `(1/a_0, 0)`. Counter-clockwise: the `F_1` arm, the axis chord, then
/// the reversed `F_0` arm back up to `z`.
pub fn support_region(pair: &EnvPair, z: Point) -> Result<SupportRegion, SupportError> {
    if !z.is_finite() || !z.in_open_quadrant() {
        return Err(SupportError::BadParameter { name: "z", value: z.x.min(z.y) });
    }
    let e0 = pair.env(0);
    let e1 = pair.env(1);
    let phi1 = trace_arm(e1, 1, z, Point::new(1.0 / e1.a, 0.0))?;
    let mut phi0 = trace_arm(e0, 0, z, Point::new(1.0 / e0.a, 0.0))?;
    let axis_x = linspace_points(
        *phi1.last().expect("non-empty"),
        *phi0.last().expect("non-empty"),
        AXIS_ARC_SAMPLES,
    );
    phi0.reverse();
    let arcs = vec![
        Arc { name: "phi1", points: phi1 },
        Arc { name: "axis_x", points: axis_x },
        Arc { name: "phi0", points: phi0 },
    ];
    Ok(close_region(arcs, RegionKind::CzRegion, Some(z)))
}

/// Even-odd containment against the closed boundary; points within
/// [`BOUNDARY_TOL`] of the polyline count as inside.
pub fn contains(region: &SupportRegion, p: Point) -> bool {
    if point_polyline_dist(p, &region.boundary) <= BOUNDARY_TOL {
        return true;
    }
    let mut inside = false;
    for w in region.boundary.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if x_cross > p.x {
                inside = !inside;
            }
        }
    }
    inside
}

/// CSV form of a region boundary: an `x,y` header, then each arc's points
/// preceded by a `# arc=<name>` comment line.
pub fn boundary_csv(region: &SupportRegion) -> String {
    let mut out = String::from("x,y\n");
    for arc in &region.arcs {
        out.push_str("# arc=");
        out.push_str(arc.name);
        out.push('\n');
        for p in &arc.points {
            out.push_str(&fmt_g17(p.x));
            out.push(',');
            out.push_str(&fmt_g17(p.y));
            out.push('\n');
        }
    }
    out
}

/// JSON array of tangency points with their defining residuals.
pub fn tangency_json(set: &TangencySet) -> String {
    json_array(set.points.iter().map(|p| {
        JsonObject::new()
            .num("x", p.point.x)
            .num("y", p.point.y)
            .num("residual_G", p.residual_g)
            .num("residual_tangency", p.residual_tangency)
            .render()
    }))
}
