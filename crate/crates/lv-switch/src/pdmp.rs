//! PDMP trajectory simulation: deterministic Lotka-Volterra flows driven by
//! a two-state jump process.
//!
//! Between jumps the state follows `dz/dt = F_{E_i}(z)` for the active
//! environment; holding times are exponential with rate `lambda_i`. The
//! coordinate axes are invariant for every environment, so a trajectory
//! started on an axis stays there and is advanced by the closed-form
//! logistic flow rather than the ODE integrator — the two agree exactly at
//! piece boundaries, which keeps axis simulations bitwise comparable with
//! the one-dimensional resident driver.
//!
//! Also here: time-weighted occupation statistics over a post-burn-in
//! window, and the unstable manifold of the axis saddle `(0, 1/d)`, traced
//! from an eigenvector offset down to the axis attractor `(1/a, 0)`.

use crate::env::{EnvPair, Environment, SwitchRates};
use crate::invasion::logistic_step;
use crate::numeric::rk45::{integrate, RkError, RkOptions, RkStep};
use crate::{fmt_g17, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// A coordinate below this value at the horizon is reported as extinct.
/// Extinction in the theory is an asymptotic statement; this cutoff is
/// an artifact choice and is echoed in [`OccupationStats`].
pub const EXTINCTION_THRESHOLD: f64 = 1e-6;

/// Coordinates within this distance below zero are treated as roundoff
/// noise from the integrator and clamped back onto the (invariant) axis.
const CLAMP_TOL: f64 = 1e-9;

/// Distance from the axis attractor at which the manifold trace stops.
pub const MANIFOLD_ENDPOINT_TOL: f64 = 1e-6;

/// Departure offset along the unstable eigenvector, relative to the saddle
/// height `1/d`.
const MANIFOLD_OFFSET_FRACTION: f64 = 1e-6;

/// A rerun from half the departure offset must stay within this distance
/// of the primary trace (guards against eigenvector sign errors).
const RICHARDSON_LIMIT: f64 = 1e-5;

/// Minimum number of polyline samples returned for a manifold trace.
pub const MANIFOLD_MIN_SAMPLES: usize = 512;

const MANIFOLD_MAX_CHUNKS: usize = 1000;

/// Sub-samples recorded per unit of `r * dt` on closed-form axis pieces.
const AXIS_SAMPLES_PER_RELAXATION: f64 = 4.0;
const AXIS_MAX_SAMPLES_PER_PIECE: usize = 64;

#[derive(Debug, Error)]
pub enum PdmpError {
    #[error(transparent)]
    Integrator(#[from] RkError),
    #[error("trajectory does not extend past the burn-in window ({samples} samples spanning {span:e} time units)")]
    EmptyWindow { samples: usize, span: f64 },
    #[error("linearization at (0, 1/d) has no unstable direction (b = {b} >= d = {d})")]
    NotASaddle { b: f64, d: f64 },
    #[error(
        "(1/a, 0) is not attracting (a = {a} >= c = {c}); the unstable manifold \
         does not terminate on the x-axis"
    )]
    AxisNotAttracting { a: f64, c: f64 },
    #[error(
        "manifold rerun from half the departure offset deviates by {deviation:e} \
         (limit {limit:e}); the trace is not trustworthy"
    )]
    RichardsonCheck { deviation: f64, limit: f64 },
    #[error(
        "manifold trace failed to reach the axis attractor after {chunks} \
         integration windows; stalled near ({x:e}, {y:e})"
    )]
    ManifoldStalled { chunks: usize, x: f64, y: f64 },
    #[error("invalid parameter `{name}`: {value}")]
    BadParameter { name: &'static str, value: f64 },
}

/// Clamp integrator roundoff: coordinates in `(-CLAMP_TOL, 0]` (including
/// `-0.0`) are mapped to exactly `0.0`; everything else passes through.
fn clamp_coord(v: f64) -> f64 {
    if v <= 0.0 && v > -CLAMP_TOL {
        0.0
    } else {
        v
    }
}

fn clamp_point(p: Point) -> Point {
    Point::new(clamp_coord(p.x), clamp_coord(p.y))
}

/// Result of a single deterministic flow integration.
#[derive(Clone, Debug)]
pub struct FlowTrace {
    pub endpoint: Point,
    /// `(t, z)` at every accepted integrator step, starting with `(0, z0)`
    /// and ending with `(duration, endpoint)`.
    pub samples: Vec<(f64, Point)>,
}

/// Integrate the flow of a single environment from `z0` over `duration`.
///
/// Adaptive embedded Runge-Kutta with mixed absolute/relative per-step
/// error `tol`; output coordinates within roundoff below zero are clamped
/// to the axis, which is invariant for the exact flow.
pub fn integrate_flow(
    env: &Environment,
    z0: Point,
    duration: f64,
    tol: f64,
) -> Result<FlowTrace, PdmpError> {
    if !z0.is_finite() || !z0.in_closed_quadrant() {
        return Err(PdmpError::BadParameter { name: "z0", value: z0.x.min(z0.y) });
    }
    if !duration.is_finite() || duration < 0.0 {
        return Err(PdmpError::BadParameter { name: "duration", value: duration });
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(PdmpError::BadParameter { name: "tol", value: tol });
    }
    let z0 = clamp_point(z0);
    let mut samples = vec![(0.0, z0)];
    if duration == 0.0 {
        return Ok(FlowTrace { endpoint: z0, samples });
    }
    let opts = RkOptions::with_tol(tol);
    let endpoint = integrate(
        |p| env.vector_field(p),
        z0,
        (0.0, duration),
        &opts,
        |step| samples.push((step.t1, clamp_point(step.y1))),
    )?;
    let endpoint = clamp_point(endpoint);
    // The last accepted step produced `endpoint`; pin its record to the
    // requested duration so the trace ends exactly at `(duration, endpoint)`.
    if samples.len() > 1 {
        let last = samples.last_mut().expect("non-empty");
        *last = (duration, endpoint);
    }
    Ok(FlowTrace { endpoint, samples })
}

/// Closed-form logistic flow: the solution of `x' = r x (1 - k x)` after
/// time `dt`, written overflow-safely so that large `r * dt` returns the
/// carrying capacity `1/k` instead of `inf/inf`.
pub fn logistic_flow_closed(r: f64, k: f64, x0: f64, dt: f64) -> f64 {
    logistic_step(x0, r, k, dt)
}

/// A simulated PDMP path.
///
/// Sampling follows the *arrival* convention: `env_indices[k]` is the
/// environment that generated the segment ending at `times[k]`, and the
/// initial row carries the starting environment. A row recorded at a jump
/// time therefore still carries the pre-jump environment; the post-jump
/// environment first appears on the next row. With this convention the
/// time spent in environment 1 is exactly the sum of `times[k] -
/// times[k-1]` over rows with `env_indices[k] == 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Point>,
    pub env_indices: Vec<u8>,
    /// Strictly increasing times at which the environment switched.
    pub jump_times: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Point {
        *self.states.last().expect("trajectory has at least the initial sample")
    }
}

/// Advance one holding interval, appending sample rows (all tagged with
/// the generating environment) and returning the piece endpoint. Pieces
/// that start on an axis use the closed-form logistic flow — applied once
/// from the piece start for the endpoint, so that axis dynamics compose
/// exactly like the one-dimensional resident driver.
#[allow(clippy::too_many_arguments)]
fn advance_piece(
    env: &Environment,
    z: Point,
    t_start: f64,
    piece_end: f64,
    env_tag: u8,
    tol: f64,
    times: &mut Vec<f64>,
    states: &mut Vec<Point>,
    env_indices: &mut Vec<u8>,
) -> Result<Point, PdmpError> {
    let dt = piece_end - t_start;
    debug_assert!(dt > 0.0);

    let push_row = |t: f64, z: Point, times: &mut Vec<f64>, states: &mut Vec<Point>, env_indices: &mut Vec<u8>| {
        if times.last().map_or(true, |&prev| t > prev) {
            times.push(t);
            states.push(z);
            env_indices.push(env_tag);
        }
    };

    if z.x == 0.0 && z.y == 0.0 {
        push_row(piece_end, z, times, states, env_indices);
        return Ok(z);
    }

    // Axis pieces: exact logistic flow, with a handful of interior rows
    // for plotting density. Every interior row is evaluated from the piece
    // start (not incrementally), and the final sub-time is exactly `dt`.
    let axis = if z.y == 0.0 {
        Some((env.alpha, env.a, z.x, true))
    } else if z.x == 0.0 {
        Some((env.beta, env.d, z.y, false))
    } else {
        None
    };
    if let Some((r, k, w0, on_x_axis)) = axis {
        let n = ((dt * r * AXIS_SAMPLES_PER_RELAXATION).ceil() as usize)
            .clamp(1, AXIS_MAX_SAMPLES_PER_PIECE);
        for j in 1..n {
            let tau = dt * (j as f64 / n as f64);
            let w = logistic_step(w0, r, k, tau);
            let p = if on_x_axis { Point::new(w, 0.0) } else { Point::new(0.0, w) };
            let row_t = t_start + tau;
            if row_t < piece_end {
                push_row(row_t, p, times, states, env_indices);
            }
        }
        let w = logistic_step(w0, r, k, dt);
        let p = if on_x_axis { Point::new(w, 0.0) } else { Point::new(0.0, w) };
        push_row(piece_end, p, times, states, env_indices);
        return Ok(p);
    }

    let opts = RkOptions::with_tol(tol);
    let endpoint = integrate(
        |p| env.vector_field(p),
        z,
        (0.0, dt),
        &opts,
        |step| {
            let row_t = t_start + step.t1;
            if row_t < piece_end {
                push_row(row_t, clamp_point(step.y1), times, states, env_indices);
            }
        },
    )?;
    let endpoint = clamp_point(endpoint);
    push_row(piece_end, endpoint, times, states, env_indices);
    Ok(endpoint)
}

/// Simulate the switched system `(Z_t, I_t)` up to `horizon`.
///
/// Holding times are drawn by inverse transform from a counter-based
/// generator seeded with `seed` (stream 0), *before* each piece is
/// integrated — jump times are therefore bitwise reproducible for a given
/// seed regardless of the integration tolerance.
pub fn simulate_pdmp(
    pair: &EnvPair,
    rates: SwitchRates,
    z0: Point,
    i0: u8,
    horizon: f64,
    seed: u64,
    tol: f64,
) -> Result<Trajectory, PdmpError> {
    if i0 > 1 {
        return Err(PdmpError::BadParameter { name: "i0", value: f64::from(i0) });
    }
    if !z0.is_finite() || !z0.in_closed_quadrant() {
        return Err(PdmpError::BadParameter { name: "z0", value: z0.x.min(z0.y) });
    }
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(PdmpError::BadParameter { name: "horizon", value: horizon });
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(PdmpError::BadParameter { name: "tol", value: tol });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);

    let z0 = clamp_point(z0);
    let mut times = vec![0.0];
    let mut states = vec![z0];
    let mut env_indices = vec![i0];
    let mut jump_times = Vec::new();

    let mut z = z0;
    let mut t_cur = 0.0;
    let mut env_i = usize::from(i0);
    while t_cur < horizon {
        let lambda = if env_i == 0 { rates.lambda0() } else { rates.lambda1() };
        let u: f64 = rng.gen();
        let hold = -(1.0 - u).ln() / lambda;
        let t_next = t_cur + hold;
        let jumps = t_next < horizon;
        let piece_end = if jumps { t_next } else { horizon };
        if piece_end > t_cur {
            z = advance_piece(
                pair.env(env_i),
                z,
                t_cur,
                piece_end,
                env_i as u8,
                tol,
                &mut times,
                &mut states,
                &mut env_indices,
            )?;
            t_cur = piece_end;
        }
        if jumps {
            jump_times.push(piece_end);
            env_i = 1 - env_i;
        } else {
            break;
        }
    }

    Ok(Trajectory { times, states, env_indices, jump_times })
}

/// Time-weighted summary of a trajectory over its post-burn-in window.
#[derive(Clone, Copy, Debug)]
pub struct OccupationStats {
    /// Fraction of window time spent in environment 1 (exact, since the
    /// environment is piecewise constant between samples).
    pub fraction_env1: f64,
    /// Trapezoidal time averages of the coordinates over the window.
    pub mean_x: f64,
    pub mean_y: f64,
    /// Minima over the sampled states in the window (including the state
    /// interpolated at the window start).
    pub min_x: f64,
    pub min_y: f64,
    /// Coordinate below [`EXTINCTION_THRESHOLD`] at the horizon.
    pub x_extinct: bool,
    pub y_extinct: bool,
    pub window_start: f64,
    pub window_end: f64,
    pub extinction_threshold: f64,
}

/// Aggregate a trajectory into [`OccupationStats`].
///
/// The window is `[t0 + burn_in_fraction * span, horizon]`; the state at
/// the window start is linearly interpolated on its containing segment.
pub fn occupation_stats(
    traj: &Trajectory,
    burn_in_fraction: f64,
) -> Result<OccupationStats, PdmpError> {
    if !burn_in_fraction.is_finite() || !(0.0..=0.9).contains(&burn_in_fraction) {
        return Err(PdmpError::BadParameter {
            name: "burn_in_fraction",
            value: burn_in_fraction,
        });
    }
    let n = traj.times.len();
    let span = match (traj.times.first(), traj.times.last()) {
        (Some(&t0), Some(&t1)) if t1 > t0 => t1 - t0,
        _ => return Err(PdmpError::EmptyWindow { samples: n, span: 0.0 }),
    };
    let t0 = traj.times[0];
    let t_end = traj.times[n - 1];
    let window_start = t0 + burn_in_fraction * span;

    // First sample strictly after the window start; its segment straddles
    // (or starts exactly at) the cut.
    let k0 = traj.times.partition_point(|&t| t <= window_start);
    debug_assert!(k0 >= 1 && k0 < n);
    let (ta, tb) = (traj.times[k0 - 1], traj.times[k0]);
    let (za, zb) = (traj.states[k0 - 1], traj.states[k0]);
    let frac = if tb > ta { (window_start - ta) / (tb - ta) } else { 0.0 };
    let zw = Point::new(za.x + (zb.x - za.x) * frac, za.y + (zb.y - za.y) * frac);

    let mut time_env1 = 0.0;
    let mut int_x = 0.0;
    let mut int_y = 0.0;
    let mut min_x = zw.x;
    let mut min_y = zw.y;
    let mut prev_t = window_start;
    let mut prev_z = zw;
    for k in k0..n {
        let dt = traj.times[k] - prev_t;
        let z = traj.states[k];
        int_x += 0.5 * (prev_z.x + z.x) * dt;
        int_y += 0.5 * (prev_z.y + z.y) * dt;
        if traj.env_indices[k] == 1 {
            time_env1 += dt;
        }
        min_x = min_x.min(z.x);
        min_y = min_y.min(z.y);
        prev_t = traj.times[k];
        prev_z = z;
    }
    let total = t_end - window_start;
    let last = traj.states[n - 1];
    Ok(OccupationStats {
        fraction_env1: (time_env1 / total).clamp(0.0, 1.0),
        mean_x: int_x / total,
        mean_y: int_y / total,
        min_x,
        min_y,
        x_extinct: last.x < EXTINCTION_THRESHOLD,
        y_extinct: last.y < EXTINCTION_THRESHOLD,
        window_start,
        window_end: t_end,
        extinction_threshold: EXTINCTION_THRESHOLD,
    })
}

/// The unstable manifold of the axis saddle, traced into the open quadrant.
#[derive(Clone, Debug)]
pub struct ManifoldCurve {
    /// Polyline from the eigenvector offset near `(0, 1/d)` down to within
    /// [`MANIFOLD_ENDPOINT_TOL`] of `(1/a, 0)`; at least
    /// [`MANIFOLD_MIN_SAMPLES`] points.
    pub samples: Vec<Point>,
    pub env: Environment,
    /// Unit eigenvector of the positive eigenvalue, oriented into the open
    /// quadrant.
    pub departure_direction: Point,
    /// Eigenvector slope as `dy/dx`: `-beta c / (alpha (d - b) + beta d)`.
    pub slope_dy_dx: f64,
    /// The same direction measured against the vertical axis (`dx/dy`),
    /// which is the convention the printed slope expression
    /// `-(alpha (d - b) + beta d) / (beta c)` corresponds to.
    pub slope_dx_dy: f64,
}

fn point_segment_dist(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a.add(ab.scale(t)))
}

pub(crate) fn point_polyline_dist(p: Point, poly: &[Point]) -> f64 {
    poly.windows(2)
        .map(|w| point_segment_dist(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Integrate from `start` until an accepted step lands within
/// [`MANIFOLD_ENDPOINT_TOL`] of `target`, returning the accepted steps in
/// global time. Works in fixed-length windows so no a-priori bound on the
/// travel time is needed. Shared by the manifold tracer and the
/// support-region flow arms.
pub(crate) fn trace_to_point(
    env: &Environment,
    start: Point,
    target: Point,
    tol: f64,
) -> Result<Vec<RkStep>, PdmpError> {
    let opts = RkOptions::with_tol(tol);
    let chunk = 5.0 / env.alpha.min(env.beta);
    let mut steps: Vec<RkStep> = Vec::new();
    let mut z = start;
    let mut t_off = 0.0;
    for _ in 0..MANIFOLD_MAX_CHUNKS {
        let mut hit = usize::MAX;
        let endpoint = integrate(
            |p| env.vector_field(p),
            z,
            (0.0, chunk),
            &opts,
            |step| {
                let mut shifted = *step;
                shifted.t0 += t_off;
                shifted.t1 += t_off;
                steps.push(shifted);
                if hit == usize::MAX && step.y1.dist(target) < MANIFOLD_ENDPOINT_TOL {
                    hit = steps.len();
                }
            },
        )?;
        if hit != usize::MAX {
            steps.truncate(hit);
            return Ok(steps);
        }
        z = endpoint;
        t_off += chunk;
    }
    let stall = steps.last().map_or(start, |s| s.y1);
    Err(PdmpError::ManifoldStalled { chunks: MANIFOLD_MAX_CHUNKS, x: stall.x, y: stall.y })
}

/// Resample accepted steps to a polyline: the union of all step boundaries
/// with a uniform time refinement, evaluated by the steps' cubic Hermite
/// interpolants. Keeps the exact start and end points.
pub(crate) fn resample_steps(steps: &[RkStep], min_samples: usize) -> Vec<Point> {
    let t_begin = steps[0].t0;
    let t_final = steps[steps.len() - 1].t1;
    let span = t_final - t_begin;
    let mut ts: Vec<f64> = Vec::with_capacity(steps.len() + min_samples + 1);
    ts.push(t_begin);
    for s in steps {
        ts.push(s.t1);
    }
    for j in 0..min_samples {
        ts.push(t_begin + span * (j as f64 / (min_samples - 1) as f64));
    }
    ts.sort_by(|x, y| x.partial_cmp(y).expect("finite times"));
    ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * span.max(1.0));

    let mut out = Vec::with_capacity(ts.len());
    let mut idx = 0usize;
    for &t in &ts {
        while idx + 1 < steps.len() && t > steps[idx].t1 {
            idx += 1;
        }
        out.push(clamp_point(steps[idx].eval(t)));
    }
    out
}

/// Trace the unstable manifold of the saddle `(0, 1/d)` down to the axis
/// attractor `(1/a, 0)`.
///
/// The positive eigenvalue is `alpha (d - b)/d` (requires `b < d`); its
/// eigenvector, oriented into the open quadrant, gives the departure
/// direction. The trace starts at the saddle plus `1e-6 * (1/d)` along
/// that direction and is verified by a rerun from half the offset, which
/// must stay within `1e-5` of the primary polyline.
pub fn unstable_manifold(env: &Environment, tol: f64) -> Result<ManifoldCurve, PdmpError> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(PdmpError::BadParameter { name: "tol", value: tol });
    }
    if env.b >= env.d {
        return Err(PdmpError::NotASaddle { b: env.b, d: env.d });
    }
    if env.a >= env.c {
        return Err(PdmpError::AxisNotAttracting { a: env.a, c: env.c });
    }

    let saddle = Point::new(0.0, 1.0 / env.d);
    let target = Point::new(1.0 / env.a, 0.0);
    let slope_dy_dx = -env.beta * env.c / (env.alpha * (env.d - env.b) + env.beta * env.d);
    let norm = (1.0 + slope_dy_dx * slope_dy_dx).sqrt();
    let direction = Point::new(1.0 / norm, slope_dy_dx / norm);

    let eps = MANIFOLD_OFFSET_FRACTION / env.d;
    let start = saddle.add(direction.scale(eps));
    let steps = trace_to_point(env, start, target, tol)?;
    let samples = resample_steps(&steps, MANIFOLD_MIN_SAMPLES);

    // Richardson-style offset check: halve the departure offset and make
    // sure the rerun shadows the primary trace.
    let half_start = saddle.add(direction.scale(0.5 * eps));
    let half_steps = trace_to_point(env, half_start, target, tol)?;
    // Subdivide each accepted step with its Hermite interpolant so that
    // chord sagitta does not masquerade as trace disagreement.
    const REFINE: usize = 8;
    let mut half_poly = Vec::with_capacity(half_steps.len() * REFINE + 1);
    half_poly.push(half_steps[0].y0);
    for s in &half_steps {
        for j in 1..=REFINE {
            let t = s.t0 + (s.t1 - s.t0) * (j as f64 / REFINE as f64);
            half_poly.push(s.eval(t));
        }
    }
    let stride = (samples.len() / 128).max(1);
    let mut deviation: f64 = 0.0;
    for p in samples.iter().step_by(stride) {
        deviation = deviation.max(point_polyline_dist(*p, &half_poly));
    }
    deviation = deviation.max(point_polyline_dist(
        *samples.last().expect("non-empty"),
        &half_poly,
    ));
    if deviation > RICHARDSON_LIMIT {
        return Err(PdmpError::RichardsonCheck { deviation, limit: RICHARDSON_LIMIT });
    }

    Ok(ManifoldCurve {
        samples,
        env: *env,
        departure_direction: direction,
        slope_dy_dx,
        slope_dx_dy: 1.0 / slope_dy_dx,
    })
}

/// CSV form of a trajectory: `time,x,y,env` rows.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("time,x,y,env\n");
    for k in 0..traj.times.len() {
        out.push_str(&fmt_g17(traj.times[k]));
        out.push(',');
        out.push_str(&fmt_g17(traj.states[k].x));
        out.push(',');
        out.push_str(&fmt_g17(traj.states[k].y));
        out.push(',');
        out.push_str(if traj.env_indices[k] == 1 { "1" } else { "0" });
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{classify_regime, Regime};
    use crate::env::top_pair;
    use crate::invasion::lambda_xy;

    fn type1_env() -> Environment {
        // a=1, b=1, c=2, d=2, alpha=1, beta=5: both axes favorable to x,
        // saddle at (0, 1/2), attractor at (1, 0).
        *top_pair(5.5).env(0)
    }

    #[test]
    fn logistic_closed_form_hand_values() {
        // r=1, k=1, x0=1/2, dt=ln 3: (0.5 * 3) / (1 + 0.5 * 2) = 0.75.
        let x = logistic_flow_closed(1.0, 1.0, 0.5, 3.0_f64.ln());
        assert!((x - 0.75).abs() < 1e-14);
        // Carrying capacity is a fixed point, and dt=0 is the identity.
        assert_eq!(logistic_flow_closed(2.0, 4.0, 0.25, 17.3), 0.25);
        assert_eq!(logistic_flow_closed(2.0, 4.0, 0.37, 0.0), 0.37);
        // Large r*dt saturates at 1/k instead of overflowing.
        let x = logistic_flow_closed(2.0, 3.0, 0.01, 500.0);
        assert!((x - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(logistic_flow_closed(2.0, 3.0, 0.0, 5.0), 0.0);
    }

    #[test]
    fn flow_reaches_axis_attractor_from_interior() {
        let env = type1_env();
        let trace = integrate_flow(&env, Point::new(0.3, 0.3), 50.0, 1e-10).unwrap();
        assert!(trace.endpoint.dist(Point::new(1.0, 0.0)) < 1e-5);
        // Self-convergence: halving the tolerance moves the endpoint by
        // far less than the tolerance itself (the flow is contracting).
        let finer = integrate_flow(&env, Point::new(0.3, 0.3), 50.0, 5e-11).unwrap();
        assert!(trace.endpoint.dist(finer.endpoint) < 10.0 * 1e-10);
        // Samples bracket the requested span.
        assert_eq!(trace.samples.first().unwrap().0, 0.0);
        assert_eq!(trace.samples.last().unwrap().0, 50.0);
        assert_eq!(trace.samples.last().unwrap().1, trace.endpoint);
    }

    #[test]
    fn flow_keeps_axis_invariant_exactly() {
        let env = type1_env();
        let trace = integrate_flow(&env, Point::new(0.3, 0.0), 60.0, 1e-10).unwrap();
        assert!((trace.endpoint.x - 1.0).abs() < 1e-6);
        assert_eq!(trace.endpoint.y, 0.0);
        for &(_, p) in &trace.samples {
            assert_eq!(p.y, 0.0, "x-axis must be exactly invariant");
        }
        // The axis equilibrium (1/a, 0) is exactly fixed: the field
        // vanishes identically there, so every RK stage is zero.
        let fixed = integrate_flow(&env, Point::new(1.0, 0.0), 10.0, 1e-10).unwrap();
        assert_eq!(fixed.endpoint, Point::new(1.0, 0.0));
    }

    #[test]
    fn flow_rejects_bad_inputs() {
        let env = type1_env();
        assert!(matches!(
            integrate_flow(&env, Point::new(-0.5, 0.2), 1.0, 1e-10),
            Err(PdmpError::BadParameter { name: "z0", .. })
        ));
        assert!(matches!(
            integrate_flow(&env, Point::new(0.5, 0.2), -1.0, 1e-10),
            Err(PdmpError::BadParameter { name: "duration", .. })
        ));
        assert!(matches!(
            integrate_flow(&env, Point::new(0.5, 0.2), 1.0, 0.0),
            Err(PdmpError::BadParameter { name: "tol", .. })
        ));
        // Zero duration is legal and returns the (clamped) initial state.
        let t = integrate_flow(&env, Point::new(0.5, 0.2), 0.0, 1e-10).unwrap();
        assert_eq!(t.endpoint, Point::new(0.5, 0.2));
        assert_eq!(t.samples.len(), 1);
    }

    #[test]
    fn fraction_env1_matches_bernoulli_parameter() {
        // lambda0 = lambda1 = 1, so the stationary occupation of env 1 is
        // 1/2. The occupation fraction of a two-state chain over [0, T]
        // has asymptotic variance 2 pi0 pi1 / ((l0+l1) T); three sigma
        // here is 0.015.
        let pair = top_pair(5.5);
        let rates = SwitchRates::from_st(0.5, 2.0).unwrap();
        let traj =
            simulate_pdmp(&pair, rates, Point::new(0.5, 0.5), 0, 1e4, 42, 1e-8).unwrap();
        let stats = occupation_stats(&traj, 0.0).unwrap();
        assert!(
            (stats.fraction_env1 - 0.5).abs() < 0.015,
            "fraction_env1 = {}",
            stats.fraction_env1
        );
    }

    #[test]
    fn extinction_y_region_kills_y_and_keeps_x() {
        // s=0.5, t=1 is far below the critical curve t_y(0.5) ~ 5.81, so
        // Lambda_y < 0: Y dies, X persists between 1/a1 = 1/3 and 1/a0 = 1.
        let pair = top_pair(5.5);
        let rates = SwitchRates::from_st(0.5, 1.0).unwrap();
        let traj =
            simulate_pdmp(&pair, rates, Point::new(0.5, 0.5), 0, 2000.0, 11, 1e-8).unwrap();
        assert!(traj.final_state().y < 1e-4);
        let stats = occupation_stats(&traj, 0.9).unwrap();
        assert!(stats.y_extinct);
        assert!(!stats.x_extinct);
        assert!(stats.min_x > 0.1, "trailing-window min_x = {}", stats.min_x);
    }

    #[test]
    fn persistence_region_keeps_both_bounded_away_from_zero() {
        // s=0.5, t=15 sits between t_y(0.5) ~ 5.81 and t_x(0.5) ~ 38.7:
        // both invasion rates are positive.
        let pair = top_pair(5.5);
        let rates = SwitchRates::from_st(0.5, 15.0).unwrap();
        let traj =
            simulate_pdmp(&pair, rates, Point::new(0.5, 0.5), 0, 2000.0, 23, 1e-8).unwrap();
        let stats = occupation_stats(&traj, 0.9).unwrap();
        assert!(!stats.x_extinct && !stats.y_extinct);
        assert!(stats.min_x > 1e-3, "min_x = {}", stats.min_x);
        assert!(stats.min_y > 1e-3, "min_y = {}", stats.min_y);
        // Quadrant invariance: no sample may go negative.
        for p in &traj.states {
            assert!(p.x >= 0.0 && p.y >= 0.0);
        }
        // Times are strictly increasing.
        for w in traj.times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn axis_simulation_composes_logistic_steps_bitwise() {
        let pair = top_pair(5.5);
        let rates = SwitchRates::from_st(0.4, 3.0).unwrap();
        let traj =
            simulate_pdmp(&pair, rates, Point::new(0.4, 0.0), 0, 50.0, 7, 1e-8).unwrap();

        // Fold the closed-form logistic flow over the same jump schedule.
        let mut x_ref = 0.4_f64;
        let mut env_i = 0usize;
        let mut prev_t = 0.0_f64;
        let mut checkpoints: Vec<(f64, f64)> = Vec::new();
        for &jt in &traj.jump_times {
            let env = pair.env(env_i);
            x_ref = logistic_step(x_ref, env.alpha, env.a, jt - prev_t);
            checkpoints.push((jt, x_ref));
            prev_t = jt;
            env_i = 1 - env_i;
        }
        let env = pair.env(env_i);
        let horizon = *traj.times.last().unwrap();
        x_ref = logistic_step(x_ref, env.alpha, env.a, horizon - prev_t);
        checkpoints.push((horizon, x_ref));

        assert!(!traj.jump_times.is_empty());
        for (t_chk, x_chk) in checkpoints {
            let row = traj
                .times
                .iter()
                .position(|&t| t == t_chk)
                .expect("every jump time has a sample row");
            assert_eq!(traj.states[row].x.to_bits(), x_chk.to_bits());
            assert_eq!(traj.states[row].y, 0.0);
        }
    }

    #[test]
    fn seed_determinism_is_bitwise() {
        let pair = top_pair(5.5);
        let rates = SwitchRates::from_st(0.5, 5.0).unwrap();
        let a = simulate_pdmp(&pair, rates, Point::new(0.4, 0.2), 0, 200.0, 99, 1e-9).unwrap();
        let b = simulate_pdmp(&pair, rates, Point::new(0.4, 0.2), 0, 200.0, 99, 1e-9).unwrap();
        assert_eq!(a, b);
        let c = simulate_pdmp(&pair, rates, Point::new(0.4, 0.2), 0, 200.0, 100, 1e-9).unwrap();
        assert_ne!(a.jump_times, c.jump_times);
    }

    #[test]
    fn halving_tolerance_barely_moves_the_endpoint() {
        let pair = top_pair(5.5);
        let rates = SwitchRates::from_st(0.5, 15.0).unwrap();
        let tol = 1e-9;
        let a = simulate_pdmp(&pair, rates, Point::new(0.5, 0.5), 0, 10.0, 3, tol).unwrap();
        let b = simulate_pdmp(&pair, rates, Point::new(0.5, 0.5), 0, 10.0, 3, 0.5 * tol).unwrap();
        // Same seed, so identical jump schedules; only integration differs.
        assert_eq!(a.jump_times, b.jump_times);
        let dist = a.final_state().dist(b.final_state());
        assert!(dist < 10.0 * tol, "endpoint moved by {dist:e}");
    }

    #[test]
    fn simulate_rejects_bad_inputs() {
        let pair = top_pair(5.5);
        let rates = SwitchRates::from_st(0.5, 5.0).unwrap();
        let z = Point::new(0.5, 0.5);
        assert!(matches!(
            simulate_pdmp(&pair, rates, z, 2, 10.0, 1, 1e-9),
            Err(PdmpError::BadParameter { name: "i0", .. })
        ));
        assert!(matches!(
            simulate_pdmp(&pair, rates, Point::new(0.1, -0.1), 0, 10.0, 1, 1e-9),
            Err(PdmpError::BadParameter { name: "z0", .. })
        ));
        assert!(matches!(
            simulate_pdmp(&pair, rates, z, 0, 0.0, 1, 1e-9),
            Err(PdmpError::BadParameter { name: "horizon", .. })
        ));
        assert!(matches!(
            simulate_pdmp(&pair, rates, z, 0, 10.0, 1, -1e-9),
            Err(PdmpError::BadParameter { name: "tol", .. })
        ));
    }

    #[test]
    fn arrival_convention_is_consistent_with_jump_times() {
        let pair = top_pair(5.5);
        let rates = SwitchRates::from_st(0.3, 4.0).unwrap();
        let traj =
            simulate_pdmp(&pair, rates, Point::new(0.5, 0.5), 1, 100.0, 5, 1e-8).unwrap();
        // env_indices[k] must equal i0 flipped once per jump time strictly
        // before times[k] (the row at a jump time keeps the old env).
        for (k, &t) in traj.times.iter().enumerate() {
            let flips = traj.jump_times.iter().filter(|&&jt| jt < t).count();
            let expected = (1 + flips) % 2;
            assert_eq!(usize::from(traj.env_indices[k]), expected, "row {k} at t={t}");
        }
        for w in traj.jump_times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn occupation_of_constant_trajectory_is_the_constant() {
        let z = Point::new(2.5, 0.25);
        let traj = Trajectory {
            times: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            states: vec![z; 5],
            env_indices: vec![0, 0, 1, 0, 1],
            jump_times: vec![1.0, 2.0, 3.0],
        };
        let stats = occupation_stats(&traj, 0.0).unwrap();
        assert!((stats.mean_x - 2.5).abs() < 1e-12);
        assert!((stats.mean_y - 0.25).abs() < 1e-12);
        assert_eq!(stats.min_x, 2.5);
        assert_eq!(stats.min_y, 0.25);
        // Alternating envs with equal segment lengths occupy env 1 half
        // the time.
        assert!((stats.fraction_env1 - 0.5).abs() < 1e-15);
        assert!(!stats.x_extinct && !stats.y_extinct);
    }

    #[test]
    fn occupation_window_interpolates_the_cut_segment() {
        // x(t) = 2t piecewise linearly; burn-in 0.25 cuts at t = 0.5,
        // where x = 1. Mean of 2t over [0.5, 2] is 2.5.
        let traj = Trajectory {
            times: vec![0.0, 1.0, 2.0],
            states: vec![Point::new(0.0, 1.0), Point::new(2.0, 1.0), Point::new(4.0, 1.0)],
            env_indices: vec![0, 0, 1],
            jump_times: vec![1.0],
        };
        let stats = occupation_stats(&traj, 0.25).unwrap();
        assert!((stats.mean_x - 2.5).abs() < 1e-12);
        assert!((stats.mean_y - 1.0).abs() < 1e-12);
        assert!((stats.min_x - 1.0).abs() < 1e-12, "window-start state is included");
        // Window [0.5, 2]: env 0 on (0.5, 1], env 1 on (1, 2].
        assert!((stats.fraction_env1 - 1.0 / 1.5).abs() < 1e-12);
        assert_eq!(stats.window_start, 0.5);
        assert_eq!(stats.window_end, 2.0);
    }

    #[test]
    fn occupation_flags_tiny_coordinates_as_extinct() {
        let traj = Trajectory {
            times: vec![0.0, 1.0],
            states: vec![Point::new(0.5, 0.3), Point::new(0.5, 1e-9)],
            env_indices: vec![0, 0],
            jump_times: vec![],
        };
        let stats = occupation_stats(&traj, 0.0).unwrap();
        assert!(stats.y_extinct);
        assert!(!stats.x_extinct);
    }

    #[test]
    fn occupation_rejects_degenerate_windows() {
        let single = Trajectory {
            times: vec![0.0],
            states: vec![Point::new(1.0, 1.0)],
            env_indices: vec![0],
            jump_times: vec![],
        };
        assert!(matches!(
            occupation_stats(&single, 0.0),
            Err(PdmpError::EmptyWindow { .. })
        ));
        let ok = Trajectory {
            times: vec![0.0, 1.0],
            states: vec![Point::new(1.0, 1.0); 2],
            env_indices: vec![0, 0],
            jump_times: vec![],
        };
        assert!(matches!(
            occupation_stats(&ok, 0.95),
            Err(PdmpError::BadParameter { name: "burn_in_fraction", .. })
        ));
        assert!(matches!(
            occupation_stats(&ok, f64::NAN),
            Err(PdmpError::BadParameter { name: "burn_in_fraction", .. })
        ));
    }

    #[test]
    fn manifold_runs_between_the_isoclines() {
        let env = type1_env();
        let curve = unstable_manifold(&env, 1e-10).unwrap();
        assert!(curve.samples.len() >= MANIFOLD_MIN_SAMPLES);

        // Departs from the eigenvector offset near the saddle...
        let saddle = Point::new(0.0, 0.5);
        assert!(curve.samples[0].dist(saddle) <= 1e-6);
        assert!(curve.samples[0].x > 0.0);
        // ...and lands next to the axis attractor.
        let target = Point::new(1.0, 0.0);
        assert!(curve.samples.last().unwrap().dist(target) <= 1e-6);

        // Every sample sits strictly between a x + b y = 1 and
        // c x + d y = 1.
        for p in &curve.samples {
            let upper = env.a * p.x + env.b * p.y;
            let lower = env.c * p.x + env.d * p.y;
            assert!(upper < 1.0, "ax+by = {upper} at ({}, {})", p.x, p.y);
            assert!(lower > 1.0, "cx+dy = {lower} at ({}, {})", p.x, p.y);
        }
    }

    #[test]
    fn manifold_departure_matches_the_eigen_decomposition() {
        let env = type1_env();
        let curve = unstable_manifold(&env, 1e-10).unwrap();

        // Jacobian at (0, 1/2) is [[alpha(1-b/d), 0], [-beta c/d, -beta]];
        // the unstable eigenvector has dy/dx = -beta c/(alpha(d-b)+beta d)
        // = -10/11 here. The printed slope expression is its reciprocal,
        // i.e. the dx/dy convention.
        assert!((curve.slope_dy_dx - (-10.0 / 11.0)).abs() < 1e-12);
        assert!((curve.slope_dx_dy - (-11.0 / 10.0)).abs() < 1e-12);
        assert!((curve.slope_dy_dx * curve.slope_dx_dy - 1.0).abs() < 1e-12);
        let n = curve.departure_direction.norm();
        assert!((n - 1.0).abs() < 1e-12);

        // The first polyline segment is parallel to the eigenvector.
        let seg = curve.samples[1].sub(curve.samples[0]);
        let seg = seg.scale(1.0 / seg.norm());
        assert!(seg.cross(curve.departure_direction).abs() < 1e-4);

        // Terminal approach direction has non-positive slope.
        let m = curve.samples.len();
        let tail = curve.samples[m - 1].sub(curve.samples[m - 2]);
        assert!(tail.x > 0.0);
        assert!(tail.y <= 1e-12);
    }

    #[test]
    fn manifold_rejects_non_saddle_configurations() {
        // Species swap of the Type1 env: b=2 >= d=1, no unstable direction.
        let swapped = type1_env().swap_species();
        assert!(matches!(
            unstable_manifold(&swapped, 1e-10),
            Err(PdmpError::NotASaddle { .. })
        ));
        // Saddle exists (b < d) but (1/a, 0) is not attracting (a >= c).
        let env = Environment { a: 2.0, b: 1.0, c: 1.0, d: 2.0, alpha: 1.0, beta: 1.0 };
        assert!(matches!(
            unstable_manifold(&env, 1e-10),
            Err(PdmpError::AxisNotAttracting { .. })
        ));
        assert!(matches!(
            unstable_manifold(&type1_env(), 0.0),
            Err(PdmpError::BadParameter { name: "tol", .. })
        ));
    }

    #[test]
    fn trajectory_csv_has_the_documented_shape() {
        let pair = top_pair(5.5);
        let rates = SwitchRates::from_st(0.5, 2.0).unwrap();
        let traj = simulate_pdmp(&pair, rates, Point::new(0.5, 0.5), 0, 5.0, 1, 1e-8).unwrap();
        let csv = trajectory_csv(&traj);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("time,x,y,env"));
        let first = lines.next().unwrap();
        let fields: Vec<&str> = first.split(',').collect();
        assert_eq!(fields.len(), 4);
        assert_eq!(fields[0], "0.0000000000000000e0");
        assert_eq!(fields[3], "0");
        assert_eq!(csv.lines().count(), traj.times.len() + 1);
        for line in csv.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 4);
            assert!(fields[0].parse::<f64>().unwrap().is_finite());
            assert!(fields[3] == "0" || fields[3] == "1");
        }
    }

    #[test]
    fn simulated_extinction_flags_agree_with_closed_form_regimes() {
        // Six (rho, s, t) validation points chosen with comfortable sign
        // margins on both rates; the random-extinction point asserts only
        // that exactly one species died, not which.
        let cases: [(f64, f64, f64, Regime, f64); 6] = [
            (5.5, 0.50, 1.0, Regime::ExtinctionY, 2000.0),
            (5.5, 0.35, 3.0, Regime::ExtinctionY, 2000.0),
            (5.5, 0.50, 15.0, Regime::PersistenceBoth, 2000.0),
            (5.5, 0.45, 60.0, Regime::ExtinctionX, 2500.0),
            (5.5, 0.50, 120.0, Regime::ExtinctionX, 2500.0),
            (4.5, 0.28, 16.0, Regime::RandomExtinction, 6000.0),
        ];
        for (rho, s, t, expected, horizon) in cases {
            let pair = top_pair(rho);
            let rates = SwitchRates::from_st(s, t).unwrap();
            let rate = lambda_xy(&pair, rates).unwrap();
            let regime = classify_regime(rate.lambda_x, rate.lambda_y).unwrap();
            assert_eq!(regime, expected, "closed-form regime at rho={rho}, s={s}, t={t}");

            let traj =
                simulate_pdmp(&pair, rates, Point::new(0.5, 0.5), 0, horizon, 2026, 1e-8)
                    .unwrap();
            let stats = occupation_stats(&traj, 0.9).unwrap();
            match regime {
                Regime::PersistenceBoth => {
                    assert!(!stats.x_extinct && !stats.y_extinct, "at ({s}, {t})");
                }
                Regime::ExtinctionY => {
                    assert!(stats.y_extinct && !stats.x_extinct, "at ({s}, {t})");
                }
                Regime::ExtinctionX => {
                    assert!(stats.x_extinct && !stats.y_extinct, "at ({s}, {t})");
                }
                Regime::RandomExtinction => {
                    assert!(
                        stats.x_extinct ^ stats.y_extinct,
                        "exactly one species must die at ({s}, {t}); stats: {stats:?}"
                    );
                }
            }
        }
    }
}
