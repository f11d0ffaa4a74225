//! Dormand-Prince 5(4) embedded Runge-Kutta integration for planar systems.
//!
//! The classic DOPRI5 tableau: seven stages, fifth-order propagation with an
//! embedded fourth-order error estimate, first-same-as-last (FSAL) stage
//! reuse, and step-size control by the usual mixed absolute/relative error
//! norm. Dense output between accepted steps is cubic Hermite interpolation
//! on the stored endpoint derivatives, which is plenty below the step-level
//! tolerances used here.

use crate::Point;
use thiserror::Error;

// Butcher tableau (exact rationals). The time nodes are kept for
// reference but unused: the systems integrated here are autonomous.
#[allow(dead_code)]
const C2: f64 = 1.0 / 5.0;
#[allow(dead_code)]
const C3: f64 = 3.0 / 10.0;
#[allow(dead_code)]
const C4: f64 = 4.0 / 5.0;
#[allow(dead_code)]
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
// 5th-order solution weights (also row 7 of A, giving FSAL).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Embedded 4th-order weights.
const E1: f64 = 5179.0 / 57600.0;
const E3: f64 = 7571.0 / 16695.0;
const E4: f64 = 393.0 / 640.0;
const E5: f64 = -92097.0 / 339200.0;
const E6: f64 = 187.0 / 2100.0;
const E7: f64 = 1.0 / 40.0;

#[derive(Clone, Copy, Debug)]
pub struct RkOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Hard cap on a single step; `None` leaves steps limited only by the
    /// remaining span.
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for RkOptions {
    fn default() -> Self {
        RkOptions { abs_tol: 1e-10, rel_tol: 1e-10, h_max: None, max_steps: 10_000_000 }
    }
}

impl RkOptions {
    pub fn with_tol(tol: f64) -> Self {
        RkOptions { abs_tol: tol, rel_tol: tol, ..Default::default() }
    }
}

/// One accepted integration step with endpoint derivatives.
#[derive(Clone, Copy, Debug)]
pub struct RkStep {
    pub t0: f64,
    pub t1: f64,
    pub y0: Point,
    pub y1: Point,
    pub f0: Point,
    pub f1: Point,
}

impl RkStep {
    /// Cubic Hermite interpolation at `t` in `[t0, t1]`.
    pub fn eval(&self, t: f64) -> Point {
        let h = self.t1 - self.t0;
        if h == 0.0 {
            return self.y0;
        }
        let s = (t - self.t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Point::new(
            h00 * self.y0.x + h10 * h * self.f0.x + h01 * self.y1.x + h11 * h * self.f1.x,
            h00 * self.y0.y + h10 * h * self.f0.y + h01 * self.y1.y + h11 * h * self.f1.y,
        )
    }
}

#[derive(Debug, Error)]
pub enum RkError {
    #[error("step size underflow at t={t:e} (step {h:e}); tolerance unattainable")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("exceeded {max_steps} steps at t={t:e}")]
    MaxStepsExceeded { t: f64, max_steps: usize },
    #[error("vector field returned a non-finite value at t={t:e}")]
    NonFiniteField { t: f64 },
}

/// Integrate `dy/dt = f(y)` from `t0` to `t1 >= t0`, invoking `on_step` for
/// every accepted step (in order). Returns the endpoint state.
pub fn integrate<F, S>(
    f: F,
    y0: Point,
    t_span: (f64, f64),
    opts: &RkOptions,
    mut on_step: S,
) -> Result<Point, RkError>
where
    F: Fn(Point) -> Point,
    S: FnMut(&RkStep),
{
    let (t_start, t_end) = t_span;
    assert!(t_end >= t_start, "integration runs forward in time");
    assert!(opts.abs_tol > 0.0 && opts.rel_tol >= 0.0);
    if t_end == t_start {
        return Ok(y0);
    }

    let span = t_end - t_start;
    let mut t = t_start;
    let mut y = y0;
    let mut k1 = f(y);
    if !k1.is_finite() {
        return Err(RkError::NonFiniteField { t });
    }

    // Initial step: conservative fraction of the span, shrunk if the field
    // is fast relative to the state scale; rejections tune it from there.
    let scale0 = 1.0 + y.norm();
    let rate = k1.norm() / scale0;
    let mut h = (span / 100.0).min(if rate > 0.0 { 0.1 / rate } else { span });
    if let Some(h_max) = opts.h_max {
        h = h.min(h_max);
    }
    h = h.max(f64::MIN_POSITIVE);

    let mut steps = 0usize;
    while t < t_end {
        steps += 1;
        if steps > opts.max_steps {
            return Err(RkError::MaxStepsExceeded { t, max_steps: opts.max_steps });
        }
        h = h.min(t_end - t);

        let k2 = f(y.add(k1.scale(A21 * h)));
        let k3 = f(y.add(k1.scale(A31 * h)).add(k2.scale(A32 * h)));
        let k4 = f(y
            .add(k1.scale(A41 * h))
            .add(k2.scale(A42 * h))
            .add(k3.scale(A43 * h)));
        let k5 = f(y
            .add(k1.scale(A51 * h))
            .add(k2.scale(A52 * h))
            .add(k3.scale(A53 * h))
            .add(k4.scale(A54 * h)));
        let k6 = f(y
            .add(k1.scale(A61 * h))
            .add(k2.scale(A62 * h))
            .add(k3.scale(A63 * h))
            .add(k4.scale(A64 * h))
            .add(k5.scale(A65 * h)));
        let y_new = y
            .add(k1.scale(B1 * h))
            .add(k3.scale(B3 * h))
            .add(k4.scale(B4 * h))
            .add(k5.scale(B5 * h))
            .add(k6.scale(B6 * h));
        let k7 = f(y_new);

        if !(k2.is_finite()
            && k3.is_finite()
            && k4.is_finite()
            && k5.is_finite()
            && k6.is_finite()
            && k7.is_finite()
            && y_new.is_finite())
        {
            return Err(RkError::NonFiniteField { t });
        }

        // Embedded 4th-order comparison value.
        let y_low = y
            .add(k1.scale(E1 * h))
            .add(k3.scale(E3 * h))
            .add(k4.scale(E4 * h))
            .add(k5.scale(E5 * h))
            .add(k6.scale(E6 * h))
            .add(k7.scale(E7 * h));

        let err_x = (y_new.x - y_low.x)
            / (opts.abs_tol + opts.rel_tol * y.x.abs().max(y_new.x.abs()));
        let err_y = (y_new.y - y_low.y)
            / (opts.abs_tol + opts.rel_tol * y.y.abs().max(y_new.y.abs()));
        let err = (0.5 * (err_x * err_x + err_y * err_y)).sqrt();

        if err <= 1.0 {
            let step = RkStep { t0: t, t1: t + h, y0: y, y1: y_new, f0: k1, f1: k7 };
            on_step(&step);
            t += h;
            y = y_new;
            k1 = k7; // FSAL
        }

        // PI-free classic controller with the standard safety clamp.
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if let Some(h_max) = opts.h_max {
            h = h.min(h_max);
        }
        if t < t_end && h < 1e-14 * (1.0 + t.abs()) {
            return Err(RkError::StepSizeUnderflow { t, h });
        }
    }
    Ok(y)
}
