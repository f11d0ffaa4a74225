//! Invasion rates of the rare species against a resident on its axis.
//!
//! When species y is absent, x follows the switched logistic equation
//! `dx/dt = alpha_i x (1 - a_i x)` and settles into an explicit stationary
//! law: with `gamma_i = lambda_i / alpha_i`, `u = gamma0/(gamma0+gamma1)`
//! and `v = gamma0+gamma1`, the reciprocal `1/X` is distributed as
//! `a_lo + delta U` where `U ~ Beta(uv, (1-u)v)` and `delta = a_hi - a_lo`.
//! The invasion rate of y is the stationary average of its per-capita
//! growth `beta_i (1 - c_i x)`, which collapses to
//!
//! ```text
//! Lambda_y = E[phi(U)] / (delta ((1-u)/alpha0 + u/alpha1)),
//! phi(y) = A2/(a_lo + delta y) + A1 + A0 (a_lo + delta y),
//! ```
//!
//! an expectation of a convex-or-concave function of a Beta variable.
//! `Lambda_x` is the same construction with the species roles exchanged:
//! resident `(beta_i, d_i)`, invader `(alpha_i, b_i)`.
//!
//! Four evaluation paths are provided and cross-checked against each other:
//! a series in Beta moments (primary), adaptive quadrature in the Beta
//! variable (fallback and witness), the raw stationary-density integral in
//! the resident variable, and a Monte Carlo time average over the exact
//! piecewise-logistic process.

use crate::env::{EnvPair, SwitchRates};
use crate::numeric::quad::{adaptive_gk15, QuadError};
use crate::numeric::special::{beta_inc_reg, ln_beta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InvasionError {
    #[error("resident is degenerate (k0 == k1 == {k}); use the analytic point-mass branch")]
    DegenerateResident { k: f64 },
    #[error(
        "series truncation cap of {max_terms} terms reached (decay ratio {ratio:.6}); \
         fall back to quadrature"
    )]
    ToleranceUnreachable { max_terms: usize, ratio: f64 },
    #[error("quadrature failure while evaluating {context}: {source}")]
    QuadratureFailure {
        context: &'static str,
        #[source]
        source: QuadError,
    },
    #[error("invalid parameter `{name}`: {value}")]
    BadParameter { name: &'static str, value: f64 },
}

/// Resident species parameters: growth rates `r_i` and self-competition
/// coefficients `k_i` of the one-dimensional logistic dynamics on its axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidentSpec {
    pub r0: f64,
    pub r1: f64,
    pub k0: f64,
    pub k1: f64,
}

/// Invader parameters: growth rates `g_i` and cross-competition
/// coefficients `h_i` entering the linearized growth `g_i (1 - h_i x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvaderSpec {
    pub g0: f64,
    pub g1: f64,
    pub h0: f64,
    pub h1: f64,
}

impl ResidentSpec {
    pub fn new(r0: f64, r1: f64, k0: f64, k1: f64) -> Result<Self, InvasionError> {
        for (name, value) in [("r0", r0), ("r1", r1), ("k0", k0), ("k1", k1)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(InvasionError::BadParameter { name, value });
            }
        }
        Ok(ResidentSpec { r0, r1, k0, k1 })
    }
}

impl InvaderSpec {
    pub fn new(g0: f64, g1: f64, h0: f64, h1: f64) -> Result<Self, InvasionError> {
        for (name, value) in [("g0", g0), ("g1", g1), ("h0", h0), ("h1", h1)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(InvasionError::BadParameter { name, value });
            }
        }
        Ok(InvaderSpec { g0, g1, h0, h1 })
    }
}

/// Resident/invader split for the invasion rate of y (x resident).
pub fn y_role(pair: &EnvPair) -> (ResidentSpec, InvaderSpec) {
    let (e0, e1) = (pair.env0(), pair.env1());
    (
        ResidentSpec { r0: e0.alpha, r1: e1.alpha, k0: e0.a, k1: e1.a },
        InvaderSpec { g0: e0.beta, g1: e1.beta, h0: e0.c, h1: e1.c },
    )
}

/// Resident/invader split for the invasion rate of x (y resident).
pub fn x_role(pair: &EnvPair) -> (ResidentSpec, InvaderSpec) {
    let (e0, e1) = (pair.env0(), pair.env1());
    (
        ResidentSpec { r0: e0.beta, r1: e1.beta, k0: e0.d, k1: e1.d },
        InvaderSpec { g0: e0.alpha, g1: e1.alpha, h0: e0.b, h1: e1.b },
    )
}

/// The rational function `phi(y) = A2/(a_lo+delta y) + A1 + A0 (a_lo+delta y)`
/// whose Beta expectation gives the invasion rate (up to a positive factor).
///
/// `A2, A1, A0` are the coefficients of the quadratic `P(x) = A2 x^2 + A1 x
/// + A0` in the resident variable; `phi(y) = P(p(y))/p(y)` with
/// `p(y) = 1/(a_lo + delta y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiFunction {
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
    pub a_lo: f64,
    pub a_hi: f64,
    pub delta: f64,
}

/// Expand the quadratic `P(x) = (g1/r1)(1-h1 x)(1-k0 x) - (g0/r0)(1-h0 x)(1-k1 x)`
/// into the coefficients of [`PhiFunction`]. Requires the canonical ordering
/// `k0 < k1`; relabel with the switch rates first if needed.
pub fn phi_build(res: &ResidentSpec, inv: &InvaderSpec) -> Result<PhiFunction, InvasionError> {
    if res.k0 == res.k1 {
        return Err(InvasionError::DegenerateResident { k: res.k0 });
    }
    if res.k0 > res.k1 {
        return Err(InvasionError::BadParameter { name: "k0 (requires k0 < k1)", value: res.k0 });
    }
    let w1 = inv.g1 / res.r1;
    let w0 = inv.g0 / res.r0;
    Ok(PhiFunction {
        a2: w1 * inv.h1 * res.k0 - w0 * inv.h0 * res.k1,
        a1: -w1 * (inv.h1 + res.k0) + w0 * (inv.h0 + res.k1),
        a0: w1 - w0,
        a_lo: res.k0,
        a_hi: res.k1,
        delta: res.k1 - res.k0,
    })
}

pub fn phi_eval(phi: &PhiFunction, y: f64) -> f64 {
    let w = phi.a_lo + phi.delta * y;
    phi.a2 / w + phi.a1 + phi.a0 * w
}

/// Series truncation cap; decay ratios close to 1 (resident coefficients
/// `k1/k0` very large) would need more terms and fall back to quadrature.
pub const SERIES_MAX_TERMS: usize = 1_000_000;

/// `E[phi(U_{u,v})]` by the moment series.
///
/// Writing `1/(a_lo+delta U) = 1/(a_hi - delta (1-U))` and expanding the
/// geometric series gives `(1/a_hi) sum_k (delta/a_hi)^k m_k` with
/// `m_k = E[(1-U)^k] = prod_{r<k} ((1-u)v+r)/(v+r)`. All terms are
/// positive and `m_k <= 1` decreases, so the tail after `K` terms is at
/// most `(delta/a_hi)^{K+1} m_{K+1} / (1 - delta/a_hi)`, which is used as
/// the stopping rule (scaled by `|A2|/a_hi` to bound the error on
/// `E[phi]`).
pub fn beta_expectation_series(
    phi: &PhiFunction,
    u: f64,
    v: f64,
    tol: f64,
) -> Result<f64, InvasionError> {
    beta_expectation_series_detailed(phi, u, v, tol).map(|(value, _, _)| value)
}

/// Series evaluation returning `(value, error_bound, terms_used)`.
pub fn beta_expectation_series_detailed(
    phi: &PhiFunction,
    u: f64,
    v: f64,
    tol: f64,
) -> Result<(f64, f64, usize), InvasionError> {
    check_uv(u, v)?;
    if !(tol > 0.0) {
        return Err(InvasionError::BadParameter { name: "tol", value: tol });
    }
    let affine = phi.a1 + phi.a0 * (phi.a_lo + phi.delta * u);
    if phi.a2 == 0.0 {
        // E[U] = u makes the affine part exact; no series needed.
        return Ok((affine, 0.0, 0));
    }
    let rho = phi.delta / phi.a_hi;
    let qv = (1.0 - u) * v;
    let scale = phi.a2.abs() / phi.a_hi;
    let mut sum = 0.0_f64;
    let mut m = 1.0_f64; // m_k = E[(1-U)^k]
    let mut pw = 1.0_f64; // rho^k
    let mut k = 0usize;
    loop {
        sum += pw * m;
        let m_next = m * ((qv + k as f64) / (v + k as f64));
        let tail = pw * rho * m_next / (1.0 - rho);
        if scale * tail <= tol {
            let e_inv = sum / phi.a_hi;
            return Ok((phi.a2 * e_inv + affine, scale * tail, k + 1));
        }
        if k + 1 >= SERIES_MAX_TERMS {
            return Err(InvasionError::ToleranceUnreachable {
                max_terms: SERIES_MAX_TERMS,
                ratio: rho,
            });
        }
        m = m_next;
        pw *= rho;
        k += 1;
    }
}

/// Absolute error target of the quadrature evaluation path.
pub const QUADRATURE_ABS_TOL: f64 = 1e-11;

/// `E[phi(U_{u,v})]` by adaptive quadrature of the Beta integral.
pub fn beta_expectation_quadrature(
    phi: &PhiFunction,
    u: f64,
    v: f64,
) -> Result<f64, InvasionError> {
    beta_expectation_quadrature_detailed(phi, u, v).map(|(value, _)| value)
}

/// Quadrature evaluation returning `(value, achieved_error_estimate)`.
pub fn beta_expectation_quadrature_detailed(
    phi: &PhiFunction,
    u: f64,
    v: f64,
) -> Result<(f64, f64), InvasionError> {
    let phi = *phi;
    beta_expectation_of(move |y| phi_eval(&phi, y), u, v, QUADRATURE_ABS_TOL)
}

/// `E[f(U_{u,v})]` for an arbitrary integrable `f`, by adaptive quadrature
/// with endpoint-singularity-absorbing substitutions.
///
/// The density `y^{p-1}(1-y)^{q-1}/B(p,q)` (with `p = uv`, `q = (1-u)v`)
/// has an integrable endpoint singularity whenever an exponent is below 1;
/// substituting `w = y^p` near 0 (and symmetrically `w = (1-y)^q` near 1)
/// turns `y^{p-1} dy` into `dw/p` and removes it. At large `v` the density
/// instead concentrates around the mean `u` with standard deviation
/// `sqrt(u(1-u)/(v+1))`; the integration interval is pre-split at
/// mean-centered multiples of that width so the adaptive rule cannot step
/// over the peak. The two regimes are exclusive (an exponent below 1 caps
/// `v`), so each half of `[0,1]` uses exactly one strategy. Density values
/// are formed in log space to stay finite for large `v`.
pub fn beta_expectation_of(
    f: impl Fn(f64) -> f64,
    u: f64,
    v: f64,
    abs_tol: f64,
) -> Result<(f64, f64), InvasionError> {
    check_uv(u, v)?;
    let p = u * v;
    let q = (1.0 - u) * v;
    let ln_b = ln_beta(p, q);
    let max_segments = 4000;

    // Mean-centered pre-split points, used on halves without substitution.
    let width = (u * (1.0 - u) / (v + 1.0)).sqrt();
    let mut splits: Vec<f64> = Vec::new();
    for mult in [-8.0, -4.0, -2.0, -1.0, 1.0, 2.0, 4.0, 8.0] {
        let y = u + mult * width;
        if y > 1e-12 && y < 1.0 - 1e-12 {
            splits.push(y);
        }
    }
    splits.sort_by(f64::total_cmp);
    let segments_in = |lo: f64, hi: f64| -> Vec<(f64, f64)> {
        let mut pts = vec![lo];
        pts.extend(splits.iter().copied().filter(|&y| y > lo && y < hi));
        pts.push(hi);
        pts.windows(2).map(|w| (w[0], w[1])).collect()
    };

    let direct =
        |y: f64| f(y) * ((p - 1.0) * y.ln() + (q - 1.0) * (-y).ln_1p() - ln_b).exp();

    let mut total = 0.0_f64;
    let mut err = 0.0_f64;

    // Left half [0, 1/2].
    if p < 1.0 {
        // w = y^p absorbs the left endpoint singularity exactly.
        let left = |w: f64| {
            let y = w.powf(1.0 / p);
            f(y) * ((q - 1.0) * (-y).ln_1p() - ln_b).exp() / p
        };
        let (val, e) = integrate_piece(&left, 0.0, 0.5_f64.powf(p), abs_tol / 2.0, max_segments)?;
        total += val;
        err += e;
    } else {
        let segs = segments_in(0.0, 0.5);
        let per_piece = abs_tol / (2.0 * segs.len() as f64);
        for (lo, hi) in segs {
            let (val, e) = integrate_piece(&direct, lo, hi, per_piece, max_segments)?;
            total += val;
            err += e;
        }
    }

    // Right half [1/2, 1].
    if q < 1.0 {
        // w = (1-y)^q symmetrically.
        let right = |w: f64| {
            let t = w.powf(1.0 / q);
            f(1.0 - t) * ((p - 1.0) * (-t).ln_1p() - ln_b).exp() / q
        };
        let (val, e) = integrate_piece(&right, 0.0, 0.5_f64.powf(q), abs_tol / 2.0, max_segments)?;
        total += val;
        err += e;
    } else {
        let segs = segments_in(0.5, 1.0);
        let per_piece = abs_tol / (2.0 * segs.len() as f64);
        for (lo, hi) in segs {
            let (val, e) = integrate_piece(&direct, lo, hi, per_piece, max_segments)?;
            total += val;
            err += e;
        }
    }
    Ok((total, err))
}

fn integrate_piece(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    max_segments: usize,
) -> Result<(f64, f64), InvasionError> {
    let r = adaptive_gk15(f, lo, hi, abs_tol, max_segments)
        .map_err(|source| InvasionError::QuadratureFailure { context: "beta expectation", source })?;
    Ok((r.value, r.abs_error))
}

fn check_uv(u: f64, v: f64) -> Result<(), InvasionError> {
    if !(u > 0.0 && u < 1.0 && u.is_finite()) {
        return Err(InvasionError::BadParameter { name: "u", value: u });
    }
    if !(v > 0.0 && v.is_finite()) {
        return Err(InvasionError::BadParameter { name: "v", value: v });
    }
    Ok(())
}

/// Evaluation-path tag, ordered by how far down the fallback chain the
/// computation had to go.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EvalMethod {
    DegenerateAnalytic,
    Series,
    Quadrature,
}

impl EvalMethod {
    pub fn label(self) -> &'static str {
        match self {
            EvalMethod::DegenerateAnalytic => "degenerate-analytic",
            EvalMethod::Series => "series",
            EvalMethod::Quadrature => "quadrature",
        }
    }
}

impl std::fmt::Display for EvalMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One evaluated invasion rate with its path tag and error bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEval {
    pub value: f64,
    pub method: EvalMethod,
    pub error_estimate: f64,
}

/// Default absolute tolerance of [`invasion_rate`].
pub const DEFAULT_RATE_TOL: f64 = 1e-12;

/// Invasion rate of the invader against the stationary resident, via the
/// Beta-expectation formula (series first, quadrature fallback).
pub fn invasion_rate(
    res: &ResidentSpec,
    inv: &InvaderSpec,
    rates: SwitchRates,
) -> Result<RateEval, InvasionError> {
    invasion_rate_with_tol(res, inv, rates, DEFAULT_RATE_TOL)
}

pub fn invasion_rate_with_tol(
    res: &ResidentSpec,
    inv: &InvaderSpec,
    rates: SwitchRates,
    tol: f64,
) -> Result<RateEval, InvasionError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(InvasionError::BadParameter { name: "tol", value: tol });
    }
    if res.k0 == res.k1 {
        // Point-mass resident: X = 1/k regardless of the environment, so
        // the average is over the Bernoulli environment chain alone.
        let k = res.k0;
        let pi1 = rates.lambda0() / (rates.lambda0() + rates.lambda1());
        let pi0 = 1.0 - pi1;
        let value = pi0 * inv.g0 * (1.0 - inv.h0 / k) + pi1 * inv.g1 * (1.0 - inv.h1 / k);
        return Ok(RateEval {
            value,
            method: EvalMethod::DegenerateAnalytic,
            error_estimate: 4.0 * f64::EPSILON * value.abs(),
        });
    }
    // Canonicalize to k0 < k1, carrying the rates along.
    let (res, inv, rates) = if res.k0 > res.k1 {
        (
            ResidentSpec { r0: res.r1, r1: res.r0, k0: res.k1, k1: res.k0 },
            InvaderSpec { g0: inv.g1, g1: inv.g0, h0: inv.h1, h1: inv.h0 },
            rates.swapped(),
        )
    } else {
        (*res, *inv, rates)
    };
    let gamma0 = rates.lambda0() / res.r0;
    let gamma1 = rates.lambda1() / res.r1;
    let u = gamma0 / (gamma0 + gamma1);
    let v = gamma0 + gamma1;
    let phi = phi_build(&res, &inv)?;
    let dd = phi.delta * ((1.0 - u) / res.r0 + u / res.r1);
    // Error budget on E[phi] that delivers `tol` on the rate.
    let e_tol = tol * dd;
    match beta_expectation_series_detailed(&phi, u, v, e_tol) {
        Ok((e_phi, bound, _)) => Ok(RateEval {
            value: e_phi / dd,
            method: EvalMethod::Series,
            error_estimate: bound / dd,
        }),
        Err(InvasionError::ToleranceUnreachable { .. }) => {
            let (e_phi, achieved) = beta_expectation_quadrature_detailed(&phi, u, v)?;
            Ok(RateEval {
                value: e_phi / dd,
                method: EvalMethod::Quadrature,
                error_estimate: achieved / dd,
            })
        }
        Err(e) => Err(e),
    }
}

/// Both invasion rates of a pair at the given switch rates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvasionResult {
    pub lambda_x: f64,
    pub lambda_y: f64,
    /// Tag of the weakest evaluation path used for either rate.
    pub method: EvalMethod,
    /// Max of the two absolute-error bounds.
    pub error_estimate: f64,
}

pub fn lambda_xy(pair: &EnvPair, rates: SwitchRates) -> Result<InvasionResult, InvasionError> {
    lambda_xy_with_tol(pair, rates, DEFAULT_RATE_TOL)
}

pub fn lambda_xy_with_tol(
    pair: &EnvPair,
    rates: SwitchRates,
    tol: f64,
) -> Result<InvasionResult, InvasionError> {
    let (res_y, inv_y) = y_role(pair);
    let ev_y = invasion_rate_with_tol(&res_y, &inv_y, rates, tol)?;
    let (res_x, inv_x) = x_role(pair);
    let ev_x = invasion_rate_with_tol(&res_x, &inv_x, rates, tol)?;
    Ok(InvasionResult {
        lambda_x: ev_x.value,
        lambda_y: ev_y.value,
        method: ev_x.method.max(ev_y.method),
        error_estimate: ev_x.error_estimate.max(ev_y.error_estimate),
    })
}

/// Invasion rate by direct quadrature of the stationary density in the
/// resident variable `x` over `(p1, p0)`, `p_i = 1/k_i`:
///
/// ```text
/// Lambda = Int P(x) theta(x) dx / Int [(k1/r0)(x-p1) + (k0/r1)(p0-x)] theta(x) dx,
/// theta(x) = (p0-x)^{gamma0-1} (x-p1)^{gamma1-1} x^{-gamma0-gamma1-1},
/// ```
///
/// with endpoint substitutions `m = (p0-x)^{gamma0}` / `m = (x-p1)^{gamma1}`
/// when an exponent is below 1. The weight is evaluated in log space with a
/// common shift (which cancels in the ratio) so large `gamma_i` cannot
/// overflow. Kept as an independent witness for the Beta-expectation path.
pub fn invasion_rate_direct(
    res: &ResidentSpec,
    inv: &InvaderSpec,
    rates: SwitchRates,
) -> Result<f64, InvasionError> {
    if res.k0 == res.k1 {
        return Err(InvasionError::DegenerateResident { k: res.k0 });
    }
    let (res, inv, rates) = if res.k0 > res.k1 {
        (
            ResidentSpec { r0: res.r1, r1: res.r0, k0: res.k1, k1: res.k0 },
            InvaderSpec { g0: inv.g1, g1: inv.g0, h0: inv.h1, h1: inv.h0 },
            rates.swapped(),
        )
    } else {
        (*res, *inv, rates)
    };
    let gamma0 = rates.lambda0() / res.r0;
    let gamma1 = rates.lambda1() / res.r1;
    let p0 = 1.0 / res.k0;
    let p1 = 1.0 / res.k1;
    let mid = 0.5 * (p0 + p1);

    let ln_theta = move |x: f64| {
        (gamma0 - 1.0) * (p0 - x).ln() + (gamma1 - 1.0) * (x - p1).ln()
            - (gamma0 + gamma1 + 1.0) * x.ln()
    };
    // Common log shift from interior samples plus the mapped Beta mean
    // (where the weight concentrates for large gamma).
    let u = gamma0 / (gamma0 + gamma1);
    let mut shift = f64::NEG_INFINITY;
    for j in 1..=15 {
        let x = p1 + (p0 - p1) * j as f64 / 16.0;
        shift = shift.max(ln_theta(x));
    }
    let x_mean = 1.0 / (res.k0 + (res.k1 - res.k0) * u);
    if x_mean > p1 && x_mean < p0 {
        shift = shift.max(ln_theta(x_mean));
    }

    let p_quad = {
        let w1 = inv.g1 / res.r1;
        let w0 = inv.g0 / res.r0;
        let (h0, h1) = (inv.h0, inv.h1);
        let (k0, k1) = (res.k0, res.k1);
        move |x: f64| w1 * (1.0 - h1 * x) * (1.0 - k0 * x) - w0 * (1.0 - h0 * x) * (1.0 - k1 * x)
    };
    let z_fun = {
        let (r0, r1) = (res.r0, res.r1);
        let (k0, k1) = (res.k0, res.k1);
        move |x: f64| (k1 / r0) * (x - p1) + (k0 / r1) * (p0 - x)
    };

    // Mean-centered pre-splits mapped from the u-space concentration points.
    let v = gamma0 + gamma1;
    let width = (u * (1.0 - u) / (v + 1.0)).sqrt();
    let mut inner_splits: Vec<f64> = Vec::new();
    for mult in [-8.0, -4.0, -2.0, -1.0, 1.0, 2.0, 4.0, 8.0] {
        let y = u + mult * width;
        if y > 1e-12 && y < 1.0 - 1e-12 {
            inner_splits.push(1.0 / (res.k0 + (res.k1 - res.k0) * y));
        }
    }
    inner_splits.sort_by(f64::total_cmp);

    // Integrate weight * g over (p1, p0) with the endpoint strategies.
    let integrate = |g: &dyn Fn(f64) -> f64, abs_tol: f64| -> Result<f64, InvasionError> {
        let max_segments = 4000;
        let mut total = 0.0;
        // Left endpoint p1, exponent gamma1 - 1.
        if gamma1 < 1.0 {
            let m_hi = (mid - p1).powf(gamma1);
            let left = |m: f64| {
                let x = p1 + m.powf(1.0 / gamma1);
                let lw = (gamma0 - 1.0) * (p0 - x).ln()
                    - (gamma0 + gamma1 + 1.0) * x.ln()
                    - shift;
                g(x) * lw.exp() / gamma1
            };
            let r = adaptive_gk15(left, 0.0, m_hi, abs_tol / 2.0, max_segments).map_err(
                |source| InvasionError::QuadratureFailure { context: "direct integral", source },
            )?;
            total += r.value;
        } else {
            let mut pts = vec![p1];
            pts.extend(inner_splits.iter().copied().filter(|&x| x > p1 && x < mid));
            pts.push(mid);
            let n = pts.len() - 1;
            for w in pts.windows(2) {
                let r = adaptive_gk15(
                    |x| g(x) * (ln_theta(x) - shift).exp(),
                    w[0],
                    w[1],
                    abs_tol / (2.0 * n as f64),
                    max_segments,
                )
                .map_err(|source| InvasionError::QuadratureFailure {
                    context: "direct integral",
                    source,
                })?;
                total += r.value;
            }
        }
        // Right endpoint p0, exponent gamma0 - 1.
        if gamma0 < 1.0 {
            let m_hi = (p0 - mid).powf(gamma0);
            let right = |m: f64| {
                let x = p0 - m.powf(1.0 / gamma0);
                let lw = (gamma1 - 1.0) * (x - p1).ln()
                    - (gamma0 + gamma1 + 1.0) * x.ln()
                    - shift;
                g(x) * lw.exp() / gamma0
            };
            let r = adaptive_gk15(right, 0.0, m_hi, abs_tol / 2.0, max_segments).map_err(
                |source| InvasionError::QuadratureFailure { context: "direct integral", source },
            )?;
            total += r.value;
        } else {
            let mut pts = vec![mid];
            pts.extend(inner_splits.iter().copied().filter(|&x| x > mid && x < p0));
            pts.push(p0);
            let n = pts.len() - 1;
            for w in pts.windows(2) {
                let r = adaptive_gk15(
                    |x| g(x) * (ln_theta(x) - shift).exp(),
                    w[0],
                    w[1],
                    abs_tol / (2.0 * n as f64),
                    max_segments,
                )
                .map_err(|source| InvasionError::QuadratureFailure {
                    context: "direct integral",
                    source,
                })?;
                total += r.value;
            }
        }
        Ok(total)
    };

    // First pass at loose tolerance fixes the magnitudes, second pass
    // tightens absolutely against them.
    let z1 = integrate(&z_fun, 1e-4)?;
    let n1 = integrate(&p_quad, 1e-4 * z1.abs().max(1.0))?;
    let scale = z1.abs().max(n1.abs()).max(1e-300);
    let z2 = integrate(&z_fun, 1e-12 * scale)?;
    let n2 = integrate(&p_quad, 1e-12 * scale)?;
    Ok(n2 / z2)
}

/// Closed-form logistic step: the solution of `dx/dt = r x (1 - k x)`
/// after time `dt`, in the overflow-safe form
/// `x(dt) = x0 / (k x0 + (1 - k x0) e^{-r dt})`.
pub fn logistic_step(x0: f64, r: f64, k: f64, dt: f64) -> f64 {
    let denom = k * x0 + (1.0 - k * x0) * (-r * dt).exp();
    x0 / denom
}

/// Logistic step together with the exact time integral
/// `Int_0^dt x(t) dt = dt/k + ln(x0/x(dt)) / (r k)`.
pub fn logistic_step_with_integral(x0: f64, r: f64, k: f64, dt: f64) -> (f64, f64) {
    let denom = k * x0 + (1.0 - k * x0) * (-r * dt).exp();
    (x0 / denom, dt / k + denom.ln() / (r * k))
}

/// Monte Carlo estimate of the invasion rate: exact piecewise-logistic
/// simulation of the resident PDMP and exact per-piece integration of the
/// invader growth, time-averaged after a burn-in of 10% of the horizon.
/// Returns `(estimate, standard_error)` over the replicates; each
/// replicate uses an independent random stream derived from `(seed,
/// replicate_index)`, so the result does not depend on scheduling.
pub fn mc_invasion(
    res: &ResidentSpec,
    inv: &InvaderSpec,
    rates: SwitchRates,
    horizon: f64,
    replicates: usize,
    seed: u64,
) -> Result<(f64, f64), InvasionError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(InvasionError::BadParameter { name: "horizon", value: horizon });
    }
    if replicates < 2 {
        return Err(InvasionError::BadParameter {
            name: "replicates (need >= 2)",
            value: replicates as f64,
        });
    }
    let burn = 0.1 * horizon;
    let pi1 = rates.lambda0() / (rates.lambda0() + rates.lambda1());
    let x_init = 0.5 * (1.0 / res.k0 + 1.0 / res.k1);
    let res = *res;
    let inv = *inv;
    let means: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep);
            let mut t = 0.0_f64;
            let mut x = x_init;
            let mut env: usize = usize::from(rng.gen::<f64>() < pi1);
            let mut acc = 0.0_f64;
            while t < horizon {
                let (lam, r, k, g, h) = match env {
                    0 => (rates.lambda0(), res.r0, res.k0, inv.g0, inv.h0),
                    _ => (rates.lambda1(), res.r1, res.k1, inv.g1, inv.h1),
                };
                let tau = -(1.0 - rng.gen::<f64>()).ln() / lam;
                let t_end = (t + tau).min(horizon);
                if t_end > burn {
                    let t_start = t.max(burn);
                    let x_start =
                        if t_start > t { logistic_step(x, r, k, t_start - t) } else { x };
                    let dt = t_end - t_start;
                    let (x_next, int_x) = logistic_step_with_integral(x_start, r, k, dt);
                    acc += g * (dt - h * int_x);
                    x = x_next;
                } else {
                    x = logistic_step(x, r, k, t_end - t);
                }
                t = t_end;
                if t < horizon {
                    env ^= 1;
                }
            }
            acc / (horizon - burn)
        })
        .collect();
    let n = means.len() as f64;
    let mean = means.iter().sum::<f64>() / n;
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Numerical witness of the convex-order comparison `U_{u,v'} <=_cvx
/// U_{u,v}` for `v < v'` (same mean, less spread at larger `v`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvexOrderReport {
    /// Largest value of `J_{v'}(x) - J_v(x)` over the grid, where
    /// `J_w(x) = Int_0^x F_{U_{u,w}}(t) dt`; convex order requires <= 0.
    pub max_violation: f64,
    /// Grid point attaining the max.
    pub worst_x: f64,
    /// Number of grid points checked.
    pub checked: usize,
}

/// Integrated CDF `Int_0^x F_{U_{u,v}}(t) dt` in closed form:
/// `x I_x(p, q) - u I_x(p+1, q)` with `p = uv`, `q = (1-u)v`.
pub fn beta_integrated_cdf(u: f64, v: f64, x: f64) -> f64 {
    let p = u * v;
    let q = (1.0 - u) * v;
    x * beta_inc_reg(p, q, x) - u * beta_inc_reg(p + 1.0, q, x)
}

pub fn beta_convex_order_check(
    u: f64,
    v: f64,
    v_prime: f64,
    grid: usize,
) -> Result<ConvexOrderReport, InvasionError> {
    check_uv(u, v)?;
    check_uv(u, v_prime)?;
    if v_prime < v {
        return Err(InvasionError::BadParameter { name: "v_prime (need >= v)", value: v_prime });
    }
    if grid == 0 {
        return Err(InvasionError::BadParameter { name: "grid", value: 0.0 });
    }
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst_x = f64::NAN;
    for j in 1..=grid {
        let x = j as f64 / (grid + 1) as f64;
        let violation = beta_integrated_cdf(u, v_prime, x) - beta_integrated_cdf(u, v, x);
        if violation > max_violation {
            max_violation = violation;
            worst_x = x;
        }
    }
    Ok(ConvexOrderReport { max_violation, worst_x, checked: grid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{top_pair, EnvPair, Environment};

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    /// Frozen reference values for the top pair at s=0.5, t=10, confirmed
    /// by three independent evaluation paths (series, quadrature in the
    /// Beta variable, quadrature in the resident variable) and by the
    /// closed form 1.5*(11.2 - 146*(1/24 + ln(3)/32)).
    const LAMBDA_Y_REF: f64 = 0.15637214942762430;
    const LAMBDA_X_REF: f64 = 0.21036282188492066;

    #[test]
    fn phi_build_top_pair_y_role() {
        let pair = top_pair(5.5);
        let (res, inv) = y_role(&pair);
        let phi = phi_build(&res, &inv).unwrap();
        assert!((phi.a2 - (-29.2)).abs() < 1e-12);
        assert!((phi.a1 - 24.0).abs() < 1e-12);
        assert!((phi.a0 - (-4.8)).abs() < 1e-12);
        assert_eq!(phi.a_lo, 1.0);
        assert_eq!(phi.a_hi, 3.0);
        assert_eq!(phi.delta, 2.0);
        // phi finite on [0,1].
        let m = (0..=100)
            .map(|i| phi_eval(&phi, i as f64 / 100.0).abs())
            .fold(0.0_f64, f64::max);
        assert!(m.is_finite());
    }

    #[test]
    fn phi_build_errors() {
        let res = ResidentSpec::new(1.0, 1.0, 2.0, 2.0).unwrap();
        let inv = InvaderSpec::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(phi_build(&res, &inv), Err(InvasionError::DegenerateResident { .. })));
        let res = ResidentSpec::new(1.0, 1.0, 3.0, 2.0).unwrap();
        assert!(matches!(phi_build(&res, &inv), Err(InvasionError::BadParameter { .. })));
    }

    #[test]
    fn phi_special_structure() {
        // g0/r0 = g1/r1 and h0 = h1 force A0 = 0 and A2 = (g/r) h (k0-k1) < 0.
        let res = ResidentSpec::new(2.0, 4.0, 1.0, 3.0).unwrap();
        let inv = InvaderSpec::new(6.0, 12.0, 1.5, 1.5).unwrap();
        let phi = phi_build(&res, &inv).unwrap();
        assert_eq!(phi.a0, 0.0);
        assert!((phi.a2 - 3.0 * 1.5 * (1.0 - 3.0)).abs() < 1e-12);
        assert!(phi.a2 < 0.0);
    }

    #[test]
    fn phi_eval_endpoints() {
        let phi = PhiFunction { a2: -29.2, a1: 24.0, a0: -4.8, a_lo: 1.0, a_hi: 3.0, delta: 2.0 };
        assert!((phi_eval(&phi, 0.0) - (-29.2 + 24.0 - 4.8)).abs() < 1e-12);
        assert!((phi_eval(&phi, 1.0) - (-29.2 / 3.0 + 24.0 - 14.4)).abs() < 1e-12);
    }

    #[test]
    fn phi_sign_matches_interval_membership() {
        // phi at the u-image of s has the sign of a_s - c_s.
        let pair = top_pair(5.5);
        let (res, inv) = y_role(&pair);
        let phi = phi_build(&res, &inv).unwrap();
        let iv = pair.intervals();
        for k in 1..100 {
            let s = k as f64 / 100.0;
            let (us, _) = pair.st_to_uv(s, 1.0);
            let val = phi_eval(&phi, us);
            let mixed = pair.mix(s).unwrap();
            let gap = mixed.a - mixed.c;
            if gap.abs() > 1e-10 {
                assert_eq!(val > 0.0, gap > 0.0, "s={s}");
                assert_eq!(val > 0.0, iv.i_contains(s), "s={s}");
            }
        }
    }

    #[test]
    fn series_matches_quadrature() {
        let pair = top_pair(5.5);
        let (res, inv) = y_role(&pair);
        let phi = phi_build(&res, &inv).unwrap();
        let (u, v) = (5.0 / 6.0, 6.0);
        let series = beta_expectation_series(&phi, u, v, 1e-12).unwrap();
        let quad = beta_expectation_quadrature(&phi, u, v).unwrap();
        assert!((series - quad).abs() <= 1e-10, "series={series} quad={quad}");
        // Frozen value of E[phi] = Lambda_y * delta * ((1-u)/r0 + u/r1).
        assert!(rel_close(series, LAMBDA_Y_REF * 2.0 / 3.0, 1e-12));
    }

    #[test]
    fn series_constant_phi_exact() {
        let phi = PhiFunction { a2: 0.0, a1: 7.25, a0: 0.0, a_lo: 1.0, a_hi: 3.0, delta: 2.0 };
        let (value, err, terms) =
            beta_expectation_series_detailed(&phi, 0.3, 2.0, 1e-14).unwrap();
        assert_eq!(value, 7.25);
        assert_eq!(err, 0.0);
        assert_eq!(terms, 0);
    }

    #[test]
    fn series_tiny_delta_is_pointwise() {
        // delta -> 0: expectation collapses to phi at the mean.
        let res = ResidentSpec::new(1.0, 1.0, 2.0, 2.0 + 1e-12).unwrap();
        let inv = InvaderSpec::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let phi = phi_build(&res, &inv).unwrap();
        let u = 0.4;
        let series = beta_expectation_series(&phi, u, 3.0, 1e-14).unwrap();
        assert!(rel_close(series, phi_eval(&phi, u), 1e-9));
    }

    #[test]
    fn quadrature_moment_checks() {
        // E[1] = 1, E[U] = u, E[U^2] = u(uv+1)/(v+1), incl. singular
        // exponent cases (uv < 1).
        for (u, v) in [(0.5, 6.0), (0.3, 1.2), (0.9, 0.7), (0.05, 40.0), (0.5, 300.0)] {
            let (one, _) = beta_expectation_of(|_| 1.0, u, v, 1e-12).unwrap();
            assert!((one - 1.0).abs() < 1e-10, "u={u} v={v} one={one}");
            let (mean, _) = beta_expectation_of(|y| y, u, v, 1e-12).unwrap();
            assert!((mean - u).abs() < 1e-10, "u={u} v={v} mean={mean}");
            let (m2, _) = beta_expectation_of(|y| y * y, u, v, 1e-12).unwrap();
            let expected = u * (u * v + 1.0) / (v + 1.0);
            assert!((m2 - expected).abs() < 1e-10, "u={u} v={v} m2={m2} vs {expected}");
        }
    }

    #[test]
    fn invasion_rate_frozen_values() {
        let pair = top_pair(5.5);
        let rates = SwitchRates::from_st(0.5, 10.0).unwrap();
        let result = lambda_xy(&pair, rates).unwrap();
        assert!(rel_close(result.lambda_y, LAMBDA_Y_REF, 1e-11), "{}", result.lambda_y);
        assert!(rel_close(result.lambda_x, LAMBDA_X_REF, 1e-11), "{}", result.lambda_x);
        assert_eq!(result.method, EvalMethod::Series);
        assert!(result.error_estimate < 1e-11);
    }

    #[test]
    fn degenerate_pair_analytic() {
        let e = Environment::new(1.0, 1.0, 2.0, 2.0, 1.0, 1.0).unwrap();
        let pair = EnvPair::new(e, e).unwrap();
        for (s, t) in [(0.5, 1.0), (0.2, 17.0), (0.9, 0.3)] {
            let result = lambda_xy(&pair, SwitchRates::from_st(s, t).unwrap()).unwrap();
            assert_eq!(result.lambda_y, -1.0);
            assert_eq!(result.lambda_x, 0.5);
            assert_eq!(result.method, EvalMethod::DegenerateAnalytic);
        }
    }

    #[test]
    fn lambda_y_negative_outside_interval() {
        let pair = top_pair(5.5);
        let (res, inv) = y_role(&pair);
        for t in [0.1, 1.0, 10.0, 100.0] {
            let rates = SwitchRates::from_st(0.05, t).unwrap();
            let val = invasion_rate(&res, &inv, rates).unwrap().value;
            assert!(val < 0.0, "t={t} val={val}");
        }
    }

    #[test]
    fn direct_integral_agrees() {
        let pair = top_pair(5.5);
        let (res, inv) = y_role(&pair);
        let rates = SwitchRates::from_st(0.5, 10.0).unwrap();
        let direct = invasion_rate_direct(&res, &inv, rates).unwrap();
        assert!(rel_close(direct, LAMBDA_Y_REF, 1e-9), "direct={direct}");
        // Small t: gamma_i < 1, integrable endpoint singularities.
        let rates = SwitchRates::from_st(0.5, 0.1).unwrap();
        let direct = invasion_rate_direct(&res, &inv, rates).unwrap();
        let beta_form = invasion_rate(&res, &inv, rates).unwrap().value;
        assert!(direct.is_finite());
        assert!(rel_close(direct, beta_form, 1e-8), "direct={direct} beta={beta_form}");
        // x role as well.
        let (res_x, inv_x) = x_role(&pair);
        let rates = SwitchRates::from_st(0.5, 10.0).unwrap();
        let direct = invasion_rate_direct(&res_x, &inv_x, rates).unwrap();
        assert!(rel_close(direct, LAMBDA_X_REF, 1e-9), "direct={direct}");
    }

    #[test]
    fn relabel_invariance() {
        // Swapping the environment labels together with the rates leaves
        // every path unchanged.
        let pair = top_pair(5.5);
        let (res, inv) = y_role(&pair);
        let res_swapped = ResidentSpec { r0: res.r1, r1: res.r0, k0: res.k1, k1: res.k0 };
        let inv_swapped = InvaderSpec { g0: inv.g1, g1: inv.g0, h0: inv.h1, h1: inv.h0 };
        for (s, t) in [(0.5, 10.0), (0.3, 2.0), (0.7, 0.4)] {
            let rates = SwitchRates::from_st(s, t).unwrap();
            let a = invasion_rate(&res, &inv, rates).unwrap().value;
            let b = invasion_rate(&res_swapped, &inv_swapped, rates.swapped()).unwrap().value;
            assert!(rel_close(a, b, 1e-12), "s={s} t={t}: {a} vs {b}");
            let da = invasion_rate_direct(&res, &inv, rates).unwrap();
            let db = invasion_rate_direct(&res_swapped, &inv_swapped, rates.swapped()).unwrap();
            assert!(rel_close(da, db, 1e-9), "direct s={s} t={t}: {da} vs {db}");
        }
    }

    #[test]
    fn sign_rule() {
        // sign(Lambda_y) = sign(E[phi]) since the prefactor is positive.
        let pair = top_pair(5.5);
        let (res, inv) = y_role(&pair);
        let phi = phi_build(&res, &inv).unwrap();
        for (s, t) in [(0.5, 10.0), (0.5, 0.5), (0.1, 10.0), (0.3, 3.0)] {
            let rates = SwitchRates::from_st(s, t).unwrap();
            let gamma0 = rates.lambda0() / res.r0;
            let gamma1 = rates.lambda1() / res.r1;
            let (u, v) = (gamma0 / (gamma0 + gamma1), gamma0 + gamma1);
            let e_phi = beta_expectation_series(&phi, u, v, 1e-13).unwrap();
            let rate = invasion_rate(&res, &inv, rates).unwrap().value;
            assert_eq!(e_phi > 0.0, rate > 0.0, "s={s} t={t}");
        }
    }

    #[test]
    fn frequent_jump_limit() {
        let pair = top_pair(5.5);
        let (res, inv) = y_role(&pair);
        let s = 0.5;
        let mixed = pair.mix(s).unwrap();
        let limit = (1.0 - s) * inv.g0 * (1.0 - inv.h0 / mixed.a)
            + s * inv.g1 * (1.0 - inv.h1 / mixed.a);
        let mut prev_gap = f64::INFINITY;
        for t in [1e2, 1e3, 1e4, 1e5, 1e6] {
            let rates = SwitchRates::from_st(s, t).unwrap();
            let val = invasion_rate(&res, &inv, rates).unwrap().value;
            let gap = (val - limit).abs();
            assert!(gap < prev_gap, "gap not decreasing at t={t}");
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-3, "gap at t=1e6: {prev_gap}");
    }

    #[test]
    fn monotone_in_v_concave_role() {
        // y-role phi is concave (A2 < 0): expectation increases with v.
        let pair = top_pair(5.5);
        let (res, inv) = y_role(&pair);
        let phi = phi_build(&res, &inv).unwrap();
        assert!(phi.a2 < 0.0);
        let u = 0.55;
        let mut prev = f64::NEG_INFINITY;
        for v in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let val = beta_expectation_series(&phi, u, v, 1e-13).unwrap();
            assert!(val > prev, "v={v}");
            prev = val;
        }
    }

    #[test]
    fn mc_degenerate_pair() {
        let res = ResidentSpec::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let inv = InvaderSpec::new(1.0, 1.0, 2.0, 2.0).unwrap();
        let rates = SwitchRates::from_st(0.5, 1.0).unwrap();
        let (est, se) = mc_invasion(&res, &inv, rates, 200.0, 4, 42).unwrap();
        assert!((est - (-1.0)).abs() <= (3.0 * se).max(1e-9), "est={est} se={se}");
    }

    #[test]
    fn mc_matches_closed_form_smoke() {
        // Small-budget version of the acceptance check.
        let pair = top_pair(5.5);
        let (res, inv) = y_role(&pair);
        let rates = SwitchRates::from_st(0.5, 10.0).unwrap();
        let (est, se) = mc_invasion(&res, &inv, rates, 2000.0, 8, 7).unwrap();
        assert!(
            (est - LAMBDA_Y_REF).abs() <= 3.0 * se,
            "est={est} se={se} ref={LAMBDA_Y_REF}"
        );
    }

    #[test]
    fn mc_deterministic_given_seed() {
        let pair = top_pair(5.5);
        let (res, inv) = y_role(&pair);
        let rates = SwitchRates::from_st(0.4, 3.0).unwrap();
        let a = mc_invasion(&res, &inv, rates, 300.0, 4, 11).unwrap();
        let b = mc_invasion(&res, &inv, rates, 300.0, 4, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn logistic_step_properties() {
        // Against the textbook closed form at moderate exponents, and
        // saturation/overflow safety at extreme ones.
        let (x0, r, k, dt) = (0.2_f64, 1.3_f64, 2.0_f64, 0.7_f64);
        let ert = (r * dt).exp();
        let textbook = x0 * ert / (1.0 + k * x0 * (ert - 1.0));
        assert!(rel_close(logistic_step(x0, r, k, dt), textbook, 1e-14));
        let far = logistic_step(0.01, 2.0, 3.0, 1e6);
        assert!(rel_close(far, 1.0 / 3.0, 1e-12));
        // Integral identity d/dt ln x = r(1 - k x).
        let (x1, int_x) = logistic_step_with_integral(x0, r, k, dt);
        let lhs = (x1 / x0).ln();
        assert!(rel_close(lhs, r * (dt - k * int_x), 1e-12));
    }

    #[test]
    fn convex_order_checks() {
        let report = beta_convex_order_check(0.5, 1.0, 2.0, 1000).unwrap();
        assert!(report.max_violation <= 1e-9, "violation {}", report.max_violation);
        // v' = v: equal in distribution.
        let report = beta_convex_order_check(0.3, 2.0, 2.0, 500).unwrap();
        assert!(report.max_violation.abs() <= 1e-12);
        // Strong concentration case.
        let report = beta_convex_order_check(0.2, 0.5, 50.0, 1000).unwrap();
        assert!(report.max_violation <= 1e-9);
        let var = |v: f64| 0.2 * 0.8 / (v + 1.0);
        assert!(var(50.0) < var(0.5));
    }

    #[test]
    fn integrated_cdf_consistency() {
        // J(1) = 1 - E[U] = 1 - u, and J is nondecreasing.
        for (u, v) in [(0.3, 2.0), (0.7, 11.0)] {
            let j1 = beta_integrated_cdf(u, v, 1.0 - 1e-12);
            assert!((j1 - (1.0 - u)).abs() < 1e-9, "u={u} v={v} j1={j1}");
            let mut prev = 0.0;
            for i in 1..=50 {
                let x = i as f64 / 50.0;
                let j = beta_integrated_cdf(u, v, x.min(1.0 - 1e-15));
                assert!(j >= prev - 1e-12);
                prev = j;
            }
        }
    }
}
