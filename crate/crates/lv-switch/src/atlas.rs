//! Regime classification over the switching-rate plane `(s, t)`.
//!
//! The signs of the two invasion rates decide the long-run outcome:
//!
//! ```text
//! (sign Λ_x, sign Λ_y)   regime
//!        (+, +)          PersistenceBoth
//!        (+, -)          ExtinctionY
//!        (-, +)          ExtinctionX
//!        (-, -)          RandomExtinction
//! ```
//!
//! At fixed `s`, `Λ_y` is strictly increasing and `Λ_x` strictly
//! decreasing in the jump intensity `t`, so each has at most one root:
//! the critical curves `t_y(s)` (finite exactly on `I`) and `t_x(s)`
//! (finite exactly on `J`). This module finds those roots by expanding
//! bracket plus bisection in `log t`, sweeps them into curves, classifies
//! whole `(s, t)` grids, and checks the quasi-convexity of the curves.

use crate::emit::fmt_g17;
use crate::env::EnvPair;
use crate::env::SwitchRates;
use crate::invasion::{invasion_rate_with_tol, lambda_xy, x_role, y_role, InvasionError};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AtlasError {
    #[error("invasion rate is exactly zero for species {species}; the regime is a frontier value")]
    FrontierValue { species: char },
    #[error(
        "no sign change of Lambda_{species} found for s={s} within t in [{t_lo:.3e}, {t_hi:.3e}]; \
         interval computation and rate evaluation disagree"
    )]
    BracketFailure { species: char, s: f64, t_lo: f64, t_hi: f64 },
    #[error("invalid parameter `{name}`: {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error(transparent)]
    Invasion(#[from] InvasionError),
}

/// Long-run outcome decided by the invasion-rate sign pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    PersistenceBoth,
    ExtinctionY,
    ExtinctionX,
    RandomExtinction,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::PersistenceBoth => "PersistenceBoth",
            Regime::ExtinctionY => "ExtinctionY",
            Regime::ExtinctionX => "ExtinctionX",
            Regime::RandomExtinction => "RandomExtinction",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Map-node label: a clean regime, or a frontier node where an invasion
/// rate is below the resolution threshold [`FRONTIER_EPSILON`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MapLabel {
    Regime(Regime),
    Frontier,
}

impl std::fmt::Display for MapLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MapLabel::Regime(r) => r.fmt(f),
            MapLabel::Frontier => f.write_str("Frontier"),
        }
    }
}

/// Nodes with `|Λ|` below this are marked `Frontier` in regime maps:
/// below any honest evaluation error, above rounding noise.
pub const FRONTIER_EPSILON: f64 = 1e-12;

pub fn classify_regime(lambda_x: f64, lambda_y: f64) -> Result<Regime, AtlasError> {
    if lambda_x == 0.0 {
        return Err(AtlasError::FrontierValue { species: 'x' });
    }
    if lambda_y == 0.0 {
        return Err(AtlasError::FrontierValue { species: 'y' });
    }
    Ok(match (lambda_x > 0.0, lambda_y > 0.0) {
        (true, true) => Regime::PersistenceBoth,
        (true, false) => Regime::ExtinctionY,
        (false, true) => Regime::ExtinctionX,
        (false, false) => Regime::RandomExtinction,
    })
}

/// Which species' invasion rate a critical curve tracks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Species {
    X,
    Y,
}

impl Species {
    pub fn label(self) -> &'static str {
        match self {
            Species::X => "x",
            Species::Y => "y",
        }
    }
}

impl std::fmt::Display for Species {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Species {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" => Ok(Species::X),
            "y" => Ok(Species::Y),
            other => Err(format!("species must be `x` or `y`, got `{other}`")),
        }
    }
}

/// Critical jump intensity at one `s`: the root of `Λ_species(s, ·)`, or
/// unbounded when `s` is outside the species' critical interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CriticalT {
    Finite(f64),
    Unbounded,
}

impl CriticalT {
    pub fn as_f64(self) -> f64 {
        match self {
            CriticalT::Finite(t) => t,
            CriticalT::Unbounded => f64::INFINITY,
        }
    }
}

/// Hard bracket limits of the root search in `t`.
pub const T_BRACKET_MIN: f64 = 1e-8;
pub const T_BRACKET_MAX: f64 = 1e12;
/// Initial bracket seed.
pub const T_BRACKET_SEED: f64 = 1.0;

/// Tolerance of the invasion-rate evaluations inside the root finder;
/// must stay far below the slope-times-bisection-width product so signs
/// near the root are trustworthy.
const RATE_EVAL_TOL: f64 = 1e-13;

/// Root of `Λ_species(s, ·)` by expanding bracket + bisection in `log t`,
/// to relative accuracy `tol`.
pub fn critical_t(
    pair: &EnvPair,
    species: Species,
    s: f64,
    tol: f64,
) -> Result<CriticalT, AtlasError> {
    if !(s > 0.0 && s < 1.0) {
        return Err(AtlasError::BadParameter { name: "s", value: s });
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(AtlasError::BadParameter { name: "tol", value: tol });
    }
    let intervals = pair.intervals();
    let in_domain = match species {
        Species::Y => intervals.i_contains(s),
        Species::X => intervals.j_contains(s),
    };
    if !in_domain {
        return Ok(CriticalT::Unbounded);
    }
    let (res, inv) = match species {
        Species::Y => y_role(pair),
        Species::X => x_role(pair),
    };
    let eval = |t: f64| -> Result<f64, AtlasError> {
        let rates = SwitchRates::from_st(s, t).map_err(|_| AtlasError::BadParameter {
            name: "t (bracket escaped positives)",
            value: t,
        })?;
        Ok(invasion_rate_with_tol(&res, &inv, rates, RATE_EVAL_TOL)?.value)
    };
    // Sign at t -> 0 is the slow-switching average of single-environment
    // rates: negative for y (both environments favor x), positive for x.
    let low_side_positive = matches!(species, Species::X);

    let mut t_probe = T_BRACKET_SEED;
    let mut f_probe = eval(t_probe)?;
    if f_probe == 0.0 {
        return Ok(CriticalT::Finite(t_probe));
    }
    let probe_on_low_side = (f_probe > 0.0) == low_side_positive;
    let (mut t_lo, mut t_hi);
    if probe_on_low_side {
        // Root is above the probe: expand upward.
        t_lo = t_probe;
        loop {
            t_probe *= 2.0;
            if t_probe > T_BRACKET_MAX {
                return Err(AtlasError::BracketFailure {
                    species: match species {
                        Species::X => 'x',
                        Species::Y => 'y',
                    },
                    s,
                    t_lo,
                    t_hi: T_BRACKET_MAX,
                });
            }
            f_probe = eval(t_probe)?;
            if f_probe == 0.0 {
                return Ok(CriticalT::Finite(t_probe));
            }
            if (f_probe > 0.0) != low_side_positive {
                t_hi = t_probe;
                break;
            }
            t_lo = t_probe;
        }
    } else {
        t_hi = t_probe;
        loop {
            t_probe *= 0.5;
            if t_probe < T_BRACKET_MIN {
                return Err(AtlasError::BracketFailure {
                    species: match species {
                        Species::X => 'x',
                        Species::Y => 'y',
                    },
                    s,
                    t_lo: T_BRACKET_MIN,
                    t_hi,
                });
            }
            f_probe = eval(t_probe)?;
            if f_probe == 0.0 {
                return Ok(CriticalT::Finite(t_probe));
            }
            if (f_probe > 0.0) == low_side_positive {
                t_lo = t_probe;
                break;
            }
            t_hi = t_probe;
        }
    }
    // Bisection on ln t until the bracket's relative width is below tol.
    while t_hi / t_lo - 1.0 > tol {
        let mid = (t_lo * t_hi).sqrt();
        if mid <= t_lo || mid >= t_hi {
            break; // bracket at floating-point resolution
        }
        let f_mid = eval(mid)?;
        if f_mid == 0.0 {
            return Ok(CriticalT::Finite(mid));
        }
        if (f_mid > 0.0) == low_side_positive {
            t_lo = mid;
        } else {
            t_hi = mid;
        }
    }
    Ok(CriticalT::Finite((t_lo * t_hi).sqrt()))
}

/// Sampled critical curve over the species' domain interval.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalCurve {
    pub species: Species,
    /// Open domain interval (I for y, J for x); `None` when empty.
    pub domain: Option<(f64, f64)>,
    /// `(s, t_critical)` samples; `t = +inf` marks a failed sample.
    pub samples: Vec<(f64, f64)>,
    /// Root-finding failures as `(s, reason)`; never fatal.
    pub failures: Vec<(f64, String)>,
    /// Requested relative root accuracy.
    pub tolerance: f64,
}

/// Relative margin by which grid endpoints stay inside the open domain
/// interval (the curve diverges at the endpoints).
pub const DOMAIN_ENDPOINT_MARGIN: f64 = 1e-4;

/// Sample `critical_t` on a uniform `s_count`-point grid over the domain
/// interval, endpoints excluded by [`DOMAIN_ENDPOINT_MARGIN`] of its
/// length. Samples are independent and computed in parallel.
pub fn critical_curve(
    pair: &EnvPair,
    species: Species,
    s_count: usize,
    tol: f64,
) -> Result<CriticalCurve, AtlasError> {
    if s_count < 3 {
        return Err(AtlasError::BadParameter { name: "s_count", value: s_count as f64 });
    }
    let intervals = pair.intervals();
    let domain = match species {
        Species::Y => intervals.i,
        Species::X => intervals.j,
    };
    let Some((lo, hi)) = domain else {
        return Ok(CriticalCurve {
            species,
            domain: None,
            samples: Vec::new(),
            failures: Vec::new(),
            tolerance: tol,
        });
    };
    let margin = DOMAIN_ENDPOINT_MARGIN * (hi - lo);
    let (g_lo, g_hi) = (lo + margin, hi - margin);
    let results: Vec<(f64, Result<CriticalT, AtlasError>)> = (0..s_count)
        .into_par_iter()
        .map(|i| {
            let s = g_lo + (g_hi - g_lo) * i as f64 / (s_count - 1) as f64;
            (s, critical_t(pair, species, s, tol))
        })
        .collect();
    let mut samples = Vec::with_capacity(s_count);
    let mut failures = Vec::new();
    for (s, outcome) in results {
        match outcome {
            Ok(ct) => samples.push((s, ct.as_f64())),
            Err(e) => {
                samples.push((s, f64::INFINITY));
                failures.push((s, e.to_string()));
            }
        }
    }
    Ok(CriticalCurve { species, domain, samples, failures, tolerance: tol })
}

/// Regime labels over an `(s, t)` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RegimeMap {
    pub s_values: Vec<f64>,
    pub t_values: Vec<f64>,
    /// Row-major over `s` then `t`: index `i * t_values.len() + j`.
    pub labels: Vec<MapLabel>,
}

impl RegimeMap {
    pub fn label_at(&self, i: usize, j: usize) -> MapLabel {
        self.labels[i * self.t_values.len() + j]
    }

    /// Distinct labels present, in first-appearance order.
    pub fn distinct_labels(&self) -> Vec<MapLabel> {
        let mut seen = Vec::new();
        for &l in &self.labels {
            if !seen.contains(&l) {
                seen.push(l);
            }
        }
        seen
    }
}

pub fn regime_map(
    pair: &EnvPair,
    s_grid: &[f64],
    t_grid: &[f64],
) -> Result<RegimeMap, AtlasError> {
    if s_grid.is_empty() {
        return Err(AtlasError::BadParameter { name: "s_grid", value: 0.0 });
    }
    if t_grid.is_empty() {
        return Err(AtlasError::BadParameter { name: "t_grid", value: 0.0 });
    }
    for &t in t_grid {
        if !(t > 0.0 && t.is_finite()) {
            return Err(AtlasError::BadParameter { name: "t_grid entry", value: t });
        }
    }
    let nodes: Vec<(f64, f64)> = s_grid
        .iter()
        .flat_map(|&s| t_grid.iter().map(move |&t| (s, t)))
        .collect();
    let labels: Vec<Result<MapLabel, AtlasError>> = nodes
        .par_iter()
        .map(|&(s, t)| {
            let rates = SwitchRates::from_st(s, t)
                .map_err(|_| AtlasError::BadParameter { name: "s/t grid node", value: s })?;
            let rate = lambda_xy(pair, rates)?;
            if rate.lambda_x.abs() < FRONTIER_EPSILON || rate.lambda_y.abs() < FRONTIER_EPSILON {
                Ok(MapLabel::Frontier)
            } else {
                Ok(MapLabel::Regime(classify_regime(rate.lambda_x, rate.lambda_y)?))
            }
        })
        .collect();
    let labels = labels.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(RegimeMap { s_values: s_grid.to_vec(), t_values: t_grid.to_vec(), labels })
}

/// Verdict of the discrete quasi-convexity check, with a convexity
/// observation reported alongside (never asserted).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuasiConvexReport {
    pub quasi_convex: bool,
    /// Number of interior indices violating `t_j <= max(t_i, t_k)(1+1e-9)`.
    pub violations: usize,
    /// Largest relative excess over the allowed bound (0 when none).
    pub max_excess: f64,
    /// Whether discrete midpoint convexity also held on the samples.
    pub convex_observed: bool,
    /// Finite samples examined.
    pub finite_samples: usize,
}

/// Relative slack of the quasi-convexity comparison.
pub const QUASI_CONVEX_SLACK: f64 = 1e-9;

/// Check `value_j <= max(value_i, value_k) * (1 + slack)` for all triples
/// `i<j<k` of finite samples, in O(n) via prefix/suffix minima: the worst
/// `(i, k)` pair for a given `j` is the pair of one-sided minima.
pub fn check_quasi_convex_samples(samples: &[(f64, f64)]) -> QuasiConvexReport {
    let finite: Vec<f64> =
        samples.iter().filter(|(_, t)| t.is_finite()).map(|&(_, t)| t).collect();
    let n = finite.len();
    if n < 3 {
        return QuasiConvexReport {
            quasi_convex: true,
            violations: 0,
            max_excess: 0.0,
            convex_observed: true,
            finite_samples: n,
        };
    }
    let mut prefix_min = vec![f64::INFINITY; n];
    let mut suffix_min = vec![f64::INFINITY; n];
    let mut acc = f64::INFINITY;
    for i in 0..n {
        prefix_min[i] = acc;
        acc = acc.min(finite[i]);
    }
    acc = f64::INFINITY;
    for i in (0..n).rev() {
        suffix_min[i] = acc;
        acc = acc.min(finite[i]);
    }
    let mut violations = 0usize;
    let mut max_excess = 0.0_f64;
    for j in 1..n - 1 {
        let bound = prefix_min[j].max(suffix_min[j]) * (1.0 + QUASI_CONVEX_SLACK);
        if finite[j] > bound {
            violations += 1;
            max_excess = max_excess.max(finite[j] / bound - 1.0);
        }
    }
    // Discrete midpoint convexity as an observation.
    let mut convex_observed = true;
    for j in 1..n - 1 {
        if finite[j] > 0.5 * (finite[j - 1] + finite[j + 1]) * (1.0 + QUASI_CONVEX_SLACK) {
            convex_observed = false;
            break;
        }
    }
    QuasiConvexReport {
        quasi_convex: violations == 0,
        violations,
        max_excess,
        convex_observed,
        finite_samples: n,
    }
}

pub fn check_quasi_convex(curve: &CriticalCurve) -> QuasiConvexReport {
    check_quasi_convex_samples(&curve.samples)
}

/// Transport curve samples `(s, t)` to the `(u, v)` parametrization of the
/// x-resident relaxation rates (the coordinates in which the y-curve is
/// stated to be quasi-convex).
pub fn transport_to_uv(pair: &EnvPair, curve: &CriticalCurve) -> Vec<(f64, f64)> {
    curve
        .samples
        .iter()
        .filter(|(_, t)| t.is_finite())
        .map(|&(s, t)| pair.st_to_uv(s, t))
        .collect()
}

/// CSV form of a critical curve: `s,t_critical` rows, literal `inf` for
/// unbounded samples.
pub fn critical_curve_csv(curve: &CriticalCurve) -> String {
    let mut out = String::from("s,t_critical\n");
    if curve.domain.is_none() {
        out.push_str("# domain interval is empty: t_critical = inf for every s\n");
    }
    for &(s, t) in &curve.samples {
        out.push_str(&fmt_g17(s));
        out.push(',');
        out.push_str(&fmt_g17(t));
        out.push('\n');
    }
    out
}

/// CSV form of a regime map: `s,t,regime` rows with the exact labels.
pub fn regime_map_csv(map: &RegimeMap) -> String {
    let mut out = String::from("s,t,regime\n");
    for (i, &s) in map.s_values.iter().enumerate() {
        for (j, &t) in map.t_values.iter().enumerate() {
            out.push_str(&fmt_g17(s));
            out.push(',');
            out.push_str(&fmt_g17(t));
            out.push(',');
            out.push_str(&map.label_at(i, j).to_string());
            out.push('\n');
        }
    }
    out
}

/// Log-uniform grid helper used by map sweeps: `count` points from `lo`
/// to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2, "log grid needs 0 < lo < hi and count >= 2");
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (ln_lo + (ln_hi - ln_lo) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Uniform grid helper: `count` points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(hi > lo && count >= 2, "linear grid needs lo < hi and count >= 2");
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}
