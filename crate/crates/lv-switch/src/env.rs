//! Environments, averaged environments, switching-rate parametrizations,
//! phase-portrait classification, and the critical intervals `I` and `J`.
//!
//! An [`Environment`] is one Lotka-Volterra parameter set
//! `(a, b, c, d, alpha, beta)` for the field
//!
//! ```text
//! F(x, y) = ( alpha x (1 - a x - b y),  beta y (1 - c x - d y) ).
//! ```
//!
//! An [`EnvPair`] holds the two environments between which the process
//! switches, both required to be *favorable to x* (`a < c`, `b < d`), and
//! relabeled once at construction so that `a0 <= a1`.
//!
//! Mixing with weight `s` produces the averaged environment `E_s` whose
//! field is the convex combination `(1-s) F0 + s F1`; its coefficients are
//!
//! ```text
//! alpha_s = (1-s) alpha0 + s alpha1          beta_s analogous
//! a_s = ((1-s) alpha0 a0 + s alpha1 a1) / alpha_s   (b_s analogous)
//! c_s = ((1-s) beta0 c0 + s beta1 c1) / beta_s      (d_s analogous)
//! ```
//!
//! The sets where averaging reverses the favorability inequalities,
//!
//! ```text
//! I = { s : a_s > c_s }      J = { s : b_s > d_s },
//! ```
//!
//! are where all the interesting switching behaviour lives; both reduce to
//! the positivity set of an explicit quadratic (`N(s)`, `M(s)`), computed
//! here with stable root formulas.

use crate::Point;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("environment field `{field}` must be strictly positive and finite, got {value}")]
    NonPositiveField { field: &'static str, value: f64 },
    #[error(
        "environment {which} is not favorable to x: requires a < c and b < d, \
         got a={a}, c={c}, b={b}, d={d}"
    )]
    NotFavorableToX { which: usize, a: f64, c: f64, b: f64, d: f64 },
    #[error("environment is degenerate for classification: requires a != c and b != d")]
    DegenerateEnvironment,
    #[error("switch rate `{field}` must be strictly positive and finite, got {value}")]
    NonPositiveRate { field: &'static str, value: f64 },
    #[error("mixing weight s must lie in [0,1], got {0}")]
    BadMixWeight(f64),
    #[error("pair config parse error: {0}")]
    Config(String),
}

/// One Lotka-Volterra parameter set; see the module docs for the field roles.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Environment {
    pub fn new(a: f64, b: f64, c: f64, d: f64, alpha: f64, beta: f64) -> Result<Self, EnvError> {
        let env = Environment { a, b, c, d, alpha, beta };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        for (field, value) in [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(EnvError::NonPositiveField { field, value });
            }
        }
        Ok(())
    }

    /// The vector field of Eq.-style Lotka-Volterra competition dynamics.
    pub fn vector_field(&self, z: Point) -> Point {
        Point::new(
            self.alpha * z.x * (1.0 - self.a * z.x - self.b * z.y),
            self.beta * z.y * (1.0 - self.c * z.x - self.d * z.y),
        )
    }

    /// Analytic Jacobian of [`Self::vector_field`], row-major
    /// `[[d Fx/dx, d Fx/dy], [d Fy/dx, d Fy/dy]]`.
    pub fn jacobian(&self, z: Point) -> [[f64; 2]; 2] {
        [
            [
                self.alpha * (1.0 - 2.0 * self.a * z.x - self.b * z.y),
                -self.alpha * self.b * z.x,
            ],
            [
                -self.beta * self.c * z.y,
                self.beta * (1.0 - self.c * z.x - 2.0 * self.d * z.y),
            ],
        ]
    }

    /// Interior equilibrium: the solution of the linear isocline system
    /// `a x + b y = 1`, `c x + d y = 1`, regardless of quadrant membership.
    /// `None` when the isoclines are parallel (`ad = bc`).
    pub fn interior_equilibrium(&self) -> Option<Point> {
        let det = self.a * self.d - self.b * self.c;
        if det == 0.0 {
            return None;
        }
        Some(Point::new((self.d - self.b) / det, (self.a - self.c) / det))
    }

    /// The same environment with the roles of the species exchanged:
    /// `(x, y)` dynamics of the swap equal the original `(y, x)` dynamics.
    pub fn swap_species(&self) -> Environment {
        Environment {
            a: self.d,
            b: self.c,
            c: self.b,
            d: self.a,
            alpha: self.beta,
            beta: self.alpha,
        }
    }

    /// Phase-portrait classification; see [`PortraitType`].
    pub fn classify(&self) -> Result<PortraitType, EnvError> {
        if self.a == self.c || self.b == self.d {
            return Err(EnvError::DegenerateEnvironment);
        }
        let class = match (self.a > self.c, self.b > self.d) {
            (false, false) => PortraitClass::Type1ExtinctY,
            (true, true) => PortraitClass::Type2ExtinctX,
            (true, false) => PortraitClass::Type3CoexistenceSink,
            (false, true) => PortraitClass::Type4BistableSaddle,
        };
        let mut equilibria = vec![
            (Point::ORIGIN, EquilibriumNature::Source),
            (Point::new(1.0 / self.a, 0.0), self.equilibrium_nature(Point::new(1.0 / self.a, 0.0))),
            (Point::new(0.0, 1.0 / self.d), self.equilibrium_nature(Point::new(0.0, 1.0 / self.d))),
        ];
        if matches!(
            class,
            PortraitClass::Type3CoexistenceSink | PortraitClass::Type4BistableSaddle
        ) {
            let interior = self
                .interior_equilibrium()
                .expect("type 3/4 has non-parallel isoclines");
            debug_assert!(interior.in_open_quadrant());
            equilibria.push((interior, self.equilibrium_nature(interior)));
        }
        Ok(PortraitType { class, equilibria })
    }

    /// Nature of an equilibrium from the Jacobian eigenvalue real parts.
    fn equilibrium_nature(&self, z: Point) -> EquilibriumNature {
        let j = self.jacobian(z);
        let trace = j[0][0] + j[1][1];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det < 0.0 {
            EquilibriumNature::Saddle
        } else if trace < 0.0 {
            EquilibriumNature::Sink
        } else {
            EquilibriumNature::Source
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PortraitClass {
    /// `a < c`, `b < d`: y dies out; sink `(1/a, 0)`, saddle `(0, 1/d)`.
    Type1ExtinctY,
    /// `a > c`, `b > d`: x dies out; sink `(0, 1/d)`, saddle `(1/a, 0)`.
    Type2ExtinctX,
    /// `a > c`, `b < d`: coexistence; interior sink.
    Type3CoexistenceSink,
    /// `a < c`, `b > d`: bistable; interior saddle, both axis equilibria sinks.
    Type4BistableSaddle,
}

impl PortraitClass {
    pub fn label(self) -> &'static str {
        match self {
            PortraitClass::Type1ExtinctY => "Type1_ExtinctY",
            PortraitClass::Type2ExtinctX => "Type2_ExtinctX",
            PortraitClass::Type3CoexistenceSink => "Type3_Coexist",
            PortraitClass::Type4BistableSaddle => "Type4_Bistable",
        }
    }
}

impl std::fmt::Display for PortraitClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EquilibriumNature {
    Source,
    Sink,
    Saddle,
}

impl std::fmt::Display for EquilibriumNature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EquilibriumNature::Source => "source",
            EquilibriumNature::Sink => "sink",
            EquilibriumNature::Saddle => "saddle",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PortraitType {
    pub class: PortraitClass,
    pub equilibria: Vec<(Point, EquilibriumNature)>,
}

/// Jump intensities of the environment chain: `lambda0` leaves environment
/// 0, `lambda1` leaves environment 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwitchRates {
    lambda0: f64,
    lambda1: f64,
}

impl SwitchRates {
    pub fn new(lambda0: f64, lambda1: f64) -> Result<Self, EnvError> {
        for (field, value) in [("lambda0", lambda0), ("lambda1", lambda1)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(EnvError::NonPositiveRate { field, value });
            }
        }
        Ok(SwitchRates { lambda0, lambda1 })
    }

    /// Build from the `(s, t)` view: `lambda0 = s t`, `lambda1 = (1-s) t`,
    /// so `s` is the long-run fraction of time spent in environment 1 and
    /// `t` the total jump intensity.
    pub fn from_st(s: f64, t: f64) -> Result<Self, EnvError> {
        if !(s > 0.0 && s < 1.0 && s.is_finite()) {
            return Err(EnvError::NonPositiveRate { field: "s (must be in (0,1))", value: s });
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(EnvError::NonPositiveRate { field: "t", value: t });
        }
        SwitchRates::new(s * t, (1.0 - s) * t)
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    /// Long-run fraction of time in environment 1.
    pub fn s(&self) -> f64 {
        self.lambda0 / (self.lambda0 + self.lambda1)
    }

    /// Total jump intensity.
    pub fn t(&self) -> f64 {
        self.lambda0 + self.lambda1
    }

    /// Rates with the environment labels exchanged.
    pub fn swapped(&self) -> SwitchRates {
        SwitchRates { lambda0: self.lambda1, lambda1: self.lambda0 }
    }
}

/// How the `(b_i, d_i)` coefficients of the two environments interleave.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BdConfiguration {
    /// `b0 < d0 < b1 < d1` — the full ordering under which `I ∩ J` can be
    /// nonempty.
    AscendingOrdering,
    /// `b1 < d1 < b0 < d0` — J may be nonempty but `I ∩ J` is empty.
    ReverseOrdering,
    /// The `(b_i, d_i)` intervals overlap — J is empty.
    Overlapping,
}

impl BdConfiguration {
    pub fn label(self) -> &'static str {
        match self {
            BdConfiguration::AscendingOrdering => "ascending_ordering",
            BdConfiguration::ReverseOrdering => "reverse_ordering",
            BdConfiguration::Overlapping => "overlapping",
        }
    }
}

/// Construction-time facts about a pair that are reported, not errored on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairDiagnostics {
    /// Inputs were relabeled so that `a0 <= a1`.
    pub canonical_order_swapped: bool,
    /// `a0 == a1`: the degenerate branch on which I is empty.
    pub degenerate_a: bool,
    /// `c0 < a1`, a necessary condition for I to be nonempty.
    pub i_possible: bool,
    /// Which `(b, d)` interleaving configuration holds.
    pub bd_configuration: BdConfiguration,
}

/// A validated, canonically ordered pair of environments.
///
/// After construction `env0` and `env1` are the *canonical* labels
/// (`a0 <= a1`); `canonical_order_swapped` records whether the inputs were
/// exchanged to get there. Callers that tracked quantities against the
/// original labels can translate with [`EnvPair::adapt_rates`] and
/// [`EnvPair::adapt_s`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvPair {
    env0: Environment,
    env1: Environment,
    diagnostics: PairDiagnostics,
}

impl EnvPair {
    /// Validate both environments, enforce the favorability assumption, and
    /// canonicalize the labels. This is the only constructor.
    pub fn new(env0: Environment, env1: Environment) -> Result<Self, EnvError> {
        env0.validate()?;
        env1.validate()?;
        for (which, e) in [(0usize, &env0), (1, &env1)] {
            if !(e.a < e.c && e.b < e.d) {
                return Err(EnvError::NotFavorableToX {
                    which,
                    a: e.a,
                    c: e.c,
                    b: e.b,
                    d: e.d,
                });
            }
        }
        let swapped = env0.a > env1.a;
        let (env0, env1) = if swapped { (env1, env0) } else { (env0, env1) };

        let bd_configuration = if env0.d < env1.b {
            BdConfiguration::AscendingOrdering
        } else if env1.d < env0.b {
            BdConfiguration::ReverseOrdering
        } else {
            BdConfiguration::Overlapping
        };
        let diagnostics = PairDiagnostics {
            canonical_order_swapped: swapped,
            degenerate_a: env0.a == env1.a,
            i_possible: env0.c < env1.a,
            bd_configuration,
        };
        Ok(EnvPair { env0, env1, diagnostics })
    }

    /// Parse the JSON pair-config document
    /// `{"env0":{"a":..,...},"env1":{...}}` and validate it.
    pub fn from_json_str(text: &str) -> Result<Self, EnvError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct PairConfig {
            env0: Environment,
            env1: Environment,
        }
        let config: PairConfig =
            serde_json::from_str(text).map_err(|e| EnvError::Config(e.to_string()))?;
        EnvPair::new(config.env0, config.env1)
    }

    pub fn env0(&self) -> &Environment {
        &self.env0
    }

    pub fn env1(&self) -> &Environment {
        &self.env1
    }

    pub fn env(&self, i: usize) -> &Environment {
        match i {
            0 => &self.env0,
            1 => &self.env1,
            _ => panic!("environment index must be 0 or 1, got {i}"),
        }
    }

    pub fn diagnostics(&self) -> PairDiagnostics {
        self.diagnostics
    }

    /// Translate rates stated against the *original* input labels into the
    /// canonical labeling (identity when no relabeling happened).
    pub fn adapt_rates(&self, rates: SwitchRates) -> SwitchRates {
        if self.diagnostics.canonical_order_swapped { rates.swapped() } else { rates }
    }

    /// Translate an `s` stated against the original input labels.
    pub fn adapt_s(&self, s: f64) -> f64 {
        if self.diagnostics.canonical_order_swapped { 1.0 - s } else { s }
    }

    /// The averaged environment `E_s`; satisfies
    /// `F_{E_s} = (1-s) F_{E_0} + s F_{E_1}` pointwise.
    pub fn mix(&self, s: f64) -> Result<Environment, EnvError> {
        if !((0.0..=1.0).contains(&s) && s.is_finite()) {
            return Err(EnvError::BadMixWeight(s));
        }
        let w0 = 1.0 - s;
        let w1 = s;
        let (e0, e1) = (&self.env0, &self.env1);
        let alpha_s = w0 * e0.alpha + w1 * e1.alpha;
        let beta_s = w0 * e0.beta + w1 * e1.beta;
        Ok(Environment {
            a: (w0 * e0.alpha * e0.a + w1 * e1.alpha * e1.a) / alpha_s,
            b: (w0 * e0.alpha * e0.b + w1 * e1.alpha * e1.b) / alpha_s,
            c: (w0 * e0.beta * e0.c + w1 * e1.beta * e1.c) / beta_s,
            d: (w0 * e0.beta * e0.d + w1 * e1.beta * e1.d) / beta_s,
            alpha: alpha_s,
            beta: beta_s,
        })
    }

    /// `(s, t) -> (u, v)`: the triangular reparametrization through the
    /// resident-x relaxation rates `gamma_i = lambda_i / alpha_i`.
    pub fn st_to_uv(&self, s: f64, t: f64) -> (f64, f64) {
        let (a0, a1) = (self.env0.alpha, self.env1.alpha);
        let w = (1.0 - s) * a0 + s * a1;
        (s * a1 / w, t * w / (a0 * a1))
    }

    /// Exact algebraic inverse of [`Self::st_to_uv`]:
    /// `lambda0 = alpha0 u v`, `lambda1 = alpha1 (1-u) v`.
    pub fn uv_to_st(&self, u: f64, v: f64) -> (f64, f64) {
        let lambda0 = self.env0.alpha * u * v;
        let lambda1 = self.env1.alpha * (1.0 - u) * v;
        (lambda0 / (lambda0 + lambda1), lambda0 + lambda1)
    }

    /// The critical intervals `I`, `J` with their defining quadratics and
    /// their images under the monotone map `s -> u`.
    pub fn intervals(&self) -> CriticalIntervals {
        let (e0, e1) = (&self.env0, &self.env1);
        // N(s) = A(s) * beta_s - C(s) * alpha_s where
        //   A(s) = (1-s) alpha0 a0 + s alpha1 a1   (numerator of a_s alpha_s)
        //   C(s) = (1-s) beta0 c0 + s beta1 c1
        // Expanded in the monomial basis {1, s, s^2}.
        let quad_i = favorability_gap_quadratic(
            e0.alpha * e0.a,
            e1.alpha * e1.a,
            e0.beta * e0.c,
            e1.beta * e1.c,
            e0.alpha,
            e1.alpha,
            e0.beta,
            e1.beta,
        );
        let quad_j = favorability_gap_quadratic(
            e0.alpha * e0.b,
            e1.alpha * e1.b,
            e0.beta * e0.d,
            e1.beta * e1.d,
            e0.alpha,
            e1.alpha,
            e0.beta,
            e1.beta,
        );
        let i = quad_i.positive_set_in_unit_interval();
        let j = quad_j.positive_set_in_unit_interval();
        let to_u = |iv: (f64, f64)| {
            let (u_lo, _) = self.st_to_uv(iv.0, 1.0);
            let (u_hi, _) = self.st_to_uv(iv.1, 1.0);
            (u_lo, u_hi)
        };
        CriticalIntervals {
            quad_i,
            quad_j,
            i,
            j,
            i_tilde: i.map(to_u),
            j_tilde: j.map(to_u),
        }
    }
}

/// Build the quadratic `N(s) = A(s)·β(s) − C(s)·α(s)` from the linear parts
/// `A(s) = A0 + (A1−A0)s` etc. All four inputs are linear in `s`.
#[allow(clippy::too_many_arguments)]
fn favorability_gap_quadratic(
    num_a0: f64,
    num_a1: f64,
    num_c0: f64,
    num_c1: f64,
    alpha0: f64,
    alpha1: f64,
    beta0: f64,
    beta1: f64,
) -> Quadratic {
    // A(s) = num_a0 + da·s, da = num_a1 − num_a0, and similarly for the
    // other three linear factors.
    let da = num_a1 - num_a0;
    let dc = num_c1 - num_c0;
    let dalpha = alpha1 - alpha0;
    let dbeta = beta1 - beta0;
    Quadratic {
        c0: num_a0 * beta0 - num_c0 * alpha0,
        c1: num_a0 * dbeta + da * beta0 - num_c0 * dalpha - dc * alpha0,
        c2: da * dbeta - dc * dalpha,
    }
}

/// A real quadratic `c2 s^2 + c1 s + c0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadratic {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Quadratic {
    pub fn eval(&self, s: f64) -> f64 {
        (self.c2 * s + self.c1) * s + self.c0
    }

    /// The open interval where the quadratic is strictly positive,
    /// intersected with `(0, 1)`; `None` when that set is empty.
    ///
    /// Roots use the cancellation-free formulation
    /// `q = -(c1 + sign(c1)·sqrt(disc))/2`, `r = q/c2` and `c0/q`.
    pub fn positive_set_in_unit_interval(&self) -> Option<(f64, f64)> {
        let (c0, c1, c2) = (self.c0, self.c1, self.c2);
        if c2 == 0.0 {
            // Linear (or constant) case.
            if c1 == 0.0 {
                return if c0 > 0.0 { Some((0.0, 1.0)) } else { None };
            }
            let root = -c0 / c1;
            let iv = if c1 > 0.0 { (root, 1.0) } else { (0.0, root) };
            let lo = iv.0.max(0.0);
            let hi = iv.1.min(1.0);
            return if lo < hi { Some((lo, hi)) } else { None };
        }
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc <= 0.0 {
            // No sign change: the parabola keeps the sign of c2 (disc<0) or
            // touches zero at one point (disc=0, positivity still fails on
            // a neighborhood for c2<0 and holds a.e. for c2>0).
            return if c2 > 0.0 { Some((0.0, 1.0)) } else { None };
        }
        let sqrt_disc = disc.sqrt();
        let q = -0.5 * (c1 + c1.signum() * sqrt_disc);
        let (mut r_lo, mut r_hi) = if q == 0.0 {
            // c1 == 0: symmetric roots.
            ((-sqrt_disc) / (2.0 * c2), sqrt_disc / (2.0 * c2))
        } else {
            (q / c2, c0 / q)
        };
        if r_lo > r_hi {
            std::mem::swap(&mut r_lo, &mut r_hi);
        }
        if c2 < 0.0 {
            // Positive between the roots.
            let lo = r_lo.max(0.0);
            let hi = r_hi.min(1.0);
            if lo < hi { Some((lo, hi)) } else { None }
        } else {
            // Positive outside the roots; within (0,1) this can be one or
            // two pieces — the pair structure of this crate only produces
            // the between-roots case (N(0)<0, N(1)<0 force c2<0 when I is
            // nonempty), but handle the general shape conservatively by
            // returning the widest single piece.
            let left = (0.0, r_lo.min(1.0));
            let right = (r_hi.max(0.0), 1.0);
            let width = |iv: (f64, f64)| (iv.1 - iv.0).max(0.0);
            let best = if width(left) >= width(right) { left } else { right };
            if width(best) > 0.0 { Some(best) } else { None }
        }
    }
}

/// Critical intervals with their defining quadratics.
///
/// `i`/`j` are open `s`-intervals (empty as `None`); `i_tilde`/`j_tilde`
/// are their images under the increasing map `s -> u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalIntervals {
    pub quad_i: Quadratic,
    pub quad_j: Quadratic,
    pub i: Option<(f64, f64)>,
    pub j: Option<(f64, f64)>,
    pub i_tilde: Option<(f64, f64)>,
    pub j_tilde: Option<(f64, f64)>,
}

impl CriticalIntervals {
    pub fn i_contains(&self, s: f64) -> bool {
        self.i.map(|(lo, hi)| s > lo && s < hi).unwrap_or(false)
    }

    pub fn j_contains(&self, s: f64) -> bool {
        self.j.map(|(lo, hi)| s > lo && s < hi).unwrap_or(false)
    }

    pub fn i_intersect_j(&self) -> Option<(f64, f64)> {
        let (i, j) = (self.i?, self.j?);
        let lo = i.0.max(j.0);
        let hi = i.1.min(j.1);
        if lo < hi { Some((lo, hi)) } else { None }
    }
}

/// The "top" environment pair (shared test fixture): the reference
/// configuration with `I ≈ (0.1938, 0.8062)`, `J ⊂ I`.
#[cfg(test)]
pub(crate) fn top_pair(rho: f64) -> EnvPair {
    EnvPair::new(
        Environment::new(1.0, 1.0, 2.0, 2.0, 1.0, 5.0).unwrap(),
        Environment::new(3.0, 3.0, 4.0, rho, 5.0, 1.0).unwrap(),
    )
    .unwrap()
}

/// The bottom environment pair: `I = (2/7, 1/2)`; `rho` tunes `J`.
#[cfg(test)]
pub(crate) fn bottom_pair(rho: f64) -> EnvPair {
    EnvPair::new(
        Environment::new(1.0, 2.0 / 3.0, 2.0, 4.0 / 3.0, 1.0, 2.0).unwrap(),
        Environment::new(3.0, 3.0, 4.0, rho, 5.0, 1.0).unwrap(),
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0_f64).max(a.abs().max(b.abs()))
    }

    #[test]
    fn vector_field_hand_values() {
        let env = Environment::new(1.0, 1.0, 2.0, 2.0, 1.0, 5.0).unwrap();
        assert_eq!(env.vector_field(Point::ORIGIN), Point::ORIGIN);
        assert_eq!(env.vector_field(Point::new(1.0, 0.0)), Point::ORIGIN);
        let f = env.vector_field(Point::new(0.5, 0.25));
        assert!(close(f.x, 0.125, 1e-15) && close(f.y, -0.625, 1e-15));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let env = Environment::new(0.8, 1.7, 2.1, 3.3, 1.4, 2.6).unwrap();
        let z = Point::new(0.37, 0.29);
        let j = env.jacobian(z);
        let h = 1e-6;
        let fd = |i: usize, dx: f64, dy: f64| {
            let plus = env.vector_field(Point::new(z.x + dx, z.y + dy));
            let minus = env.vector_field(Point::new(z.x - dx, z.y - dy));
            if i == 0 { (plus.x - minus.x) / (2.0 * h) } else { (plus.y - minus.y) / (2.0 * h) }
        };
        assert!(close(j[0][0], fd(0, h, 0.0), 1e-6));
        assert!(close(j[0][1], fd(0, 0.0, h), 1e-6));
        assert!(close(j[1][0], fd(1, h, 0.0), 1e-6));
        assert!(close(j[1][1], fd(1, 0.0, h), 1e-6));
    }

    #[test]
    fn jacobian_at_saddle_eigenvalues() {
        // At (0, 1/d) the Jacobian is triangular with eigenvalues
        // alpha(1 - b/d) and -beta.
        let env = Environment::new(1.0, 1.0, 2.0, 2.0, 1.0, 5.0).unwrap();
        let j = env.jacobian(Point::new(0.0, 0.5));
        assert!(close(j[0][0], 0.5, 1e-15)); // alpha (1 - b/d)
        assert!(close(j[1][1], -5.0, 1e-15)); // -beta
        assert_eq!(j[0][1], 0.0);
        // At the origin the linearization is diag(alpha, beta).
        let j0 = env.jacobian(Point::ORIGIN);
        assert_eq!(j0, [[1.0, 0.0], [0.0, 5.0]]);
    }

    #[test]
    fn classify_types() {
        let t1 = Environment::new(1.0, 1.0, 2.0, 2.0, 1.0, 5.0).unwrap().classify().unwrap();
        assert_eq!(t1.class, PortraitClass::Type1ExtinctY);
        assert_eq!(t1.equilibria.len(), 3);
        assert!(t1
            .equilibria
            .iter()
            .any(|(p, n)| *p == Point::new(1.0, 0.0) && *n == EquilibriumNature::Sink));
        assert!(t1
            .equilibria
            .iter()
            .any(|(p, n)| *p == Point::new(0.0, 0.5) && *n == EquilibriumNature::Saddle));

        let t3 = Environment::new(3.0, 1.0, 2.0, 2.0, 1.0, 1.0).unwrap().classify().unwrap();
        assert_eq!(t3.class, PortraitClass::Type3CoexistenceSink);
        let (interior, nature) = *t3.equilibria.last().unwrap();
        assert!(close(interior.x, 0.25, 1e-15) && close(interior.y, 0.25, 1e-15));
        assert_eq!(nature, EquilibriumNature::Sink);

        let t2 = Environment::new(3.0, 3.0, 2.0, 2.0, 1.0, 1.0).unwrap().classify().unwrap();
        assert_eq!(t2.class, PortraitClass::Type2ExtinctX);
        assert!(t2
            .equilibria
            .iter()
            .any(|(p, n)| *p == Point::new(0.0, 0.5) && *n == EquilibriumNature::Sink));
        assert!(t2
            .equilibria
            .iter()
            .any(|(p, n)| close(p.x, 1.0 / 3.0, 1e-15)
                && p.y == 0.0
                && *n == EquilibriumNature::Saddle));

        // Type 4 example: a<c, b>d.
        let t4 = Environment::new(1.0, 3.0, 2.0, 2.0, 1.0, 1.0).unwrap().classify().unwrap();
        assert_eq!(t4.class, PortraitClass::Type4BistableSaddle);
        let (interior, nature) = *t4.equilibria.last().unwrap();
        assert!(interior.in_open_quadrant());
        assert_eq!(nature, EquilibriumNature::Saddle);

        assert!(matches!(
            Environment::new(2.0, 1.0, 2.0, 2.0, 1.0, 1.0).unwrap().classify(),
            Err(EnvError::DegenerateEnvironment)
        ));
    }

    #[test]
    fn mix_endpoints_and_midpoint() {
        let pair = top_pair(5.5);
        assert_eq!(pair.mix(0.0).unwrap(), *pair.env0());
        assert_eq!(pair.mix(1.0).unwrap(), *pair.env1());
        let mid = pair.mix(0.5).unwrap();
        assert!(close(mid.alpha, 3.0, 1e-15));
        assert!(close(mid.beta, 3.0, 1e-15));
        assert!(close(mid.a, 8.0 / 3.0, 1e-15));
        assert!(close(mid.b, 8.0 / 3.0, 1e-15));
        assert!(close(mid.c, 7.0 / 3.0, 1e-15));
        assert!(close(mid.d, (5.0 + 2.75) / 3.0, 1e-15));
    }

    #[test]
    fn mixing_identity_pointwise() {
        let pair = top_pair(5.5);
        let zs = [Point::new(0.3, 0.2), Point::new(1.2, 0.05), Point::new(0.01, 0.9)];
        for s in [0.1, 0.45, 0.83] {
            let mixed = pair.mix(s).unwrap();
            for z in zs {
                let lhs = mixed.vector_field(z);
                let rhs = pair
                    .env0()
                    .vector_field(z)
                    .scale(1.0 - s)
                    .add(pair.env1().vector_field(z).scale(s));
                assert!(lhs.dist(rhs) <= 1e-12, "s={s} z={z}");
            }
        }
    }

    #[test]
    fn st_uv_round_trip_and_values() {
        let pair = top_pair(5.5);
        let (u, v) = pair.st_to_uv(0.5, 10.0);
        assert!(close(u, 5.0 / 6.0, 1e-15));
        assert!(close(v, 6.0, 1e-15));
        let (s, t) = pair.uv_to_st(u, v);
        assert!(close(s, 0.5, 1e-14) && close(t, 10.0, 1e-14));
        // alpha0 == alpha1 collapses the map.
        let pair_eq = EnvPair::new(
            Environment::new(1.0, 1.0, 2.0, 2.0, 2.0, 1.0).unwrap(),
            Environment::new(1.5, 1.2, 2.5, 2.2, 2.0, 1.0).unwrap(),
        )
        .unwrap();
        let (u, v) = pair_eq.st_to_uv(0.37, 4.2);
        assert!(close(u, 0.37, 1e-15));
        assert!(close(v, 4.2 / 2.0, 1e-15));
    }

    #[test]
    fn switch_rates_views() {
        let rates = SwitchRates::from_st(0.5, 10.0).unwrap();
        assert!(close(rates.lambda0(), 5.0, 1e-15));
        assert!(close(rates.lambda1(), 5.0, 1e-15));
        let rates = SwitchRates::new(2.0, 6.0).unwrap();
        assert!(close(rates.s(), 0.25, 1e-15));
        assert!(close(rates.t(), 8.0, 1e-15));
        assert_eq!(rates.swapped(), SwitchRates::new(6.0, 2.0).unwrap());
        assert!(SwitchRates::new(0.0, 1.0).is_err());
        assert!(SwitchRates::from_st(1.0, 1.0).is_err());
    }

    #[test]
    fn favorability_enforced_and_canonical_order() {
        let good = Environment::new(1.0, 1.0, 2.0, 2.0, 1.0, 5.0).unwrap();
        let bad = Environment::new(3.0, 1.0, 2.0, 2.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            EnvPair::new(good, bad),
            Err(EnvError::NotFavorableToX { which: 1, .. })
        ));

        let e0 = Environment::new(3.0, 3.0, 4.0, 5.5, 5.0, 1.0).unwrap();
        let e1 = Environment::new(1.0, 1.0, 2.0, 2.0, 1.0, 5.0).unwrap();
        let pair = EnvPair::new(e0, e1).unwrap();
        assert!(pair.diagnostics().canonical_order_swapped);
        assert_eq!(pair.env0().a, 1.0);
        assert_eq!(pair.env1().a, 3.0);
        // adapt helpers translate original-label quantities.
        let rates = SwitchRates::new(2.0, 7.0).unwrap();
        assert_eq!(pair.adapt_rates(rates), rates.swapped());
        assert!(close(pair.adapt_s(0.3), 0.7, 1e-15));

        let unswapped = top_pair(5.5);
        assert!(!unswapped.diagnostics().canonical_order_swapped);
        assert_eq!(unswapped.adapt_rates(rates), rates);
    }

    #[test]
    fn diagnostics_orderings() {
        // Top pair: ascending ordering b0=1 < d0=2 < b1=3 < d1=5.5; c0=2 < a1=3.
        let d = top_pair(5.5).diagnostics();
        assert_eq!(d.bd_configuration, BdConfiguration::AscendingOrdering);
        assert!(d.i_possible);
        assert!(!d.degenerate_a);

        // Identical environments: (b,d) intervals coincide -> overlapping,
        // and a0 == a1 marks the degenerate branch.
        let e = Environment::new(1.0, 1.0, 2.0, 2.0, 1.0, 1.0).unwrap();
        let d = EnvPair::new(e, e).unwrap().diagnostics();
        assert_eq!(d.bd_configuration, BdConfiguration::Overlapping);
        assert!(d.degenerate_a);
        assert!(!d.i_possible); // c0 = 2 >= a1 = 1
    }

    #[test]
    fn intervals_top_pair() {
        let iv = top_pair(5.5).intervals();
        // N(s) = -5 + 32 s - 32 s^2.
        assert!(close(iv.quad_i.c0, -5.0, 1e-12));
        assert!(close(iv.quad_i.c1, 32.0, 1e-12));
        assert!(close(iv.quad_i.c2, -32.0, 1e-12));
        // M(s) = -5 + 30.5 s - 38 s^2.
        assert!(close(iv.quad_j.c0, -5.0, 1e-12));
        assert!(close(iv.quad_j.c1, 30.5, 1e-12));
        assert!(close(iv.quad_j.c2, -38.0, 1e-12));
        let (i_lo, i_hi) = iv.i.unwrap();
        // I = (1/2 - sqrt(6)/8, 1/2 + sqrt(6)/8).
        let r = 6.0f64.sqrt() / 8.0;
        assert!(close(i_lo, 0.5 - r, 1e-12));
        assert!(close(i_hi, 0.5 + r, 1e-12));
        let (j_lo, j_hi) = iv.j.unwrap();
        assert!(close(j_lo, 0.22963173222763304, 1e-12));
        assert!(close(j_hi, 0.57299984671973538, 1e-12));
        // J strictly inside I here.
        assert!(i_lo < j_lo && j_hi < i_hi);
        // Quadratic vanishes at the endpoints.
        assert!(iv.quad_i.eval(i_lo).abs() < 1e-10);
        assert!(iv.quad_i.eval(i_hi).abs() < 1e-10);
        // Images under s->u are inside (0,1) and ordered.
        let (ui_lo, ui_hi) = iv.i_tilde.unwrap();
        assert!(0.0 < ui_lo && ui_lo < ui_hi && ui_hi < 1.0);
    }

    #[test]
    fn intervals_bottom_pairs() {
        // I = (2/7, 1/2) for the bottom environments, independent of rho.
        for rho in [6.2, 6.8] {
            let iv = bottom_pair(rho).intervals();
            let (lo, hi) = iv.i.unwrap();
            assert!(close(lo, 2.0 / 7.0, 1e-12), "rho={rho}");
            assert!(close(hi, 0.5, 1e-12), "rho={rho}");
        }
        // rho = 6.8: I and J disjoint.
        let iv = bottom_pair(6.8).intervals();
        let (j_lo, j_hi) = iv.j.unwrap();
        assert!(close(j_lo, 0.16358659460210364, 1e-12));
        assert!(close(j_hi, 0.26405919373482940, 1e-12));
        assert!(iv.i_intersect_j().is_none());
        // rho = 6.2: I ∩ J nonempty, strict subset of both.
        let iv = bottom_pair(6.2).intervals();
        let (lo, hi) = iv.i_intersect_j().unwrap();
        let (i_lo, i_hi) = iv.i.unwrap();
        let (j_lo, j_hi) = iv.j.unwrap();
        assert!(lo > i_lo.max(j_lo) - 1e-12);
        assert!(hi < i_hi.min(j_hi) + 1e-12);
        assert!((hi - lo) < (i_hi - i_lo) && (hi - lo) < (j_hi - j_lo));
    }

    #[test]
    fn intervals_identical_envs_empty() {
        let e = Environment::new(1.0, 1.0, 2.0, 2.0, 1.0, 1.0).unwrap();
        let iv = EnvPair::new(e, e).unwrap().intervals();
        assert!(iv.i.is_none() && iv.j.is_none());
        assert!(iv.i_tilde.is_none() && iv.j_tilde.is_none());
    }

    #[test]
    fn interval_sign_scan_agreement() {
        // Endpoint accuracy of the quadratic roots against a fine sign scan
        // of the defining gap a_s - c_s.
        let pair = top_pair(5.5);
        let iv = pair.intervals();
        let (i_lo, i_hi) = iv.i.unwrap();
        let n = 10_000;
        let mut scan_lo = None;
        let mut scan_hi = None;
        for k in 0..=n {
            let s = k as f64 / n as f64;
            let m = pair.mix(s).unwrap();
            if m.a > m.c {
                if scan_lo.is_none() {
                    scan_lo = Some(s);
                }
                scan_hi = Some(s);
            }
        }
        assert!((scan_lo.unwrap() - i_lo).abs() < 1e-4);
        assert!((scan_hi.unwrap() - i_hi).abs() < 1e-4);
        // N(s) < 0 outside [i_lo, i_hi].
        for k in 0..=n {
            let s = k as f64 / n as f64;
            if s < i_lo - 1e-9 || s > i_hi + 1e-9 {
                assert!(iv.quad_i.eval(s) < 0.0, "N({s}) >= 0 outside I");
            }
        }
    }

    #[test]
    fn classify_mix_agrees_with_interval_membership() {
        let pair = top_pair(5.5);
        let iv = pair.intervals();
        for k in 1..100 {
            let s = k as f64 / 100.0;
            let class = pair.mix(s).unwrap().classify().unwrap().class;
            let expected = match (iv.i_contains(s), iv.j_contains(s)) {
                (false, false) => PortraitClass::Type1ExtinctY,
                (true, true) => PortraitClass::Type2ExtinctX,
                (true, false) => PortraitClass::Type3CoexistenceSink,
                (false, true) => PortraitClass::Type4BistableSaddle,
            };
            assert_eq!(class, expected, "s={s}");
        }
    }

    #[test]
    fn parametrization_consistency_a_s_equals_a0_plus_delta_u() {
        // a_s of the averaged environment equals a0 + (a1-a0) u(s).
        let pair = top_pair(5.5);
        for s in [0.1, 0.33, 0.5, 0.77, 0.9] {
            let (u, _) = pair.st_to_uv(s, 1.0);
            let a_s = pair.mix(s).unwrap().a;
            let predicted = pair.env0().a + (pair.env1().a - pair.env0().a) * u;
            assert!(close(a_s, predicted, 1e-12), "s={s}");
        }
    }

    #[test]
    fn pair_config_parsing() {
        let text = r#"{
            "env0": {"a": 1.0, "b": 1.0, "c": 2.0, "d": 2.0, "alpha": 1.0, "beta": 5.0},
            "env1": {"a": 3.0, "b": 3.0, "c": 4.0, "d": 5.5, "alpha": 5.0, "beta": 1.0}
        }"#;
        let pair = EnvPair::from_json_str(text).unwrap();
        assert_eq!(pair.env1().d, 5.5);

        // Missing field named in the error.
        let broken = r#"{"env0": {"a": 1.0, "b": 1.0, "c": 2.0, "d": 2.0, "alpha": 1.0},
                         "env1": {"a": 3.0, "b": 3.0, "c": 4.0, "d": 5.5, "alpha": 5.0, "beta": 1.0}}"#;
        let err = EnvPair::from_json_str(broken).unwrap_err();
        assert!(err.to_string().contains("beta"), "error should name the field: {err}");

        // Unknown field rejected.
        let extra = r#"{"env0": {"a": 1.0, "b": 1.0, "c": 2.0, "d": 2.0, "alpha": 1.0, "beta": 5.0, "rho": 1.0},
                        "env1": {"a": 3.0, "b": 3.0, "c": 4.0, "d": 5.5, "alpha": 5.0, "beta": 1.0}}"#;
        assert!(EnvPair::from_json_str(extra).is_err());
    }

    #[test]
    fn swap_species_involution_and_field() {
        let env = Environment::new(0.8, 1.7, 2.1, 3.3, 1.4, 2.6).unwrap();
        let swapped = env.swap_species();
        assert_eq!(swapped.swap_species(), env);
        let z = Point::new(0.4, 0.7);
        let f = env.vector_field(z);
        let g = swapped.vector_field(Point::new(z.y, z.x));
        assert!(close(g.x, f.y, 1e-15) && close(g.y, f.x, 1e-15));
    }
}
