//! Command-line surface: one subcommand per analysis, file-based inputs,
//! reproducible outputs.
//!
//! Subcommands: `classify` (portraits and critical intervals), `invasion`
//! (rates and regime at one switching point), `curve` (critical jump-rate
//! curve of one species), `simulate` (a PDMP trajectory), `support`
//! (tangency set and support-region polylines).
//!
//! Conventions shared by every command:
//!
//! * The environment pair comes from `--pair-file`, a JSON document
//!   `{"env0": {"a": .., "b": .., "c": .., "d": .., "alpha": .., "beta": ..},
//!   "env1": {..}}`. Unknown fields are rejected.
//! * Results go to `--out` (a file, or a file prefix for `support`), or to
//!   stdout when `--out` is absent. Every output file gets a sibling run
//!   manifest `<file>.manifest.json` echoing the parsed inputs, tool
//!   version, seeds, tolerances, and wall-clock duration; in stdout mode
//!   the manifest goes to stderr. Wall-clock time lives only in manifests,
//!   so result files and stdout are bitwise identical across reruns with
//!   the same flags and seeds.
//! * Every float is serialized with 17 significant digits and re-parses
//!   bitwise.
//! * Exit codes: 0 success, 2 input error (flags, file, validation),
//!   3 numerical failure — with whatever partial outputs were computed
//!   already written.
//! * `--threads N` (or the `LV_SWITCH_THREADS` environment variable) caps
//!   the worker pool used by grid sweeps and curve sampling.

use crate::atlas::{
    classify_regime, critical_curve, critical_curve_csv, Species, FRONTIER_EPSILON,
};
use crate::emit::{json_array, json_interval, JsonObject};
use crate::env::{EnvPair, Environment, PortraitType, Quadratic, SwitchRates};
use crate::invasion::{lambda_xy_with_tol, InvasionError, DEFAULT_RATE_TOL};
use crate::pdmp::{occupation_stats, simulate_pdmp, trajectory_csv, PdmpError};
use crate::support::{
    boundary_csv, gamma_prime, support_region, tangency_json, tangency_set, SupportError,
};
use crate::Point;
use clap::{Parser, Subcommand};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Burn-in fraction of the horizon discarded before occupation statistics
/// in `simulate` manifests.
const SIM_BURN_FRACTION: f64 = 0.1;

/// Default relative accuracy of `curve` roots and `simulate` flow steps.
const DEFAULT_GEOM_TOL: f64 = 1e-10;

#[derive(Parser)]
#[command(
    name = "lv-switch",
    version,
    about = "Long-time behaviour of a randomly switched two-species Lotka-Volterra system"
)]
struct Cli {
    /// Worker-thread cap (default: LV_SWITCH_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phase portraits of both environments and the critical intervals I, J.
    Classify {
        /// JSON pair-configuration file.
        #[arg(long)]
        pair_file: PathBuf,
        /// Also classify the averaged environment E_s at this mixing weight.
        #[arg(long)]
        s: Option<f64>,
        /// Output file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Invasion rates and the regime at one switching-rate point.
    Invasion {
        /// JSON pair-configuration file.
        #[arg(long)]
        pair_file: PathBuf,
        /// Stationary fraction of time in environment 1 (with --t).
        #[arg(long)]
        s: Option<f64>,
        /// Total jump intensity lambda0 + lambda1 (with --s).
        #[arg(long)]
        t: Option<f64>,
        /// Mean of the x-resident relaxation-rate split (with --v).
        #[arg(long)]
        u: Option<f64>,
        /// Total x-resident relaxation rate gamma0 + gamma1 (with --u).
        #[arg(long)]
        v: Option<f64>,
        /// Absolute tolerance of the rate evaluation.
        #[arg(long, default_value_t = DEFAULT_RATE_TOL)]
        tol: f64,
        /// Output file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Critical jump-intensity curve t_crit(s) for one species.
    Curve {
        /// JSON pair-configuration file.
        #[arg(long)]
        pair_file: PathBuf,
        /// Which species' invasion rate the curve tracks: x or y.
        #[arg(long)]
        species: Species,
        /// Number of s-grid points across the domain interval.
        #[arg(long, default_value_t = 200)]
        grid: usize,
        /// Relative accuracy of each root.
        #[arg(long, default_value_t = DEFAULT_GEOM_TOL)]
        tol: f64,
        /// Output CSV file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate one trajectory of the switched process.
    Simulate {
        /// JSON pair-configuration file.
        #[arg(long)]
        pair_file: PathBuf,
        /// Stationary fraction of time in environment 1.
        #[arg(long)]
        s: f64,
        /// Total jump intensity lambda0 + lambda1.
        #[arg(long)]
        t: f64,
        /// Initial x density.
        #[arg(long)]
        x0: f64,
        /// Initial y density.
        #[arg(long)]
        y0: f64,
        /// Simulation horizon (time units).
        #[arg(long)]
        horizon: f64,
        /// RNG seed for the jump times.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Flow-integration tolerance per switching piece.
        #[arg(long, default_value_t = DEFAULT_GEOM_TOL)]
        tol: f64,
        /// Output CSV file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tangency set and support-region boundary polylines.
    Support {
        /// JSON pair-configuration file.
        #[arg(long)]
        pair_file: PathBuf,
        /// Output file prefix: writes <prefix>.tangency.json,
        /// <prefix>.gamma_prime.csv (when I and J overlap),
        /// <prefix>.cz_<k>.csv per tangency point, and
        /// <prefix>.manifest.json. Without it, only the tangency JSON is
        /// printed to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A command failure with its exit-code category.
enum CliFailure {
    /// Exit 2: bad flags, unreadable or invalid configuration.
    Input(String),
    /// Exit 3: the computation itself failed; partial outputs are kept.
    Numerical(String),
}

impl CliFailure {
    fn code(&self) -> i32 {
        match self {
            CliFailure::Input(_) => 2,
            CliFailure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliFailure::Input(m) | CliFailure::Numerical(m) => m,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliFailure {
    CliFailure::Input(e.to_string())
}

fn from_invasion(e: InvasionError) -> CliFailure {
    match e {
        InvasionError::BadParameter { .. } => CliFailure::Input(e.to_string()),
        other => CliFailure::Numerical(other.to_string()),
    }
}

fn from_pdmp(e: PdmpError) -> CliFailure {
    match e {
        PdmpError::BadParameter { .. } => CliFailure::Input(e.to_string()),
        other => CliFailure::Numerical(other.to_string()),
    }
}

fn from_support(e: SupportError) -> CliFailure {
    match e {
        SupportError::BadParameter { .. } => CliFailure::Input(e.to_string()),
        other => CliFailure::Numerical(other.to_string()),
    }
}

/// Entry point shared by the binary and in-process tests; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.exit_code() == 0 { 0 } else { 2 };
            let _ = e.print();
            return code;
        }
    };
    let start = Instant::now();
    if let Err(f) = configure_threads(cli.threads) {
        eprintln!("error: {}", f.message());
        return f.code();
    }
    let outcome = match cli.command {
        Command::Classify { pair_file, s, out } => cmd_classify(&pair_file, s, out.as_deref(), start),
        Command::Invasion { pair_file, s, t, u, v, tol, out } => {
            cmd_invasion(&pair_file, s, t, u, v, tol, out.as_deref(), start)
        }
        Command::Curve { pair_file, species, grid, tol, out } => {
            cmd_curve(&pair_file, species, grid, tol, out.as_deref(), start)
        }
        Command::Simulate { pair_file, s, t, x0, y0, horizon, seed, tol, out } => {
            cmd_simulate(&pair_file, s, t, x0, y0, horizon, seed, tol, out.as_deref(), start)
        }
        Command::Support { pair_file, out } => cmd_support(&pair_file, out.as_deref(), start),
    };
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

/// Resolve `--threads` / `LV_SWITCH_THREADS` and size the global worker
/// pool. A no-op when neither is given; an already-built pool (possible
/// only for in-process callers) is left as is.
fn configure_threads(flag: Option<usize>) -> Result<(), CliFailure> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("LV_SWITCH_THREADS") {
            Ok(text) => Some(text.parse::<usize>().map_err(|_| {
                CliFailure::Input(format!(
                    "LV_SWITCH_THREADS must be a positive integer, got `{text}`"
                ))
            })?),
            Err(_) => None,
        },
    };
    match n {
        None => Ok(()),
        Some(0) => Err(CliFailure::Input("thread count must be at least 1".into())),
        Some(n) => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(())
        }
    }
}

fn load_pair(path: &Path) -> Result<EnvPair, CliFailure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliFailure::Input(format!("cannot read {}: {e}", path.display())))?;
    EnvPair::from_json_str(&text).map_err(input_err)
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn write_file(path: &Path, content: &str) -> Result<(), CliFailure> {
    std::fs::write(path, content)
        .map_err(|e| CliFailure::Input(format!("cannot write {}: {e}", path.display())))
}

/// Ship a result document and its manifest: to `out` plus
/// `<out>.manifest.json` when a path is given, else result to stdout and
/// manifest to stderr.
fn deliver(out: Option<&Path>, result: &str, manifest: &str) -> Result<(), CliFailure> {
    match out {
        Some(path) => {
            write_file(path, result)?;
            write_file(&manifest_path(path), manifest)
        }
        None => {
            print!("{result}");
            eprint!("{manifest}");
            Ok(())
        }
    }
}

fn manifest_head(command: &str, pair_file: &Path) -> JsonObject {
    JsonObject::new()
        .str("command", command)
        .str("version", env!("CARGO_PKG_VERSION"))
        .str("pair_file", &pair_file.display().to_string())
}

fn finish_manifest(m: JsonObject, start: Instant) -> String {
    let mut text = m.num("duration_seconds", start.elapsed().as_secs_f64()).render();
    text.push('\n');
    text
}

fn environment_json(e: &Environment) -> String {
    JsonObject::new()
        .num("a", e.a)
        .num("b", e.b)
        .num("c", e.c)
        .num("d", e.d)
        .num("alpha", e.alpha)
        .num("beta", e.beta)
        .render()
}

fn portrait_json(p: &PortraitType) -> String {
    JsonObject::new()
        .str("class", p.class.label())
        .raw(
            "equilibria",
            json_array(p.equilibria.iter().map(|(z, nature)| {
                JsonObject::new()
                    .num("x", z.x)
                    .num("y", z.y)
                    .str("nature", &nature.to_string())
                    .render()
            })),
        )
        .render()
}

fn quadratic_json(q: &Quadratic) -> String {
    JsonObject::new().num("c0", q.c0).num("c1", q.c1).num("c2", q.c2).render()
}

#[allow(clippy::needless_pass_by_value)]
fn cmd_classify(
    pair_file: &Path,
    s: Option<f64>,
    out: Option<&Path>,
    start: Instant,
) -> Result<(), CliFailure> {
    let pair = load_pair(pair_file)?;
    let intervals = pair.intervals();
    let diag = pair.diagnostics();

    let environments = json_array((0..2).map(|i| {
        let env = pair.env(i);
        let portrait = env
            .classify()
            .expect("validated environments satisfy a < c and b < d strictly");
        JsonObject::new()
            .uint("index", i as u64)
            .raw("environment", environment_json(env))
            .raw("portrait", portrait_json(&portrait))
            .render()
    }));

    let mut notes: Vec<String> = Vec::new();
    if diag.canonical_order_swapped {
        notes.push("input environments relabeled so that a0 <= a1".into());
    }
    if diag.degenerate_a {
        notes.push("a0 == a1: degenerate branch on which I must be empty".into());
    }
    if intervals.i.is_none() {
        notes.push("I is empty".into());
    }
    if intervals.j.is_none() {
        notes.push("J is empty".into());
    }

    let mut report = JsonObject::new()
        .str("command", "classify")
        .bool("canonical_order_swapped", diag.canonical_order_swapped)
        .str("bd_configuration", diag.bd_configuration.label())
        .raw("environments", environments);
    if let Some(s_raw) = s {
        let s_canonical = pair.adapt_s(s_raw);
        let mixed = pair.mix(s_canonical).map_err(input_err)?;
        let portrait = mixed.classify().map_err(input_err)?;
        report = report
            .num("s", s_raw)
            .num("s_canonical", s_canonical)
            .raw("mixed_environment", environment_json(&mixed))
            .raw("mixed_portrait", portrait_json(&portrait));
    }
    let report = report
        .raw(
            "intervals",
            JsonObject::new()
                .raw("I", json_interval(intervals.i))
                .raw("J", json_interval(intervals.j))
                .raw("I_tilde", json_interval(intervals.i_tilde))
                .raw("J_tilde", json_interval(intervals.j_tilde))
                .raw("I_intersect_J", json_interval(intervals.i_intersect_j()))
                .raw("quad_I", quadratic_json(&intervals.quad_i))
                .raw("quad_J", quadratic_json(&intervals.quad_j))
                .render(),
        )
        .raw("notes", json_array(notes.iter().map(|n| crate::emit::json_string(n))));

    let mut result = report.render();
    result.push('\n');
    let mut manifest = manifest_head("classify", pair_file);
    if let Some(s_raw) = s {
        manifest = manifest.num("s", s_raw);
    }
    deliver(out, &result, &finish_manifest(manifest, start))
}

#[allow(clippy::too_many_arguments)]
fn cmd_invasion(
    pair_file: &Path,
    s: Option<f64>,
    t: Option<f64>,
    u: Option<f64>,
    v: Option<f64>,
    tol: f64,
    out: Option<&Path>,
    start: Instant,
) -> Result<(), CliFailure> {
    let pair = load_pair(pair_file)?;
    let rates = match (s, t, u, v) {
        (Some(s), Some(t), None, None) => {
            pair.adapt_rates(SwitchRates::from_st(s, t).map_err(input_err)?)
        }
        (None, None, Some(u), Some(v)) => {
            // gamma_i = lambda_i / alpha_i, u = gamma0/(gamma0+gamma1),
            // v = gamma0+gamma1 (canonical labels).
            SwitchRates::new(
                pair.env0().alpha * u * v,
                pair.env1().alpha * (1.0 - u) * v,
            )
            .map_err(input_err)?
        }
        _ => {
            return Err(CliFailure::Input(
                "give exactly one coordinate pair: --s with --t, or --u with --v".into(),
            ))
        }
    };
    let (u_echo, v_echo) = pair.st_to_uv(rates.s(), rates.t());
    let rate = lambda_xy_with_tol(&pair, rates, tol).map_err(from_invasion)?;
    let regime = if rate.lambda_x.abs() < FRONTIER_EPSILON
        || rate.lambda_y.abs() < FRONTIER_EPSILON
    {
        "Frontier".to_string()
    } else {
        classify_regime(rate.lambda_x, rate.lambda_y)
            .map_err(|e| CliFailure::Numerical(e.to_string()))?
            .label()
            .to_string()
    };

    let mut result = JsonObject::new()
        .str("command", "invasion")
        .num("s", rates.s())
        .num("t", rates.t())
        .num("u", u_echo)
        .num("v", v_echo)
        .num("lambda0", rates.lambda0())
        .num("lambda1", rates.lambda1())
        .num("lambda_x", rate.lambda_x)
        .num("lambda_y", rate.lambda_y)
        .int("sign_x", rate.lambda_x.signum() as i64)
        .int("sign_y", rate.lambda_y.signum() as i64)
        .str("regime", &regime)
        .str("method", rate.method.label())
        .num("error_estimate", rate.error_estimate)
        .render();
    result.push('\n');

    let mut manifest = manifest_head("invasion", pair_file).num("tol", tol);
    for (name, flag) in [("s", s), ("t", t), ("u", u), ("v", v)] {
        if let Some(value) = flag {
            manifest = manifest.num(&format!("flag_{name}"), value);
        }
    }
    deliver(out, &result, &finish_manifest(manifest, start))
}

fn cmd_curve(
    pair_file: &Path,
    species: Species,
    grid: usize,
    tol: f64,
    out: Option<&Path>,
    start: Instant,
) -> Result<(), CliFailure> {
    let pair = load_pair(pair_file)?;
    let curve = critical_curve(&pair, species, grid, tol).map_err(|e| match e {
        crate::atlas::AtlasError::BadParameter { .. } => CliFailure::Input(e.to_string()),
        other => CliFailure::Numerical(other.to_string()),
    })?;
    let csv = critical_curve_csv(&curve);

    let manifest = manifest_head("curve", pair_file)
        .str("species", species.label())
        .uint("grid", grid as u64)
        .num("tol", tol)
        .raw("domain", json_interval(curve.domain))
        .uint("samples", curve.samples.len() as u64)
        .raw(
            "failures",
            json_array(curve.failures.iter().map(|(s, reason)| {
                JsonObject::new().num("s", *s).str("reason", reason).render()
            })),
        );
    deliver(out, &csv, &finish_manifest(manifest, start))?;
    if curve.failures.is_empty() {
        Ok(())
    } else {
        // Partial outputs are already on disk; report the failure.
        Err(CliFailure::Numerical(format!(
            "{} of {} curve samples failed root finding (marked inf in the CSV)",
            curve.failures.len(),
            curve.samples.len()
        )))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    pair_file: &Path,
    s: f64,
    t: f64,
    x0: f64,
    y0: f64,
    horizon: f64,
    seed: u64,
    tol: f64,
    out: Option<&Path>,
    start: Instant,
) -> Result<(), CliFailure> {
    let pair = load_pair(pair_file)?;
    let rates = pair.adapt_rates(SwitchRates::from_st(s, t).map_err(input_err)?);
    let traj = simulate_pdmp(&pair, rates, Point::new(x0, y0), 0, horizon, seed, tol)
        .map_err(from_pdmp)?;
    let csv = trajectory_csv(&traj);

    let mut manifest = manifest_head("simulate", pair_file)
        .num("s", s)
        .num("t", t)
        .num("x0", x0)
        .num("y0", y0)
        .num("horizon", horizon)
        .uint("seed", seed)
        .num("tol", tol)
        .num("burn_in_fraction", SIM_BURN_FRACTION)
        .uint("rows", traj.len() as u64)
        .uint("jumps", traj.jump_times.len() as u64);
    let stats_outcome = occupation_stats(&traj, SIM_BURN_FRACTION);
    match &stats_outcome {
        Ok(stats) => {
            manifest = manifest.raw(
                "occupation",
                JsonObject::new()
                    .num("fraction_env1", stats.fraction_env1)
                    .num("mean_x", stats.mean_x)
                    .num("mean_y", stats.mean_y)
                    .num("min_x", stats.min_x)
                    .num("min_y", stats.min_y)
                    .bool("x_extinct", stats.x_extinct)
                    .bool("y_extinct", stats.y_extinct)
                    .num("extinction_threshold", stats.extinction_threshold)
                    .raw(
                        "window",
                        json_interval(Some((stats.window_start, stats.window_end))),
                    )
                    .render(),
            );
        }
        Err(e) => {
            manifest = manifest.str("occupation_error", &e.to_string());
        }
    }
    deliver(out, &csv, &finish_manifest(manifest, start))?;
    match stats_outcome {
        Ok(_) => Ok(()),
        Err(e) => Err(CliFailure::Numerical(format!(
            "trajectory written, but occupation statistics failed: {e}"
        ))),
    }
}

fn cmd_support(
    pair_file: &Path,
    out_prefix: Option<&Path>,
    start: Instant,
) -> Result<(), CliFailure> {
    let pair = load_pair(pair_file)?;
    let mut notes: Vec<String> = Vec::new();
    let mut files: Vec<String> = Vec::new();
    let mut hard_failures: Vec<String> = Vec::new();

    // Tangency set: structural absences (degenerate conic, no traceable
    // branch) are reported as notes, not failures.
    let tangency = match tangency_set(&pair) {
        Ok(set) => set,
        Err(e @ (SupportError::DegenerateConic | SupportError::ContinuationFailure { .. })) => {
            notes.push(e.to_string());
            crate::support::TangencySet::default()
        }
        Err(e) => return Err(from_support(e)),
    };
    let mut tangency_doc = tangency_json(&tangency);
    tangency_doc.push('\n');

    let prefixed = |suffix: &str| -> PathBuf {
        let mut name = out_prefix.expect("callers check").as_os_str().to_os_string();
        name.push(suffix);
        PathBuf::from(name)
    };

    if let Some(prefix) = out_prefix {
        let path = {
            let mut name = prefix.as_os_str().to_os_string();
            name.push(".tangency.json");
            PathBuf::from(name)
        };
        write_file(&path, &tangency_doc)?;
        files.push(path.display().to_string());
    } else {
        print!("{tangency_doc}");
    }

    // Gamma' boundary: requires overlapping critical intervals.
    match gamma_prime(&pair) {
        Ok(region) => {
            if let Some(_prefix) = out_prefix {
                let path = prefixed(".gamma_prime.csv");
                write_file(&path, &boundary_csv(&region))?;
                files.push(path.display().to_string());
            } else {
                notes.push(
                    "Gamma' boundary computed; pass --out PREFIX to write the polyline".into(),
                );
            }
        }
        Err(e @ SupportError::PreconditionViolated { .. }) => notes.push(e.to_string()),
        Err(e) => hard_failures.push(e.to_string()),
    }

    // One C(z) region per tangency point.
    for (k, p) in tangency.points.iter().enumerate() {
        match support_region(&pair, p.point) {
            Ok(region) => {
                if out_prefix.is_some() {
                    let path = prefixed(&format!(".cz_{k}.csv"));
                    write_file(&path, &boundary_csv(&region))?;
                    files.push(path.display().to_string());
                } else {
                    notes.push(format!(
                        "C(z) boundary {k} computed; pass --out PREFIX to write the polyline"
                    ));
                }
            }
            Err(e) => hard_failures.push(format!("C(z) region {k}: {e}")),
        }
    }

    let manifest = manifest_head("support", pair_file)
        .uint("tangency_count", tangency.points.len() as u64)
        .raw("files", json_array(files.iter().map(|f| crate::emit::json_string(f))))
        .raw("notes", json_array(notes.iter().map(|n| crate::emit::json_string(n))))
        .raw(
            "failures",
            json_array(hard_failures.iter().map(|f| crate::emit::json_string(f))),
        );
    let manifest = finish_manifest(manifest, start);
    match out_prefix {
        Some(_) => write_file(&prefixed(".manifest.json"), &manifest)?,
        None => eprint!("{manifest}"),
    }
    for note in &notes {
        eprintln!("note: {note}");
    }

    if hard_failures.is_empty() {
        Ok(())
    } else {
        let mut msg = String::from("support-region construction failed:");
        for f in &hard_failures {
            let _ = write!(msg, " {f};");
        }
        Err(CliFailure::Numerical(msg))
    }
}
