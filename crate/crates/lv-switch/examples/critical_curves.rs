//! The critical jump-intensity curves `t_y(s)` and `t_x(s)`: where each
//! species' invasion rate changes sign.
//!
//! `t_y` is finite exactly on `I`, `t_x` exactly on `J`; between the two
//! curves (where `t > t_y(s)` and `t < t_x(s)`) both rates are positive
//! and both species persist. Transported to the `(u, v)` relaxation-rate
//! coordinates, the y-curve is quasi-convex — a single well.

use lv_switch::atlas::{
    check_quasi_convex_samples, critical_curve, transport_to_uv, Species,
};
use lv_switch::env::{EnvPair, Environment};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pair = EnvPair::new(
        Environment::new(1.0, 1.0, 2.0, 2.0, 1.0, 5.0)?,
        Environment::new(3.0, 3.0, 4.0, 5.5, 5.0, 1.0)?,
    )?;

    for species in [Species::Y, Species::X] {
        let curve = critical_curve(&pair, species, 101, 1e-10)?;
        let domain = curve.domain.expect("both intervals nonempty for this pair");
        println!("t_{species}(s) on domain ({:.6}, {:.6}):", domain.0, domain.1);

        let (s_min, t_min) = curve
            .samples
            .iter()
            .copied()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("grid is non-empty");
        println!("  minimum t = {t_min:.6} at s = {s_min:.6}");
        for &(s, t) in curve.samples.iter().step_by(20) {
            println!("    s = {s:.6}   t_crit = {t:.6}");
        }
        if !curve.failures.is_empty() {
            println!("  {} samples failed root finding", curve.failures.len());
        }

        let transported = transport_to_uv(&pair, &curve);
        let report = check_quasi_convex_samples(&transported);
        println!(
            "  transported to (u, v): quasi-convex = {}, violations = {}, \
             convex observed = {}",
            report.quasi_convex, report.violations, report.convex_observed
        );
    }
    Ok(())
}
