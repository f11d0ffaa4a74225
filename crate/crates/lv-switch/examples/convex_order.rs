//! The Beta convex-order structure behind the monotonicity of invasion
//! rates in the jump intensity.
//!
//! With `p = uv`, `q = (1-u)v`, the distributions `U_{u,v}` have the same
//! mean `u` for every `v` but shrink in the convex order as `v` grows:
//! `U_{u,v'} ≤_cvx U_{u,v}` for `v < v'` (dominance of integrated CDFs).
//! Consequently `E[phi(U_{u,v})]` is increasing in `v` for the concave
//! integrand `phi` built from an environment pair, which is what makes
//! `Λ_y` monotone in `t`.

use lv_switch::env::{EnvPair, Environment};
use lv_switch::fmt_g17;
use lv_switch::invasion::{
    beta_convex_order_check, beta_expectation_series, phi_build, y_role,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("integrated-CDF dominance J_v'(x) <= J_v(x) (max violation over x):");
    for (u, v, v_prime) in [(0.3, 1.0, 2.0), (0.5, 0.5, 8.0), (0.7, 4.0, 32.0)] {
        let report = beta_convex_order_check(u, v, v_prime, 1000)?;
        println!(
            "  u = {u}, v = {v} -> v' = {v_prime}: max violation = {} at x = {:.4} \
             ({} grid points)",
            fmt_g17(report.max_violation),
            report.worst_x,
            report.checked
        );
    }

    let pair = EnvPair::new(
        Environment::new(1.0, 1.0, 2.0, 2.0, 1.0, 5.0)?,
        Environment::new(3.0, 3.0, 4.0, 5.5, 5.0, 1.0)?,
    )?;
    let (res, inv) = y_role(&pair);
    let phi = phi_build(&res, &inv)?;
    let u = 0.5;
    println!("\nE[phi(U_{{u,v}})] for the reference pair at u = {u}:");
    let mut last = f64::NEG_INFINITY;
    for v in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0] {
        let value = beta_expectation_series(&phi, u, v, 1e-13)?;
        println!(
            "  v = {v:>4}: E[phi] = {}   (increase: {})",
            fmt_g17(value),
            value > last
        );
        last = value;
    }
    println!("  limit v -> inf is phi(u) = {}", fmt_g17(lv_switch::invasion::phi_eval(&phi, u)));
    Ok(())
}
