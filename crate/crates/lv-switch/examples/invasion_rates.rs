//! Closed-form invasion rates along a slice of the switching-rate plane,
//! cross-checked against a Monte Carlo estimate.
//!
//! At fixed `s`, `Λ_y` increases and `Λ_x` decreases in the total jump
//! intensity `t`, so the slice passes through three regimes:
//! slow switching keeps `y` extinct, fast switching flips the outcome to
//! `x` extinct, and an intermediate window lets both species persist.

use lv_switch::atlas::classify_regime;
use lv_switch::env::{EnvPair, Environment, SwitchRates};
use lv_switch::fmt_g17;
use lv_switch::invasion::{lambda_xy, mc_invasion, x_role, y_role};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pair = EnvPair::new(
        Environment::new(1.0, 1.0, 2.0, 2.0, 1.0, 5.0)?,
        Environment::new(3.0, 3.0, 4.0, 5.5, 5.0, 1.0)?,
    )?;

    let s = 0.5;
    println!("closed-form rates along s = {s}:");
    println!("{:>8}  {:>24}  {:>24}  regime", "t", "lambda_x", "lambda_y");
    for t in [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0] {
        let rates = SwitchRates::from_st(s, t)?;
        let result = lambda_xy(&pair, rates)?;
        let regime = classify_regime(result.lambda_x, result.lambda_y)?;
        println!(
            "{t:>8}  {:>24}  {:>24}  {regime}",
            fmt_g17(result.lambda_x),
            fmt_g17(result.lambda_y)
        );
    }

    // Monte Carlo witness at one point: simulate the resident's logistic
    // PDMP exactly and average the invader's growth along it.
    let t = 10.0;
    let rates = SwitchRates::from_st(s, t)?;
    let exact = lambda_xy(&pair, rates)?;
    println!("\nMonte Carlo check at (s, t) = ({s}, {t}):");
    for (name, closed_form, (res, inv)) in [
        ("lambda_y", exact.lambda_y, y_role(&pair)),
        ("lambda_x", exact.lambda_x, x_role(&pair)),
    ] {
        let (estimate, stderr) = mc_invasion(&res, &inv, rates, 5_000.0, 8, 2024)?;
        println!(
            "  {name}: closed form {} vs MC {} ± {} ({:+.2} se)",
            fmt_g17(closed_form),
            fmt_g17(estimate),
            fmt_g17(stderr),
            (estimate - closed_form) / stderr
        );
    }
    println!("  (method: {}, error estimate {})", exact.method, fmt_g17(exact.error_estimate));
    Ok(())
}
