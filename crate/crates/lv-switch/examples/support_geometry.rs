//! Geometry of the invariant measure's support: the collinearity conic,
//! the tangency set, and the candidate support regions.
//!
//! Three configurations that differ only in the coefficient `d1 = rho`
//! illustrate the cases: overlapping critical intervals with an empty
//! tangency set (`Γ'` exists), disjoint intervals with two tangency
//! points (regions `C(z)` exist instead), and nested intervals with
//! neither.

use lv_switch::env::{EnvPair, Environment};
use lv_switch::fmt_g17;
use lv_switch::support::{
    conic_coeffs, contains, equilibrium_curve, gamma_prime, support_region, tangency_set,
    SupportError,
};
use lv_switch::Point;

fn bottom_pair(rho: f64) -> Result<EnvPair, Box<dyn std::error::Error>> {
    Ok(EnvPair::new(
        Environment::new(1.0, 2.0 / 3.0, 2.0, 4.0 / 3.0, 1.0, 2.0)?,
        Environment::new(3.0, 3.0, 4.0, rho, 5.0, 1.0)?,
    )?)
}

fn shoelace_area(boundary: &[Point]) -> f64 {
    let mut twice = 0.0;
    for w in boundary.windows(2) {
        twice += w[0].x * w[1].y - w[1].x * w[0].y;
    }
    0.5 * twice
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let top = EnvPair::new(
        Environment::new(1.0, 1.0, 2.0, 2.0, 1.0, 5.0)?,
        Environment::new(3.0, 3.0, 4.0, 5.5, 5.0, 1.0)?,
    )?;

    let conic = conic_coeffs(&top);
    println!("collinearity conic of the reference pair (det(F0, F1) = x y G):");
    println!(
        "  G = {} x^2 + {} xy + {} y^2 + {} x + {} y + {}",
        conic.g20, conic.g11, conic.g02, conic.g10, conic.g01, conic.g00
    );
    let grid: Vec<f64> = (0..=40).map(|k| 0.2 + 0.6 * k as f64 / 40.0).collect();
    let curve = equilibrium_curve(&top, &grid);
    println!(
        "  equilibrium curve: {} quadrant samples on the s-grid, {} singular",
        curve.samples.len(),
        curve.skipped.len()
    );

    println!("\ntangency sets:");
    for (name, pair) in [
        ("top    rho=5.5", top),
        ("bottom rho=6.8", bottom_pair(6.8)?),
        ("bottom rho=6.2", bottom_pair(6.2)?),
    ] {
        let set = tangency_set(&pair)?;
        println!("  {name}: |T| = {}", set.points.len());
        for p in &set.points {
            println!(
                "    ({}, {})  residuals G: {:.2e}, tangency: {:.2e}",
                fmt_g17(p.point.x),
                fmt_g17(p.point.y),
                p.residual_g,
                p.residual_tangency
            );
        }
    }

    println!("\nGamma' (needs I ∩ J non-empty):");
    let gamma = gamma_prime(&top)?;
    for arc in &gamma.arcs {
        println!("  arc {:<8} {} points", arc.name, arc.points.len());
    }
    println!("  enclosed area = {:.6}", shoelace_area(&gamma.boundary));
    for z in [Point::new(0.4, 0.15), Point::new(0.9, 0.4)] {
        println!("  contains ({}, {}) = {}", z.x, z.y, contains(&gamma, z));
    }
    match gamma_prime(&bottom_pair(6.8)?) {
        Err(SupportError::PreconditionViolated { .. }) => {
            println!("  bottom rho=6.8: precondition violated (I and J are disjoint)")
        }
        other => println!("  bottom rho=6.8: unexpected outcome {other:?}"),
    }

    println!("\nC(z) regions of the bottom rho=6.8 pair:");
    let pair = bottom_pair(6.8)?;
    for p in &tangency_set(&pair)?.points {
        let region = support_region(&pair, p.point)?;
        let arcs: Vec<String> = region
            .arcs
            .iter()
            .map(|a| format!("{} ({} pts)", a.name, a.points.len()))
            .collect();
        println!(
            "  z = ({:.6}, {:.6}): area {:.6}, arcs {}",
            p.point.x,
            p.point.y,
            shoelace_area(&region.boundary),
            arcs.join(", ")
        );
    }
    Ok(())
}
