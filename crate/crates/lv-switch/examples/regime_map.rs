//! Regime census over an `(s, t)` grid for two values of the `d1`
//! coefficient `rho`.
//!
//! At `rho = 5.5` the map shows three regimes (extinction of either
//! species and persistence of both); lowering `rho` to 4.5 opens a fourth
//! wedge in which both invasion rates are negative and a *random* species
//! goes extinct.

use lv_switch::atlas::{linear_grid, log_grid, regime_map, MapLabel, Regime};
use lv_switch::env::{EnvPair, Environment};
use std::collections::BTreeMap;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for rho in [5.5, 4.5] {
        let pair = EnvPair::new(
            Environment::new(1.0, 1.0, 2.0, 2.0, 1.0, 5.0)?,
            Environment::new(3.0, 3.0, 4.0, rho, 5.0, 1.0)?,
        )?;
        let s_grid = linear_grid(0.25, 0.55, 40);
        let t_grid = log_grid(0.1, 100.0, 40);
        let map = regime_map(&pair, &s_grid, &t_grid)?;

        let mut census: BTreeMap<String, usize> = BTreeMap::new();
        for label in &map.labels {
            *census.entry(label.to_string()).or_insert(0) += 1;
        }
        println!("rho = {rho}: {} grid nodes", map.labels.len());
        for (label, count) in &census {
            println!("  {label:<18} {count:>5}");
        }

        // A coarse picture: one row per t decade, one column per s step.
        println!("  map sketch (rows: t from low to high):");
        for j in (0..t_grid.len()).step_by(5) {
            let mut row = String::from("    ");
            for i in (0..s_grid.len()).step_by(2) {
                row.push(match map.label_at(i, j) {
                    MapLabel::Regime(Regime::PersistenceBoth) => 'P',
                    MapLabel::Regime(Regime::ExtinctionY) => 'y',
                    MapLabel::Regime(Regime::ExtinctionX) => 'x',
                    MapLabel::Regime(Regime::RandomExtinction) => 'R',
                    MapLabel::Frontier => '?',
                });
            }
            println!("{row}   t = {:.3}", t_grid[j]);
        }
        println!();
    }
    Ok(())
}
