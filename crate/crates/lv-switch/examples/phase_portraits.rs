//! Phase portraits of the two fixed environments and of the averaged
//! environments `E_s` along the mixing parameter.
//!
//! Both environments individually are favorable to species `x` (Type 1:
//! `y` dies out), yet the averaged environments pass through every other
//! portrait type as `s` crosses the critical intervals `I` and `J` — the
//! structural reason switching can reverse the deterministic outcome.

use lv_switch::env::{EnvPair, Environment};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // The reference configuration: both environments Type 1, I and J
    // overlapping.
    let pair = EnvPair::new(
        Environment::new(1.0, 1.0, 2.0, 2.0, 1.0, 5.0)?,
        Environment::new(3.0, 3.0, 4.0, 5.5, 5.0, 1.0)?,
    )?;

    for i in 0..2 {
        let env = pair.env(i);
        let portrait = env.classify()?;
        println!(
            "environment {i}: a={} b={} c={} d={} alpha={} beta={}",
            env.a, env.b, env.c, env.d, env.alpha, env.beta
        );
        println!("  portrait: {}", portrait.class);
        for (z, nature) in &portrait.equilibria {
            println!("    equilibrium ({:.6}, {:.6}) — {nature}", z.x, z.y);
        }
    }

    let intervals = pair.intervals();
    println!("\ncritical intervals:");
    println!("  I = {:?}   (a_s > c_s: y-favorability reversed)", intervals.i);
    println!("  J = {:?}   (b_s > d_s: x-favorability reversed)", intervals.j);
    println!("  I ∩ J = {:?}", intervals.i_intersect_j());

    println!("\naveraged environment E_s along s:");
    for k in 0..=20 {
        let s = k as f64 / 20.0;
        let mixed = pair.mix(s)?;
        match mixed.classify() {
            Ok(p) => {
                let marker = match (intervals.i_contains(s), intervals.j_contains(s)) {
                    (true, true) => "s in I ∩ J",
                    (true, false) => "s in I \\ J",
                    (false, true) => "s in J \\ I",
                    (false, false) => "s outside I ∪ J",
                };
                println!("  s={s:<5} {:<16} ({marker})", p.class.to_string());
            }
            Err(e) => println!("  s={s:<5} degenerate: {e}"),
        }
    }
    Ok(())
}
