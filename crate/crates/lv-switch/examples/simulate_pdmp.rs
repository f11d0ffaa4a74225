//! Trajectories of the switched process in three regimes, with occupation
//! statistics and a support check against the region `Γ'`.
//!
//! The same initial condition is run at three jump intensities: slow
//! switching drives `y` extinct, an intermediate intensity keeps both
//! species bounded away from the axes, fast switching drives `x` extinct.
//! In the persistence case the trajectory also concentrates inside the
//! region `Γ'` bounded by the two unstable manifolds.

use lv_switch::env::{EnvPair, Environment, SwitchRates};
use lv_switch::pdmp::{occupation_stats, simulate_pdmp};
use lv_switch::support::{contains, gamma_prime};
use lv_switch::Point;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pair = EnvPair::new(
        Environment::new(1.0, 1.0, 2.0, 2.0, 1.0, 5.0)?,
        Environment::new(3.0, 3.0, 4.0, 5.5, 5.0, 1.0)?,
    )?;
    let z0 = Point::new(0.55, 0.01);
    let (s, horizon, seed, tol) = (0.5, 2_000.0, 42, 1e-8);

    let gamma = gamma_prime(&pair)?;

    for (t, expectation) in [(1.0, "y extinct"), (15.0, "both persist"), (120.0, "x extinct")] {
        let rates = SwitchRates::from_st(s, t)?;
        let traj = simulate_pdmp(&pair, rates, z0, 0, horizon, seed, tol)?;
        let stats = occupation_stats(&traj, 0.2)?;
        println!("t = {t:>5}  (expected: {expectation})");
        println!(
            "  jumps = {}, rows = {}, fraction of time in env 1 = {:.4}",
            traj.jump_times.len(),
            traj.len(),
            stats.fraction_env1
        );
        println!(
            "  post-burn-in means  x = {:.6}, y = {:.6};  minima  x = {:.3e}, y = {:.3e}",
            stats.mean_x, stats.mean_y, stats.min_x, stats.min_y
        );
        println!(
            "  extinction flags: x = {}, y = {}",
            stats.x_extinct, stats.y_extinct
        );

        // How much of the post-burn-in path sits inside Gamma'?
        let start = traj.times.partition_point(|&u| u <= stats.window_start);
        let mut inside = 0usize;
        let mut total = 0usize;
        for k in (start..traj.len()).step_by(16) {
            total += 1;
            inside += usize::from(contains(&gamma, traj.states[k]));
        }
        println!(
            "  fraction of sampled post-burn-in states inside Gamma': {:.4}\n",
            inside as f64 / total as f64
        );
    }
    Ok(())
}
