//! Simulates drone fleets of 1 to 4 drones under the three scheduling
//! policies on a synthetic two-week parking trace and prints error curves.
//!
//! ```sh
//! cargo run --release --example fleet_sweep [seed]
//! ```

use skyquery::commands::SIMULATION_PROGRAM;
use skyquery::dsl;
use skyquery::model::RegionConfig;
use skyquery::simulator::{generate_synthetic_trace, run_grid, GridRun, Policy, SimConfig, TraceProfile};

fn main() -> skyquery::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let grid = RegionConfig::square(12, 512.0);
    let profile = TraceProfile::two_regime(grid, 14.0 * 86400.0, seed);
    let trace = generate_synthetic_trace(seed, &profile);
    let plan = dsl::plan(&dsl::parse(SIMULATION_PROGRAM)?)?;

    let drones = [1, 2, 3, 4];
    let runs: Vec<GridRun> = Policy::ALL
        .iter()
        .flat_map(|&policy| drones.map(|n_drones| GridRun { trace: 0, policy, n_drones }))
        .collect();
    let metrics = run_grid(&[trace], &[seed], &grid, &SimConfig::default(), &plan, &runs)?;

    println!("{:<14}{}", "counts MAE", drones.map(|n| format!("{n:>8}")).concat());
    for chunk in metrics.chunks(drones.len()) {
        let row: String = chunk.iter().map(|m| format!("{:>8.3}", m.mae["counts"])).collect();
        println!("{:<14}{row}", chunk[0].policy.name());
    }
    Ok(())
}
