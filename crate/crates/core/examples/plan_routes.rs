//! Plans budget-limited routes on random instances and compares them with
//! the exhaustive optimum.
//!
//! ```sh
//! cargo run --release --example plan_routes [instances]
//! ```

use skyquery::routing::oracle::{exhaustive_optimum, random_instance};
use skyquery::routing::{best_insertion, solve};

fn main() {
    let n_inst: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let (mut worst, mut worst_greedy) = (1.0f64, 1.0f64);
    for seed in 0..n_inst {
        let inst = random_instance(seed, 1 + (seed % 7) as usize);
        let route = solve(&inst);
        let best = exhaustive_optimum(&inst);
        assert!(route.total_time <= inst.budget);
        if best.total_reward > 0.0 {
            worst = worst.min(route.total_reward / best.total_reward);
            worst_greedy = worst_greedy.min(best_insertion(&inst).total_reward / best.total_reward);
        }
        if seed < 3 {
            println!(
                "instance {seed}: {} of {} cells, reward {:.2} (optimum {:.2}), {:.0} of {:.0} s",
                route.visits().len(),
                inst.candidates.len(),
                route.total_reward,
                best.total_reward,
                route.total_time,
                inst.budget
            );
        }
    }
    println!("worst reward ratio over {n_inst} instances: {worst:.3} (plain best insertion {worst_greedy:.3})");
}
