use std::io::Write;

use rayon::prelude::*;

use super::fleet::{run_experiment, Policy, SimConfig, SimMetrics};
use super::trace::Trace;
use crate::dsl::Plan;
use crate::error::Result;
use crate::model::RegionConfig;

pub const METRICS_HEADER: &str = "policy,n_drones,objective,mae,flight_hours";

/// One configuration of an experiment grid.
#[derive(Clone, Debug)]
pub struct GridRun {
    pub trace: usize,
    pub policy: Policy,
    pub n_drones: usize,
}

/// Runs every configuration in parallel; results come back in input order.
/// `base` supplies all settings other than policy, drone count and seed; the
/// seed of run `r` is `seeds[r.trace]`.
pub fn run_grid(
    traces: &[Trace],
    seeds: &[u64],
    grid: &RegionConfig,
    base: &SimConfig,
    plan: &Plan,
    runs: &[GridRun],
) -> Result<Vec<SimMetrics>> {
    runs.par_iter()
        .map(|r| {
            let cfg = SimConfig {
                policy: r.policy,
                n_drones: r.n_drones,
                seed: seeds[r.trace],
                ..base.clone()
            };
            run_experiment(&traces[r.trace], grid, &cfg, plan)
        })
        .collect()
}

/// Drones needed to reach `target` error on a curve of `(drones, error)`
/// points sorted by drone count, interpolating linearly between points.
/// `None` if the curve never reaches the target; the first drone count if
/// it starts below it.
pub fn drones_needed(curve: &[(usize, f64)], target: f64) -> Option<f64> {
    let first = curve.first()?;
    if first.1 <= target {
        return Some(first.0 as f64);
    }
    for w in curve.windows(2) {
        let ((n0, e0), (n1, e1)) = (w[0], w[1]);
        if e1 <= target {
            let f = (e0 - target) / (e0 - e1);
            return Some(n0 as f64 + f * (n1 - n0) as f64);
        }
    }
    None
}

pub fn write_metrics_csv(metrics: &[SimMetrics], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for m in metrics {
        for (obj, mae) in &m.mae {
            writeln!(w, "{},{},{},{:.6},{:.3}", m.policy, m.n_drones, obj, mae, m.flight_hours)?;
        }
    }
    Ok(())
}

/// Per-cell observation counts: `cell_x,cell_y,visits`.
pub fn write_visits_csv(m: &SimMetrics, grid: &RegionConfig, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "cell_x,cell_y,visits")?;
    for (i, v) in m.visits.iter().enumerate() {
        let c = grid.cell_at(i);
        writeln!(w, "{},{},{}", c.cx, c.cy, v)?;
    }
    Ok(())
}
