//! Closed-loop fleet simulation over parking-event traces.
//!
//! [`run_experiment`] replays a [`Trace`], flies a drone fleet along routes
//! from the routing module, feeds each observation through the program's
//! objective statements and the scheduling policy, and scores the fleet's
//! estimates against [`GroundTruth`].

mod experiment;
mod fleet;
mod synth;
mod trace;
mod truth;

pub use experiment::{drones_needed, run_grid, write_metrics_csv, write_visits_csv, GridRun, METRICS_HEADER};
pub use fleet::{run_experiment, Policy, SimConfig, SimMetrics};
pub use synth::{generate_synthetic_trace, Regime, TraceProfile, BURSTY, BURSTY_FRACTION, EMPTY_FRACTION, PERIODIC};
pub use trace::{read_trace_csv, write_trace_csv, ParkingEvent, Trace, TRACE_HEADER};
pub use truth::{GroundTruth, TruthSweep, OBJECTIVES};
