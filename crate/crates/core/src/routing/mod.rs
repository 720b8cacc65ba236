//! Reward-collecting route planning under a battery-time budget.
//!
//! A drone leaves the depot cell, visits some candidate cells and returns;
//! each visited cell earns its priority as reward and the round trip must fit
//! the battery budget. [`best_insertion`] builds the tour greedily,
//! [`solve_with_restarts`] restarts it from several seeds, [`solve`] adds a
//! local search on top, and [`FleetPlanner`] assigns routes to several drones
//! without overlap.

mod assign;
mod insertion;
pub mod io;
pub mod oracle;

pub use assign::FleetPlanner;
pub use insertion::{best_insertion, improve, solve, solve_with_local_search, solve_with_restarts, RESTARTS};

use crate::model::{CellId, RegionConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct RoutingInstance {
    pub grid: RegionConfig,
    pub depot: CellId,
    /// Candidate cells and their rewards; non-positive rewards are ignored.
    /// The depot cell itself may be a candidate and costs no time.
    pub candidates: Vec<(CellId, f64)>,
    /// Meters per second.
    pub speed: f64,
    /// Seconds.
    pub budget: f64,
}

impl RoutingInstance {
    /// Flight time between two cell centers.
    pub fn travel_time(&self, a: CellId, b: CellId) -> f64 {
        if a == b {
            return 0.0;
        }
        let (p, q) = (self.grid.cell_center(a), self.grid.cell_center(b));
        p.distance(&q) / self.speed
    }

    /// Total time of the closed tour through `cells` in order.
    pub fn tour_time(&self, cells: &[CellId]) -> f64 {
        let mut t = 0.0;
        let mut at = self.depot;
        for &c in cells {
            t += self.travel_time(at, c);
            at = c;
        }
        t + self.travel_time(at, self.depot)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    /// Depot first and last.
    pub cells: Vec<CellId>,
    pub total_time: f64,
    pub total_reward: f64,
}

impl Route {
    pub fn depot_only(depot: CellId) -> Self {
        Self {
            cells: vec![depot, depot],
            total_time: 0.0,
            total_reward: 0.0,
        }
    }

    /// Cells between the two depot visits.
    pub fn visits(&self) -> &[CellId] {
        &self.cells[1..self.cells.len() - 1]
    }

    pub fn is_depot_only(&self) -> bool {
        self.cells.len() == 2
    }

    /// Arrival time in seconds at each cell of `cells`.
    pub fn etas(&self, inst: &RoutingInstance) -> Vec<f64> {
        let mut t = 0.0;
        let mut out = vec![0.0];
        for w in self.cells.windows(2) {
            t += inst.travel_time(w[0], w[1]);
            out.push(t);
        }
        out
    }
}
