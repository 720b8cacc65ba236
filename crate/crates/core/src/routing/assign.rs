use std::collections::BTreeMap;

use super::{solve_with_restarts, Route, RoutingInstance, RESTARTS};
use crate::model::{CellId, RegionConfig};

/// Plans routes for a fleet sharing one depot.
///
/// Cells on a drone's planned route are reserved until that drone visits
/// them or its route ends, so drones planning meanwhile skip them.
#[derive(Clone, Debug)]
pub struct FleetPlanner {
    pub grid: RegionConfig,
    pub depot: CellId,
    pub speed: f64,
    pub budget: f64,
    /// Restarts passed to [`solve_with_restarts`].
    pub restarts: usize,
    /// If set, only this many highest-priority cells are offered to the solver.
    pub max_candidates: Option<usize>,
    reserved: Vec<Option<usize>>,
    routes: BTreeMap<usize, Vec<usize>>,
}

impl FleetPlanner {
    pub fn new(grid: RegionConfig, depot: CellId, speed: f64, budget: f64) -> Self {
        let n = grid.n_cells();
        Self {
            grid,
            depot,
            speed,
            budget,
            restarts: RESTARTS,
            max_candidates: None,
            reserved: vec![None; n],
            routes: BTreeMap::new(),
        }
    }

    /// Plans a route for `drone` from a priority snapshot indexed by cell.
    /// Any earlier reservation of this drone is released first.
    pub fn assign_route(&mut self, priorities: &[f64], drone: usize) -> Route {
        self.complete(drone);
        let mut candidates: Vec<(CellId, f64)> = priorities
            .iter()
            .enumerate()
            .filter(|&(i, &p)| p > 0.0 && self.reserved[i].is_none())
            .map(|(i, &p)| (self.grid.cell_at(i), p))
            .collect();
        if let Some(k) = self.max_candidates {
            // Stable sort keeps cell order among equal priorities.
            candidates.sort_by(|a, b| b.1.total_cmp(&a.1));
            candidates.truncate(k);
        }
        let inst = RoutingInstance {
            grid: self.grid,
            depot: self.depot,
            candidates,
            speed: self.speed,
            budget: self.budget,
        };
        let route = solve_with_restarts(&inst, self.restarts);
        assert!(route.total_time <= self.budget, "route exceeds battery budget");
        let cells: Vec<usize> = route.visits().iter().map(|&c| self.grid.index_of(c)).collect();
        for &i in &cells {
            self.reserved[i] = Some(drone);
        }
        self.routes.insert(drone, cells);
        route
    }

    /// Releases `cell` if `drone` holds it.
    pub fn visited(&mut self, drone: usize, cell: usize) {
        if self.reserved[cell] == Some(drone) {
            self.reserved[cell] = None;
        }
    }

    /// Releases everything `drone` still holds.
    pub fn complete(&mut self, drone: usize) {
        if let Some(cells) = self.routes.remove(&drone) {
            for i in cells {
                self.visited(drone, i);
            }
        }
    }

    pub fn is_reserved(&self, cell: usize) -> bool {
        self.reserved[cell].is_some()
    }
}
