use crate::model::Timestamp;

#[derive(Clone, Copy, Debug, PartialEq)]
struct CellPriority {
    accumulated: f64,
    rate: f64,
    last_update: Timestamp,
    last_observed: Option<Timestamp>,
}

/// Per-cell priority integrated from piecewise-constant rates and reset to 0
/// whenever the cell is observed.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorityState {
    cells: Vec<CellPriority>,
}

impl PriorityState {
    pub fn new(n_cells: usize, start: Timestamp, initial_rate: f64) -> Self {
        Self {
            cells: vec![
                CellPriority {
                    accumulated: 0.0,
                    rate: initial_rate,
                    last_update: start,
                    last_observed: None,
                };
                n_cells
            ],
        }
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    fn advance(&mut self, cell: usize, t: Timestamp) {
        let c = &mut self.cells[cell];
        if t > c.last_update {
            c.accumulated += c.rate * t.secs_since(c.last_update);
            c.last_update = t;
        }
    }

    /// Changes a cell's rate from `t` onward.
    pub fn set_rate(&mut self, cell: usize, t: Timestamp, rate: f64) {
        debug_assert!(rate >= 0.0 && rate.is_finite(), "rate {rate}");
        self.advance(cell, t);
        self.cells[cell].rate = rate;
    }

    pub fn rate(&self, cell: usize) -> f64 {
        self.cells[cell].rate
    }

    /// Records an observation: the priority drops to 0 at `t`.
    pub fn observe(&mut self, cell: usize, t: Timestamp) {
        self.advance(cell, t);
        let c = &mut self.cells[cell];
        c.accumulated = 0.0;
        c.last_observed = Some(t);
    }

    pub fn last_observed(&self, cell: usize) -> Option<Timestamp> {
        self.cells[cell].last_observed
    }

    pub fn priority(&self, cell: usize, t: Timestamp) -> f64 {
        let c = &self.cells[cell];
        c.accumulated + c.rate * t.secs_since(c.last_update).max(0.0)
    }

    /// Priorities of every cell at `t`.
    pub fn snapshot(&self, t: Timestamp) -> Vec<f64> {
        (0..self.cells.len()).map(|i| self.priority(i, t)).collect()
    }
}
