use super::trace::Trace;
use crate::model::{world_to_cell, RegionConfig, Timestamp};

/// Objectives with a ground-truth definition.
pub const OBJECTIVES: [&str; 3] = ["counts", "open", "total"];

/// Exact objective values computed from the trace.
///
/// Per cell: `counts` is the number of events active at `t`
/// (`start <= t < end`), `open` is 1 when counts are at most half the cell's
/// capacity (its maximum count over the trace), and `total` is the number
/// of events started by `t`. Events outside the grid are ignored.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    /// Per cell: event (start, end) sorted by start.
    events: Vec<Vec<(Timestamp, Timestamp)>>,
    starts: Vec<Vec<Timestamp>>,
    ends: Vec<Vec<Timestamp>>,
    capacity: Vec<f64>,
}

impl GroundTruth {
    pub fn new(trace: &Trace, grid: &RegionConfig) -> Self {
        let n = grid.n_cells();
        let mut events = vec![Vec::new(); n];
        for e in &trace.events {
            if let Ok(c) = world_to_cell(&e.location, grid) {
                events[grid.index_of(c)].push((e.start, e.end));
            }
        }
        for v in &mut events {
            v.sort();
        }
        let starts: Vec<Vec<Timestamp>> = events.iter().map(|v| v.iter().map(|e| e.0).collect()).collect();
        let ends: Vec<Vec<Timestamp>> = events
            .iter()
            .map(|v| {
                let mut e: Vec<Timestamp> = v.iter().map(|e| e.1).collect();
                e.sort();
                e
            })
            .collect();
        let capacity = events
            .iter()
            .map(|v| {
                // Sweep: ends before starts at equal times since intervals are half-open.
                let mut pts: Vec<(Timestamp, i32)> = v.iter().flat_map(|e| [(e.0, 1), (e.1, -1)]).collect();
                pts.sort_by_key(|p| (p.0, p.1));
                let (mut cur, mut best) = (0, 0);
                for (_, d) in pts {
                    cur += d;
                    best = best.max(cur);
                }
                best as f64
            })
            .collect();
        Self {
            events,
            starts,
            ends,
            capacity,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.events.len()
    }

    pub fn counts(&self, cell: usize, t: Timestamp) -> f64 {
        let s = self.starts[cell].partition_point(|&x| x <= t);
        let e = self.ends[cell].partition_point(|&x| x <= t);
        (s - e) as f64
    }

    pub fn capacity(&self, cell: usize) -> f64 {
        self.capacity[cell]
    }

    pub fn open(&self, cell: usize, t: Timestamp) -> f64 {
        if self.counts(cell, t) <= self.capacity[cell] / 2.0 {
            1.0
        } else {
            0.0
        }
    }

    pub fn total(&self, cell: usize, t: Timestamp) -> f64 {
        self.starts[cell].partition_point(|&x| x <= t) as f64
    }

    /// Value of a named objective; `None` for names without a definition.
    pub fn objective(&self, name: &str, cell: usize, t: Timestamp) -> Option<f64> {
        match name {
            "counts" => Some(self.counts(cell, t)),
            "open" => Some(self.open(cell, t)),
            "total" => Some(self.total(cell, t)),
            _ => None,
        }
    }

    /// Events active at `t` that started after `since` (all active events if `None`).
    pub fn new_since(&self, cell: usize, since: Option<Timestamp>, t: Timestamp) -> f64 {
        let v = &self.events[cell];
        let lo = since.map_or(0, |s| v.partition_point(|e| e.0 <= s));
        let hi = v.partition_point(|e| e.0 <= t);
        v[lo..hi].iter().filter(|e| e.1 > t).count() as f64
    }
}

/// Ground truth read at non-decreasing times, advancing per-cell cursors
/// instead of searching.
#[derive(Clone, Debug)]
pub struct TruthSweep<'a> {
    truth: &'a GroundTruth,
    started: Vec<usize>,
    ended: Vec<usize>,
    at: Timestamp,
}

impl<'a> TruthSweep<'a> {
    pub fn new(truth: &'a GroundTruth) -> Self {
        let n = truth.n_cells();
        Self {
            truth,
            started: vec![0; n],
            ended: vec![0; n],
            at: Timestamp(i64::MIN),
        }
    }

    /// Moves to `t`, which must not precede the previous time.
    pub fn advance(&mut self, t: Timestamp) {
        assert!(t >= self.at, "sweep times must not decrease");
        self.at = t;
        for c in 0..self.started.len() {
            let (s, e) = (&self.truth.starts[c], &self.truth.ends[c]);
            while self.started[c] < s.len() && s[self.started[c]] <= t {
                self.started[c] += 1;
            }
            while self.ended[c] < e.len() && e[self.ended[c]] <= t {
                self.ended[c] += 1;
            }
        }
    }

    pub fn objective(&self, name: &str, cell: usize) -> Option<f64> {
        let counts = (self.started[cell] - self.ended[cell]) as f64;
        match name {
            "counts" => Some(counts),
            "open" => Some(if counts <= self.truth.capacity[cell] / 2.0 { 1.0 } else { 0.0 }),
            "total" => Some(self.started[cell] as f64),
            _ => None,
        }
    }
}
