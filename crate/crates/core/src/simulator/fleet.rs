use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use super::trace::Trace;
use super::truth::{GroundTruth, TruthSweep, OBJECTIVES};
use crate::dsl::{CellReading, Plan, StreamEvaluator};
use crate::error::{Error, Result};
use crate::model::{CellId, RegionConfig, Timestamp};
use crate::routing::FleetPlanner;
use crate::scheduling::{forecast_rate, ForecastCell, PriorityState, TtlState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Policy {
    /// TTL rates for routing; estimates carry the last observation forward.
    ConstFreq,
    /// TTL rates for routing; estimates come from the forecaster.
    PredictOnly,
    /// Forecast variances for routing and forecast estimates.
    ForecastRates,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::ConstFreq, Policy::PredictOnly, Policy::ForecastRates];

    pub fn name(self) -> &'static str {
        match self {
            Policy::ConstFreq => "ConstFreq",
            Policy::PredictOnly => "PredictOnly",
            Policy::ForecastRates => "ForecastRates",
        }
    }

    fn forecasts(self) -> bool {
        self != Policy::ConstFreq
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("ttl") {
            return Ok(Policy::ConstFreq);
        }
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown policy `{s}` (ConstFreq, PredictOnly, ForecastRates)")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub n_drones: usize,
    /// Meters per second.
    pub speed: f64,
    /// Seconds of flight per charge.
    pub battery_s: f64,
    /// Side of the square camera footprint in meters.
    pub fov_m: f64,
    pub recharge_s: f64,
    pub seed: u64,
    pub policy: Policy,
    /// TTL for the TTL-rate policies.
    pub ttl: u32,
    /// Exported objective that drives rates and forecasts.
    pub objective: String,
    pub sample_interval_s: f64,
    /// Leading fraction of the run excluded from error averages.
    pub warmup_fraction: f64,
    /// Wait before an idle drone with nothing to do asks again.
    pub idle_retry_s: f64,
    /// Highest-priority cells offered to the route solver per plan.
    pub route_candidates: Option<usize>,
    /// Route solver restarts.
    pub route_restarts: usize,
    /// Keep every observation in [`SimMetrics::observations`].
    pub log_observations: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_drones: 1,
            speed: 17.88,
            battery_s: 3600.0,
            fov_m: 256.0,
            recharge_s: 1800.0,
            seed: 0,
            policy: Policy::ConstFreq,
            ttl: 3,
            objective: "counts".into(),
            sample_interval_s: 300.0,
            warmup_fraction: 0.05,
            idle_retry_s: 300.0,
            route_candidates: Some(32),
            route_restarts: 0,
            log_observations: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.n_drones == 0 {
            return bad("n_drones must be at least 1");
        }
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return bad("speed must be finite and non-negative");
        }
        for (v, name) in [
            (self.battery_s, "battery"),
            (self.fov_m, "fov"),
            (self.sample_interval_s, "sample interval"),
            (self.idle_retry_s, "idle retry"),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if !(self.recharge_s >= 0.0 && self.recharge_s.is_finite()) {
            return bad("recharge time must be non-negative");
        }
        if self.ttl == 0 {
            return bad("ttl must be at least 1");
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad("warmup fraction must be in [0, 1)");
        }
        if self.route_candidates == Some(0) {
            return bad("route candidates must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimMetrics {
    pub policy: Policy,
    pub n_drones: usize,
    pub seed: u64,
    /// Mean absolute error per objective over cells and sample times.
    pub mae: BTreeMap<String, f64>,
    /// Mean absolute error of the driving objective per cell, row-major.
    pub cell_mae: Vec<f64>,
    /// Observations per cell, row-major.
    pub visits: Vec<u64>,
    pub flight_hours: f64,
    pub samples: usize,
    /// `(cell, time, observed count)` when logging is enabled.
    pub observations: Vec<(CellId, Timestamp, f64)>,
}

#[derive(Clone, Debug, Default)]
struct Belief {
    last: Option<f64>,
    model: ForecastCell,
}

impl Belief {
    fn estimate(&self, forecast: bool, t: Timestamp) -> f64 {
        if forecast && self.model.is_defined() {
            self.model.forecast(t).0
        } else {
            self.last.unwrap_or(0.0)
        }
    }
}

struct Drone {
    route: Vec<CellId>,
    leg: usize,
    takeoff: Timestamp,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Arrive,
    Plan,
}

struct World<'a> {
    cfg: &'a SimConfig,
    grid: &'a RegionConfig,
    truth: GroundTruth,
    stream: StreamEvaluator,
    objectives: Vec<String>,
    driver: usize,
    beliefs: Vec<Vec<Belief>>,
    ttl: Vec<TtlState>,
    priority: PriorityState,
    last_visit: Vec<Option<Timestamp>>,
    visits: Vec<u64>,
    log: Vec<(CellId, Timestamp, f64)>,
}

impl World<'_> {
    fn rate(&self, cell: usize, t: Timestamp) -> f64 {
        match self.cfg.policy {
            Policy::ForecastRates => {
                let m = &self.beliefs[self.driver][cell].model;
                forecast_rate(Some(m), t)
            }
            _ => self.ttl[cell].rate(),
        }
    }

    fn observe(&mut self, cell: usize, t: Timestamp) {
        let count = self.truth.counts(cell, t);
        let new = self.truth.new_since(cell, self.last_visit[cell], t);
        self.last_visit[cell] = Some(t);
        self.visits[cell] += 1;
        if self.cfg.log_observations {
            self.log.push((self.grid.cell_at(cell), t, count));
        }
        self.stream.observe(cell, CellReading { count, new });
        for (k, name) in self.objectives.iter().enumerate() {
            let v = self.stream.value(name, cell).expect("objective is tracked");
            let b = &mut self.beliefs[k][cell];
            b.last = Some(v);
            b.model.observe(t, v);
        }
        let v = self.beliefs[self.driver][cell].last.expect("just observed");
        self.ttl[cell] = self.ttl[cell].observe(v, self.cfg.ttl);
        self.priority.observe(cell, t);
        let r = self.rate(cell, t);
        self.priority.set_rate(cell, t, r);
    }

    /// Cells whose centers lie inside the footprint of a drone above `at`.
    fn footprint(&self, at: CellId) -> Vec<usize> {
        let reach = ((self.cfg.fov_m / 2.0) / self.grid.cell_size_m).floor() as i64;
        let mut out = Vec::new();
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let (x, y) = (at.cx as i64 + dx, at.cy as i64 + dy);
                if x >= 0 && y >= 0 && (x as u32) < self.grid.cols() && (y as u32) < self.grid.rows() {
                    out.push(self.grid.index_of(CellId::new(x as u32, y as u32)));
                }
            }
        }
        out
    }
}

/// Runs the closed sensing loop over the trace window.
///
/// Drones start idle at the depot (the center cell). An idle drone takes a
/// priority snapshot, gets a route from the planner and flies it at constant
/// speed, observing every cell whose center its footprint covers on arrival.
/// After landing it recharges and plans again; a drone given no route waits
/// `idle_retry_s`. Every `sample_interval_s` the estimate of each exported
/// objective is compared with ground truth at every cell; samples in the
/// warmup are excluded. Forecast rates are re-evaluated at each sample time.
pub fn run_experiment(trace: &Trace, grid: &RegionConfig, cfg: &SimConfig, plan: &Plan) -> Result<SimMetrics> {
    cfg.validate()?;
    let n = grid.n_cells();
    let stream = StreamEvaluator::new(plan, n);
    let objectives: Vec<String> = plan
        .exports
        .iter()
        .map(|(name, _)| name.clone())
        .filter(|name| OBJECTIVES.contains(&name.as_str()) && stream.supports(name))
        .collect();
    let driver = objectives
        .iter()
        .position(|o| *o == cfg.objective)
        .ok_or_else(|| Error::Config(format!("program does not export a trackable `{}` objective", cfg.objective)))?;

    let start = trace.start;
    let duration_ms = (trace.end - start) as f64;
    let sample_ms = (cfg.sample_interval_s * 1000.0).round() as i64;
    let warmup = start + (duration_ms * cfg.warmup_fraction).ceil() as i64;
    if warmup + sample_ms > trace.end {
        return Err(Error::Config("trace is shorter than the warmup period".into()));
    }

    let mut world = World {
        cfg,
        grid,
        truth: GroundTruth::new(trace, grid),
        stream,
        beliefs: vec![vec![Belief::default(); n]; objectives.len()],
        objectives,
        driver,
        ttl: vec![TtlState::default(); n],
        priority: PriorityState::new(n, start, 1.0),
        last_visit: vec![None; n],
        visits: vec![0; n],
        log: Vec::new(),
    };
    let depot = grid.center_cell();
    let mut planner = FleetPlanner::new(*grid, depot, cfg.speed, cfg.battery_s);
    planner.max_candidates = cfg.route_candidates;
    planner.restarts = cfg.route_restarts;

    let mut drones: Vec<Drone> = (0..cfg.n_drones)
        .map(|_| Drone {
            route: Vec::new(),
            leg: 0,
            takeoff: start,
        })
        .collect();
    let mut queue: BinaryHeap<Reverse<(Timestamp, Kind, usize)>> =
        (0..cfg.n_drones).map(|d| Reverse((start, Kind::Plan, d))).collect();
    let ms = |s: f64| (s * 1000.0).round() as i64;
    let travel_ms = |a: CellId, b: CellId| {
        let (p, q) = (grid.cell_center(a), grid.cell_center(b));
        ms(p.distance(&q) / cfg.speed)
    };

    let forecast_estimates = cfg.policy.forecasts();
    let mut err_sum = vec![0.0; world.objectives.len()];
    let mut cell_err = vec![0.0; n];
    let mut samples = 0usize;
    let mut flight_ms: i64 = 0;
    let mut tick = start;
    let sweep_truth = world.truth.clone();
    let mut sweep = TruthSweep::new(&sweep_truth);

    while tick <= trace.end {
        if let Some(&Reverse((t, kind, d))) = queue.peek() {
            if t <= tick {
                queue.pop();
                match kind {
                    Kind::Plan => {
                        if cfg.policy == Policy::ForecastRates {
                            for c in 0..n {
                                let r = world.rate(c, t);
                                world.priority.set_rate(c, t, r);
                            }
                        }
                        let snapshot = world.priority.snapshot(t);
                        let route = planner.assign_route(&snapshot, d);
                        if route.is_depot_only() {
                            queue.push(Reverse((t + ms(cfg.idle_retry_s), Kind::Plan, d)));
                        } else {
                            let next = t + travel_ms(route.cells[0], route.cells[1]);
                            drones[d] = Drone {
                                route: route.cells,
                                leg: 1,
                                takeoff: t,
                            };
                            queue.push(Reverse((next, Kind::Arrive, d)));
                        }
                    }
                    Kind::Arrive => {
                        let drone = &mut drones[d];
                        let at = drone.route[drone.leg];
                        let airborne = t - drone.takeoff;
                        assert!(
                            airborne as f64 <= cfg.battery_s * 1000.0 + drone.route.len() as f64,
                            "drone {d} exceeded its battery"
                        );
                        if drone.leg + 1 == drone.route.len() {
                            flight_ms += airborne;
                            planner.complete(d);
                            queue.push(Reverse((t + ms(cfg.recharge_s), Kind::Plan, d)));
                        } else {
                            let next = t + travel_ms(at, drone.route[drone.leg + 1]);
                            drone.leg += 1;
                            queue.push(Reverse((next, Kind::Arrive, d)));
                            for c in world.footprint(at) {
                                world.observe(c, t);
                            }
                            planner.visited(d, grid.index_of(at));
                        }
                    }
                }
                continue;
            }
        }
        if cfg.policy == Policy::ForecastRates {
            for c in 0..n {
                let r = world.rate(c, tick);
                world.priority.set_rate(c, tick, r);
            }
        }
        if tick >= warmup {
            sweep.advance(tick);
            for (k, name) in world.objectives.iter().enumerate() {
                let mut s = 0.0;
                for c in 0..n {
                    let truth = sweep.objective(name, c).expect("known objective");
                    let e = (world.beliefs[k][c].estimate(forecast_estimates, tick) - truth).abs();
                    s += e;
                    if k == world.driver {
                        cell_err[c] += e;
                    }
                }
                err_sum[k] += s / n as f64;
            }
            samples += 1;
        }
        tick = tick + sample_ms;
    }

    let mae = world
        .objectives
        .iter()
        .zip(err_sum)
        .map(|(name, s)| (name.clone(), s / samples as f64))
        .collect();
    Ok(SimMetrics {
        policy: cfg.policy,
        n_drones: cfg.n_drones,
        seed: cfg.seed,
        mae,
        cell_mae: cell_err.into_iter().map(|e| e / samples as f64).collect(),
        visits: world.visits,
        flight_hours: flight_ms as f64 / 3.6e6,
        samples,
        observations: world.log,
    })
}
