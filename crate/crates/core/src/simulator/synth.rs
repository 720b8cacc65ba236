use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};

use super::trace::{ParkingEvent, Trace};
use crate::model::{RegionConfig, Timestamp, WorldCoord};

/// Arrival process of one cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regime {
    Empty,
    /// Poisson arrivals with exponential stays.
    Steady { arrivals_per_hour: f64, mean_stay_s: f64 },
    /// One arrival per `period_s`, jittered uniformly within `jitter_s`,
    /// from two days before time 0. Cars stay to the end of the trace, so
    /// the count climbs at a steady, predictable pace.
    Periodic { period_s: f64, jitter_s: f64 },
    /// Poisson bursts; each brings a Poisson number of cars arriving
    /// uniformly within `spread_s`, each staying an exponential time.
    Bursty {
        bursts_per_day: f64,
        cars_per_burst: f64,
        spread_s: f64,
        mean_stay_s: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceProfile {
    pub grid: RegionConfig,
    pub duration_s: f64,
    /// One regime per cell in row-major order.
    pub cells: Vec<Regime>,
}

const PERIODIC_LEAD_IN_S: f64 = 2.0 * 86400.0;

/// Fractions and parameters of the two-regime profile.
pub const EMPTY_FRACTION: f64 = 0.25;
pub const BURSTY_FRACTION: f64 = 0.2;
pub const PERIODIC: Regime = Regime::Periodic {
    period_s: 3600.0,
    jitter_s: 600.0,
};
pub const BURSTY: Regime = Regime::Bursty {
    bursts_per_day: 3.0,
    cars_per_burst: 8.0,
    spread_s: 900.0,
    mean_stay_s: 86400.0,
};

impl TraceProfile {
    pub fn uniform(grid: RegionConfig, duration_s: f64, regime: Regime) -> Self {
        let n = grid.n_cells();
        Self {
            grid,
            duration_s,
            cells: vec![regime; n],
        }
    }

    /// Mix of empty cells, predictable periodic cells and volatile bursty
    /// cells, assigned at random from `seed`.
    pub fn two_regime(grid: RegionConfig, duration_s: f64, seed: u64) -> Self {
        Self::mixed(grid, duration_s, seed, EMPTY_FRACTION, (BURSTY_FRACTION, BURSTY), PERIODIC)
    }

    /// Each cell is empty with probability `empty`, takes `volatile.1` with
    /// probability `volatile.0` and `calm` otherwise.
    pub fn mixed(
        grid: RegionConfig,
        duration_s: f64,
        seed: u64,
        empty: f64,
        volatile: (f64, Regime),
        calm: Regime,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ce11);
        let cells = (0..grid.n_cells())
            .map(|_| {
                let u: f64 = rng.random();
                if u < empty {
                    Regime::Empty
                } else if u < empty + volatile.0 {
                    volatile.1
                } else {
                    calm
                }
            })
            .collect();
        Self { grid, duration_s, cells }
    }
}

fn poisson_times(rng: &mut ChaCha8Rng, rate_per_s: f64, from: f64, to: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if !(rate_per_s > 0.0) {
        return out;
    }
    let gap = Exp::new(rate_per_s).expect("positive rate");
    let mut t = from;
    loop {
        t += gap.sample(rng);
        if t >= to {
            return out;
        }
        out.push(t);
    }
}

/// Poisson parking events following `profile`, deterministic given `seed`.
///
/// Arrivals are simulated from a lead-in before time 0 so long-stay cells
/// start near their steady state; events still parked at 0 are clipped to
/// start there.
pub fn generate_synthetic_trace(seed: u64, profile: &TraceProfile) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = &profile.grid;
    let end_s = profile.duration_s;
    let mut raw: Vec<(i64, i64, usize, WorldCoord)> = Vec::new();
    for (i, regime) in profile.cells.iter().enumerate() {
        let mut stays: Vec<(f64, f64)> = Vec::new();
        match *regime {
            Regime::Empty => {}
            Regime::Steady {
                arrivals_per_hour,
                mean_stay_s,
            } => {
                let stay = Exp::new(1.0 / mean_stay_s).expect("positive stay");
                for t in poisson_times(&mut rng, arrivals_per_hour / 3600.0, -5.0 * mean_stay_s, end_s) {
                    stays.push((t, stay.sample(&mut rng)));
                }
            }
            Regime::Periodic { period_s, jitter_s } => {
                let mut t = -PERIODIC_LEAD_IN_S;
                while t < end_s {
                    let at = t + if jitter_s > 0.0 { rng.random_range(0.0..jitter_s) } else { 0.0 };
                    stays.push((at, end_s - at + 1.0));
                    t += period_s;
                }
            }
            Regime::Bursty {
                bursts_per_day,
                cars_per_burst,
                spread_s,
                mean_stay_s,
            } => {
                let stay = Exp::new(1.0 / mean_stay_s).expect("positive stay");
                let size = Poisson::new(cars_per_burst).expect("positive burst size");
                for b in poisson_times(&mut rng, bursts_per_day / 86400.0, -5.0 * mean_stay_s, end_s) {
                    let n = size.sample(&mut rng) as usize;
                    for _ in 0..n {
                        let t = b + rng.random_range(0.0..spread_s);
                        stays.push((t, stay.sample(&mut rng)));
                    }
                }
            }
        }
        let center = grid.cell_center(grid.cell_at(i));
        let half = 0.4 * grid.cell_size_m;
        for (start, dur) in stays {
            let (s, e) = ((start * 1000.0).round() as i64, ((start + dur) * 1000.0).round() as i64);
            if e <= 0 || s >= (end_s * 1000.0) as i64 {
                continue;
            }
            let loc = WorldCoord::new(
                center.x + rng.random_range(-half..half),
                center.y + rng.random_range(-half..half),
                0.0,
            );
            raw.push((s.max(0), e.max(s.max(0) + 1), i, loc));
        }
    }
    raw.sort_by_key(|a| (a.0, a.2, a.1));
    let events = raw
        .into_iter()
        .enumerate()
        .map(|(id, (s, e, _, location))| ParkingEvent {
            event_id: id as u64,
            start: Timestamp(s),
            end: Timestamp(e),
            location,
        })
        .collect();
    Trace {
        events,
        start: Timestamp::ZERO,
        end: Timestamp::from_secs_f64(end_s),
    }
}
