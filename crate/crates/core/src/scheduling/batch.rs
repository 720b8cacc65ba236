//! Rate operators evaluated over a whole observation matrix, as used by
//! programs run in batch.

use std::collections::BTreeMap;

use super::{forecast_rate, ForecastCell, PriorityState, TtlState};
use crate::error::{Error, Result};
use crate::model::{CellId, Matrix, Observation, RegionConfig, Timestamp};

/// Piecewise-constant per-cell rates plus the observation events that drove
/// them. `rates` holds a row whenever a cell's rate changes, starting with
/// every cell at `start`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateSeries {
    pub rates: Matrix,
    pub observations: Vec<(CellId, Timestamp)>,
    pub start: Timestamp,
    pub end: Timestamp,
}

fn observation_batches(m: &Matrix) -> BTreeMap<Timestamp, Vec<Observation>> {
    let mut out: BTreeMap<Timestamp, Vec<Observation>> = BTreeMap::new();
    for o in m.rows() {
        out.entry(o.time).or_default().push(*o);
    }
    out
}

fn span(m: &Matrix) -> (Timestamp, Timestamp) {
    let start = m.rows().first().map_or(Timestamp::ZERO, |o| o.time);
    (start, m.max_time().unwrap_or(start))
}

/// Drives per-cell rates through the observations; `rate_at` is evaluated for
/// every cell after each batch and a row is emitted when it changes.
fn drive<S: Default + Clone>(
    m: &Matrix,
    mut update: impl FnMut(&mut S, &Observation),
    rate_at: impl Fn(&S, Timestamp) -> f64,
    mut on_batch: impl FnMut(&RegionConfig, &[S], Timestamp),
) -> RateSeries {
    let grid = &m.grid;
    let (start, end) = span(m);
    let mut state = vec![S::default(); grid.n_cells()];
    let mut current: Vec<f64> = state.iter().map(|s| rate_at(s, start)).collect();
    let mut rows: Vec<Observation> = current
        .iter()
        .enumerate()
        .map(|(i, r)| Observation {
            cell: grid.cell_at(i),
            time: start,
            value: *r,
        })
        .collect();
    let mut observations = Vec::new();
    for (t, batch) in observation_batches(m) {
        for o in &batch {
            update(&mut state[grid.index_of(o.cell)], o);
            observations.push((o.cell, t));
        }
        for (i, s) in state.iter().enumerate() {
            let r = rate_at(s, t);
            if r != current[i] {
                current[i] = r;
                rows.push(Observation {
                    cell: grid.cell_at(i),
                    time: t,
                    value: r,
                });
            }
        }
        on_batch(grid, &state, t);
    }
    RateSeries {
        rates: Matrix::new_time_varying(*grid, rows),
        observations,
        start,
        end,
    }
}

/// Rate 1 at every cell.
pub fn const_rates(m: &Matrix) -> RateSeries {
    drive::<()>(m, |_, _| {}, |_, _| 1.0, |_, _, _| {})
}

/// TTL rates: see [`TtlState`].
pub fn ttl_rates(m: &Matrix, ttl: u32) -> Result<RateSeries> {
    if ttl == 0 {
        return Err(Error::Invalid("ttl must be at least 1".into()));
    }
    Ok(drive::<TtlState>(
        m,
        |s, o| *s = s.observe(o.value, ttl),
        |s, _| s.rate(),
        |_, _, _| {},
    ))
}

/// Forecast rates and the predicted-value matrix. Predictions are emitted at
/// every observation batch time for each cell with a defined model.
pub fn forecast_rates(m: &Matrix) -> (RateSeries, Matrix) {
    let mut predicted = Vec::new();
    let series = drive::<Option<ForecastCell>>(
        m,
        |s, o| s.get_or_insert_with(ForecastCell::default).observe(o.time, o.value),
        |s, t| forecast_rate(s.as_ref(), t),
        |grid, state, t| {
            for (i, s) in state.iter().enumerate() {
                if let Some(c) = s.filter(|c| c.is_defined()) {
                    predicted.push(Observation {
                        cell: grid.cell_at(i),
                        time: t,
                        value: c.forecast(t).0,
                    });
                }
            }
        },
    );
    let grid = series.rates.grid;
    (series, Matrix::new_time_varying(grid, predicted))
}

/// Priority of every cell at `now` (default: the last observation time).
/// Rows are emitted at `now` for cells with positive priority.
pub fn priority_snapshot(rs: &RateSeries, now: Option<Timestamp>) -> Matrix {
    let grid = rs.rates.grid;
    let now = now.unwrap_or(rs.end);
    let mut state = PriorityState::new(grid.n_cells(), rs.start, 0.0);
    // Replay rate changes and observations in time order; at equal times the
    // order does not matter since no time elapses between them.
    let mut events: Vec<(Timestamp, usize, Option<f64>)> = rs
        .rates
        .rows()
        .iter()
        .map(|o| (o.time, grid.index_of(o.cell), Some(o.value)))
        .chain(rs.observations.iter().map(|(c, t)| (*t, grid.index_of(*c), None)))
        .filter(|e| e.0 <= now)
        .collect();
    events.sort_by_key(|e| (e.0, e.1, e.2.is_some()));
    for (t, cell, rate) in events {
        match rate {
            Some(r) => state.set_rate(cell, t, r),
            None => state.observe(cell, t),
        }
    }
    let rows: Vec<Observation> = (0..grid.n_cells())
        .filter_map(|i| {
            let p = state.priority(i, now);
            (p > 0.0).then(|| Observation {
                cell: grid.cell_at(i),
                time: now,
                value: p,
            })
        })
        .collect();
    Matrix::new_time_varying(grid, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(cx: u32, t_s: i64, v: f64) -> Observation {
        Observation {
            cell: CellId::new(cx, 0),
            time: Timestamp(t_s * 1000),
            value: v,
        }
    }

    fn grid() -> RegionConfig {
        RegionConfig::new(0.0, 0.0, 128.0, 64.0, 64.0).unwrap()
    }

    #[test]
    fn const_priorities_grow_with_time_since_visit() {
        let m = Matrix::new_time_varying(grid(), vec![obs(0, 0, 1.0), obs(1, 0, 1.0), obs(0, 40, 1.0), obs(1, 100, 2.0)]);
        let p = priority_snapshot(&const_rates(&m), None);
        assert_eq!(p.value_at(CellId::new(0, 0), Timestamp(100_000)), 60.0);
        assert_eq!(p.value_at(CellId::new(1, 0), Timestamp(100_000)), 0.0);
    }

    #[test]
    fn ttl_retires_empty_cells() {
        let m = Matrix::new_time_varying(grid(), vec![obs(0, 0, 0.0), obs(1, 0, 0.0), obs(0, 10, 0.0), obs(1, 10, 4.0)]);
        let rs = ttl_rates(&m, 2).unwrap();
        assert_eq!(rs.rates.value_at(CellId::new(0, 0), Timestamp(10_000)), 0.0);
        assert_eq!(rs.rates.value_at(CellId::new(1, 0), Timestamp(10_000)), 1.0);
        let p = priority_snapshot(&rs, Some(Timestamp(50_000)));
        assert_eq!(p.value_at(CellId::new(0, 0), Timestamp(50_000)), 0.0);
        assert_eq!(p.value_at(CellId::new(1, 0), Timestamp(50_000)), 40.0);
        assert!(ttl_rates(&m, 0).is_err());
    }

    #[test]
    fn forecast_rates_favor_volatile_cells() {
        let mut rows = Vec::new();
        for k in 0..6 {
            rows.push(obs(0, k * 10, 3.0));
            rows.push(obs(1, k * 10, if k % 2 == 0 { 0.0 } else { 4.0 }));
        }
        // A later batch that only touches the calm cell re-evaluates both.
        rows.push(obs(0, 100, 3.0));
        let m = Matrix::new_time_varying(grid(), rows);
        let (rs, predicted) = forecast_rates(&m);
        let now = Timestamp(50_000);
        assert_eq!(rs.rates.value_at(CellId::new(0, 0), now), super::super::RATE_FLOOR);
        assert_eq!(predicted.value_at(CellId::new(0, 0), now), 3.0);
        assert_eq!(predicted.value_at(CellId::new(1, 0), now), 4.0);
        let later = Timestamp(100_000);
        let calm = rs.rates.value_at(CellId::new(0, 0), later);
        let volatile = rs.rates.value_at(CellId::new(1, 0), later);
        // Differences [4, -4, 4, -4, 4]: squared deviations 76.8 plus the
        // prior over five differences; five mean gaps have elapsed.
        assert!((volatile - 77.8).abs() < 1e-9, "{volatile}");
        assert_eq!(calm, super::super::RATE_FLOOR);
    }
}
