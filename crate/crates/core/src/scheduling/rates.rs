/// Floor applied to forecast variances used as rates.
pub const RATE_FLOOR: f64 = 1e-3;

/// Per-cell TTL rule: rate 1 until either `ttl` consecutive zero
/// observations (then 0 for good) or any positive observation (then 1 for good).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TtlState {
    #[default]
    Pending,
    Zeros(u32),
    Retired,
    Active,
}

impl TtlState {
    pub fn observe(self, value: f64, ttl: u32) -> Self {
        match self {
            Self::Retired | Self::Active => self,
            Self::Pending | Self::Zeros(_) if value > 0.0 => Self::Active,
            Self::Pending | Self::Zeros(_) if value == 0.0 => {
                let run = match self {
                    Self::Zeros(n) => n + 1,
                    _ => 1,
                };
                if run >= ttl {
                    Self::Retired
                } else {
                    Self::Zeros(run)
                }
            }
            // Negative values break a run of zeros without activating the cell.
            _ => Self::Pending,
        }
    }

    pub fn rate(self) -> f64 {
        if self == Self::Retired {
            0.0
        } else {
            1.0
        }
    }
}

pub fn const_rate() -> f64 {
    1.0
}

/// Observations needed before a cell's variance is estimated and its rate
/// follows the model.
pub const RATE_MIN_OBSERVATIONS: usize = 3;

/// Weight of the unit-variance pseudo-difference mixed into the step
/// variance used for rates.
pub const RATE_PRIOR_VARIANCE: f64 = 1.0;

/// Forecast rate from a cell's model at `now`.
///
/// The step variance is the sum of squared deviations of the differences
/// plus [`RATE_PRIOR_VARIANCE`], over the number of differences, so a short
/// run of identical differences does not read as zero uncertainty. It is
/// floored at [`RATE_FLOOR`] and grows linearly with elapsed steps. Cells
/// with fewer than [`RATE_MIN_OBSERVATIONS`] observations get 1.
pub fn forecast_rate(cell: Option<&super::ForecastCell>, now: crate::model::Timestamp) -> f64 {
    match cell {
        Some(c) if c.n_observations() >= RATE_MIN_OBSERVATIONS => {
            let s2 = (c.sum_sq_dev() + RATE_PRIOR_VARIANCE) / c.n_differences() as f64;
            (s2.max(RATE_FLOOR) * c.steps_at(now)).max(RATE_FLOOR)
        }
        _ => 1.0,
    }
}
