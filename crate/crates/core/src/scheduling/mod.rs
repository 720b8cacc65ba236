//! Priority rates, their integration into visit priorities, and the
//! random-walk forecaster behind variance-driven scheduling.

mod batch;
mod forecast;
mod priority;
mod rates;

pub use batch::{const_rates, forecast_rates, priority_snapshot, ttl_rates, RateSeries};
pub use forecast::{fit_forecast, ForecastCell};
pub use priority::PriorityState;
pub use rates::{const_rate, forecast_rate, TtlState, RATE_FLOOR, RATE_MIN_OBSERVATIONS, RATE_PRIOR_VARIANCE};
