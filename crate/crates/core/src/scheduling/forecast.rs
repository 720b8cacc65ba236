use crate::model::Timestamp;

/// Random-walk-with-drift model of one cell's sparsely sampled series.
///
/// Successive value differences are summarized incrementally (Welford), so
/// `mu` and `sigma2` always equal the mean and unbiased variance of the
/// difference list. Time is normalized by the mean gap between observations.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ForecastCell {
    n_obs: usize,
    last_value: f64,
    last_time: Timestamp,
    mean_diff: f64,
    m2: f64,
    gap_sum_s: f64,
}

impl ForecastCell {
    pub fn observe(&mut self, t: Timestamp, value: f64) {
        if self.n_obs > 0 {
            let diff = value - self.last_value;
            let k = self.n_obs as f64;
            let delta = diff - self.mean_diff;
            self.mean_diff += delta / k;
            self.m2 += delta * (diff - self.mean_diff);
            self.gap_sum_s += t.secs_since(self.last_time).max(0.0);
        }
        self.n_obs += 1;
        self.last_value = value;
        self.last_time = t;
    }

    pub fn n_observations(&self) -> usize {
        self.n_obs
    }

    /// True once two observations give at least one difference.
    pub fn is_defined(&self) -> bool {
        self.n_obs >= 2
    }

    pub fn mu(&self) -> f64 {
        self.mean_diff
    }

    /// Unbiased variance of the differences; 0 with fewer than two differences.
    pub fn sigma2(&self) -> f64 {
        if self.n_obs >= 3 {
            (self.m2 / (self.n_obs - 2) as f64).max(0.0)
        } else {
            0.0
        }
    }

    /// Sum of squared deviations of the differences from their mean.
    pub fn sum_sq_dev(&self) -> f64 {
        self.m2.max(0.0)
    }

    /// Number of differences seen.
    pub fn n_differences(&self) -> usize {
        self.n_obs.saturating_sub(1)
    }

    pub fn last_value(&self) -> f64 {
        self.last_value
    }

    pub fn last_time(&self) -> Timestamp {
        self.last_time
    }

    /// Mean seconds between observations (0 before the second observation).
    pub fn mean_gap_s(&self) -> f64 {
        if self.n_obs >= 2 {
            self.gap_sum_s / (self.n_obs - 1) as f64
        } else {
            0.0
        }
    }

    /// Elapsed observation steps at `now`.
    pub fn steps_at(&self, now: Timestamp) -> f64 {
        let gap = self.mean_gap_s();
        if gap > 0.0 {
            now.secs_since(self.last_time).max(0.0) / gap
        } else {
            0.0
        }
    }

    /// `(predicted value, variance)` at `now`.
    pub fn forecast(&self, now: Timestamp) -> (f64, f64) {
        let k = self.steps_at(now);
        (self.last_value + self.mu() * k, self.sigma2() * k)
    }
}

/// Fits a model to one cell's time-ordered observations; `None` with fewer than two.
pub fn fit_forecast(observations: &[(Timestamp, f64)]) -> Option<ForecastCell> {
    let mut cell = ForecastCell::default();
    for &(t, v) in observations {
        cell.observe(t, v);
    }
    cell.is_defined().then_some(cell)
}
