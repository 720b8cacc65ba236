//! Turns per-cell observation histories into sensing rates and shows how
//! priorities grow between visits and reset on observation.
//!
//! ```sh
//! cargo run --example sensing_priorities
//! ```

use skyquery::model::Timestamp;
use skyquery::scheduling::{fit_forecast, forecast_rate, PriorityState, TtlState};

fn main() {
    let hour = |h: i64| Timestamp(h * 3_600_000);
    let calm: Vec<_> = (0..6).map(|h| (hour(h), 10.0 + h as f64)).collect();
    let noisy: Vec<_> = [10.0, 4.0, 13.0, 2.0, 15.0, 7.0]
        .iter()
        .enumerate()
        .map(|(h, &v)| (hour(h as i64), v))
        .collect();

    let models = [fit_forecast(&calm), fit_forecast(&noisy)];
    for (cell, m) in models.iter().enumerate() {
        let m = m.as_ref().expect("six observations define a model");
        let (mean, var) = m.forecast(hour(8));
        println!("cell {cell}: forecast at 8 h {mean:.1} ± {:.1}", var.sqrt());
    }

    // Rates are re-evaluated every hour; priority integrates them.
    let mut state = PriorityState::new(2, hour(5), 1.0);
    for cell in 0..2 {
        state.observe(cell, hour(5));
    }
    for h in 5..=8 {
        for (cell, m) in models.iter().enumerate() {
            state.set_rate(cell, hour(h), forecast_rate(m.as_ref(), hour(h)));
        }
        let rates: Vec<String> = (0..2).map(|c| format!("{:.3}", state.rate(c))).collect();
        let p: Vec<String> = state.snapshot(hour(h)).iter().map(|v| format!("{v:.1}")).collect();
        println!("t = {h} h: rates [{}], priorities [{}]", rates.join(", "), p.join(", "));
    }
    state.observe(1, hour(8));
    println!("after observing cell 1 at 8 h: {:?}", state.snapshot(hour(8)));

    let mut ttl = TtlState::default();
    let rates: Vec<f64> = [0.0, 0.0, 0.0, 6.0]
        .iter()
        .map(|&v| {
            ttl = ttl.observe(v, 3);
            ttl.rate()
        })
        .collect();
    println!("TTL(3) rates after observations 0, 0, 0, 6: {rates:?}");
}
