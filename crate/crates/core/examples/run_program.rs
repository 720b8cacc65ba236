//! Runs a query program against the bundled detection log, coverage log
//! and rasters, and summarizes every export.
//!
//! ```sh
//! cargo run --example run_program [examples/data/programs/parking.sq]
//! ```

use std::path::Path;

use skyquery::dsl::{self, Bindings, ExecOptions, Value};
use skyquery::model::RegionConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let program = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| data.join("programs/parking.sq"));
    let src = std::fs::read_to_string(&program)?;
    let region = RegionConfig::parse(&std::fs::read_to_string(data.join("region.cfg"))?)?;

    let bindings = Bindings::with_base_dir(&data)
        .bind("car_model", data.join("detections.csv"))
        .bind("ped_model", data.join("detections.csv"))
        .bind("Video", data.join("coverage.csv"));
    let out = dsl::run(&src, &bindings, &ExecOptions::new(region)).map_err(|e| format!("{}: {e}", program.display()))?;

    for (name, value) in &out.exports {
        match value {
            Value::Matrix(m) => println!("{name}: matrix, {} rows, {} cells", m.rows().len(), m.by_cell().len()),
            Value::Rates(r) => println!("{name}: rates, {} rows", r.rates.rows().len()),
            Value::Sequences(s) => println!("{name}: {} sequences", s.len()),
            Value::Detections(d) => println!("{name}: {} detections", d.len()),
        }
    }
    if let Some(p) = &out.priorities {
        let top = p.rows().iter().map(|r| r.value).fold(0.0, f64::max);
        println!("priorities: highest {top:.1}");
    }
    for w in &out.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
