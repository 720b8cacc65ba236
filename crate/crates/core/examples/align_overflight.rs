//! Aligns a synthetic overflight: keypoints are grouped within and across
//! passes, groups are geolocated, and every frame gets a corrected pose.
//!
//! ```sh
//! cargo run --release --example align_overflight [seed]
//! ```

use skyquery::alignment::synth::{generate_scene, position_rmse, SceneConfig};
use skyquery::alignment::{align_log, AlignmentParams};

fn main() -> skyquery::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = SceneConfig { seed, ..SceneConfig::default() };
    let scene = generate_scene(&cfg);
    let params = AlignmentParams::for_descriptor_dim(cfg.descriptor_dim);
    let out = align_log(&scene.log, &cfg.camera, &params)?;

    println!(
        "{} frames, {} stable groups, {} global groups",
        scene.log.frames.len(),
        out.stable.len(),
        out.globals.len()
    );
    let pairs: Vec<_> = scene
        .log
        .frames
        .iter()
        .zip(&out.poses)
        .map(|(f, p)| (f.pose, p.estimate.pose, f.truth.expect("synthetic frames carry truth")))
        .collect();
    let sensor = position_rmse(pairs.iter().map(|(s, _, t)| (s, t)));
    let aligned = position_rmse(pairs.iter().map(|(_, e, t)| (e, t)));
    println!("position RMSE: sensor {sensor:.2} m, aligned {aligned:.2} m");

    // Nearest landmark to each geolocated group.
    let mut err: Vec<f64> = out
        .globals
        .iter()
        .map(|g| {
            scene
                .landmarks
                .iter()
                .map(|l| l.coord.distance(&g.coord))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    err.sort_by(f64::total_cmp);
    if let Some(med) = err.get(err.len() / 2) {
        println!("median group geolocation error {med:.2} m");
    }
    Ok(())
}
