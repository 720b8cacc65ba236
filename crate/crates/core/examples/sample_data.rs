//! Regenerates the bundled files under `examples/data`. Deterministic, so
//! rerunning it leaves them byte-identical.
//!
//! ```sh
//! cargo run --example sample_data
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use skyquery::alignment::synth::{generate_scene, SceneConfig};
use skyquery::analytics::{matrix_to_raster, write_detection_log, write_raster, CoverageLog, CoverageRecord};
use skyquery::model::{BBox, CellId, Detection, Matrix, Rect, RegionConfig, Timestamp};
use skyquery::simulator::{generate_synthetic_trace, write_trace_csv, TraceProfile};

const DIM: usize = 16;

fn main() {
    let dir = Path::new("examples/data");
    let region = RegionConfig::new(8.54, 47.37, 256.0, 256.0, 8.0).unwrap();
    std::fs::write(dir.join("region.cfg"), region.render()).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut looks: Vec<Vec<f64>> = Vec::new();
    let mut look = |rng: &mut ChaCha8Rng, id: usize| -> Vec<f64> {
        while looks.len() <= id {
            looks.push((0..DIM).map(|_| unit.sample(rng)).collect());
        }
        looks[id].iter().map(|v| ((v + 0.05 * unit.sample(rng)) * 1000.0).round() / 1000.0).collect()
    };

    // (object, spot) per pass.
    let parked: [&[(usize, usize)]; 3] = [
        &[(0, 0), (1, 1), (2, 2), (3, 3), (4, 4), (5, 5), (6, 6)],
        &[(0, 0), (1, 1), (2, 2), (3, 3), (6, 6), (7, 7)],
        &[(0, 0), (1, 1), (7, 7), (8, 4), (9, 9)],
    ];
    let mut rows = Vec::new();
    let mut coverage = Vec::new();
    for pass in 0..3u64 {
        for k in 0..50u64 {
            let frame_id = pass * 1000 + k;
            let t_ms = (pass * 600_000 + k * 200) as i64;
            let ts = k as f64 * 0.2;
            coverage.push(CoverageRecord { time: Timestamp(t_ms), footprint: Rect::new(0.0, 0.0, 256.0, 256.0) });
            let mut push = |rng: &mut ChaCha8Rng, obj: usize, class: &str, x: f64, y: f64, w: f64, h: f64| {
                if (1.0..255.0).contains(&x) && (1.0..255.0).contains(&y) {
                    let jx = (0.05 * unit.sample(rng) * 100.0).round() / 100.0;
                    let jy = (0.05 * unit.sample(rng) * 100.0).round() / 100.0;
                    rows.push(Detection {
                        id: 0,
                        frame_id,
                        time: Timestamp(t_ms),
                        bounds: BBox::new(x + jx, y + jy, w, h),
                        class_name: class.into(),
                        score: 0.9,
                        appearance: Some(look(rng, obj)),
                    });
                }
            };
            for &(obj, spot) in parked[pass as usize] {
                push(&mut rng, obj, "car", 40.0 + 6.0 * spot as f64, 136.0, 4.5, 2.0);
            }
            for lane in 0..3 {
                let x0 = 5.0 + 80.0 * lane as f64 + 20.0 * pass as f64;
                push(&mut rng, 20 + 3 * pass as usize + lane, "car", x0 + 10.0 * ts, 104.0, 4.5, 2.0);
            }
            if pass == 1 {
                push(&mut rng, 40, "car", 204.0, 60.0, 4.5, 2.0);
                push(&mut rng, 51, "ped", 124.0, 96.0 + 1.6 * ts, 0.8, 0.8);
            }
            if pass == 0 {
                push(&mut rng, 50, "ped", 60.0, 96.0 + 1.6 * ts, 0.8, 0.8);
            }
            push(&mut rng, 52 + pass as usize, "ped", 150.0 + 1.4 * ts, 120.0, 0.8, 0.8);
        }
    }
    let w = BufWriter::new(File::create(dir.join("detections.csv")).unwrap());
    write_detection_log(&rows, w).unwrap();
    CoverageLog::new(coverage).write(File::create(dir.join("coverage.csv")).unwrap()).unwrap();

    let lane = Matrix::new_static(region, (0..32).map(|cy| (CellId::new(25, cy), 1.0)).collect::<Vec<_>>());
    write_raster(&matrix_to_raster(&lane), &dir.join("cycling-lanes.png")).unwrap();
    let walks = Matrix::new_static(region, (12..15).map(|cy| (CellId::new(15, cy), 1.0)).collect::<Vec<_>>());
    write_raster(&matrix_to_raster(&walks), &dir.join("crosswalks.png")).unwrap();

    let scene = generate_scene(&SceneConfig {
        seed: 7,
        descriptor_dim: DIM,
        n_landmarks: 100,
        half_extent: 150.0,
        n_passes: 4,
        frames_per_pass: 15,
        ..SceneConfig::default()
    });
    let mut log = scene.log;
    let r = |v: f64, s: f64| (v * s).round() / s;
    for f in &mut log.frames {
        for kp in &mut f.keypoints {
            kp.px = r(kp.px, 100.0);
            kp.py = r(kp.py, 100.0);
            kp.descriptor.iter_mut().for_each(|d| *d = r(*d, 1000.0));
        }
    }
    log.write(BufWriter::new(File::create(dir.join("keypoints.jsonl")).unwrap())).unwrap();

    let city = RegionConfig::new(8.54, 47.37, 2048.0, 2048.0, 512.0).unwrap();
    std::fs::write(dir.join("city.cfg"), city.render()).unwrap();
    let trace = generate_synthetic_trace(3, &TraceProfile::two_regime(city, 3.0 * 86400.0, 3));
    write_trace_csv(&trace.events, &city, BufWriter::new(File::create(dir.join("trace.csv")).unwrap())).unwrap();
    let mut w = BufWriter::new(File::create(dir.join("priorities.csv")).unwrap());
    writeln!(w, "cell_x,cell_y,value").unwrap();
    for c in city.cells() {
        let p: f64 = if rng.random_bool(0.6) { rng.random_range(0.5..20.0) } else { 0.0 };
        writeln!(w, "{},{},{:.3}", c.cx, c.cy, p).unwrap();
    }
}
