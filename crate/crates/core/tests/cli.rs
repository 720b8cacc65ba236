use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use skyquery::model::{CellId, RegionConfig};
use skyquery::routing::oracle::exhaustive_optimum;
use skyquery::routing::RoutingInstance;

fn data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data")
}

fn skyquery(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skyquery"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn analyze_args(program: &str) -> Vec<String> {
    let d = data();
    let mut v = vec![
        "analyze".to_string(),
        "--program".into(),
        d.join("programs").join(program).display().to_string(),
        "--region".into(),
        d.join("region.cfg").display().to_string(),
        "--base-dir".into(),
        d.display().to_string(),
    ];
    for (name, file) in [("car_model", "detections.csv"), ("ped_model", "detections.csv"), ("Video", "coverage.csv")] {
        v.push("--bind".into());
        v.push(format!("{name}={}", d.join(file).display()));
    }
    v
}

fn run_strings(out: &Path, args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    skyquery(out, &refs)
}

#[test]
fn align_empty_log_writes_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("empty.jsonl");
    std::fs::write(&log, "").unwrap();
    let out = dir.path().join("out");
    let o = skyquery(&out, &["align", path_str(&log)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let groups = std::fs::read_to_string(out.join("groups.csv")).unwrap();
    let poses = std::fs::read_to_string(out.join("poses.csv")).unwrap();
    assert_eq!(groups.lines().count(), 1);
    assert_eq!(poses.lines().count(), 1);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn align_reports_the_malformed_line() {
    let dir = tempfile::tempdir().unwrap();
    let good = std::fs::read_to_string(data().join("keypoints.jsonl")).unwrap();
    let mut text: String = good.lines().take(16).map(|l| format!("{l}\n")).collect();
    text.push_str("{\"frame_id\": 99, \"t_ms\": oops}\n");
    let log = dir.path().join("bad.jsonl");
    std::fs::write(&log, text).unwrap();
    let o = skyquery(&dir.path().join("out"), &["align", path_str(&log)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 17"), "{}", stderr(&o));
}

#[test]
fn align_bundled_log_beats_sensor_poses() {
    let dir = tempfile::tempdir().unwrap();
    let log = data().join("keypoints.jsonl");
    let o = skyquery(dir.path(), &["align", path_str(&log)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("pose RMSE")).expect("RMSE line");
    let nums: Vec<f64> = line
        .split(|c: char| !(c.is_ascii_digit() || c == '.'))
        .filter_map(|s| s.parse().ok())
        .collect();
    assert!(nums[0] < nums[1], "{line}");
}

#[test]
fn analyze_parking_writes_spots() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_strings(dir.path(), &analyze_args("parking.sq"));
    assert!(o.status.success(), "{}", stderr(&o));
    let spots = std::fs::read_to_string(dir.path().join("spots.csv")).unwrap();
    assert!(spots.lines().count() > 1);
    assert!(dir.path().join("counts.csv").exists());
}

#[test]
fn analyze_rejects_export_of_undefined_name() {
    let dir = tempfile::tempdir().unwrap();
    let program = dir.path().join("bad.sq");
    std::fs::write(&program, "cars = ObjectDetection(Video, 'car_model')\n*counts = ToMatrix(trucks, Count)\n").unwrap();
    let mut args = analyze_args("parking.sq");
    args[2] = program.display().to_string();
    let o = run_strings(&dir.path().join("out"), &args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("trucks"), "{}", stderr(&o));
}

#[test]
fn analyze_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run_strings(out, &analyze_args("hazards.sq"));
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (ma, mb) = (std::fs::read(a.join("manifest.json")).unwrap(), std::fs::read(b.join("manifest.json")).unwrap());
    assert_eq!(ma, mb);
    assert_eq!(std::fs::read(a.join("hazards.jsonl")).unwrap(), std::fs::read(b.join("hazards.jsonl")).unwrap());
}

#[test]
fn simulate_writes_metrics_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, city) = (data().join("trace.csv"), data().join("city.cfg"));
    let args = [
        "--seed",
        "3",
        "simulate",
        "--trace",
        path_str(&trace),
        "--region",
        path_str(&city),
        "--drones",
        "1-2",
    ];
    let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run_strings(out, &args);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let metrics = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    for policy in ["ConstFreq", "PredictOnly", "ForecastRates"] {
        for n in ["1", "2"] {
            let row = format!("{policy},{n},counts,");
            assert_eq!(metrics.lines().filter(|l| l.starts_with(&row)).count(), 1, "{metrics}");
        }
    }
    assert_eq!(metrics, std::fs::read_to_string(b.join("metrics.csv")).unwrap());
}

#[test]
fn simulate_rejects_zero_drones() {
    let dir = tempfile::tempdir().unwrap();
    let o = skyquery(dir.path(), &["simulate", "--drones", "0", "--weeks", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("at least 1"), "{}", stderr(&o));
}

fn write_city(dir: &Path, values: &[(u32, u32, f64)]) -> (PathBuf, PathBuf) {
    let region = dir.join("city.cfg");
    std::fs::copy(data().join("city.cfg"), &region).unwrap();
    let pri = dir.join("priorities.csv");
    let mut text = String::from("cell_x,cell_y,value\n");
    for &(x, y, v) in values {
        text.push_str(&format!("{x},{y},{v}\n"));
    }
    std::fs::write(&pri, text).unwrap();
    (region, pri)
}

fn route_cells(out: &Path) -> Vec<(u32, u32)> {
    std::fs::read_to_string(out.join("route.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect()
}

#[test]
fn route_with_nothing_to_visit_stays_home() {
    let dir = tempfile::tempdir().unwrap();
    let (region, pri) = write_city(dir.path(), &[(0, 0, 0.0), (3, 3, 0.0)]);
    let out = dir.path().join("zero");
    let o = skyquery(&out, &["route", "--priorities", path_str(&pri), "--region", path_str(&region), "--depot", "1,1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(route_cells(&out), vec![(1, 1), (1, 1)]);

    let (region, pri) = write_city(dir.path(), &[(0, 0, 5.0), (3, 3, 2.0)]);
    let out = dir.path().join("budget");
    let o = skyquery(
        &out,
        &["route", "--priorities", path_str(&pri), "--region", path_str(&region), "--depot", "1,1", "--budget", "0"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(route_cells(&out), vec![(1, 1), (1, 1)]);
}

#[test]
fn route_matches_the_exhaustive_optimum_on_a_small_instance() {
    let dir = tempfile::tempdir().unwrap();
    let cands = [(0u32, 0u32, 4.0), (3, 0, 3.0), (3, 3, 6.0)];
    let (region, pri) = write_city(dir.path(), &cands);
    let out = dir.path().join("out");
    let o = skyquery(
        &out,
        &["route", "--priorities", path_str(&pri), "--region", path_str(&region), "--depot", "1,1", "--budget", "250"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let inst = RoutingInstance {
        grid: RegionConfig::parse(&std::fs::read_to_string(&region).unwrap()).unwrap(),
        depot: CellId::new(1, 1),
        candidates: cands.iter().map(|&(x, y, v)| (CellId::new(x, y), v)).collect(),
        speed: 17.88,
        budget: 250.0,
    };
    let best = exhaustive_optimum(&inst);
    let got: f64 = route_cells(&out)
        .iter()
        .filter_map(|&(x, y)| cands.iter().find(|c| (c.0, c.1) == (x, y)).map(|c| c.2))
        .sum();
    assert!(best.total_reward > 0.0 && best.total_reward < 13.0, "budget should bind");
    assert!((got - best.total_reward).abs() < 1e-9, "got {got}, optimum {}", best.total_reward);
}
