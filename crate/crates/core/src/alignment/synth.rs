//! Synthetic overflight scenes with known landmark positions and true poses.
//!
//! Landmarks with random descriptors are scattered over a square area. The
//! drone makes straight passes across it at random headings. Sensor poses
//! carry a per-pass bias (GPS drift, constant within a pass) plus small
//! per-frame jitter; keypoints are exact projections with pixel and
//! descriptor noise added.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::camera::project;
use super::log::{FrameRecord, KeypointLog};
use super::{CameraIntrinsics, KeypointObservation, SensorPose};
use crate::model::WorldCoord;

#[derive(Clone, Debug, PartialEq)]
pub struct SceneConfig {
    pub seed: u64,
    pub camera: CameraIntrinsics,
    pub descriptor_dim: usize,
    pub n_landmarks: usize,
    /// Landmarks lie in `[-half_extent, half_extent]^2`.
    pub half_extent: f64,
    pub max_landmark_height: f64,
    pub n_passes: usize,
    pub frames_per_pass: usize,
    /// Ground distance flown between frames.
    pub frame_spacing_m: f64,
    pub frame_interval_ms: i64,
    pub altitude: f64,
    /// Per-pass position bias standard deviation (all three axes).
    pub gps_sigma: f64,
    /// Per-pass heading bias standard deviation, radians.
    pub heading_sigma: f64,
    /// Per-frame position jitter standard deviation.
    pub jitter_sigma: f64,
    pub pixel_sigma: f64,
    pub descriptor_sigma: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            camera: CameraIntrinsics {
                width_px: 1920,
                height_px: 1080,
                fov_x: std::f64::consts::FRAC_PI_2,
            },
            descriptor_dim: 32,
            n_landmarks: 150,
            half_extent: 200.0,
            max_landmark_height: 3.0,
            n_passes: 8,
            frames_per_pass: 25,
            frame_spacing_m: 8.0,
            frame_interval_ms: 200,
            altitude: 100.0,
            gps_sigma: 2.0,
            heading_sigma: 0.005,
            jitter_sigma: 0.1,
            pixel_sigma: 0.5,
            descriptor_sigma: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Landmark {
    pub coord: WorldCoord,
    pub descriptor: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub landmarks: Vec<Landmark>,
    pub log: KeypointLog,
}

/// Frame ids of consecutive passes are separated by this gap so that stable
/// groups never span passes.
pub const PASS_FRAME_GAP: u64 = 1000;

pub fn generate_scene(cfg: &SceneConfig) -> SyntheticScene {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let landmarks: Vec<Landmark> = (0..cfg.n_landmarks)
        .map(|_| Landmark {
            coord: WorldCoord::new(
                rng.random_range(-cfg.half_extent..cfg.half_extent),
                rng.random_range(-cfg.half_extent..cfg.half_extent),
                rng.random_range(0.0..=cfg.max_landmark_height),
            ),
            descriptor: (0..cfg.descriptor_dim).map(|_| unit.sample(&mut rng)).collect(),
        })
        .collect();

    let mut frames = Vec::new();
    let length = cfg.frame_spacing_m * (cfg.frames_per_pass.max(1) - 1) as f64;
    for pass in 0..cfg.n_passes {
        let heading: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let mid = (
            rng.random_range(-0.3..0.3) * cfg.half_extent,
            rng.random_range(-0.3..0.3) * cfg.half_extent,
        );
        let bias = [
            cfg.gps_sigma * unit.sample(&mut rng),
            cfg.gps_sigma * unit.sample(&mut rng),
            cfg.gps_sigma * unit.sample(&mut rng),
            cfg.heading_sigma * unit.sample(&mut rng),
        ];
        let (s, c) = heading.sin_cos();
        for k in 0..cfg.frames_per_pass {
            let along = -length / 2.0 + k as f64 * cfg.frame_spacing_m;
            let truth = SensorPose::new(mid.0 + c * along, mid.1 + s * along, cfg.altitude, heading);
            let pose = SensorPose::new(
                truth.x + bias[0] + cfg.jitter_sigma * unit.sample(&mut rng),
                truth.y + bias[1] + cfg.jitter_sigma * unit.sample(&mut rng),
                truth.h + bias[2] + cfg.jitter_sigma * unit.sample(&mut rng),
                truth.alpha + bias[3],
            );
            let frame_id = pass as u64 * PASS_FRAME_GAP + k as u64;
            let keypoints = landmarks
                .iter()
                .filter_map(|lm| {
                    let (px, py) = project(&lm.coord, &truth, &cfg.camera)?;
                    let px = px + cfg.pixel_sigma * unit.sample(&mut rng);
                    let py = py + cfg.pixel_sigma * unit.sample(&mut rng);
                    cfg.camera.in_frame(px, py).then(|| KeypointObservation {
                        frame_id,
                        px,
                        py,
                        descriptor: lm
                            .descriptor
                            .iter()
                            .map(|v| v + cfg.descriptor_sigma * unit.sample(&mut rng))
                            .collect(),
                    })
                })
                .collect();
            frames.push(FrameRecord {
                frame_id,
                t_ms: frame_id as i64 * cfg.frame_interval_ms,
                pose,
                truth: Some(truth),
                keypoints,
            });
        }
    }
    SyntheticScene {
        landmarks,
        log: KeypointLog {
            descriptor_dim: cfg.descriptor_dim,
            camera: Some(cfg.camera),
            frames,
        },
    }
}

/// Root-mean-square 3-D position error of `poses` against the frames' truth.
pub fn position_rmse<'a>(pairs: impl IntoIterator<Item = (&'a SensorPose, &'a SensorPose)>) -> f64 {
    let mut n = 0usize;
    let mut sq = 0.0;
    for (est, truth) in pairs {
        sq += est.position().distance(&truth.position()).powi(2);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (sq / n as f64).sqrt()
    }
}
