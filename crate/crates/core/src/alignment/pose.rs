use nalgebra::{DMatrix, DVector};

use super::camera::ground_tangent;
use super::coord::{condition_number, least_squares, MAX_CONDITION};
use super::{descriptor_distance, AlignmentParams, CameraIntrinsics, GlobalGroup, KeypointObservation, SensorPose};
use crate::model::WorldCoord;

/// Heading search half-width around the sensor prior.
const HEADING_WINDOW: f64 = 10.0 * std::f64::consts::PI / 180.0;
const HEADING_TOL: f64 = 1e-9;
const MIN_MATCHES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseEstimate {
    pub pose: SensorPose,
    /// True when too few keypoints matched and the sensor prior was returned.
    pub sensor_only: bool,
    pub matches: usize,
    pub residual: f64,
}

/// Least-squares drone position for a fixed heading, given matched
/// `(pixel, world point)` pairs. Returns the position and residual norm.
/// When the geometry cannot resolve height, `fallback_h` is used for it.
pub fn solve_position(
    matches: &[((f64, f64), WorldCoord)],
    alpha: f64,
    cam: &CameraIntrinsics,
    fallback_h: f64,
) -> (WorldCoord, f64) {
    let n = matches.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 3);
    let mut b = DVector::<f64>::zeros(2 * n);
    let mut slopes = Vec::with_capacity(n);
    for (i, ((px, py), s)) in matches.iter().enumerate() {
        let (u, v) = ground_tangent(*px, *py, alpha, cam);
        slopes.push((u, v));
        // d.x + u d.h = s.x + u s.h ; d.y + v d.h = s.y + v s.h
        a[(2 * i, 0)] = 1.0;
        a[(2 * i, 2)] = u;
        b[2 * i] = s.x + u * s.h;
        a[(2 * i + 1, 1)] = 1.0;
        a[(2 * i + 1, 2)] = v;
        b[2 * i + 1] = s.y + v * s.h;
    }
    let d = if condition_number(&a) <= MAX_CONDITION {
        match least_squares(a.clone(), &b) {
            Some(x) => WorldCoord::new(x[0], x[1], x[2]),
            None => fixed_height(&b, &slopes, fallback_h),
        }
    } else {
        fixed_height(&b, &slopes, fallback_h)
    };
    let x = DVector::from_vec(vec![d.x, d.y, d.h]);
    let residual = (&a * x - &b).norm();
    (d, residual)
}

fn fixed_height(b: &DVector<f64>, slopes: &[(f64, f64)], h: f64) -> WorldCoord {
    let n = slopes.len() as f64;
    let x = slopes.iter().enumerate().map(|(i, (u, _))| b[2 * i] - u * h).sum::<f64>() / n;
    let y = slopes.iter().enumerate().map(|(i, (_, v))| b[2 * i + 1] - v * h).sum::<f64>() / n;
    WorldCoord::new(x, y, h)
}

/// Nearest global group by descriptor distance, if closer than `t_f`.
fn match_keypoint<'a>(
    kp: &KeypointObservation,
    globals: &'a [GlobalGroup],
    t_f: f64,
) -> Option<&'a GlobalGroup> {
    let mut best: Option<(f64, &GlobalGroup)> = None;
    for g in globals {
        let d = descriptor_distance(&kp.descriptor, &g.mean_descriptor);
        if d < t_f && best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, g));
        }
    }
    best.map(|(_, g)| g)
}

/// Estimates the pose of a frame from its keypoints and the global groups.
///
/// Position is solved by least squares at the prior heading, then the heading
/// is refined by golden-section search within +-10 degrees of the prior,
/// re-solving position at every probe.
pub fn estimate_frame_pose(
    keypoints: &[KeypointObservation],
    globals: &[GlobalGroup],
    sensor_prior: &SensorPose,
    cam: &CameraIntrinsics,
    params: &AlignmentParams,
) -> PoseEstimate {
    let matched: Vec<((f64, f64), WorldCoord)> = keypoints
        .iter()
        .filter_map(|kp| match_keypoint(kp, globals, params.t_f).map(|g| ((kp.px, kp.py), g.coord)))
        .collect();
    if matched.len() < MIN_MATCHES {
        return PoseEstimate {
            pose: *sensor_prior,
            sensor_only: true,
            matches: matched.len(),
            residual: f64::NAN,
        };
    }
    let eval = |alpha: f64| solve_position(&matched, alpha, cam, sensor_prior.h);

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (
        sensor_prior.alpha - HEADING_WINDOW,
        sensor_prior.alpha + HEADING_WINDOW,
    );
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = eval(c).1;
    let mut fd = eval(d).1;
    while hi - lo > HEADING_TOL {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = eval(c).1;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = eval(d).1;
        }
    }
    let alpha = 0.5 * (lo + hi);
    let (pos, residual) = eval(alpha);
    PoseEstimate {
        pose: SensorPose::new(pos.x, pos.y, pos.h, alpha),
        sensor_only: false,
        matches: matched.len(),
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::super::camera::project;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(1920, 1080, std::f64::consts::FRAC_PI_2).unwrap()
    }

    fn scene(seed: u64, truth: &SensorPose) -> (Vec<KeypointObservation>, Vec<GlobalGroup>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut kps = Vec::new();
        let mut globals = Vec::new();
        for i in 0..12 {
            let p = WorldCoord::new(
                truth.x + rng.random_range(-60.0..60.0),
                truth.y + rng.random_range(-40.0..40.0),
                rng.random_range(0.0..4.0),
            );
            let d: Vec<f64> = (0..8).map(|k| (i * 8 + k) as f64).collect();
            if let Some((px, py)) = project(&p, truth, &cam()) {
                kps.push(KeypointObservation {
                    frame_id: 0,
                    px,
                    py,
                    descriptor: d.clone(),
                });
            }
            globals.push(GlobalGroup {
                members: vec![],
                coord: p,
                mean_descriptor: d,
            });
        }
        (kps, globals)
    }

    #[test]
    fn noiseless_pose_is_recovered() {
        let truth = SensorPose::new(100.0, -20.0, 90.0, 0.8);
        let (kps, globals) = scene(1, &truth);
        let prior = SensorPose::new(102.0, -18.5, 91.0, 0.8 + 0.05);
        let est = estimate_frame_pose(&kps, &globals, &prior, &cam(), &AlignmentParams::for_descriptor_dim(8));
        assert!(!est.sensor_only);
        let p = est.pose;
        assert!(p.position().distance(&truth.position()) < 1e-4, "{p:?}");
        assert!((p.alpha - truth.alpha).abs() < 1e-4);
    }

    #[test]
    fn heading_error_of_three_degrees_is_refined() {
        let truth = SensorPose::new(0.0, 0.0, 110.0, -1.2);
        let (kps, globals) = scene(2, &truth);
        let prior = SensorPose {
            alpha: truth.alpha + 3f64.to_radians(),
            ..truth
        };
        let est = estimate_frame_pose(&kps, &globals, &prior, &cam(), &AlignmentParams::for_descriptor_dim(8));
        assert!((est.pose.alpha - truth.alpha).abs() < 0.1f64.to_radians());
    }

    #[test]
    fn no_matches_returns_prior() {
        let prior = SensorPose::new(1.0, 2.0, 3.0, 0.0);
        let est = estimate_frame_pose(&[], &[], &prior, &cam(), &AlignmentParams::for_descriptor_dim(8));
        assert!(est.sensor_only);
        assert_eq!(est.pose, prior);
        assert_eq!(est.matches, 0);
    }
}
