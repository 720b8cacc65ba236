//! Keypoint-based frame alignment and geolocation.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`aggregate_stable_groups`] links keypoints across consecutive frames of
//!    one overflight, gated by descriptor distance and an ego-motion
//!    prediction of where the keypoint should reappear.
//! 2. [`estimate_group_coord`] triangulates each stable group's world
//!    position from the sensor poses by linear least squares.
//! 3. [`merge_global_groups`] merges stable groups that describe the same world
//!    location across flights; a global group's coordinate is the member mean.
//! 4. [`estimate_frame_pose`] matches a frame's keypoints against global groups
//!    and inverts the same observation equations to recover the drone pose.
//!
//! Keypoints arrive pre-extracted in a [`KeypointLog`]; see [`log`] for the
//! line-delimited format and [`synth`] for a generator with known truth.

mod camera;
mod coord;
mod global;
pub mod log;
mod pose;
mod stable;
pub mod synth;

use serde::{Deserialize, Serialize};

pub use camera::{
    back_project, ground_tangent, pixel_to_angles, predict_displacement, project,
    CameraIntrinsics, SensorPose,
};
pub use coord::{estimate_group_coord, observation_residual, CoordEstimate};
pub use global::{merge_global_groups, GlobalGroup};
pub use log::{FrameRecord, KeypointLog};
pub use pose::{estimate_frame_pose, solve_position, PoseEstimate};
pub use stable::{aggregate_stable_groups, StableGroup};

use crate::error::Result;
use crate::model::WorldCoord;
use std::collections::BTreeMap;

/// One keypoint: pixel offset from the image center (x right, y down) and its
/// descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeypointObservation {
    pub frame_id: u64,
    pub px: f64,
    pub py: f64,
    pub descriptor: Vec<f64>,
}

/// Grouping thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentParams {
    /// Maximum descriptor distance to a group's mean descriptor.
    pub t_f: f64,
    /// Maximum pixel distance between predicted and observed keypoint position.
    pub t_d_px: f64,
    /// Maximum 3-D distance (meters) between a stable group and a global group.
    pub t_d_m: f64,
    /// Groups with fewer members are discarded.
    pub min_group_size: usize,
    /// A stable group only accepts keypoints from frames at most this many
    /// frame ids after its most recent member.
    pub max_frame_gap: u64,
}

impl AlignmentParams {
    /// Defaults for descriptors whose entries have unit scale: `t_f` is a
    /// quarter of the expected descriptor norm `sqrt(dim)`.
    pub fn for_descriptor_dim(dim: usize) -> Self {
        Self {
            t_f: 0.25 * (dim as f64).sqrt(),
            t_d_px: 20.0,
            t_d_m: 3.0,
            min_group_size: 2,
            max_frame_gap: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_f > 0.0 && self.t_d_px > 0.0 && self.t_d_m > 0.0)
            || self.min_group_size < 2
            || self.max_frame_gap == 0
        {
            return Err(crate::Error::Config(
                "alignment thresholds must be positive and min_group_size >= 2".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn descriptor_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Per-frame output of the end-to-end pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct FramePose {
    pub frame_id: u64,
    pub t_ms: i64,
    pub estimate: PoseEstimate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentOutput {
    pub stable: Vec<StableGroup>,
    pub globals: Vec<GlobalGroup>,
    pub poses: Vec<FramePose>,
}

/// Runs aggregation, triangulation, global merging and per-frame pose
/// estimation over a whole log. Stable groups whose triangulation fails are
/// left without a coordinate and do not take part in global merging.
pub fn align_log(
    log: &KeypointLog,
    cam: &CameraIntrinsics,
    params: &AlignmentParams,
) -> Result<AlignmentOutput> {
    params.validate()?;
    let mut stable = aggregate_stable_groups(&log.frames, cam, params)?;
    let poses: BTreeMap<u64, SensorPose> =
        log.frames.iter().map(|f| (f.frame_id, f.pose)).collect();
    use rayon::prelude::*;
    let coords: Vec<Option<WorldCoord>> = stable
        .par_iter()
        .map(|g| estimate_group_coord(g, &poses, cam).ok().map(|e| e.coord))
        .collect();
    for (g, c) in stable.iter_mut().zip(coords) {
        g.coord = c;
    }
    let globals = merge_global_groups(&stable, params);
    let poses = log
        .frames
        .iter()
        .map(|f| FramePose {
            frame_id: f.frame_id,
            t_ms: f.t_ms,
            estimate: estimate_frame_pose(&f.keypoints, &globals, &f.pose, cam, params),
        })
        .collect();
    Ok(AlignmentOutput {
        stable,
        globals,
        poses,
    })
}
