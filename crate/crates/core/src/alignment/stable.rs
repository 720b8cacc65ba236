use serde::{Deserialize, Serialize};

use super::camera::predict_displacement;
use super::log::FrameRecord;
use super::{descriptor_distance, AlignmentParams, CameraIntrinsics, KeypointObservation};
use crate::error::{Error, Result};
use crate::model::WorldCoord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableGroup {
    pub members: Vec<KeypointObservation>,
    pub mean_descriptor: Vec<f64>,
    pub coord: Option<WorldCoord>,
}

impl StableGroup {
    fn seed(kp: KeypointObservation) -> Self {
        Self {
            mean_descriptor: kp.descriptor.clone(),
            members: vec![kp],
            coord: None,
        }
    }

    fn push(&mut self, kp: KeypointObservation) {
        let n = (self.members.len() + 1) as f64;
        for (m, f) in self.mean_descriptor.iter_mut().zip(&kp.descriptor) {
            *m += (f - *m) / n;
        }
        self.members.push(kp);
    }

    pub fn last(&self) -> &KeypointObservation {
        self.members.last().expect("groups are never empty")
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Greedy streaming aggregation of keypoints into stable groups.
///
/// Each keypoint joins the eligible group with the smallest descriptor
/// distance (lowest index on ties); a group is eligible when it has no member
/// from the current frame, its latest member is at most `max_frame_gap`
/// frames old, the descriptor distance to its mean is below `t_f`, and the
/// ego-motion prediction of its latest member lands within `t_d_px` of the
/// keypoint. Unmatched keypoints seed new groups. Groups smaller than
/// `min_group_size` are dropped at the end.
pub fn aggregate_stable_groups(
    frames: &[FrameRecord],
    cam: &CameraIntrinsics,
    params: &AlignmentParams,
) -> Result<Vec<StableGroup>> {
    let dim = frames
        .iter()
        .flat_map(|f| f.keypoints.first())
        .map(|k| k.descriptor.len())
        .next();
    let mut groups: Vec<StableGroup> = Vec::new();
    // Pose of the frame holding each group's most recent member.
    let mut last_pose = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    let mut prev_frame: Option<u64> = None;

    for frame in frames {
        if let Some(p) = prev_frame {
            if frame.frame_id <= p {
                return Err(Error::Invalid(format!(
                    "frames out of order: {} after {p}",
                    frame.frame_id
                )));
            }
        }
        prev_frame = Some(frame.frame_id);
        active.retain(|&g| frame.frame_id - groups[g].last().frame_id <= params.max_frame_gap);

        let mut taken_this_frame: Vec<usize> = Vec::new();
        for kp in &frame.keypoints {
            if let Some(d) = dim {
                if kp.descriptor.len() != d {
                    return Err(Error::DescriptorDim {
                        expected: d,
                        actual: kp.descriptor.len(),
                    });
                }
            }
            let mut best: Option<(f64, usize)> = None;
            for &g in &active {
                if taken_this_frame.contains(&g) {
                    continue;
                }
                let group = &groups[g];
                let df = descriptor_distance(&kp.descriptor, &group.mean_descriptor);
                if df >= params.t_f {
                    continue;
                }
                let last = group.last();
                let (dx, dy) = predict_displacement(&last_pose[g], &frame.pose, (last.px, last.py), cam)?;
                let dp = ((last.px + dx - kp.px).powi(2) + (last.py + dy - kp.py).powi(2)).sqrt();
                if dp >= params.t_d_px {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bd, bg)) => df < bd || (df == bd && g < bg),
                };
                if better {
                    best = Some((df, g));
                }
            }
            let kp = KeypointObservation {
                frame_id: frame.frame_id,
                ..kp.clone()
            };
            match best {
                Some((_, g)) => {
                    groups[g].push(kp);
                    last_pose[g] = frame.pose;
                    taken_this_frame.push(g);
                }
                None => {
                    groups.push(StableGroup::seed(kp));
                    last_pose.push(frame.pose);
                    let g = groups.len() - 1;
                    active.push(g);
                    taken_this_frame.push(g);
                }
            }
        }
    }
    groups.retain(|g| g.len() >= params.min_group_size);
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::super::camera::project;
    use super::super::SensorPose;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(1920, 1080, std::f64::consts::FRAC_PI_2).unwrap()
    }

    fn params() -> AlignmentParams {
        AlignmentParams::for_descriptor_dim(8)
    }

    fn frame(id: u64, pose: SensorPose, kps: Vec<(f64, f64, Vec<f64>)>) -> FrameRecord {
        FrameRecord {
            frame_id: id,
            t_ms: id as i64 * 100,
            pose,
            truth: None,
            keypoints: kps
                .into_iter()
                .map(|(px, py, descriptor)| KeypointObservation {
                    frame_id: id,
                    px,
                    py,
                    descriptor,
                })
                .collect(),
        }
    }

    #[test]
    fn singleton_is_discarded() {
        let f = frame(0, SensorPose::new(0.0, 0.0, 100.0, 0.0), vec![(0.0, 0.0, vec![1.0; 8])]);
        assert!(aggregate_stable_groups(&[f], &cam(), &params()).unwrap().is_empty());
    }

    #[test]
    fn consistent_track_forms_one_group() {
        let point = WorldCoord::new(5.0, 5.0, 0.0);
        let frames: Vec<_> = (0..5)
            .map(|i| {
                let pose = SensorPose::new(i as f64 * 4.0, 0.0, 100.0, 0.1);
                let (px, py) = project(&point, &pose, &cam()).unwrap();
                frame(i, pose, vec![(px, py, vec![0.5; 8])])
            })
            .collect();
        let groups = aggregate_stable_groups(&frames, &cam(), &params()).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].len(), 5);
    }

    #[test]
    fn mixed_descriptor_dims_error() {
        let pose = SensorPose::new(0.0, 0.0, 100.0, 0.0);
        let frames = vec![
            frame(0, pose, vec![(0.0, 0.0, vec![0.0; 8])]),
            frame(1, pose, vec![(0.0, 0.0, vec![0.0; 4])]),
        ];
        assert!(matches!(
            aggregate_stable_groups(&frames, &cam(), &params()),
            Err(Error::DescriptorDim { expected: 8, actual: 4 })
        ));
    }

    /// Replays the grouping rule by scanning every group ever created.
    fn oracle(frames: &[FrameRecord], p: &AlignmentParams) -> Vec<Vec<(u64, usize)>> {
        // groups as lists of (frame_id, keypoint index)
        let mut groups: Vec<Vec<(u64, usize)>> = Vec::new();
        let mut sums: Vec<Vec<f64>> = Vec::new();
        let pose_of = |id: u64| frames.iter().find(|f| f.frame_id == id).unwrap().pose;
        for f in frames {
            let mut taken = vec![false; groups.len()];
            for (ki, kp) in f.keypoints.iter().enumerate() {
                let mut cands: Vec<(f64, usize)> = Vec::new();
                for g in 0..groups.len() {
                    if taken.get(g).copied().unwrap_or(false) {
                        continue;
                    }
                    let (lf, lk) = *groups[g].last().unwrap();
                    if lf == f.frame_id || f.frame_id - lf > p.max_frame_gap {
                        continue;
                    }
                    let n = groups[g].len() as f64;
                    let mean: Vec<f64> = sums[g].iter().map(|s| s / n).collect();
                    let df = descriptor_distance(&kp.descriptor, &mean);
                    let last = &frames.iter().find(|x| x.frame_id == lf).unwrap().keypoints[lk];
                    let (dx, dy) =
                        predict_displacement(&pose_of(lf), &f.pose, (last.px, last.py), &cam()).unwrap();
                    let dp = ((last.px + dx - kp.px).powi(2) + (last.py + dy - kp.py).powi(2)).sqrt();
                    if df < p.t_f && dp < p.t_d_px {
                        cands.push((df, g));
                    }
                }
                cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                match cands.first() {
                    Some(&(_, g)) => {
                        groups[g].push((f.frame_id, ki));
                        for (s, v) in sums[g].iter_mut().zip(&kp.descriptor) {
                            *s += v;
                        }
                        taken[g] = true;
                    }
                    None => {
                        groups.push(vec![(f.frame_id, ki)]);
                        sums.push(kp.descriptor.clone());
                        taken.push(true);
                    }
                }
            }
        }
        groups.retain(|g| g.len() >= p.min_group_size);
        groups
    }

    #[test]
    fn interleaved_clusters_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = a.iter().map(|v| v + 3.0).collect();
            let pa = WorldCoord::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), 0.0);
            let pb = WorldCoord::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), 0.0);
            let frames: Vec<FrameRecord> = (0..6)
                .map(|i| {
                    let pose = SensorPose::new(i as f64 * 3.0, 1.0, 100.0, 0.2);
                    let mut kps = Vec::new();
                    for (p, d) in [(&pa, &a), (&pb, &b)] {
                        if rng.random_bool(0.8) {
                            let (px, py) = project(p, &pose, &cam()).unwrap();
                            let noisy: Vec<f64> =
                                d.iter().map(|v| v + rng.random_range(-0.05..0.05)).collect();
                            kps.push((px + rng.random_range(-3.0..3.0), py, noisy));
                        }
                    }
                    if rng.random_bool(0.5) {
                        kps.reverse();
                    }
                    frame(i, pose, kps)
                })
                .collect();
            let got = aggregate_stable_groups(&frames, &cam(), &params()).unwrap();
            let want = oracle(&frames, &params());
            let got_ids: Vec<Vec<u64>> =
                got.iter().map(|g| g.members.iter().map(|m| m.frame_id).collect()).collect();
            let want_ids: Vec<Vec<u64>> =
                want.iter().map(|g| g.iter().map(|m| m.0).collect()).collect();
            assert_eq!(got_ids, want_ids);
            assert!(got.len() <= 2);
        }
    }

    #[test]
    fn two_separated_clusters_form_two_groups() {
        let a = vec![0.0; 8];
        let b = vec![5.0; 8];
        let pose = |i: u64| SensorPose::new(i as f64, 0.0, 100.0, 0.0);
        let pa = WorldCoord::new(-10.0, 0.0, 0.0);
        let pb = WorldCoord::new(10.0, 0.0, 0.0);
        let frames: Vec<_> = (0..4)
            .map(|i| {
                let (ax, ay) = project(&pa, &pose(i), &cam()).unwrap();
                let (bx, by) = project(&pb, &pose(i), &cam()).unwrap();
                frame(i, pose(i), vec![(ax, ay, a.clone()), (bx, by, b.clone())])
            })
            .collect();
        let groups = aggregate_stable_groups(&frames, &cam(), &params()).unwrap();
        assert_eq!(groups.len(), 2);
        assert!(groups.iter().all(|g| g.len() == 4));
    }

    #[test]
    fn mean_descriptor_is_member_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let point = WorldCoord::new(0.0, 0.0, 0.0);
        let frames: Vec<_> = (0..7)
            .map(|i| {
                let pose = SensorPose::new(0.0, i as f64, 120.0, 0.0);
                let (px, py) = project(&point, &pose, &cam()).unwrap();
                let d: Vec<f64> = (0..8).map(|_| rng.random_range(-0.2..0.2)).collect();
                frame(i, pose, vec![(px, py, d)])
            })
            .collect();
        let groups = aggregate_stable_groups(&frames, &cam(), &params()).unwrap();
        assert_eq!(groups.len(), 1);
        let g = &groups[0];
        for k in 0..8 {
            let mean = g.members.iter().map(|m| m.descriptor[k]).sum::<f64>() / g.len() as f64;
            assert!((mean - g.mean_descriptor[k]).abs() < 1e-9);
        }
    }
}
