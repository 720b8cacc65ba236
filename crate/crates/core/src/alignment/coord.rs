use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::camera::ground_tangent;
use super::{CameraIntrinsics, SensorPose, StableGroup};
use crate::error::{Error, Result};
use crate::model::WorldCoord;

/// Condition number above which the height is pinned to the ground plane.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoordEstimate {
    pub coord: WorldCoord,
    /// Condition number of the full 3-unknown system.
    pub condition: f64,
    /// True when the system was rank-deficient and `h` was fixed at 0.
    pub ground_fallback: bool,
}

/// Observation rows: each keypoint seen from pose `d` with world ray slope
/// `(u, v)` contributes
///
/// ```text
/// s.x + u * s.h = d.x + u * d.h
/// s.y + v * s.h = d.y + v * d.h
/// ```
fn observation_rows(
    group: &StableGroup,
    poses: &BTreeMap<u64, SensorPose>,
    cam: &CameraIntrinsics,
) -> Result<Vec<(f64, f64, SensorPose)>> {
    group
        .members
        .iter()
        .map(|kp| {
            let pose = poses.get(&kp.frame_id).ok_or_else(|| {
                Error::Invalid(format!("no sensor pose for frame {}", kp.frame_id))
            })?;
            let (u, v) = ground_tangent(kp.px, kp.py, pose.alpha, cam);
            Ok((u, v, *pose))
        })
        .collect()
}

/// Least-squares world coordinate of a stable group.
pub fn estimate_group_coord(
    group: &StableGroup,
    poses: &BTreeMap<u64, SensorPose>,
    cam: &CameraIntrinsics,
) -> Result<CoordEstimate> {
    if group.members.len() < 2 {
        return Err(Error::Degenerate(format!(
            "a stable group needs at least 2 members, got {}",
            group.members.len()
        )));
    }
    let obs = observation_rows(group, poses, cam)?;
    let n = obs.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 3);
    let mut b = DVector::<f64>::zeros(2 * n);
    for (i, (u, v, d)) in obs.iter().enumerate() {
        a[(2 * i, 0)] = 1.0;
        a[(2 * i, 2)] = *u;
        b[2 * i] = d.x + u * d.h;
        a[(2 * i + 1, 1)] = 1.0;
        a[(2 * i + 1, 2)] = *v;
        b[2 * i + 1] = d.y + v * d.h;
    }
    let condition = condition_number(&a);
    if condition <= MAX_CONDITION {
        let x = least_squares(a, &b)
            .ok_or_else(|| Error::Degenerate("singular observation system".into()))?;
        return Ok(CoordEstimate {
            coord: WorldCoord::new(x[0], x[1], x[2]),
            condition,
            ground_fallback: false,
        });
    }
    // With h pinned at 0 the x and y rows decouple into plain means.
    let sx = obs.iter().map(|(u, _, d)| d.x + u * d.h).sum::<f64>() / n as f64;
    let sy = obs.iter().map(|(_, v, d)| d.y + v * d.h).sum::<f64>() / n as f64;
    if !(sx.is_finite() && sy.is_finite()) {
        return Err(Error::Degenerate(
            "ground-plane fallback produced a non-finite solution".into(),
        ));
    }
    Ok(CoordEstimate {
        coord: WorldCoord::new(sx, sy, 0.0),
        condition,
        ground_fallback: true,
    })
}

/// Ratio of the largest to the smallest singular value of `a`.
pub(crate) fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let smin = sv.min();
    if smin > 0.0 {
        sv.max() / smin
    } else {
        f64::INFINITY
    }
}

/// Least-squares solution of a full-column-rank system via Householder QR.
pub(crate) fn least_squares(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.ncols();
    let qr = a.qr();
    let qtb = qr.q().transpose() * b;
    let r = qr.r();
    r.solve_upper_triangular(&qtb.rows(0, n).into_owned())
}

/// Euclidean norm of the observation-equation residual at a candidate coordinate.
pub fn observation_residual(
    group: &StableGroup,
    poses: &BTreeMap<u64, SensorPose>,
    cam: &CameraIntrinsics,
    s: &WorldCoord,
) -> Result<f64> {
    let obs = observation_rows(group, poses, cam)?;
    Ok(obs
        .iter()
        .map(|(u, v, d)| {
            let rx = (d.h - s.h) * u - (s.x - d.x);
            let ry = (d.h - s.h) * v - (s.y - d.y);
            rx * rx + ry * ry
        })
        .sum::<f64>()
        .sqrt())
}
