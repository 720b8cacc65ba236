use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::WorldCoord;

/// Drone position in the local frame plus heading (radians, counterclockwise
/// from east). The heading is the direction of the image's +x axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SensorPose {
    pub x: f64,
    pub y: f64,
    pub h: f64,
    pub alpha: f64,
}

impl SensorPose {
    pub const fn new(x: f64, y: f64, h: f64, alpha: f64) -> Self {
        Self { x, y, h, alpha }
    }

    pub fn position(&self) -> WorldCoord {
        WorldCoord::new(self.x, self.y, self.h)
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.h, self.alpha].iter().all(|v| v.is_finite())
    }
}

/// Nadir-pointing pinhole camera with square pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub width_px: u32,
    pub height_px: u32,
    /// Horizontal field of view in radians, in (0, pi).
    pub fov_x: f64,
}

impl CameraIntrinsics {
    pub fn new(width_px: u32, height_px: u32, fov_x: f64) -> Result<Self> {
        let cam = Self {
            width_px,
            height_px,
            fov_x,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::Config("camera resolution must be positive".into()));
        }
        if !(self.fov_x > 0.0 && self.fov_x < std::f64::consts::PI) {
            return Err(Error::Config(format!(
                "fov_x = {} rad is outside (0, pi)",
                self.fov_x
            )));
        }
        Ok(())
    }

    pub fn fov_y(&self) -> f64 {
        2.0 * ((self.fov_x / 2.0).tan() * self.height_px as f64 / self.width_px as f64).atan()
    }

    pub fn half_width(&self) -> f64 {
        self.width_px as f64 / 2.0
    }

    pub fn half_height(&self) -> f64 {
        self.height_px as f64 / 2.0
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        self.half_width() / (self.fov_x / 2.0).tan()
    }

    pub fn in_frame(&self, px: f64, py: f64) -> bool {
        px.abs() <= self.half_width() && py.abs() <= self.half_height()
    }
}

/// Angles between the optical axis and the ray through a pixel, measured from
/// the image center. `theta_y` is positive for pixels above the center, so the
/// pair maps directly onto (east, north) when the heading is zero.
pub fn pixel_to_angles(px: f64, py: f64, cam: &CameraIntrinsics) -> (f64, f64) {
    let theta_x = (px * (cam.fov_x / 2.0).tan() / cam.half_width()).atan();
    let theta_y = (-py * (cam.fov_y() / 2.0).tan() / cam.half_height()).atan();
    (theta_x, theta_y)
}

/// World-frame ray slope `(dx/dz, dy/dz)` for a pixel: the camera tangent
/// vector rotated by the heading.
pub fn ground_tangent(px: f64, py: f64, alpha: f64, cam: &CameraIntrinsics) -> (f64, f64) {
    let (tx, ty) = pixel_to_angles(px, py, cam);
    rotate(tx.tan(), ty.tan(), alpha)
}

pub(crate) fn rotate(x: f64, y: f64, angle: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    (c * x - s * y, s * x + c * y)
}

/// Projects a world point into the image of a camera at `pose`. Returns
/// `None` when the point is not below the camera.
pub fn project(point: &WorldCoord, pose: &SensorPose, cam: &CameraIntrinsics) -> Option<(f64, f64)> {
    let depth = pose.h - point.h;
    if depth <= 0.0 {
        return None;
    }
    let u = (point.x - pose.x) / depth;
    let v = (point.y - pose.y) / depth;
    let (tx, ty) = rotate(u, v, -pose.alpha);
    let f = cam.focal_px();
    Some((tx * f, -ty * f))
}

/// Intersection of a pixel's ray with the plane at height `ground_h`.
pub fn back_project(
    px: f64,
    py: f64,
    pose: &SensorPose,
    cam: &CameraIntrinsics,
    ground_h: f64,
) -> WorldCoord {
    let (u, v) = ground_tangent(px, py, pose.alpha, cam);
    let depth = pose.h - ground_h;
    WorldCoord::new(pose.x + depth * u, pose.y + depth * v, ground_h)
}

/// Ego-motion stand-in for optical flow: where does the ground point seen at
/// `kp` under `prev` move to under `cur`? Returns the pixel displacement.
pub fn predict_displacement(
    prev: &SensorPose,
    cur: &SensorPose,
    kp: (f64, f64),
    cam: &CameraIntrinsics,
) -> Result<(f64, f64)> {
    if !(prev.h > 0.0) || !(cur.h > 0.0) {
        return Err(Error::Degenerate(format!(
            "camera height must be positive (prev {}, cur {})",
            prev.h, cur.h
        )));
    }
    let ground = back_project(kp.0, kp.1, prev, cam, 0.0);
    let (nx, ny) = project(&ground, cur, cam).expect("positive height checked above");
    Ok((nx - kp.0, ny - kp.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(1920, 1080, FRAC_PI_2).unwrap()
    }

    #[test]
    fn center_pixel_is_on_axis() {
        assert_eq!(pixel_to_angles(0.0, 0.0, &cam()), (0.0, 0.0));
    }

    #[test]
    fn edge_pixel_spans_half_fov() {
        let (tx, _) = pixel_to_angles(960.0, 0.0, &cam());
        assert!((tx - FRAC_PI_2 / 2.0).abs() < 1e-12);
        let (_, ty) = pixel_to_angles(0.0, -540.0, &cam());
        assert!((ty - cam().fov_y() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_width_pixel() {
        let (tx, _) = pixel_to_angles(480.0, 0.0, &cam());
        // arctan(0.5)
        assert!((tx - 0.463_647_609_000_806_1).abs() < 1e-12);
    }

    #[test]
    fn downward_pixel_points_south_at_zero_heading() {
        let (u, v) = ground_tangent(0.0, 100.0, 0.0, &cam());
        assert!(u.abs() < 1e-15);
        assert!(v < 0.0);
    }

    #[test]
    fn projection_round_trip_fixes_sign_convention() {
        let pose = SensorPose::new(12.0, -4.0, 80.0, 0.7);
        let p = WorldCoord::new(30.0, 25.0, 0.0);
        let (px, py) = project(&p, &pose, &cam()).unwrap();
        let back = back_project(px, py, &pose, &cam(), 0.0);
        assert!(back.distance(&p) < 1e-9);
    }

    #[test]
    fn no_motion_no_displacement() {
        let pose = SensorPose::new(3.0, 4.0, 90.0, 0.3);
        let d = predict_displacement(&pose, &pose, (120.0, -40.0), &cam()).unwrap();
        assert!(d.0.abs() < 1e-9 && d.1.abs() < 1e-9);
    }

    #[test]
    fn eastward_translation_shifts_center_left() {
        let prev = SensorPose::new(0.0, 0.0, 100.0, 0.0);
        let cur = SensorPose::new(10.0, 0.0, 100.0, 0.0);
        let d = predict_displacement(&prev, &cur, (0.0, 0.0), &cam()).unwrap();
        // -(10 / 100) * (960 / tan 45deg)
        assert!((d.0 + 96.0).abs() < 1e-9, "{d:?}");
        assert!(d.1.abs() < 1e-9);
    }

    #[test]
    fn yaw_keeps_nadir_fixed() {
        let prev = SensorPose::new(0.0, 0.0, 100.0, 0.0);
        let cur = SensorPose::new(0.0, 0.0, 100.0, 0.4);
        let d = predict_displacement(&prev, &cur, (0.0, 0.0), &cam()).unwrap();
        assert!(d.0.abs() < 1e-12 && d.1.abs() < 1e-12);
    }

    #[test]
    fn grounded_camera_is_degenerate() {
        let prev = SensorPose::new(0.0, 0.0, 100.0, 0.0);
        let cur = SensorPose::new(0.0, 0.0, 0.0, 0.0);
        assert!(predict_displacement(&prev, &cur, (0.0, 0.0), &cam()).is_err());
    }
}
