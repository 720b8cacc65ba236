//! Line-delimited keypoint log.
//!
//! The first non-blank line is a JSON header declaring the descriptor
//! dimension and, optionally, the camera:
//!
//! ```text
//! {"descriptor_dim":32,"camera":{"width_px":1920,"height_px":1080,"fov_x":1.5708}}
//! ```
//!
//! Every following line is one frame:
//!
//! ```text
//! {"frame_id":0,"t_ms":0,"pose":{"x":0.0,"y":0.0,"h":100.0,"alpha":0.0},
//!  "keypoints":[{"px":12.5,"py":-3.0,"descriptor":[...]}]}
//! ```
//!
//! A frame may also carry a `truth` pose (synthetic logs) which the pipeline
//! ignores except for reporting error. An empty file is an empty log.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{CameraIntrinsics, KeypointObservation, SensorPose};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub frame_id: u64,
    pub t_ms: i64,
    pub pose: SensorPose,
    pub truth: Option<SensorPose>,
    pub keypoints: Vec<KeypointObservation>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeypointLog {
    pub descriptor_dim: usize,
    pub camera: Option<CameraIntrinsics>,
    pub frames: Vec<FrameRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    descriptor_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    camera: Option<CameraIntrinsics>,
}

#[derive(Serialize, Deserialize)]
struct WireKeypoint {
    px: f64,
    py: f64,
    descriptor: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireFrame {
    frame_id: u64,
    t_ms: i64,
    pose: SensorPose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth: Option<SensorPose>,
    keypoints: Vec<WireKeypoint>,
}

impl KeypointLog {
    pub fn read(reader: impl BufRead) -> Result<Self> {
        let mut log = KeypointLog::default();
        let mut header_seen = false;
        let mut last: Option<(u64, i64)> = None;
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::malformed("keypoint log", lineno, e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if !header_seen {
                let h: Header = serde_json::from_str(line).map_err(|e| {
                    Error::malformed("keypoint log", lineno, format!("bad header: {e}"))
                })?;
                if h.descriptor_dim == 0 {
                    return Err(Error::malformed("keypoint log", lineno, "descriptor_dim must be positive"));
                }
                if let Some(cam) = &h.camera {
                    cam.validate()
                        .map_err(|e| Error::malformed("keypoint log", lineno, e.to_string()))?;
                }
                log.descriptor_dim = h.descriptor_dim;
                log.camera = h.camera;
                header_seen = true;
                continue;
            }
            let f: WireFrame = serde_json::from_str(line)
                .map_err(|e| Error::malformed("keypoint log", lineno, e.to_string()))?;
            if let Some((fid, t)) = last {
                if f.frame_id <= fid || f.t_ms < t {
                    return Err(Error::malformed(
                        "keypoint log",
                        lineno,
                        "frames must have increasing frame_id and non-decreasing t_ms",
                    ));
                }
            }
            if !f.pose.is_valid() || f.t_ms < 0 {
                return Err(Error::malformed("keypoint log", lineno, "invalid pose or timestamp"));
            }
            last = Some((f.frame_id, f.t_ms));
            let mut keypoints = Vec::with_capacity(f.keypoints.len());
            for kp in f.keypoints {
                if kp.descriptor.len() != log.descriptor_dim {
                    return Err(Error::malformed(
                        "keypoint log",
                        lineno,
                        format!(
                            "descriptor has {} entries, header declares {}",
                            kp.descriptor.len(),
                            log.descriptor_dim
                        ),
                    ));
                }
                if let Some(cam) = &log.camera {
                    if !cam.in_frame(kp.px, kp.py) {
                        return Err(Error::malformed(
                            "keypoint log",
                            lineno,
                            format!("keypoint ({}, {}) is outside the image", kp.px, kp.py),
                        ));
                    }
                }
                keypoints.push(KeypointObservation {
                    frame_id: f.frame_id,
                    px: kp.px,
                    py: kp.py,
                    descriptor: kp.descriptor,
                });
            }
            log.frames.push(FrameRecord {
                frame_id: f.frame_id,
                t_ms: f.t_ms,
                pose: f.pose,
                truth: f.truth,
                keypoints,
            });
        }
        Ok(log)
    }

    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        let header = Header {
            descriptor_dim: self.descriptor_dim,
            camera: self.camera,
        };
        writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))?;
        for f in &self.frames {
            let wire = WireFrame {
                frame_id: f.frame_id,
                t_ms: f.t_ms,
                pose: f.pose,
                truth: f.truth,
                keypoints: f
                    .keypoints
                    .iter()
                    .map(|k| WireKeypoint {
                        px: k.px,
                        py: k.py,
                        descriptor: k.descriptor.clone(),
                    })
                    .collect(),
            };
            writeln!(w, "{}", serde_json::to_string(&wire).expect("frame serializes"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_is_empty_log() {
        let log = KeypointLog::read("".as_bytes()).unwrap();
        assert!(log.frames.is_empty());
    }

    #[test]
    fn malformed_line_is_named() {
        let text = "{\"descriptor_dim\":2}\n\
            {\"frame_id\":0,\"t_ms\":0,\"pose\":{\"x\":0,\"y\":0,\"h\":10,\"alpha\":0},\"keypoints\":[]}\n\
            {\"frame_id\":1,\"t_ms\":5,\"pose\":oops}\n";
        let err = KeypointLog::read(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3:"), "{err}");
    }

    #[test]
    fn descriptor_dimension_is_enforced() {
        let text = "{\"descriptor_dim\":2}\n\
            {\"frame_id\":0,\"t_ms\":0,\"pose\":{\"x\":0,\"y\":0,\"h\":10,\"alpha\":0},\"keypoints\":[{\"px\":0,\"py\":0,\"descriptor\":[1,2,3]}]}\n";
        let err = KeypointLog::read(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2:"));
    }

    #[test]
    fn write_then_read() {
        let log = KeypointLog {
            descriptor_dim: 2,
            camera: Some(CameraIntrinsics::new(640, 480, 1.2).unwrap()),
            frames: vec![FrameRecord {
                frame_id: 3,
                t_ms: 100,
                pose: SensorPose::new(1.0, 2.0, 50.0, 0.25),
                truth: Some(SensorPose::new(1.5, 2.0, 50.0, 0.25)),
                keypoints: vec![KeypointObservation {
                    frame_id: 3,
                    px: -10.0,
                    py: 4.5,
                    descriptor: vec![0.5, -0.125],
                }],
            }],
        };
        let mut buf = Vec::new();
        log.write(&mut buf).unwrap();
        assert_eq!(KeypointLog::read(buf.as_slice()).unwrap(), log);
    }
}
