use std::sync::Arc;

use super::{DetectionFrame, SequenceFrame};
use crate::model::{BBox, Sequence, Timestamp};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackerParams {
    pub iou_min: f64,
    pub max_age_frames: u64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            iou_min: 0.1,
            max_age_frames: 3,
        }
    }
}

struct Track {
    detections: Vec<u64>,
    last_box: BBox,
    last_time: Timestamp,
    last_frame: u64,
    /// Center velocity in meters per millisecond.
    velocity: (f64, f64),
}

impl Track {
    fn predict(&self, t: Timestamp) -> BBox {
        let dt = (t.ms() - self.last_time.ms()) as f64;
        self.last_box.translated(self.velocity.0 * dt, self.velocity.1 * dt)
    }
}

/// Links detections of consecutive frames into sequences.
///
/// Each live track predicts its box with constant velocity; predicted boxes
/// and detections are paired greedily by descending IoU (ties broken by track
/// then detection order) subject to `iou >= iou_min`. Unmatched detections
/// start tracks, and a track that has missed more than `max_age_frames` frames
/// is closed. Output sequences are ordered by first detection time.
pub fn object_tracking(dets: &Arc<DetectionFrame>, params: &TrackerParams) -> SequenceFrame {
    let rows = dets.rows();
    let mut live: Vec<Track> = Vec::new();
    let mut closed: Vec<Vec<u64>> = Vec::new();

    let mut start = 0;
    while start < rows.len() {
        let frame_id = rows[start].frame_id;
        let mut end = start;
        while end < rows.len() && rows[end].frame_id == frame_id {
            end += 1;
        }
        let frame = &rows[start..end];
        let t = frame[0].time;

        // Retire tracks that can no longer be continued.
        let (keep, retire): (Vec<Track>, Vec<Track>) = live
            .drain(..)
            .partition(|tr| frame_id - tr.last_frame - 1 <= params.max_age_frames);
        closed.extend(retire.into_iter().map(|tr| tr.detections));
        live = keep;

        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, tr) in live.iter().enumerate() {
            let predicted = tr.predict(t);
            for (di, d) in frame.iter().enumerate() {
                let iou = predicted.iou(&d.bounds);
                if iou >= params.iou_min && iou > 0.0 {
                    pairs.push((iou, ti, di));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut track_used = vec![false; live.len()];
        let mut det_used = vec![false; frame.len()];
        for (_, ti, di) in pairs {
            if track_used[ti] || det_used[di] {
                continue;
            }
            track_used[ti] = true;
            det_used[di] = true;
            let d = &frame[di];
            let tr = &mut live[ti];
            let dt = (d.time.ms() - tr.last_time.ms()) as f64;
            if dt > 0.0 {
                tr.velocity = (
                    (d.bounds.cx_m - tr.last_box.cx_m) / dt,
                    (d.bounds.cy_m - tr.last_box.cy_m) / dt,
                );
            }
            tr.detections.push(d.id);
            tr.last_box = d.bounds;
            tr.last_time = d.time;
            tr.last_frame = frame_id;
        }
        for (di, d) in frame.iter().enumerate() {
            if !det_used[di] {
                live.push(Track {
                    detections: vec![d.id],
                    last_box: d.bounds,
                    last_time: d.time,
                    last_frame: frame_id,
                    velocity: (0.0, 0.0),
                });
            }
        }
        start = end;
    }
    closed.extend(live.into_iter().map(|tr| tr.detections));

    closed.sort_by_key(|ids| {
        let first = dets.get(ids[0]).expect("tracked detection");
        (first.time, first.id)
    });
    let sequences = closed
        .into_iter()
        .enumerate()
        .map(|(i, detections)| Sequence {
            id: i as u64,
            detections,
        })
        .collect();
    SequenceFrame::new(Arc::clone(dets), sequences)
}
