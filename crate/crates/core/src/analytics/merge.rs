use std::io::BufRead;

use super::SequenceFrame;
use crate::error::{Error, Result};
use crate::model::{Detection, Rect, Sequence, Timestamp};

/// A region the drone observed at an instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverageRecord {
    pub time: Timestamp,
    pub footprint: Rect,
}

/// Coverage history in time order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoverageLog {
    records: Vec<CoverageRecord>,
}

impl CoverageLog {
    pub fn new(mut records: Vec<CoverageRecord>) -> Self {
        records.sort_by_key(|r| r.time);
        Self { records }
    }

    pub fn records(&self) -> &[CoverageRecord] {
        &self.records
    }

    /// True if some record strictly between `after` and `before` covers `b`.
    pub fn covered_between(&self, b: &crate::model::BBox, after: Timestamp, before: Timestamp) -> bool {
        let lo = self.records.partition_point(|r| r.time <= after);
        self.records[lo..]
            .iter()
            .take_while(|r| r.time < before)
            .any(|r| r.footprint.contains_box(b))
    }

    /// Reads `t_ms,min_x,min_y,max_x,max_y` lines; a header starting with
    /// `t_ms`, blank lines and `#` comments are skipped.
    pub fn read(reader: impl BufRead) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::malformed("coverage log", lineno, e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("t_ms") {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(Error::malformed(
                    "coverage log",
                    lineno,
                    format!("expected 5 fields, found {}", f.len()),
                ));
            }
            let t: i64 = f[0]
                .parse()
                .map_err(|_| Error::malformed("coverage log", lineno, "t_ms is not an integer"))?;
            let mut v = [0.0; 4];
            for k in 0..4 {
                v[k] = f[k + 1].parse().ok().filter(|x: &f64| x.is_finite()).ok_or_else(|| {
                    Error::malformed("coverage log", lineno, format!("`{}` is not a number", f[k + 1]))
                })?;
            }
            if v[0] > v[2] || v[1] > v[3] {
                return Err(Error::malformed("coverage log", lineno, "footprint min exceeds max"));
            }
            records.push(CoverageRecord {
                time: Timestamp(t),
                footprint: Rect::new(v[0], v[1], v[2], v[3]),
            });
        }
        Ok(Self::new(records))
    }

    pub fn write(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "t_ms,min_x,min_y,max_x,max_y")?;
        for r in &self.records {
            let f = r.footprint;
            writeln!(w, "{},{},{},{},{}", r.time.ms(), f.min_x, f.min_y, f.max_x, f.max_y)?;
        }
        Ok(())
    }
}

/// Cosine similarity of two appearance vectors; 0 when either has zero norm.
pub fn appearance_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Checks the four merge constraints for appending `d2`'s sequence after `d1`'s.
pub fn can_merge(d1: &Detection, d2: &Detection, coverage: &CoverageLog, threshold: f64) -> Result<bool> {
    if !d1.bounds.overlaps(&d2.bounds) || d2.time <= d1.time {
        return Ok(false);
    }
    if coverage.covered_between(&d1.bounds, d1.time, d2.time) {
        return Ok(false);
    }
    if threshold > 0.0 {
        let (Some(a), Some(b)) = (&d1.appearance, &d2.appearance) else {
            return Err(Error::Invalid(
                "merge with a similarity threshold needs appearance vectors".into(),
            ));
        };
        if a.len() != b.len() {
            return Err(Error::DescriptorDim {
                expected: a.len(),
                actual: b.len(),
            });
        }
        if appearance_similarity(a, b) < threshold {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Joins sequences of one object that were split by gaps in observation.
///
/// Sequences are streamed in order of first detection. Each is appended to the
/// most recently updated output sequence it can follow: the boxes of the last
/// detection `d1` and the new first detection `d2` overlap, `d2` is later, no
/// coverage record strictly between them fully contains `d1`'s box (the object
/// would have been seen), and appearance similarity reaches `threshold`. A
/// threshold of 0 or less disables the appearance check.
pub fn merge(frame: &SequenceFrame, coverage: &CoverageLog, threshold: f64) -> Result<SequenceFrame> {
    let mut input: Vec<&Sequence> = frame.sequences.iter().filter(|s| !s.detections.is_empty()).collect();
    input.sort_by_key(|s| {
        let d = frame.first(s);
        (d.time, d.id)
    });

    let mut out: Vec<Sequence> = Vec::new();
    // Output indices, most recently updated last.
    let mut recency: Vec<usize> = Vec::new();
    for s2 in input {
        let d2 = frame.first(s2);
        let mut target = None;
        for &k in recency.iter().rev() {
            let d1 = frame.last(&out[k]);
            if can_merge(d1, d2, coverage, threshold)? {
                target = Some(k);
                break;
            }
        }
        let k = match target {
            Some(k) => {
                out[k].detections.extend_from_slice(&s2.detections);
                recency.retain(|&j| j != k);
                k
            }
            None => {
                out.push(s2.clone());
                out.len() - 1
            }
        };
        recency.push(k);
    }
    Ok(frame.with_sequences(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::DetectionFrame;
    use crate::model::BBox;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn det(id: u64, t: i64, x: f64, app: Option<Vec<f64>>) -> Detection {
        Detection {
            id,
            frame_id: t as u64,
            time: Timestamp(t),
            bounds: BBox::new(x, 0.0, 4.0, 4.0),
            class_name: "car".into(),
            score: 1.0,
            appearance: app,
        }
    }

    fn two_parts(app1: Option<Vec<f64>>, app2: Option<Vec<f64>>) -> SequenceFrame {
        let dets = vec![det(0, 0, 0.0, app1.clone()), det(1, 10, 0.5, app1), det(2, 100, 1.0, app2)];
        SequenceFrame::new(
            Arc::new(DetectionFrame::new(dets).unwrap()),
            vec![
                Sequence { id: 0, detections: vec![0, 1] },
                Sequence { id: 1, detections: vec![2] },
            ],
        )
    }

    #[test]
    fn unobserved_gap_merges() {
        let m = merge(&two_parts(None, None), &CoverageLog::default(), 0.0).unwrap();
        assert_eq!(m.sequences, vec![Sequence { id: 0, detections: vec![0, 1, 2] }]);
    }

    #[test]
    fn observed_gap_blocks_merge() {
        let cov = CoverageLog::new(vec![CoverageRecord {
            time: Timestamp(50),
            footprint: Rect::new(-100.0, -100.0, 100.0, 100.0),
        }]);
        let m = merge(&two_parts(None, None), &cov, 0.0).unwrap();
        assert_eq!(m.len(), 2);
        // Coverage at the endpoint instants does not count.
        let cov = CoverageLog::new(vec![CoverageRecord {
            time: Timestamp(100),
            footprint: Rect::new(-100.0, -100.0, 100.0, 100.0),
        }]);
        assert_eq!(merge(&two_parts(None, None), &cov, 0.0).unwrap().len(), 1);
    }

    #[test]
    fn partial_coverage_does_not_block() {
        let cov = CoverageLog::new(vec![CoverageRecord {
            time: Timestamp(50),
            footprint: Rect::new(0.0, -100.0, 100.0, 100.0),
        }]);
        assert_eq!(merge(&two_parts(None, None), &cov, 0.0).unwrap().len(), 1);
    }

    #[test]
    fn dissimilar_appearance_blocks_merge() {
        let f = two_parts(Some(vec![1.0, 0.0]), Some(vec![0.0, 1.0]));
        assert_eq!(merge(&f, &CoverageLog::default(), 0.5).unwrap().len(), 2);
        let f = two_parts(Some(vec![1.0, 0.0]), Some(vec![0.9, 0.1]));
        assert_eq!(merge(&f, &CoverageLog::default(), 0.5).unwrap().len(), 1);
    }

    #[test]
    fn threshold_without_appearance_is_an_error() {
        assert!(merge(&two_parts(None, None), &CoverageLog::default(), 0.5).is_err());
    }

    #[test]
    fn coverage_log_parses_and_names_bad_line() {
        let ok = CoverageLog::read("t_ms,min_x,min_y,max_x,max_y\n5,0,0,10,10\n".as_bytes()).unwrap();
        assert_eq!(ok.records().len(), 1);
        let err = CoverageLog::read("5,0,0,10,10\n6,0,0,x,10\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2:"), "{err}");
    }

    /// Independent oracle: scans every candidate in order of last update.
    fn oracle(frame: &SequenceFrame, cov: &CoverageLog) -> Vec<Vec<u64>> {
        let mut seqs: Vec<&Sequence> = frame.sequences.iter().collect();
        seqs.sort_by_key(|s| (frame.first(s).time, frame.first(s).id));
        let mut groups: Vec<(Vec<u64>, usize)> = Vec::new();
        for (step, s2) in seqs.into_iter().enumerate() {
            let d2 = frame.first(s2);
            let mut best: Option<usize> = None;
            for (k, (ids, stamp)) in groups.iter().enumerate() {
                let d1 = frame.detections.get(*ids.last().unwrap()).unwrap();
                let ok = d1.bounds.intersection_area(&d2.bounds) > 0.0
                    && d2.time > d1.time
                    && !cov.records().iter().any(|r| {
                        r.time > d1.time && r.time < d2.time && r.footprint.contains_box(&d1.bounds)
                    });
                if ok && best.is_none_or(|b| *stamp > groups[b].1) {
                    best = Some(k);
                }
            }
            match best {
                Some(k) => {
                    groups[k].0.extend(&s2.detections);
                    groups[k].1 = step;
                }
                None => groups.push((s2.detections.clone(), step)),
            }
        }
        groups.into_iter().map(|g| g.0).collect()
    }

    #[test]
    fn matches_oracle_on_small_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..300 {
            let n = rng.random_range(1..=6);
            let mut dets = Vec::new();
            let mut seqs = Vec::new();
            let mut t = 0;
            for s in 0..n {
                let len = rng.random_range(1..=3);
                let x0 = rng.random_range(0.0..12.0);
                let mut ids = Vec::new();
                for k in 0..len {
                    t += rng.random_range(1..20);
                    dets.push(det(dets.len() as u64, t, x0 + k as f64, None));
                    ids.push(dets.len() as u64 - 1);
                }
                seqs.push(Sequence { id: s, detections: ids });
            }
            let records = (0..rng.random_range(0..4))
                .map(|_| {
                    let x = rng.random_range(-5.0..15.0);
                    CoverageRecord {
                        time: Timestamp(rng.random_range(0..t + 1)),
                        footprint: Rect::new(x, -10.0, x + 8.0, 10.0),
                    }
                })
                .collect();
            let cov = CoverageLog::new(records);
            let frame = SequenceFrame::new(Arc::new(DetectionFrame::new(dets).unwrap()), seqs);
            let got = merge(&frame, &cov, 0.0).unwrap();
            let got_ids: Vec<Vec<u64>> = got.sequences.iter().map(|s| s.detections.clone()).collect();
            assert_eq!(got_ids, oracle(&frame, &cov));
            assert_eq!(got.total_detections(), frame.total_detections());
        }
    }
}
