use std::collections::HashMap;
use std::io::BufRead;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{BBox, Detection, Sequence, Timestamp};

/// Detections in time order, addressable by id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DetectionFrame {
    rows: Vec<Detection>,
    index: HashMap<u64, usize>,
}

impl DetectionFrame {
    /// Builds a frame from detections already in time order.
    pub fn new(rows: Vec<Detection>) -> Result<Self> {
        let mut index = HashMap::with_capacity(rows.len());
        for (i, d) in rows.iter().enumerate() {
            if i > 0 && d.time < rows[i - 1].time {
                return Err(Error::Invalid(format!(
                    "detection {} at t={} precedes its predecessor",
                    d.id, d.time
                )));
            }
            if index.insert(d.id, i).is_some() {
                return Err(Error::Invalid(format!("duplicate detection id {}", d.id)));
            }
        }
        Ok(Self { rows, index })
    }

    pub fn rows(&self) -> &[Detection] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&Detection> {
        self.index.get(&id).map(|&i| &self.rows[i])
    }
}

/// Sequences plus the detection table they reference.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceFrame {
    pub detections: Arc<DetectionFrame>,
    pub sequences: Vec<Sequence>,
}

impl SequenceFrame {
    pub fn new(detections: Arc<DetectionFrame>, sequences: Vec<Sequence>) -> Self {
        Self {
            detections,
            sequences,
        }
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Resolves a sequence's detections in order.
    pub fn resolve<'a>(&'a self, seq: &'a Sequence) -> impl Iterator<Item = &'a Detection> + 'a {
        seq.detections.iter().map(move |id| {
            self.detections
                .get(*id)
                .expect("sequence references a detection outside its table")
        })
    }

    pub fn first(&self, seq: &Sequence) -> &Detection {
        self.detections.get(seq.detections[0]).expect("non-empty sequence")
    }

    pub fn last(&self, seq: &Sequence) -> &Detection {
        self.detections
            .get(*seq.detections.last().expect("non-empty sequence"))
            .expect("non-empty sequence")
    }

    pub fn total_detections(&self) -> usize {
        self.sequences.iter().map(|s| s.detections.len()).sum()
    }

    pub fn with_sequences(&self, sequences: Vec<Sequence>) -> Self {
        Self {
            detections: Arc::clone(&self.detections),
            sequences,
        }
    }
}

/// Parses one detection-log line:
/// `t_ms,frame_id,class,score,cx_m,cy_m,w_m,h_m[,appearance...]`.
fn parse_detection(line: &str, lineno: usize, id: u64) -> Result<Detection> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() < 8 {
        return Err(Error::malformed(
            "detection log",
            lineno,
            format!("expected at least 8 fields, found {}", fields.len()),
        ));
    }
    let num = |i: usize, name: &str| -> Result<f64> {
        fields[i].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
            Error::malformed("detection log", lineno, format!("{name} `{}` is not a number", fields[i]))
        })
    };
    let t_ms: i64 = fields[0].parse().map_err(|_| {
        Error::malformed("detection log", lineno, format!("t_ms `{}` is not an integer", fields[0]))
    })?;
    let frame_id: u64 = fields[1].parse().map_err(|_| {
        Error::malformed("detection log", lineno, format!("frame_id `{}` is not an integer", fields[1]))
    })?;
    if t_ms < 0 {
        return Err(Error::malformed("detection log", lineno, "negative timestamp"));
    }
    let score = num(3, "score")?;
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::malformed("detection log", lineno, "score outside [0, 1]"));
    }
    let bounds = BBox::new(num(4, "cx_m")?, num(5, "cy_m")?, num(6, "w_m")?, num(7, "h_m")?);
    if !(bounds.w_m > 0.0 && bounds.h_m > 0.0) {
        return Err(Error::malformed("detection log", lineno, "box extents must be positive"));
    }
    let appearance = if fields.len() > 8 {
        Some(
            (8..fields.len())
                .map(|i| num(i, "appearance"))
                .collect::<Result<Vec<f64>>>()?,
        )
    } else {
        None
    };
    Ok(Detection {
        id,
        frame_id,
        time: Timestamp(t_ms),
        bounds,
        class_name: fields[2].to_string(),
        score,
        appearance,
    })
}

/// Reads a detection log and keeps rows of `class_filter` (all rows when
/// `None`). Detection ids are the 0-based record index in the log, so they are
/// stable across filters. Blank lines, `#` comments and a leading header line
/// starting with `t_ms` are skipped.
pub fn object_detection_ingest(reader: impl BufRead, class_filter: Option<&str>) -> Result<DetectionFrame> {
    let mut rows = Vec::new();
    let mut record = 0u64;
    let mut last: Option<(Timestamp, u64)> = None;
    let mut appearance_dim: Option<usize> = None;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::malformed("detection log", lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (record == 0 && line.starts_with("t_ms")) {
            continue;
        }
        let det = parse_detection(line, lineno, record)?;
        record += 1;
        if let Some((t, f)) = last {
            if det.time < t || det.frame_id < f {
                return Err(Error::malformed(
                    "detection log",
                    lineno,
                    format!("time goes backwards ({} after {})", det.time, t),
                ));
            }
        }
        last = Some((det.time, det.frame_id));
        if let Some(a) = &det.appearance {
            match appearance_dim {
                None => appearance_dim = Some(a.len()),
                Some(d) if d != a.len() => {
                    return Err(Error::malformed(
                        "detection log",
                        lineno,
                        format!("appearance has {} values, earlier rows have {d}", a.len()),
                    ))
                }
                _ => {}
            }
        }
        if class_filter.is_none_or(|c| c == det.class_name) {
            rows.push(det);
        }
    }
    DetectionFrame::new(rows)
}

/// Writes detections in the log format read by [`object_detection_ingest`].
pub fn write_detection_log(rows: &[Detection], mut w: impl std::io::Write) -> std::io::Result<()> {
    writeln!(w, "t_ms,frame_id,class,score,cx_m,cy_m,w_m,h_m,appearance...")?;
    for d in rows {
        write!(
            w,
            "{},{},{},{},{},{},{},{}",
            d.time.ms(),
            d.frame_id,
            d.class_name,
            d.score,
            d.bounds.cx_m,
            d.bounds.cy_m,
            d.bounds.w_m,
            d.bounds.h_m
        )?;
        if let Some(a) = &d.appearance {
            for v in a {
                write!(w, ",{v}")?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}
