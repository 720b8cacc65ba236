use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::{lonlat_to_world, world_to_lonlat, RegionConfig, Timestamp, WorldCoord};

pub const TRACE_HEADER: &str = "event_id,start_ms,end_ms,lon,lat";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParkingEvent {
    pub event_id: u64,
    pub start: Timestamp,
    pub end: Timestamp,
    /// Region-local meters.
    pub location: WorldCoord,
}

/// Parking events over the window `[start, end)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub events: Vec<ParkingEvent>,
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Trace {
    pub fn new(events: Vec<ParkingEvent>, start: Timestamp, end: Timestamp) -> Result<Self> {
        if end <= start {
            return Err(Error::Config("trace window must have end after start".into()));
        }
        for e in &events {
            if e.end <= e.start {
                return Err(Error::Invalid(format!("event {} ends before it starts", e.event_id)));
            }
        }
        Ok(Self { events, start, end })
    }

    /// Window spanning the earliest start to the latest end.
    pub fn spanning(events: Vec<ParkingEvent>) -> Result<Self> {
        let start = events.iter().map(|e| e.start).min().unwrap_or(Timestamp::ZERO);
        let end = events.iter().map(|e| e.end).max().unwrap_or(Timestamp::ZERO);
        Self::new(events, start, end)
    }
}

/// Reads `event_id,start_ms,end_ms,lon,lat` rows; blank lines, `#` comments
/// and a header are skipped.
pub fn read_trace_csv(reader: impl BufRead, region: &RegionConfig) -> Result<Vec<ParkingEvent>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| Error::malformed("trace csv", n, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("event_id") {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(Error::malformed("trace csv", n, format!("expected 5 fields, got {}", f.len())));
        }
        let bad = |what: &str, s: &str| Error::malformed("trace csv", n, format!("bad {what} `{s}`"));
        let event_id: u64 = f[0].parse().map_err(|_| bad("event id", f[0]))?;
        let start: i64 = f[1].parse().map_err(|_| bad("start", f[1]))?;
        let end: i64 = f[2].parse().map_err(|_| bad("end", f[2]))?;
        let lon: f64 = f[3].parse().map_err(|_| bad("longitude", f[3]))?;
        let lat: f64 = f[4].parse().map_err(|_| bad("latitude", f[4]))?;
        if end <= start {
            return Err(Error::malformed("trace csv", n, "end must be after start"));
        }
        if !lon.is_finite() || !lat.is_finite() {
            return Err(Error::malformed("trace csv", n, "coordinates must be finite"));
        }
        out.push(ParkingEvent {
            event_id,
            start: Timestamp(start),
            end: Timestamp(end),
            location: lonlat_to_world(lon, lat, region),
        });
    }
    Ok(out)
}

pub fn write_trace_csv(events: &[ParkingEvent], region: &RegionConfig, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for e in events {
        let (lon, lat) = world_to_lonlat(&e.location, region);
        writeln!(w, "{},{},{},{:.9},{:.9}", e.event_id, e.start.ms(), e.end.ms(), lon, lat)?;
    }
    Ok(())
}
