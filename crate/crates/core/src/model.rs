//! Shared domain types: the local planar frame, the cell grid, timestamps and
//! the three dataframe row types (detections, sequences, matrix observations).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Meters per degree of latitude used by the local projection.
pub const METERS_PER_DEG_LAT: f64 = 110_540.0;
/// Meters per degree of longitude at the equator used by the local projection.
pub const METERS_PER_DEG_LON: f64 = 111_320.0;

/// A point in the local east/north/up frame, in meters relative to the region origin.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldCoord {
    pub x: f64,
    pub y: f64,
    pub h: f64,
}

impl WorldCoord {
    pub const fn new(x: f64, y: f64, h: f64) -> Self {
        Self { x, y, h }
    }

    pub fn distance(&self, other: &WorldCoord) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.h - other.h).powi(2))
            .sqrt()
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.h.is_finite()
            && (-1000.0..=10_000.0).contains(&self.h)
    }
}

/// Milliseconds since the stream epoch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub fn from_secs_f64(s: f64) -> Self {
        Timestamp((s * 1000.0).round() as i64)
    }

    pub fn ms(self) -> i64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// Signed elapsed seconds from `earlier` to `self`.
    pub fn secs_since(self, earlier: Timestamp) -> f64 {
        (self.0 - earlier.0) as f64 / 1000.0
    }
}

/// Offset by milliseconds.
impl std::ops::Add<i64> for Timestamp {
    type Output = Timestamp;

    fn add(self, ms: i64) -> Timestamp {
        Timestamp(self.0 + ms)
    }
}

/// Elapsed milliseconds.
impl std::ops::Sub for Timestamp {
    type Output = i64;

    fn sub(self, earlier: Timestamp) -> i64 {
        self.0 - earlier.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Grid cell index. Ordered row-major (by `cy`, then `cx`), which is also the
/// "cell index" order used for deterministic tie-breaking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellId {
    pub cx: u32,
    pub cy: u32,
}

impl CellId {
    pub const fn new(cx: u32, cy: u32) -> Self {
        Self { cx, cy }
    }
}

impl Ord for CellId {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.cy, self.cx).cmp(&(other.cy, other.cx))
    }
}

impl PartialOrd for CellId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.cx, self.cy)
    }
}

/// The observed region and its cell grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionConfig {
    pub origin_lon: f64,
    pub origin_lat: f64,
    pub width_m: f64,
    pub height_m: f64,
    pub cell_size_m: f64,
}

impl RegionConfig {
    pub fn new(
        origin_lon: f64,
        origin_lat: f64,
        width_m: f64,
        height_m: f64,
        cell_size_m: f64,
    ) -> Result<Self> {
        let region = Self {
            origin_lon,
            origin_lat,
            width_m,
            height_m,
            cell_size_m,
        };
        region.validate()?;
        Ok(region)
    }

    /// A square grid of `n x n` cells anchored at lon/lat (0, 0).
    pub fn square(cells: u32, cell_size_m: f64) -> Self {
        let side = cells as f64 * cell_size_m;
        Self {
            origin_lon: 0.0,
            origin_lat: 0.0,
            width_m: side,
            height_m: side,
            cell_size_m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.origin_lon,
            self.origin_lat,
            self.width_m,
            self.height_m,
            self.cell_size_m,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("region values must be finite".into()));
        }
        if self.cell_size_m <= 0.0 || self.width_m <= 0.0 || self.height_m <= 0.0 {
            return Err(Error::Config(
                "width_m, height_m and cell_size_m must be positive".into(),
            ));
        }
        for (name, extent) in [("width_m", self.width_m), ("height_m", self.height_m)] {
            let ratio = extent / self.cell_size_m;
            if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
                return Err(Error::Config(format!(
                    "{name} = {extent} is not a positive integer multiple of cell_size_m = {}",
                    self.cell_size_m
                )));
            }
        }
        Ok(())
    }

    /// Same extents, different cell size.
    pub fn with_cell_size(&self, cell_size_m: f64) -> Result<Self> {
        Self::new(
            self.origin_lon,
            self.origin_lat,
            self.width_m,
            self.height_m,
            cell_size_m,
        )
    }

    pub fn cols(&self) -> u32 {
        (self.width_m / self.cell_size_m).round() as u32
    }

    pub fn rows(&self) -> u32 {
        (self.height_m / self.cell_size_m).round() as u32
    }

    pub fn n_cells(&self) -> usize {
        self.cols() as usize * self.rows() as usize
    }

    /// Row-major linear index of a cell.
    pub fn index_of(&self, cell: CellId) -> usize {
        cell.cy as usize * self.cols() as usize + cell.cx as usize
    }

    pub fn cell_at(&self, index: usize) -> CellId {
        let cols = self.cols() as usize;
        CellId::new((index % cols) as u32, (index / cols) as u32)
    }

    pub fn contains_cell(&self, cell: CellId) -> bool {
        cell.cx < self.cols() && cell.cy < self.rows()
    }

    /// Every cell, row-major.
    pub fn cells(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..self.n_cells()).map(|i| self.cell_at(i))
    }

    pub fn cell_center(&self, cell: CellId) -> WorldCoord {
        WorldCoord::new(
            (cell.cx as f64 + 0.5) * self.cell_size_m,
            (cell.cy as f64 + 0.5) * self.cell_size_m,
            0.0,
        )
    }

    /// The cell nearest the geometric center of the region.
    pub fn center_cell(&self) -> CellId {
        CellId::new(self.cols() / 2, self.rows() / 2)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values: BTreeMap<&str, f64> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::malformed("region", i + 1, "expected key=value"))?;
            let key = key.trim();
            if !matches!(
                key,
                "origin_lon" | "origin_lat" | "width_m" | "height_m" | "cell_size_m"
            ) {
                return Err(Error::malformed(
                    "region",
                    i + 1,
                    format!("unknown key `{key}`"),
                ));
            }
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::malformed("region", i + 1, format!("`{}` is not a number", value.trim()))
            })?;
            values.insert(key, value);
        }
        let get = |k: &str| {
            values
                .get(k)
                .copied()
                .ok_or_else(|| Error::Config(format!("region config is missing `{k}`")))
        };
        Self::new(
            get("origin_lon")?,
            get("origin_lat")?,
            get("width_m")?,
            get("height_m")?,
            get("cell_size_m")?,
        )
    }

    pub fn render(&self) -> String {
        format!(
            "origin_lon = {}\norigin_lat = {}\nwidth_m = {}\nheight_m = {}\ncell_size_m = {}\n",
            self.origin_lon, self.origin_lat, self.width_m, self.height_m, self.cell_size_m
        )
    }
}

/// Equirectangular projection about the region origin.
pub fn lonlat_to_world(lon: f64, lat: f64, region: &RegionConfig) -> WorldCoord {
    let x = (lon - region.origin_lon) * region.origin_lat.to_radians().cos() * METERS_PER_DEG_LON;
    let y = (lat - region.origin_lat) * METERS_PER_DEG_LAT;
    WorldCoord::new(x, y, 0.0)
}

/// Inverse of [`lonlat_to_world`]; returns `(lon, lat)`.
pub fn world_to_lonlat(p: &WorldCoord, region: &RegionConfig) -> (f64, f64) {
    let lon = region.origin_lon + p.x / (region.origin_lat.to_radians().cos() * METERS_PER_DEG_LON);
    let lat = region.origin_lat + p.y / METERS_PER_DEG_LAT;
    (lon, lat)
}

pub fn world_to_cell(p: &WorldCoord, region: &RegionConfig) -> Result<CellId> {
    if !(p.x >= 0.0 && p.x < region.width_m && p.y >= 0.0 && p.y < region.height_m) {
        return Err(Error::OutOfRegion { x: p.x, y: p.y });
    }
    let cx = (p.x / region.cell_size_m).floor() as u32;
    let cy = (p.y / region.cell_size_m).floor() as u32;
    // Guard the last column/row against rounding in the division.
    Ok(CellId::new(cx.min(region.cols() - 1), cy.min(region.rows() - 1)))
}

/// Axis-aligned box in world meters, stored as center and extent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub cx_m: f64,
    pub cy_m: f64,
    pub w_m: f64,
    pub h_m: f64,
}

impl BBox {
    pub fn new(cx_m: f64, cy_m: f64, w_m: f64, h_m: f64) -> Self {
        Self {
            cx_m,
            cy_m,
            w_m,
            h_m,
        }
    }

    pub fn min_x(&self) -> f64 {
        self.cx_m - self.w_m / 2.0
    }
    pub fn max_x(&self) -> f64 {
        self.cx_m + self.w_m / 2.0
    }
    pub fn min_y(&self) -> f64 {
        self.cy_m - self.h_m / 2.0
    }
    pub fn max_y(&self) -> f64 {
        self.cy_m + self.h_m / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w_m * self.h_m
    }

    pub fn center(&self) -> WorldCoord {
        WorldCoord::new(self.cx_m, self.cy_m, 0.0)
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = (self.max_x().min(other.max_x()) - self.min_x().max(other.min_x())).max(0.0);
        let h = (self.max_y().min(other.max_y()) - self.min_y().max(other.min_y())).max(0.0);
        w * h
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// True when the interiors intersect (touching edges do not count).
    pub fn overlaps(&self, other: &BBox) -> bool {
        self.intersection_area(other) > 0.0
    }

    pub fn translated(&self, dx: f64, dy: f64) -> BBox {
        BBox::new(self.cx_m + dx, self.cy_m + dy, self.w_m, self.h_m)
    }
}

/// Axis-aligned world rectangle given by its corners.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn contains_box(&self, b: &BBox) -> bool {
        b.min_x() >= self.min_x
            && b.max_x() <= self.max_x
            && b.min_y() >= self.min_y
            && b.max_y() <= self.max_y
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }
}

/// One object observation, already in world coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub id: u64,
    pub frame_id: u64,
    pub time: Timestamp,
    pub bounds: BBox,
    pub class_name: String,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub appearance: Option<Vec<f64>>,
}

/// An ordered list of detection ids describing one object over time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sequence {
    pub id: u64,
    pub detections: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub cell: CellId,
    pub time: Timestamp,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixKind {
    /// One timeless value per cell; rows carry time 0 and zero cells are omitted.
    Static,
    TimeVarying,
}

/// Sparse spatio-temporal grid. Rows are kept sorted by `(time, cell)` with at
/// most one row per `(cell, time)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub grid: RegionConfig,
    pub kind: MatrixKind,
    rows: Vec<Observation>,
}

impl Matrix {
    pub fn empty(grid: RegionConfig, kind: MatrixKind) -> Self {
        Self {
            grid,
            kind,
            rows: Vec::new(),
        }
    }

    /// Builds a static matrix; non-finite and zero values are dropped and
    /// duplicate cells keep the last value given.
    pub fn new_static(grid: RegionConfig, values: impl IntoIterator<Item = (CellId, f64)>) -> Self {
        let mut by_cell: BTreeMap<CellId, f64> = BTreeMap::new();
        for (cell, v) in values {
            by_cell.insert(cell, v);
        }
        let mut rows: Vec<Observation> = by_cell
            .into_iter()
            .filter(|(_, v)| *v != 0.0 && v.is_finite())
            .map(|(cell, value)| Observation {
                cell,
                time: Timestamp::ZERO,
                value,
            })
            .collect();
        rows.sort_by(row_order);
        Self {
            grid,
            kind: MatrixKind::Static,
            rows,
        }
    }

    /// Builds a time-varying matrix. Later duplicates of a `(cell, time)` pair
    /// replace earlier ones.
    pub fn new_time_varying(
        grid: RegionConfig,
        rows: impl IntoIterator<Item = Observation>,
    ) -> Self {
        let mut map: BTreeMap<(Timestamp, CellId), f64> = BTreeMap::new();
        for o in rows {
            map.insert((o.time, o.cell), o.value);
        }
        let rows = map
            .into_iter()
            .map(|((time, cell), value)| Observation { cell, time, value })
            .collect();
        Self {
            grid,
            kind: MatrixKind::TimeVarying,
            rows,
        }
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_static(&self) -> bool {
        self.kind == MatrixKind::Static
    }

    /// Rows grouped per cell, each list in time order.
    pub fn by_cell(&self) -> BTreeMap<CellId, Vec<(Timestamp, f64)>> {
        let mut out: BTreeMap<CellId, Vec<(Timestamp, f64)>> = BTreeMap::new();
        for o in &self.rows {
            out.entry(o.cell).or_default().push((o.time, o.value));
        }
        out
    }

    /// Distinct row times in ascending order.
    pub fn times(&self) -> Vec<Timestamp> {
        let mut t: Vec<Timestamp> = self.rows.iter().map(|o| o.time).collect();
        t.dedup();
        t
    }

    pub fn max_time(&self) -> Option<Timestamp> {
        self.rows.last().map(|o| o.time)
    }

    /// Static value of a cell (0 when absent). Only meaningful for static matrices.
    pub fn static_value(&self, cell: CellId) -> f64 {
        self.rows
            .iter()
            .find(|o| o.cell == cell)
            .map(|o| o.value)
            .unwrap_or(0.0)
    }

    /// Value at `(cell, t)`: the most recent row at or before `t` for
    /// time-varying matrices, the broadcast value for static ones, 0 otherwise.
    pub fn value_at(&self, cell: CellId, t: Timestamp) -> f64 {
        match self.kind {
            MatrixKind::Static => self.static_value(cell),
            MatrixKind::TimeVarying => self
                .rows
                .iter().rfind(|o| o.cell == cell && o.time <= t)
                .map(|o| o.value)
                .unwrap_or(0.0),
        }
    }
}

/// Indexed view of a matrix for repeated `(cell, t)` lookups.
#[derive(Clone, Debug)]
pub struct MatrixLookup {
    kind: MatrixKind,
    series: std::collections::HashMap<CellId, Vec<(Timestamp, f64)>>,
}

impl MatrixLookup {
    pub fn new(m: &Matrix) -> Self {
        let mut series: std::collections::HashMap<CellId, Vec<(Timestamp, f64)>> =
            std::collections::HashMap::new();
        for o in &m.rows {
            series.entry(o.cell).or_default().push((o.time, o.value));
        }
        Self {
            kind: m.kind,
            series,
        }
    }

    /// Same semantics as [`Matrix::value_at`].
    pub fn value_at(&self, cell: CellId, t: Timestamp) -> f64 {
        let Some(s) = self.series.get(&cell) else {
            return 0.0;
        };
        match self.kind {
            MatrixKind::Static => s[0].1,
            MatrixKind::TimeVarying => {
                let k = s.partition_point(|(ts, _)| *ts <= t);
                if k == 0 {
                    0.0
                } else {
                    s[k - 1].1
                }
            }
        }
    }

    /// Latest value of the cell regardless of time (0 when never observed).
    pub fn latest(&self, cell: CellId) -> f64 {
        self.series.get(&cell).and_then(|s| s.last()).map_or(0.0, |o| o.1)
    }
}

fn row_order(a: &Observation, b: &Observation) -> Ordering {
    (a.time, a.cell).cmp(&(b.time, b.cell))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region64() -> RegionConfig {
        RegionConfig::new(-71.1, 42.36, 1024.0, 1024.0, 64.0).unwrap()
    }

    #[test]
    fn origin_projects_to_zero() {
        let r = region64();
        let p = lonlat_to_world(r.origin_lon, r.origin_lat, &r);
        assert_eq!(p, WorldCoord::new(0.0, 0.0, 0.0));
    }

    #[test]
    fn one_meter_north() {
        let r = region64();
        let p = lonlat_to_world(r.origin_lon, r.origin_lat + 1.0 / 110_540.0, &r);
        assert!((p.y - 1.0).abs() < 1e-6);
        assert!(p.x.abs() < 1e-12);
    }

    #[test]
    fn east_offset_at_45_degrees() {
        let r = RegionConfig::new(10.0, 45.0, 1024.0, 1024.0, 64.0).unwrap();
        let p = lonlat_to_world(10.001, 45.0, &r);
        // 0.001 * cos(45 deg) * 111320 = 78.71596...
        assert!((p.x - 78.716).abs() < 1e-3, "{}", p.x);
    }

    #[test]
    fn world_to_cell_examples() {
        let r = region64();
        assert_eq!(world_to_cell(&WorldCoord::new(0.0, 0.0, 0.0), &r).unwrap(), CellId::new(0, 0));
        assert_eq!(
            world_to_cell(&WorldCoord::new(63.99, 64.0, 0.0), &r).unwrap(),
            CellId::new(0, 1)
        );
        assert_eq!(
            world_to_cell(&WorldCoord::new(130.0, 200.0, 0.0), &r).unwrap(),
            CellId::new(2, 3)
        );
    }

    #[test]
    fn world_to_cell_rejects_outside_points() {
        let r = region64();
        for (x, y) in [(-0.1, 5.0), (5.0, 1024.0), (1024.0, 0.0), (f64::NAN, 1.0)] {
            assert!(matches!(
                world_to_cell(&WorldCoord::new(x, y, 0.0), &r),
                Err(Error::OutOfRegion { .. })
            ));
        }
    }

    #[test]
    fn region_rejects_non_multiple_extent() {
        assert!(RegionConfig::new(0.0, 0.0, 100.0, 128.0, 64.0).is_err());
        assert!(RegionConfig::new(0.0, 0.0, 128.0, 128.0, 0.0).is_err());
    }

    #[test]
    fn region_parse_round_trip() {
        let r = region64();
        let back = RegionConfig::parse(&r.render()).unwrap();
        assert_eq!(r, back);
        let err = RegionConfig::parse("origin_lon = 1\nbogus\n").unwrap_err();
        assert!(err.to_string().contains("line 2:"), "{err}");
    }

    #[test]
    fn iou_of_shifted_boxes() {
        let a = BBox::new(0.0, 0.0, 4.0, 4.0);
        let b = a.translated(1.0, 0.0);
        // overlap 3x4 = 12, union 32 - 12 = 20
        assert!((a.iou(&b) - 0.6).abs() < 1e-12);
        assert!(!a.overlaps(&a.translated(4.0, 0.0)));
    }

    #[test]
    fn matrix_value_at_carries_forward() {
        let r = region64();
        let c = CellId::new(1, 1);
        let m = Matrix::new_time_varying(
            r,
            [
                Observation { cell: c, time: Timestamp(10), value: 2.0 },
                Observation { cell: c, time: Timestamp(20), value: 5.0 },
            ],
        );
        assert_eq!(m.value_at(c, Timestamp(5)), 0.0);
        assert_eq!(m.value_at(c, Timestamp(15)), 2.0);
        assert_eq!(m.value_at(c, Timestamp(25)), 5.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn projection_inverts_near_origin(
                lat0 in -60.0f64..60.0, lon0 in -170.0f64..170.0,
                dx in -10_000.0f64..10_000.0, dy in -10_000.0f64..10_000.0,
            ) {
                let r = RegionConfig::new(lon0, lat0, 64.0, 64.0, 64.0).unwrap();
                let (lon, lat) = world_to_lonlat(&WorldCoord::new(dx, dy, 0.0), &r);
                let p = lonlat_to_world(lon, lat, &r);
                let (lon2, lat2) = world_to_lonlat(&p, &r);
                prop_assert!((lon - lon2).abs() < 1e-9 && (lat - lat2).abs() < 1e-9);
                prop_assert!((p.x - dx).abs() < 1e-6 && (p.y - dy).abs() < 1e-6);
            }

            #[test]
            fn cell_center_maps_back_to_cell(cx in 0u32..16, cy in 0u32..16) {
                let r = region64();
                let c = CellId::new(cx, cy);
                prop_assert_eq!(world_to_cell(&r.cell_center(c), &r).unwrap(), c);
            }
        }
    }
}
