use std::io::{BufRead, Write};

use super::{Route, RoutingInstance};
use crate::error::{Error, Result};
use crate::model::{CellId, RegionConfig};

pub const ROUTE_HEADER: &str = "cell_x,cell_y,eta_s";

/// Reads a priorities matrix CSV (`cell_x,cell_y,t_ms,value` or
/// `cell_x,cell_y,value`) into one value per cell; later rows of a cell
/// replace earlier ones.
pub fn read_priorities_csv(reader: impl BufRead, grid: &RegionConfig) -> Result<Vec<f64>> {
    let mut out = vec![0.0; grid.n_cells()];
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| Error::malformed("priorities csv", n, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("cell_x") {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 && f.len() != 4 {
            return Err(Error::malformed("priorities csv", n, format!("expected 3 or 4 fields, got {}", f.len())));
        }
        let parse_u = |s: &str| s.parse::<u32>().map_err(|_| Error::malformed("priorities csv", n, format!("bad cell index `{s}`")));
        let cell = CellId::new(parse_u(f[0])?, parse_u(f[1])?);
        if !grid.contains_cell(cell) {
            return Err(Error::malformed("priorities csv", n, format!("cell ({}, {}) is outside the grid", cell.cx, cell.cy)));
        }
        let v: f64 = f[f.len() - 1]
            .parse()
            .map_err(|_| Error::malformed("priorities csv", n, format!("bad value `{}`", f[f.len() - 1])))?;
        if !v.is_finite() {
            return Err(Error::malformed("priorities csv", n, "value must be finite"));
        }
        out[grid.index_of(cell)] = v;
    }
    Ok(out)
}

/// Writes the route as waypoints with arrival times, depot first and last.
pub fn write_route_csv(route: &Route, inst: &RoutingInstance, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{ROUTE_HEADER}")?;
    for (c, eta) in route.cells.iter().zip(route.etas(inst)) {
        writeln!(w, "{},{},{:.3}", c.cx, c.cy, eta)?;
    }
    Ok(())
}
