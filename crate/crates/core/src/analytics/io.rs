use std::io::{BufRead, Write};

use serde::Serialize;

use super::SequenceFrame;
use crate::error::{Error, Result};
use crate::model::{CellId, Matrix, MatrixKind, Observation, RegionConfig, Timestamp};

pub const MATRIX_HEADER: &str = "cell_x,cell_y,t_ms,value";

/// Writes matrix rows as `cell_x,cell_y,t_ms,value` in `(time, cell)` order.
pub fn write_matrix_csv(m: &Matrix, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{MATRIX_HEADER}")?;
    for o in m.rows() {
        writeln!(w, "{},{},{},{}", o.cell.cx, o.cell.cy, o.time.ms(), o.value)?;
    }
    Ok(())
}

/// Reads a matrix CSV onto `grid`. Cells outside the grid are an error.
pub fn read_matrix_csv(reader: impl BufRead, grid: &RegionConfig, kind: MatrixKind) -> Result<Matrix> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::malformed("matrix csv", lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("cell_x") {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(Error::malformed("matrix csv", lineno, format!("expected 4 fields, found {}", f.len())));
        }
        let bad = |what: &str| Error::malformed("matrix csv", lineno, format!("bad {what}"));
        let cell = CellId::new(f[0].parse().map_err(|_| bad("cell_x"))?, f[1].parse().map_err(|_| bad("cell_y"))?);
        if !grid.contains_cell(cell) {
            return Err(Error::malformed("matrix csv", lineno, format!("cell {cell} is outside the grid")));
        }
        let time = Timestamp(f[2].parse().map_err(|_| bad("t_ms"))?);
        let value: f64 = f[3].parse().map_err(|_| bad("value"))?;
        if !value.is_finite() {
            return Err(bad("value"));
        }
        rows.push(Observation { cell, time, value });
    }
    Ok(match kind {
        MatrixKind::Static => Matrix::new_static(*grid, rows.into_iter().map(|o| (o.cell, o.value))),
        MatrixKind::TimeVarying => Matrix::new_time_varying(*grid, rows),
    })
}

#[derive(Serialize)]
struct WireSequence<'a> {
    id: u64,
    start_ms: i64,
    end_ms: i64,
    detections: &'a [u64],
}

/// Writes one JSON object per sequence.
pub fn write_sequences_jsonl(frame: &SequenceFrame, mut w: impl Write) -> std::io::Result<()> {
    for s in &frame.sequences {
        let wire = WireSequence {
            id: s.id,
            start_ms: frame.first(s).time.ms(),
            end_ms: frame.last(s).time.ms(),
            detections: &s.detections,
        };
        writeln!(w, "{}", serde_json::to_string(&wire).expect("sequence serializes"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_csv_round_trip() {
        let grid = RegionConfig::square(4, 16.0);
        let m = Matrix::new_time_varying(
            grid,
            vec![
                Observation { cell: CellId::new(1, 2), time: Timestamp(5), value: 0.1 },
                Observation { cell: CellId::new(3, 0), time: Timestamp(0), value: -2.5 },
            ],
        );
        let mut buf = Vec::new();
        write_matrix_csv(&m, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with(MATRIX_HEADER));
        assert_eq!(read_matrix_csv(buf.as_slice(), &grid, MatrixKind::TimeVarying).unwrap(), m);
    }

    #[test]
    fn out_of_grid_cell_names_line() {
        let grid = RegionConfig::square(2, 16.0);
        let err = read_matrix_csv("cell_x,cell_y,t_ms,value\n0,0,0,1\n5,0,0,1\n".as_bytes(), &grid, MatrixKind::Static)
            .unwrap_err();
        assert!(err.to_string().contains("line 3:"), "{err}");
    }
}
