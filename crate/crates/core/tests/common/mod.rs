//! Random small instances and brute-force oracles shared by the integration
//! tests. The oracles recompute every result from raw detections and matrix
//! rows by exhaustive scans.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skyquery::analytics::{ArithExpr, BinOp, CoverageLog, CoverageRecord, DetectionFrame, SequenceFrame};
use skyquery::model::{BBox, CellId, Detection, Matrix, Observation, Rect, RegionConfig, Sequence, Timestamp};

pub const CELL_M: f64 = 10.0;

/// 4x4 grid of 10 m cells.
pub fn small_grid() -> RegionConfig {
    RegionConfig::square(4, CELL_M)
}

/// Up to 6 sequences over up to 20 timestamps on the 16-cell grid, with
/// 3-D appearance vectors drawn from a few prototypes and a few coverage
/// records.
pub struct SmallInstance {
    pub frame: SequenceFrame,
    pub coverage: CoverageLog,
    pub threshold: f64,
}

pub fn small_instance(seed: u64) -> SmallInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_times = rng.random_range(1..=20i64);
    let n_seqs = rng.random_range(0..=6usize);
    let protos = [[1.0, 0.0, 0.0], [0.9, 0.3, 0.0], [0.0, 1.0, 0.2]];
    let mut dets: Vec<(i64, usize, BBox, Vec<f64>)> = Vec::new();
    // (last time, x, y, look) of every generated sequence.
    let mut ends: Vec<(i64, f64, f64, usize)> = Vec::new();
    for s in 0..n_seqs {
        let mut len = rng.random_range(1..=4i64.min(n_times));
        let mut start = rng.random_range(0..=n_times - len);
        let (mut x, mut y) = (rng.random_range(1.0..39.0), rng.random_range(1.0..39.0));
        let mut look = rng.random_range(0..protos.len());
        // Half the time, continue an earlier object after a gap.
        if let Some(&(end, px, py, plook)) = ends.get(rng.random_range(0..ends.len().max(1))) {
            if rng.random_bool(0.5) && end + 1 < n_times {
                start = rng.random_range(end + 1..n_times);
                len = len.min(n_times - start);
                (x, y, look) = (px + rng.random_range(-1.0..1.0), py + rng.random_range(-1.0..1.0), plook);
            }
        }
        for k in 0..len {
            if k > 0 && rng.random_bool(0.4) {
                x = (x + rng.random_range(-6.0..6.0f64)).clamp(0.5, 39.5);
                y = (y + rng.random_range(-6.0..6.0f64)).clamp(0.5, 39.5);
            }
            let (w, h) = (rng.random_range(1.0..4.0), rng.random_range(1.0..4.0));
            dets.push((start + k, s, BBox::new(x, y, w, h), protos[look].to_vec()));
        }
        ends.push((start + len - 1, x, y, look));
    }
    dets.sort_by_key(|d| (d.0, d.1));
    let mut rows = Vec::new();
    let mut seqs: Vec<Vec<u64>> = vec![Vec::new(); n_seqs];
    for (i, (t, s, b, look)) in dets.into_iter().enumerate() {
        rows.push(Detection {
            id: i as u64,
            frame_id: t as u64,
            time: Timestamp(t * 1000),
            bounds: b,
            class_name: "car".into(),
            score: 0.9,
            appearance: Some(look),
        });
        seqs[s].push(i as u64);
    }
    let sequences = seqs
        .into_iter()
        .enumerate()
        .filter(|(_, d)| !d.is_empty())
        .map(|(id, detections)| Sequence { id: id as u64, detections })
        .collect();
    let records = (0..rng.random_range(0..4))
        .map(|_| {
            let (x, y) = (rng.random_range(-10.0..40.0), rng.random_range(-10.0..40.0));
            let s = rng.random_range(5.0..30.0);
            CoverageRecord {
                time: Timestamp(rng.random_range(0..n_times * 1000)),
                footprint: Rect::new(x, y, x + s, y + s),
            }
        })
        .collect();
    SmallInstance {
        frame: SequenceFrame::new(Arc::new(DetectionFrame::new(rows).unwrap()), sequences),
        coverage: CoverageLog::new(records),
        threshold: [0.0, 0.8, 0.99][rng.random_range(0..3)],
    }
}

/// Random time-varying matrix on the small grid.
pub fn random_matrix(rng: &mut ChaCha8Rng, max_rows: usize) -> Matrix {
    let n = rng.random_range(0..=max_rows);
    let rows: Vec<Observation> = (0..n)
        .map(|_| Observation {
            cell: CellId::new(rng.random_range(0..4), rng.random_range(0..4)),
            time: Timestamp(rng.random_range(0..20) * 1000),
            value: rng.random_range(-3..=5) as f64,
        })
        .collect();
    Matrix::new_time_varying(small_grid(), rows)
}

pub fn random_static(rng: &mut ChaCha8Rng) -> Matrix {
    let cells: Vec<(CellId, f64)> = small_grid()
        .cells()
        .filter_map(|c| rng.random_bool(0.4).then(|| (c, rng.random_range(-2..=3) as f64)))
        .collect();
    Matrix::new_static(small_grid(), cells)
}

pub fn as_map(m: &Matrix) -> BTreeMap<(i64, CellId), f64> {
    m.rows().iter().map(|o| ((o.time.ms(), o.cell), o.value)).collect()
}

fn cell_of(b: &BBox) -> Option<CellId> {
    let (x, y) = (b.cx_m, b.cy_m);
    if !(0.0..4.0 * CELL_M).contains(&x) || !(0.0..4.0 * CELL_M).contains(&y) {
        return None;
    }
    Some(CellId::new((x / CELL_M) as u32, (y / CELL_M) as u32))
}

fn dets_of<'a>(frame: &'a SequenceFrame, s: &'a Sequence) -> Vec<&'a Detection> {
    s.detections
        .iter()
        .map(|id| frame.detections.rows().iter().find(|d| d.id == *id).unwrap())
        .collect()
}

/// Count, CountNew and CountSum by scanning every (time, cell) pair.
pub fn to_matrix_oracle(frame: &SequenceFrame, agg: &str) -> BTreeMap<(i64, CellId), f64> {
    let mut out = BTreeMap::new();
    for t in 0..20 {
        for cell in small_grid().cells() {
            let mut present = false;
            let (mut seqs, mut new, mut sum) = (0.0, 0.0, 0.0);
            for s in &frame.sequences {
                let ds = dets_of(frame, s);
                let here: Vec<usize> = (0..ds.len())
                    .filter(|&k| ds[k].time.ms() == t * 1000 && cell_of(&ds[k].bounds) == Some(cell))
                    .collect();
                if !here.is_empty() {
                    present = true;
                    seqs += 1.0;
                    sum += here.len() as f64;
                    if here.contains(&0) {
                        new += 1.0;
                    }
                }
            }
            if present {
                let v = match agg {
                    "Count" => seqs,
                    "CountNew" => new,
                    _ => sum,
                };
                out.insert((t * 1000, cell), v);
            }
        }
    }
    out
}

/// Running Sum or Max: every row's value is the fold of all rows of its cell
/// at or before its time, recomputed from scratch.
pub fn aggregate_oracle(m: &Matrix, max: bool) -> BTreeMap<(i64, CellId), f64> {
    let mut out = BTreeMap::new();
    for o in m.rows() {
        let prior: Vec<f64> = m
            .rows()
            .iter()
            .filter(|p| p.cell == o.cell && p.time <= o.time)
            .map(|p| p.value)
            .collect();
        let v = if max {
            prior.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        } else {
            prior.iter().sum()
        };
        out.insert((o.time.ms(), o.cell), v);
    }
    out
}

/// Value of `cell` at `t`: the static value, or the latest row at or before `t`.
pub fn value_at_oracle(m: &Matrix, cell: CellId, t: i64) -> f64 {
    if m.is_static() {
        return m.rows().iter().find(|o| o.cell == cell).map_or(0.0, |o| o.value);
    }
    m.rows()
        .iter()
        .filter(|o| o.cell == cell && o.time.ms() <= t)
        .max_by_key(|o| o.time)
        .map_or(0.0, |o| o.value)
}

/// Ids of sequences with a detection in a non-zero cell, by nested loops.
pub fn join_oracle(frame: &SequenceFrame, m: &Matrix) -> Vec<u64> {
    let mut out = Vec::new();
    for s in &frame.sequences {
        let mut hit = false;
        for d in dets_of(frame, s) {
            if let Some(c) = cell_of(&d.bounds) {
                if value_at_oracle(m, c, d.time.ms()) != 0.0 {
                    hit = true;
                }
            }
        }
        if hit {
            out.push(s.id);
        }
    }
    out
}

fn overlap(a: &BBox, b: &BBox) -> bool {
    let w = (a.cx_m + a.w_m / 2.0).min(b.cx_m + b.w_m / 2.0) - (a.cx_m - a.w_m / 2.0).max(b.cx_m - b.w_m / 2.0);
    let h = (a.cy_m + a.h_m / 2.0).min(b.cy_m + b.h_m / 2.0) - (a.cy_m - a.h_m / 2.0).max(b.cy_m - b.h_m / 2.0);
    w > 0.0 && h > 0.0
}

fn covers(r: &Rect, b: &BBox) -> bool {
    b.cx_m - b.w_m / 2.0 >= r.min_x
        && b.cx_m + b.w_m / 2.0 <= r.max_x
        && b.cy_m - b.h_m / 2.0 >= r.min_y
        && b.cy_m + b.h_m / 2.0 <= r.max_y
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Merge by trying every open output sequence, keeping the most recently
/// updated one that satisfies all four constraints.
pub fn merge_oracle(inst: &SmallInstance) -> Vec<Vec<u64>> {
    let frame = &inst.frame;
    let mut order: Vec<&Sequence> = frame.sequences.iter().collect();
    order.sort_by_key(|s| {
        let d = dets_of(frame, s)[0];
        (d.time, d.id)
    });
    let mut groups: Vec<(Vec<u64>, usize)> = Vec::new();
    for (step, s2) in order.into_iter().enumerate() {
        let d2 = dets_of(frame, s2)[0];
        let mut best: Option<usize> = None;
        for (k, (ids, stamp)) in groups.iter().enumerate() {
            let d1 = frame.detections.rows().iter().find(|d| d.id == *ids.last().unwrap()).unwrap();
            let seen_between = inst
                .coverage
                .records()
                .iter()
                .any(|r| r.time > d1.time && r.time < d2.time && covers(&r.footprint, &d1.bounds));
            let similar = inst.threshold <= 0.0
                || cosine(d1.appearance.as_ref().unwrap(), d2.appearance.as_ref().unwrap()) >= inst.threshold;
            if overlap(&d1.bounds, &d2.bounds) && d2.time > d1.time && !seen_between && similar
                && best.is_none_or(|b| *stamp > groups[b].1) {
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

pub fn random_expr(rng: &mut ChaCha8Rng) -> ArithExpr {
    use ArithExpr::{Leaf, Scalar};
    let e = |op, a, b| ArithExpr::bin(op, a, b);
    match rng.random_range(0..6) {
        0 => e(BinOp::Mul, Leaf(0), e(BinOp::Sub, Scalar(1.0), Leaf(1))),
        1 => e(BinOp::Add, Leaf(0), Leaf(1)),
        2 => e(BinOp::Div, Leaf(0), Leaf(1)),
        3 => e(BinOp::Gt, Leaf(0), e(BinOp::Div, Leaf(1), Scalar(2.0))),
        4 => e(BinOp::Le, Leaf(0), Leaf(1)),
        _ => ArithExpr::Neg(Box::new(e(BinOp::Sub, Leaf(1), Leaf(0)))),
    }
}

fn eval_oracle(e: &ArithExpr, leaf: &dyn Fn(usize) -> f64, div0: &mut usize) -> f64 {
    match e {
        ArithExpr::Scalar(v) => *v,
        ArithExpr::Leaf(i) => leaf(*i),
        ArithExpr::Neg(a) => -eval_oracle(a, leaf, div0),
        ArithExpr::Bin(op, a, b) => {
            let (x, y) = (eval_oracle(a, leaf, div0), eval_oracle(b, leaf, div0));
            let flag = |c: bool| if c { 1.0 } else { 0.0 };
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div if y == 0.0 => {
                    *div0 += 1;
                    0.0
                }
                BinOp::Div => x / y,
                BinOp::Lt => flag(x < y),
                BinOp::Le => flag(x <= y),
                BinOp::Gt => flag(x > y),
                BinOp::Ge => flag(x >= y),
                BinOp::Eq => flag(x == y),
                BinOp::Ne => flag(x != y),
            }
        }
    }
}

/// Elementwise evaluation: at every (time, cell) row of a time-varying
/// operand, or over every cell with zeros dropped when all operands are
/// static. Returns the rows and the number of divisions by zero.
pub fn algebra_oracle(e: &ArithExpr, ops: &[&Matrix]) -> (BTreeMap<(i64, CellId), f64>, usize) {
    let mut div0 = 0;
    let mut out = BTreeMap::new();
    if ops.iter().all(|m| m.is_static()) {
        for cell in small_grid().cells() {
            let v = eval_oracle(e, &|i| value_at_oracle(ops[i], cell, 0), &mut div0);
            if v != 0.0 {
                out.insert((0, cell), v);
            }
        }
        return (out, div0);
    }
    let mut points: Vec<(i64, CellId)> = ops
        .iter()
        .filter(|m| !m.is_static())
        .flat_map(|m| m.rows().iter().map(|o| (o.time.ms(), o.cell)))
        .collect();
    points.sort();
    points.dedup();
    for (t, cell) in points {
        let v = eval_oracle(e, &|i| value_at_oracle(ops[i], cell, t), &mut div0);
        out.insert((t, cell), v);
    }
    (out, div0)
}
