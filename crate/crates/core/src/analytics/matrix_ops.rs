use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use super::SequenceFrame;
use crate::error::{Error, Result};
use crate::model::{world_to_cell, CellId, Matrix, MatrixKind, MatrixLookup, Observation, RegionConfig, Timestamp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Aggregator {
    /// Distinct sequences with a detection in the cell at the instant.
    Count,
    /// Sequences whose first detection falls in the cell at the instant.
    CountNew,
    /// Detections in the cell at the instant.
    CountSum,
    Sum,
    Max,
    Priority,
}

impl Aggregator {
    pub const ALL: [Aggregator; 6] = [
        Self::Count,
        Self::CountNew,
        Self::CountSum,
        Self::Sum,
        Self::Max,
        Self::Priority,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Count => "Count",
            Self::CountNew => "CountNew",
            Self::CountSum => "CountSum",
            Self::Sum => "Sum",
            Self::Max => "Max",
            Self::Priority => "Priority",
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Invalid(format!("unknown aggregator `{s}`")))
    }
}

/// Bins sequence detections into grid cells by box center. Rows exist only
/// where some detection falls; detections outside the grid are ignored.
pub fn to_matrix(frame: &SequenceFrame, agg: Aggregator, grid: &RegionConfig) -> Result<Matrix> {
    if !matches!(agg, Aggregator::Count | Aggregator::CountNew | Aggregator::CountSum) {
        return Err(Error::Invalid(format!("ToMatrix does not support {agg}")));
    }
    let mut seqs: BTreeMap<(Timestamp, CellId), HashSet<u64>> = BTreeMap::new();
    let mut new: BTreeMap<(Timestamp, CellId), f64> = BTreeMap::new();
    let mut dets: BTreeMap<(Timestamp, CellId), f64> = BTreeMap::new();
    for s in &frame.sequences {
        for (k, d) in frame.resolve(s).enumerate() {
            let Ok(cell) = world_to_cell(&d.bounds.center(), grid) else {
                continue;
            };
            let key = (d.time, cell);
            seqs.entry(key).or_default().insert(s.id);
            *dets.entry(key).or_default() += 1.0;
            *new.entry(key).or_default() += if k == 0 { 1.0 } else { 0.0 };
        }
    }
    let rows = seqs.iter().map(|(&(time, cell), ids)| {
        let value = match agg {
            Aggregator::Count => ids.len() as f64,
            Aggregator::CountNew => new[&(time, cell)],
            _ => dets[&(time, cell)],
        };
        Observation { cell, time, value }
    });
    Ok(Matrix::new_time_varying(*grid, rows.collect::<Vec<_>>()))
}

/// Running per-cell fold over time: each output row holds the `Sum` or `Max`
/// of that cell's values up to and including the row's time.
pub fn aggregate(m: &Matrix, agg: Aggregator) -> Result<Matrix> {
    let fold: fn(f64, f64) -> f64 = match agg {
        Aggregator::Sum => |a, b| a + b,
        Aggregator::Max => f64::max,
        Aggregator::Priority => {
            return Err(Error::Invalid(
                "Priority aggregation needs forecast rates; use the scheduling module".into(),
            ))
        }
        other => return Err(Error::Invalid(format!("Aggregate does not support {other}"))),
    };
    if m.is_static() {
        return Ok(m.clone());
    }
    let mut acc: BTreeMap<CellId, f64> = BTreeMap::new();
    let rows: Vec<Observation> = m
        .rows()
        .iter()
        .map(|o| {
            let v = match acc.get(&o.cell) {
                Some(&prev) => fold(prev, o.value),
                None => o.value,
            };
            acc.insert(o.cell, v);
            Observation { value: v, ..*o }
        })
        .collect();
    Ok(Matrix::new_time_varying(m.grid, rows))
}

/// Keeps sequences with at least one detection whose cell holds a non-zero
/// value at the detection time (most recent prior value for time-varying
/// matrices, the constant value for static ones).
pub fn join(frame: &SequenceFrame, m: &Matrix) -> SequenceFrame {
    let lookup = MatrixLookup::new(m);
    frame.with_sequences(
        frame
            .sequences
            .iter()
            .filter(|s| {
                frame.resolve(s).any(|d| {
                    world_to_cell(&d.bounds.center(), &m.grid)
                        .is_ok_and(|c| lookup.value_at(c, d.time) != 0.0)
                })
            })
            .cloned()
            .collect(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            Self::Add => "+",
            Self::Sub => "-",
            Self::Mul => "*",
            Self::Div => "/",
            Self::Lt => "<",
            Self::Le => "<=",
            Self::Gt => ">",
            Self::Ge => ">=",
            Self::Eq => "==",
            Self::Ne => "!=",
        }
    }

    pub fn is_comparison(self) -> bool {
        !matches!(self, Self::Add | Self::Sub | Self::Mul | Self::Div)
    }
}

/// Cell-wise arithmetic over matrices and scalars. Matrix leaves refer to an
/// operand slice by index.
#[derive(Clone, Debug, PartialEq)]
pub enum ArithExpr {
    Scalar(f64),
    Leaf(usize),
    Neg(Box<ArithExpr>),
    Bin(BinOp, Box<ArithExpr>, Box<ArithExpr>),
}

impl ArithExpr {
    pub fn bin(op: BinOp, a: ArithExpr, b: ArithExpr) -> Self {
        Self::Bin(op, Box::new(a), Box::new(b))
    }

    fn leaves(&self, out: &mut BTreeSet<usize>) {
        match self {
            Self::Scalar(_) => {}
            Self::Leaf(i) => {
                out.insert(*i);
            }
            Self::Neg(a) => a.leaves(out),
            Self::Bin(_, a, b) => {
                a.leaves(out);
                b.leaves(out);
            }
        }
    }

    /// Evaluates with leaf values given; division by zero yields 0 and bumps
    /// `div_by_zero`.
    pub fn eval_scalar(&self, leaf: &dyn Fn(usize) -> f64, div_by_zero: &mut usize) -> f64 {
        match self {
            Self::Scalar(v) => *v,
            Self::Leaf(i) => leaf(*i),
            Self::Neg(a) => -a.eval_scalar(leaf, div_by_zero),
            Self::Bin(op, a, b) => {
                let x = a.eval_scalar(leaf, div_by_zero);
                let y = b.eval_scalar(leaf, div_by_zero);
                let t = |c: bool| if c { 1.0 } else { 0.0 };
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            *div_by_zero += 1;
                            0.0
                        } else {
                            x / y
                        }
                    }
                    BinOp::Lt => t(x < y),
                    BinOp::Le => t(x <= y),
                    BinOp::Gt => t(x > y),
                    BinOp::Ge => t(x >= y),
                    BinOp::Eq => t(x == y),
                    BinOp::Ne => t(x != y),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraOutput {
    pub matrix: Matrix,
    /// Number of divisions by zero that were replaced with 0.
    pub div_by_zero: usize,
}

/// Evaluates `expr` cell by cell.
///
/// If every matrix operand is static, the result is static and evaluated at
/// every grid cell. Otherwise the result has a row at each `(cell, t)` present
/// in any time-varying operand; at that point each time-varying operand
/// contributes its most recent value at or before `t` (0 if none), static
/// operands their constant and scalars themselves. All operands must share a
/// grid.
pub fn eval_algebra(expr: &ArithExpr, operands: &[&Matrix]) -> Result<AlgebraOutput> {
    let mut used = BTreeSet::new();
    expr.leaves(&mut used);
    let Some(&first) = used.iter().next() else {
        return Err(Error::Invalid("matrix expression has no matrix operand".into()));
    };
    for &i in &used {
        if i >= operands.len() {
            return Err(Error::Invalid(format!("operand {i} is missing")));
        }
    }
    let grid = operands[first].grid;
    for &i in &used {
        if operands[i].grid != grid {
            return Err(Error::Invalid("matrix operands are on different grids".into()));
        }
    }
    let lookups: BTreeMap<usize, MatrixLookup> =
        used.iter().map(|&i| (i, MatrixLookup::new(operands[i]))).collect();
    let mut div_by_zero = 0;

    let time_varying: Vec<usize> = used
        .iter()
        .copied()
        .filter(|&i| operands[i].kind == MatrixKind::TimeVarying)
        .collect();
    let matrix = if time_varying.is_empty() {
        let values: Vec<(CellId, f64)> = grid
            .cells()
            .map(|c| {
                let v = expr.eval_scalar(&|i| lookups[&i].value_at(c, Timestamp::ZERO), &mut div_by_zero);
                (c, v)
            })
            .collect();
        Matrix::new_static(grid, values)
    } else {
        let mut points: BTreeSet<(Timestamp, CellId)> = BTreeSet::new();
        for &i in &time_varying {
            points.extend(operands[i].rows().iter().map(|o| (o.time, o.cell)));
        }
        let rows: Vec<Observation> = points
            .into_iter()
            .map(|(time, cell)| Observation {
                cell,
                time,
                value: expr.eval_scalar(&|i| lookups[&i].value_at(cell, time), &mut div_by_zero),
            })
            .collect();
        Matrix::new_time_varying(grid, rows)
    };
    Ok(AlgebraOutput { matrix, div_by_zero })
}
