use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::check::{DfType, Op, Plan};
use super::{DslError, DslErrorKind, Span};
use crate::analytics::{
    aggregate, eval_algebra, import_raster, join, merge, object_detection_ingest, object_tracking, select, thin,
    to_matrix, CoverageLog, DetectionFrame, SequenceFrame, TrackerParams,
};
use crate::model::{Matrix, RegionConfig};
use crate::scheduling::{const_rates, forecast_rates, priority_snapshot, ttl_rates, RateSeries};

/// Default appearance-similarity threshold for `Merge`.
pub const DEFAULT_MERGE_THRESHOLD: f64 = 0.8;

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Detections(Arc<DetectionFrame>),
    Sequences(SequenceFrame),
    Matrix(Matrix),
    Rates(RateSeries),
}

impl Value {
    pub fn df_type(&self) -> DfType {
        match self {
            Value::Detections(_) => DfType::Detections,
            Value::Sequences(_) => DfType::Sequences,
            Value::Matrix(_) => DfType::Matrix,
            Value::Rates(_) => DfType::Rates,
        }
    }

    /// The matrix view: rates series expose their rate matrix.
    pub fn as_matrix(&self) -> Option<&Matrix> {
        match self {
            Value::Matrix(m) => Some(m),
            Value::Rates(r) => Some(&r.rates),
            _ => None,
        }
    }

    pub fn as_sequences(&self) -> Option<&SequenceFrame> {
        match self {
            Value::Sequences(s) => Some(s),
            _ => None,
        }
    }
}

/// Maps source names used by a program (`Video`, `'car_model'`,
/// `'crosswalks.png'`) to files.
///
/// Model names resolve to detection logs and `Video` to the coverage log
/// used by `Merge`. Unbound names are looked up relative to `base_dir`.
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    pub sources: BTreeMap<String, PathBuf>,
    pub base_dir: Option<PathBuf>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_base_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            sources: BTreeMap::new(),
            base_dir: Some(dir.into()),
        }
    }

    pub fn bind(mut self, name: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        self.sources.insert(name.into(), path.into());
        self
    }

    pub fn resolve(&self, name: &str) -> Option<PathBuf> {
        if let Some(p) = self.sources.get(name) {
            return Some(p.clone());
        }
        let p = self.base_dir.as_ref()?.join(name);
        p.exists().then_some(p)
    }
}

#[derive(Clone, Debug)]
pub struct ExecOptions {
    pub region: RegionConfig,
    pub merge_threshold: f64,
    pub tracker: TrackerParams,
}

impl ExecOptions {
    pub fn new(region: RegionConfig) -> Self {
        Self {
            region,
            merge_threshold: DEFAULT_MERGE_THRESHOLD,
            tracker: TrackerParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProgramOutput {
    /// Exported dataframes in program order.
    pub exports: Vec<(String, Value)>,
    pub priorities: Option<Matrix>,
    pub warnings: Vec<String>,
}

impl ProgramOutput {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.exports.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

enum Slot {
    Empty,
    One(Value),
    Two(Value, Value),
}

fn exec_err(span: Span, e: impl std::fmt::Display) -> DslError {
    DslError::new(DslErrorKind::Execution, span, e.to_string())
}

fn open(bindings: &Bindings, name: &str, span: Span, what: &str) -> Result<(PathBuf, BufReader<File>), DslError> {
    let path = bindings
        .resolve(name)
        .ok_or_else(|| DslError::new(DslErrorKind::UnboundSource, span, format!("{what} `{name}` is not bound")))?;
    let f = File::open(&path).map_err(|e| exec_err(span, format!("{}: {e}", path.display())))?;
    Ok((path, BufReader::new(f)))
}

fn with_path(path: &Path, span: Span, e: impl std::fmt::Display) -> DslError {
    exec_err(span, format!("{}: {e}", path.display()))
}

/// Runs every node of the plan in order.
pub fn execute(plan: &Plan, bindings: &Bindings, opts: &ExecOptions) -> Result<ProgramOutput, DslError> {
    let mut slots: Vec<Slot> = Vec::with_capacity(plan.nodes.len());
    let mut warnings = Vec::new();
    let mut coverage: Option<CoverageLog> = None;
    let mut logs: BTreeMap<(String, String), Arc<DetectionFrame>> = BTreeMap::new();

    for node in &plan.nodes {
        let span = node.span;
        let input = |k: usize| -> &Value {
            match &slots[node.inputs[k]] {
                Slot::One(v) => v,
                _ => unreachable!("planner wires single-valued inputs"),
            }
        };
        let matrix = |k: usize| input(k).as_matrix().expect("planner checked matrix input");
        let seqs = |k: usize| input(k).as_sequences().expect("planner checked sequence input");

        let out = match &node.op {
            Op::ObjectDetection { model, class, .. } => {
                let key = (model.clone(), class.clone());
                let frame = match logs.get(&key) {
                    Some(f) => f.clone(),
                    None => {
                        let (path, r) = open(bindings, model, span, "detection model")?;
                        let f = Arc::new(object_detection_ingest(r, Some(class)).map_err(|e| with_path(&path, span, e))?);
                        logs.insert(key, f.clone());
                        f
                    }
                };
                Slot::One(Value::Detections(frame))
            }
            Op::ObjectTracking(p) => {
                let Value::Detections(d) = input(0) else { unreachable!() };
                Slot::One(Value::Sequences(object_tracking(d, p)))
            }
            Op::Select(pred) => Slot::One(Value::Sequences(select(seqs(0), pred))),
            Op::Merge { threshold } => {
                if coverage.is_none() {
                    let video = plan
                        .nodes
                        .iter()
                        .find_map(|n| match &n.op {
                            Op::ObjectDetection { video, .. } => Some(video.clone()),
                            _ => None,
                        })
                        .unwrap_or_else(|| "Video".to_string());
                    let (path, r) = open(bindings, &video, span, "coverage log for")?;
                    coverage = Some(CoverageLog::read(r).map_err(|e| with_path(&path, span, e))?);
                }
                let th = threshold.unwrap_or(opts.merge_threshold);
                let cov = coverage.as_ref().expect("loaded above");
                Slot::One(Value::Sequences(merge(seqs(0), cov, th).map_err(|e| exec_err(span, e))?))
            }
            Op::ToMatrix { agg, cell_size } => {
                let grid = match cell_size {
                    Some(c) => opts.region.with_cell_size(*c).map_err(|e| exec_err(span, e))?,
                    None => opts.region,
                };
                Slot::One(Value::Matrix(to_matrix(seqs(0), *agg, &grid).map_err(|e| exec_err(span, e))?))
            }
            Op::Aggregate(agg) => Slot::One(Value::Matrix(aggregate(matrix(0), *agg).map_err(|e| exec_err(span, e))?)),
            Op::Priority { now } => {
                let Value::Rates(r) = input(0) else { unreachable!() };
                Slot::One(Value::Matrix(priority_snapshot(r, *now)))
            }
            Op::Thin => Slot::One(Value::Matrix(thin(matrix(0)))),
            Op::Import { source } => {
                let path = bindings.resolve(source).ok_or_else(|| {
                    DslError::new(DslErrorKind::UnboundSource, span, format!("raster `{source}` is not bound"))
                })?;
                Slot::One(Value::Matrix(import_raster(&path, &opts.region).map_err(|e| exec_err(span, e))?))
            }
            Op::Join => Slot::One(Value::Sequences(join(seqs(0), matrix(1)))),
            Op::Arith(expr) => {
                let operands: Vec<&Matrix> = (0..node.inputs.len()).map(matrix).collect();
                let out = eval_algebra(expr, &operands).map_err(|e| exec_err(span, e))?;
                if out.div_by_zero > 0 {
                    warnings.push(format!(
                        "line {}, column {}: {} division(s) by zero evaluated as 0",
                        span.line, span.col, out.div_by_zero
                    ));
                }
                Slot::One(Value::Matrix(out.matrix))
            }
            Op::ConstRates => Slot::One(Value::Rates(const_rates(matrix(0)))),
            Op::TtlRates(ttl) => Slot::One(Value::Rates(ttl_rates(matrix(0), *ttl).map_err(|e| exec_err(span, e))?)),
            Op::ForecastRates => {
                let (rates, predicted) = forecast_rates(matrix(0));
                Slot::Two(Value::Rates(rates), Value::Matrix(predicted))
            }
            Op::Project(k) => match &slots[node.inputs[0]] {
                Slot::Two(a, b) => Slot::One(if *k == 0 { a.clone() } else { b.clone() }),
                _ => unreachable!("projection of a two-output node"),
            },
        };
        slots.push(out);
        if let Op::Project(1) = node.op {
            // Both components have been copied out.
            slots[node.inputs[0]] = Slot::Empty;
        }
    }

    let take = |id: usize| match &slots[id] {
        Slot::One(v) => v.clone(),
        _ => unreachable!("names bind single values"),
    };
    let exports = plan.exports.iter().map(|(n, id)| (n.clone(), take(*id))).collect();
    let priorities = plan.priorities.map(|id| match take(id) {
        Value::Matrix(m) => m,
        _ => unreachable!("planner checked priorities type"),
    });
    Ok(ProgramOutput {
        exports,
        priorities,
        warnings,
    })
}
