use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::ast::{Arg, Expr, Program, Statement};
use super::{DslError, DslErrorKind, Span};
use crate::analytics::{Aggregator, ArithExpr, BinOp, Comparator, SelectPredicate, SeqAttribute, TrackerParams};
use crate::model::Timestamp;

/// Name of the dataframe used for routing.
pub const PRIORITIES: &str = "priorities";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DfType {
    Detections,
    Sequences,
    Matrix,
    /// Priority rates: a matrix that also remembers the observations behind it.
    Rates,
}

impl DfType {
    fn accepts(self, actual: DfType) -> bool {
        self == actual || (self == DfType::Matrix && actual == DfType::Rates)
    }
}

impl fmt::Display for DfType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DfType::Detections => "detections",
            DfType::Sequences => "sequences",
            DfType::Matrix => "matrix",
            DfType::Rates => "rates",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    /// Reads the detection log bound to `model`, keeping class `class`.
    ObjectDetection { video: String, model: String, class: String },
    ObjectTracking(TrackerParams),
    Select(SelectPredicate),
    Merge { threshold: Option<f64> },
    ToMatrix { agg: Aggregator, cell_size: Option<f64> },
    Aggregate(Aggregator),
    Priority { now: Option<Timestamp> },
    Thin,
    Import { source: String },
    Join,
    /// Leaves index into the node's inputs.
    Arith(ArithExpr),
    ConstRates,
    TtlRates(u32),
    ForecastRates,
    /// Component `k` of a two-output node.
    Project(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeType {
    Single(DfType),
    Pair(DfType, DfType),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub op: Op,
    pub inputs: Vec<usize>,
    pub ty: NodeType,
    pub span: Span,
}

/// Operator DAG in topological order.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub nodes: Vec<Node>,
    /// Final node of every defined name.
    pub names: BTreeMap<String, usize>,
    /// Exported names in first-mention order with their final nodes.
    pub exports: Vec<(String, usize)>,
    pub priorities: Option<usize>,
}

impl Plan {
    pub fn node_type(&self, id: usize) -> DfType {
        match self.nodes[id].ty {
            NodeType::Single(t) => t,
            NodeType::Pair(..) => unreachable!("pair nodes are only reachable through projections"),
        }
    }
}

fn err(kind: DslErrorKind, span: Span, msg: impl Into<String>) -> DslError {
    DslError::new(kind, span, msg)
}

struct Checker<'a> {
    program: &'a Program,
    nodes: Vec<Node>,
    env: HashMap<String, usize>,
    /// Names referenced as dataframes by the statement being lowered.
    referenced: BTreeSet<String>,
    current: usize,
}

impl<'a> Checker<'a> {
    fn push(&mut self, op: Op, inputs: Vec<usize>, ty: NodeType, span: Span) -> usize {
        self.nodes.push(Node { op, inputs, ty, span });
        self.nodes.len() - 1
    }

    /// True if the statement at `from` (or later ones it forward-references)
    /// depends on a target of the current statement.
    fn forward_cycle(&self, name: &str) -> bool {
        let current_targets: BTreeSet<&str> = self.program.statements[self.current]
            .targets
            .iter()
            .map(|t| t.name.as_str())
            .collect();
        let mut stack = vec![name.to_string()];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if current_targets.contains(n.as_str()) {
                return true;
            }
            if !seen.insert(n.clone()) {
                continue;
            }
            for st in &self.program.statements[self.current + 1..] {
                if st.targets.iter().any(|t| t.name == n) {
                    let mut refs = Vec::new();
                    st.expr.names(&mut refs);
                    stack.extend(refs.into_iter().map(|r| r.0));
                }
            }
        }
        false
    }

    fn resolve(&mut self, name: &str, span: Span) -> Result<(usize, DfType), DslError> {
        let Some(&id) = self.env.get(name) else {
            let cur = &self.program.statements[self.current];
            if cur.targets.iter().any(|t| t.name == name) || self.forward_cycle(name) {
                return Err(err(DslErrorKind::Cycle, span, format!("`{name}` depends on itself")));
            }
            return Err(err(DslErrorKind::UndefinedName, span, format!("`{name}` is not defined")));
        };
        self.referenced.insert(name.to_string());
        match self.nodes[id].ty {
            NodeType::Single(t) => Ok((id, t)),
            NodeType::Pair(..) => Err(err(DslErrorKind::Type, span, format!("`{name}` has two outputs"))),
        }
    }

    fn dataframe(&mut self, e: &Expr) -> Result<(usize, DfType), DslError> {
        match e {
            Expr::Name(n, span) => self.resolve(n, *span),
            Expr::Call { name, args, span } => {
                let (id, ty) = self.call(name, args, *span)?;
                match ty {
                    NodeType::Single(t) => Ok((id, t)),
                    NodeType::Pair(..) => Err(err(
                        DslErrorKind::Arity,
                        *span,
                        format!("{name} produces two outputs; assign them to two names"),
                    )),
                }
            }
            Expr::Binary { .. } | Expr::Neg(..) | Expr::Number(..) => self.arith(e),
            Expr::Str(_, span) => Err(err(DslErrorKind::Type, *span, "a string is not a dataframe")),
        }
    }

    fn expect(&mut self, e: &Expr, want: DfType, op: &str, pos: usize) -> Result<usize, DslError> {
        let (id, got) = self.dataframe(e)?;
        if !want.accepts(got) {
            return Err(err(
                DslErrorKind::Type,
                e.span(),
                format!("{op} expects {want} as argument {pos}, got {got}"),
            ));
        }
        Ok(id)
    }

    fn arith(&mut self, e: &Expr) -> Result<(usize, DfType), DslError> {
        let mut leaves = Vec::new();
        let tree = self.arith_tree(e, &mut leaves)?;
        if leaves.is_empty() {
            return Err(err(DslErrorKind::Type, e.span(), "arithmetic needs at least one matrix operand"));
        }
        let id = self.push(Op::Arith(tree), leaves, NodeType::Single(DfType::Matrix), e.span());
        Ok((id, DfType::Matrix))
    }

    fn arith_tree(&mut self, e: &Expr, leaves: &mut Vec<usize>) -> Result<ArithExpr, DslError> {
        Ok(match e {
            Expr::Number(v, _) => ArithExpr::Scalar(*v),
            Expr::Neg(inner, _) => ArithExpr::Neg(Box::new(self.arith_tree(inner, leaves)?)),
            Expr::Binary { op, lhs, rhs, .. } => {
                let a = self.arith_tree(lhs, leaves)?;
                let b = self.arith_tree(rhs, leaves)?;
                ArithExpr::bin(*op, a, b)
            }
            Expr::Str(_, span) => return Err(err(DslErrorKind::Type, *span, "strings cannot appear in arithmetic")),
            Expr::Name(..) | Expr::Call { .. } => {
                let (id, ty) = self.dataframe(e)?;
                if !DfType::Matrix.accepts(ty) {
                    return Err(err(DslErrorKind::Type, e.span(), format!("arithmetic needs matrices, got {ty}")));
                }
                let k = leaves.iter().position(|&l| l == id).unwrap_or_else(|| {
                    leaves.push(id);
                    leaves.len() - 1
                });
                ArithExpr::Leaf(k)
            }
        })
    }

    fn call(&mut self, name: &str, args: &[Arg], span: Span) -> Result<(usize, NodeType), DslError> {
        let mut pos: Vec<&Expr> = Vec::new();
        let mut kw: BTreeMap<&str, (&Expr, Span)> = BTreeMap::new();
        for a in args {
            match a {
                Arg::Positional(e) => {
                    if !kw.is_empty() {
                        return Err(err(DslErrorKind::Syntax, e.span(), "positional argument after keyword argument"));
                    }
                    pos.push(e)
                }
                Arg::Keyword { key, value, span } => {
                    if kw.insert(key.as_str(), (value, *span)).is_some() {
                        return Err(err(DslErrorKind::Arity, *span, format!("keyword `{key}` given twice")));
                    }
                }
            }
        }
        let allowed: &[&str] = match name {
            "ObjectTracking" => &["iou_min", "max_age"],
            "Merge" => &["threshold"],
            "ToMatrix" => &["func", "cell_size"],
            "Aggregate" => &["func", "now"],
            "ObjectDetection" | "Select" | "Thin" | "Import" | "Join" | "ConstRates" | "TTLRates"
            | "ForecastRates" => &[],
            _ => return Err(err(DslErrorKind::UnknownOperator, span, format!("unknown operator `{name}`"))),
        };
        for (k, (_, s)) in &kw {
            if !allowed.contains(k) {
                return Err(err(DslErrorKind::Arity, *s, format!("{name} has no keyword `{k}`")));
            }
        }
        let arity = |lo: usize, hi: usize| -> Result<(), DslError> {
            if pos.len() < lo || pos.len() > hi {
                let want = if lo == hi { lo.to_string() } else { format!("{lo} to {hi}") };
                return Err(err(
                    DslErrorKind::Arity,
                    span,
                    format!("{name} takes {want} positional arguments, got {}", pos.len()),
                ));
            }
            Ok(())
        };
        let single = |t| NodeType::Single(t);

        match name {
            "ObjectDetection" => {
                arity(2, 2)?;
                let Expr::Name(video, _) = pos[0] else {
                    return Err(err(DslErrorKind::Type, pos[0].span(), "ObjectDetection expects a video source name"));
                };
                let model = string_arg(pos[1], "ObjectDetection expects a model name string")?;
                let class = model.strip_suffix("_model").unwrap_or(&model).to_string();
                let id = self.push(
                    Op::ObjectDetection {
                        video: video.clone(),
                        model,
                        class,
                    },
                    vec![],
                    single(DfType::Detections),
                    span,
                );
                Ok((id, single(DfType::Detections)))
            }
            "ObjectTracking" => {
                arity(1, 1)?;
                let input = self.expect(pos[0], DfType::Detections, name, 1)?;
                let mut p = TrackerParams::default();
                if let Some((e, _)) = kw.get("iou_min") {
                    p.iou_min = number_arg(e, "iou_min")?;
                }
                if let Some((e, _)) = kw.get("max_age") {
                    p.max_age_frames = count_arg(e, "max_age")? as u64;
                }
                Ok((self.push(Op::ObjectTracking(p), vec![input], single(DfType::Sequences), span), single(DfType::Sequences)))
            }
            "Select" => {
                arity(2, 2)?;
                let input = self.expect(pos[0], DfType::Sequences, name, 1)?;
                let pred = predicate(pos[1])?;
                Ok((self.push(Op::Select(pred), vec![input], single(DfType::Sequences), span), single(DfType::Sequences)))
            }
            "Merge" => {
                arity(1, 1)?;
                let input = self.expect(pos[0], DfType::Sequences, name, 1)?;
                let threshold = kw.get("threshold").map(|(e, _)| number_arg(e, "threshold")).transpose()?;
                Ok((self.push(Op::Merge { threshold }, vec![input], single(DfType::Sequences), span), single(DfType::Sequences)))
            }
            "ToMatrix" => {
                arity(1, 3)?;
                let input = self.expect(pos[0], DfType::Sequences, name, 1)?;
                let agg = aggregator(pos.get(1).copied(), kw.get("func").map(|k| k.0), span, name)?;
                if !matches!(agg, Aggregator::Count | Aggregator::CountNew | Aggregator::CountSum) {
                    return Err(err(DslErrorKind::Type, span, format!("ToMatrix does not support {agg}")));
                }
                let size_expr = match (pos.get(2), kw.get("cell_size")) {
                    (Some(_), Some((_, s))) => return Err(err(DslErrorKind::Arity, *s, "cell size given twice")),
                    (Some(e), None) => Some(*e),
                    (None, k) => k.map(|k| k.0),
                };
                let cell_size = size_expr.map(|e| number_arg(e, "cell size")).transpose()?;
                if cell_size.is_some_and(|c| c <= 0.0) {
                    return Err(err(DslErrorKind::Type, span, "cell size must be positive"));
                }
                Ok((
                    self.push(Op::ToMatrix { agg, cell_size }, vec![input], single(DfType::Matrix), span),
                    single(DfType::Matrix),
                ))
            }
            "Aggregate" => {
                arity(1, 2)?;
                let (input, got) = self.dataframe(pos[0])?;
                let agg = aggregator(pos.get(1).copied(), kw.get("func").map(|k| k.0), span, name)?;
                match agg {
                    Aggregator::Priority => {
                        if got != DfType::Rates {
                            return Err(err(
                                DslErrorKind::Type,
                                pos[0].span(),
                                format!("Priority aggregation expects rates, got {got}"),
                            ));
                        }
                        let now = kw
                            .get("now")
                            .map(|(e, _)| number_arg(e, "now").map(|v| Timestamp(v as i64)))
                            .transpose()?;
                        Ok((self.push(Op::Priority { now }, vec![input], single(DfType::Matrix), span), single(DfType::Matrix)))
                    }
                    Aggregator::Sum | Aggregator::Max => {
                        if !DfType::Matrix.accepts(got) {
                            return Err(err(DslErrorKind::Type, pos[0].span(), format!("Aggregate expects matrix as argument 1, got {got}")));
                        }
                        if let Some((_, s)) = kw.get("now") {
                            return Err(err(DslErrorKind::Arity, *s, "`now` applies only to Priority"));
                        }
                        Ok((self.push(Op::Aggregate(agg), vec![input], single(DfType::Matrix), span), single(DfType::Matrix)))
                    }
                    other => Err(err(DslErrorKind::Type, span, format!("Aggregate does not support {other}"))),
                }
            }
            "Thin" => {
                arity(1, 1)?;
                let input = self.expect(pos[0], DfType::Matrix, name, 1)?;
                Ok((self.push(Op::Thin, vec![input], single(DfType::Matrix), span), single(DfType::Matrix)))
            }
            "Import" => {
                arity(1, 1)?;
                let source = string_arg(pos[0], "Import expects a raster name string")?;
                Ok((self.push(Op::Import { source }, vec![], single(DfType::Matrix), span), single(DfType::Matrix)))
            }
            "Join" => {
                arity(2, 2)?;
                let s = self.expect(pos[0], DfType::Sequences, name, 1)?;
                let m = self.expect(pos[1], DfType::Matrix, name, 2)?;
                Ok((self.push(Op::Join, vec![s, m], single(DfType::Sequences), span), single(DfType::Sequences)))
            }
            "ConstRates" => {
                arity(1, 1)?;
                let m = self.expect(pos[0], DfType::Matrix, name, 1)?;
                Ok((self.push(Op::ConstRates, vec![m], single(DfType::Rates), span), single(DfType::Rates)))
            }
            "TTLRates" => {
                arity(2, 2)?;
                let m = self.expect(pos[0], DfType::Matrix, name, 1)?;
                let ttl = count_arg(pos[1], "ttl")?;
                if ttl == 0 {
                    return Err(err(DslErrorKind::Type, pos[1].span(), "ttl must be at least 1"));
                }
                Ok((self.push(Op::TtlRates(ttl), vec![m], single(DfType::Rates), span), single(DfType::Rates)))
            }
            "ForecastRates" => {
                arity(2, 2)?;
                let m = self.expect(pos[0], DfType::Matrix, name, 1)?;
                match pos[1] {
                    Expr::Name(model, _) if model == "SimpleGaussian" => {}
                    other => {
                        return Err(err(DslErrorKind::Type, other.span(), "ForecastRates supports the SimpleGaussian model"))
                    }
                }
                let ty = NodeType::Pair(DfType::Rates, DfType::Matrix);
                Ok((self.push(Op::ForecastRates, vec![m], ty, span), ty))
            }
            _ => unreachable!("operator registry checked above"),
        }
    }

    fn statement(&mut self, st: &Statement) -> Result<(), DslError> {
        self.referenced.clear();
        let mut seen = BTreeSet::new();
        for t in &st.targets {
            if !seen.insert(t.name.as_str()) {
                return Err(err(DslErrorKind::DuplicateDefinition, t.span, format!("`{}` assigned twice in one statement", t.name)));
            }
        }
        let (id, ty) = match &st.expr {
            Expr::Call { name, args, span } => self.call(name, args, *span)?,
            e => {
                let (id, t) = self.dataframe(e)?;
                (id, NodeType::Single(t))
            }
        };
        let outputs: Vec<(usize, DfType)> = match ty {
            NodeType::Single(t) => vec![(id, t)],
            NodeType::Pair(a, b) => {
                let p0 = self.push(Op::Project(0), vec![id], NodeType::Single(a), st.span);
                let p1 = self.push(Op::Project(1), vec![id], NodeType::Single(b), st.span);
                vec![(p0, a), (p1, b)]
            }
        };
        if outputs.len() != st.targets.len() {
            return Err(err(
                DslErrorKind::Arity,
                st.span,
                format!("expression produces {} output(s) but {} name(s) are assigned", outputs.len(), st.targets.len()),
            ));
        }
        for (t, (node, ty)) in st.targets.iter().zip(outputs) {
            if self.env.contains_key(&t.name)
                && (t.name == PRIORITIES || !self.referenced.contains(&t.name)) {
                    return Err(err(
                        DslErrorKind::DuplicateDefinition,
                        t.span,
                        format!("`{}` is already defined", t.name),
                    ));
                }
            if t.name == PRIORITIES && ty != DfType::Matrix {
                return Err(err(DslErrorKind::Type, t.span, format!("`priorities` must be a matrix, got {ty}")));
            }
            self.env.insert(t.name.clone(), node);
        }
        Ok(())
    }
}

fn string_arg(e: &Expr, msg: &str) -> Result<String, DslError> {
    match e {
        Expr::Str(s, _) => Ok(s.clone()),
        other => Err(err(DslErrorKind::Type, other.span(), msg)),
    }
}

fn number_arg(e: &Expr, what: &str) -> Result<f64, DslError> {
    match e {
        Expr::Number(v, _) => Ok(*v),
        Expr::Neg(inner, _) => number_arg(inner, what).map(|v| -v),
        other => Err(err(DslErrorKind::Type, other.span(), format!("{what} must be a number"))),
    }
}

fn count_arg(e: &Expr, what: &str) -> Result<u32, DslError> {
    let v = number_arg(e, what)?;
    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(err(DslErrorKind::Type, e.span(), format!("{what} must be a non-negative integer")));
    }
    Ok(v as u32)
}

fn aggregator(positional: Option<&Expr>, keyword: Option<&Expr>, span: Span, op: &str) -> Result<Aggregator, DslError> {
    let e = match (positional, keyword) {
        (Some(_), Some(k)) => return Err(err(DslErrorKind::Arity, k.span(), "aggregator given twice")),
        (Some(e), None) | (None, Some(e)) => e,
        (None, None) => return Err(err(DslErrorKind::Arity, span, format!("{op} needs an aggregator"))),
    };
    let Expr::Name(n, s) = e else {
        return Err(err(DslErrorKind::Type, e.span(), "aggregator must be a name such as Count or Sum"));
    };
    Aggregator::ALL
        .into_iter()
        .find(|a| a.name().eq_ignore_ascii_case(n))
        .ok_or_else(|| err(DslErrorKind::Type, *s, format!("unknown aggregator `{n}`")))
}

fn predicate(e: &Expr) -> Result<SelectPredicate, DslError> {
    let bad = || err(DslErrorKind::Type, e.span(), "Select expects a predicate like `length > 3`");
    let Expr::Binary { op, lhs, rhs, .. } = e else {
        return Err(bad());
    };
    let cmp = match op {
        BinOp::Lt => Comparator::Lt,
        BinOp::Le => Comparator::Le,
        BinOp::Gt => Comparator::Gt,
        BinOp::Ge => Comparator::Ge,
        BinOp::Eq => Comparator::Eq,
        BinOp::Ne => Comparator::Ne,
        _ => return Err(bad()),
    };
    let Expr::Name(attr, s) = lhs.as_ref() else {
        return Err(bad());
    };
    let attribute: SeqAttribute = attr
        .parse()
        .map_err(|_| err(DslErrorKind::Type, *s, format!("unknown sequence attribute `{attr}`")))?;
    let threshold = number_arg(rhs, "predicate threshold")?;
    Ok(SelectPredicate::new(attribute, cmp, threshold))
}

/// Resolves names and types, producing the operator DAG.
///
/// A name may be assigned again only by a statement that reads its previous
/// value (e.g. `stopped = Select(stopped, duration > 5)`); `priorities` may
/// be assigned once.
pub fn plan(program: &Program) -> Result<Plan, DslError> {
    let mut c = Checker {
        program,
        nodes: Vec::new(),
        env: HashMap::new(),
        referenced: BTreeSet::new(),
        current: 0,
    };
    for (i, st) in program.statements.iter().enumerate() {
        c.current = i;
        c.statement(st)?;
    }
    let names: BTreeMap<String, usize> = c.env.into_iter().collect();
    let exports = program
        .exports()
        .into_iter()
        .map(|n| {
            let id = names[&n];
            (n, id)
        })
        .collect();
    let priorities = names.get(PRIORITIES).copied();
    Ok(Plan {
        nodes: c.nodes,
        names,
        exports,
        priorities,
    })
}
