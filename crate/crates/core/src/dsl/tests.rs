use proptest::prelude::*;

use super::*;
use crate::analytics::{Aggregator, BinOp};

const PROGRAMS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/programs");

fn program(name: &str) -> String {
    std::fs::read_to_string(format!("{PROGRAMS}/{name}")).unwrap()
}

fn kind(src: &str) -> (DslErrorKind, Span) {
    let e = parse(src).unwrap_err();
    (e.kind, e.span)
}

#[test]
fn shipped_programs_parse_and_plan() {
    for name in ["parking.sq", "pedestrians.sq", "hazards.sq", "parking_objectives.sq", "simulation_objectives.sq"] {
        let p = parse(&program(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        plan(&p).unwrap();
    }
}

#[test]
fn parking_program_structure() {
    let p = parse(&program("parking.sq")).unwrap();
    assert_eq!(p.statements.len(), 8);
    assert_eq!(p.exports(), vec!["spots", "counts"]);
    let pl = plan(&p).unwrap();
    let pri = pl.priorities.expect("priorities defined");
    assert_eq!(pl.node_type(pri), DfType::Matrix);
    assert!(matches!(pl.nodes[pri].op, Op::Priority { now: None }));
    assert!(pl.nodes.iter().any(|n| matches!(n.op, Op::ToMatrix { agg: Aggregator::Count, cell_size: Some(c) } if c == 64.0)));
}

#[test]
fn objectives_program_exports() {
    let p = parse(&program("parking_objectives.sq")).unwrap();
    assert_eq!(p.exports(), vec!["counts", "open", "total"]);
    let pl = plan(&p).unwrap();
    let open = pl.names["open"];
    match &pl.nodes[open].op {
        Op::Arith(_) => assert_eq!(pl.nodes[open].inputs.len(), 2),
        other => panic!("open lowered to {other:?}"),
    }
}

#[test]
fn rebinding_that_reads_previous_value_is_allowed() {
    let pl = plan(&parse(&program("hazards.sq")).unwrap()).unwrap();
    let stopped = pl.names["stopped"];
    // The final binding is the duration filter over the displacement filter.
    let Op::Select(pred) = &pl.nodes[stopped].op else { panic!() };
    assert_eq!(pred.threshold, 5.0);
    let prev = pl.nodes[stopped].inputs[0];
    let Op::Select(prev_pred) = &pl.nodes[prev].op else { panic!() };
    assert_eq!(prev_pred.threshold, 3.0);
}

#[test]
fn keyword_aggregator_is_case_insensitive() {
    let pl = plan(&parse(&program("pedestrians.sq")).unwrap()).unwrap();
    let activity = pl.names["activity"];
    assert_eq!(pl.nodes[activity].op, Op::Aggregate(Aggregator::Sum));
}

#[test]
fn every_edge_connects_compatible_types() {
    for name in ["parking.sq", "pedestrians.sq", "hazards.sq", "parking_objectives.sq"] {
        let pl = plan(&parse(&program(name)).unwrap()).unwrap();
        for n in &pl.nodes {
            let want: Vec<&[DfType]> = match &n.op {
                Op::ObjectDetection { .. } | Op::Import { .. } => vec![],
                Op::ObjectTracking(_) => vec![&[DfType::Detections]],
                Op::Select(_) | Op::Merge { .. } | Op::ToMatrix { .. } => vec![&[DfType::Sequences]],
                Op::Join => vec![&[DfType::Sequences], &[DfType::Matrix, DfType::Rates]],
                Op::Priority { .. } => vec![&[DfType::Rates]],
                Op::Project(_) => continue,
                Op::Arith(_) => n.inputs.iter().map(|_| &[DfType::Matrix, DfType::Rates][..]).collect(),
                _ => vec![&[DfType::Matrix, DfType::Rates]],
            };
            assert_eq!(want.len(), n.inputs.len(), "{name}: {:?}", n.op);
            for (i, ok) in n.inputs.iter().zip(want) {
                let NodeType::Single(t) = pl.nodes[*i].ty else { panic!("pair edge") };
                assert!(ok.contains(&t), "{name}: {:?} fed {t}", n.op);
            }
        }
    }
}

#[test]
fn error_kinds_and_positions() {
    assert_eq!(kind("x = Select(y, bogus < 1)"), (DslErrorKind::UndefinedName, Span { line: 1, col: 12 }));
    assert_eq!(kind("a = Thin(a)").0, DslErrorKind::Cycle);
    assert_eq!(kind("a = Thin(b)\nb = Thin(a)").0, DslErrorKind::Cycle);
    assert_eq!(kind("a = Thin(b)\nb = Import('x.png')").0, DslErrorKind::UndefinedName);
    assert_eq!(kind("a = Frobnicate(1)").0, DslErrorKind::UnknownOperator);
    assert_eq!(kind("a = Import('x.png', 'y.png')").0, DslErrorKind::Arity);
    assert_eq!(kind("a = Import('x.png')\na = Import('y.png')"), (DslErrorKind::DuplicateDefinition, Span { line: 2, col: 1 }));
    assert_eq!(kind("a = Import('x.png')\nb = Thin(a)\nb = Thin(a)").0, DslErrorKind::DuplicateDefinition);
    assert_eq!(kind("a = Import('x.png')\nb = ObjectTracking(a)").0, DslErrorKind::Type);
    assert_eq!(kind("m = Import('x.png')\np = Aggregate(m, Priority)").0, DslErrorKind::Type);
    assert_eq!(kind("m = Import('x.png')\nr = ForecastRates(m, SimpleGaussian)").0, DslErrorKind::Arity);
    assert_eq!(kind("a = 1 + 2").0, DslErrorKind::Type);
    assert_eq!(kind("a = Import('x.png') +").0, DslErrorKind::Syntax);
    assert_eq!(
        kind("m = Import('x.png')\npriorities = ConstRates(m)").0,
        DslErrorKind::Type
    );
    assert_eq!(
        kind("m = Import('x.png')\npriorities = Thin(m)\npriorities = Thin(priorities)").0,
        DslErrorKind::DuplicateDefinition
    );
    let e = parse("x = Select(y, length > 1)").unwrap_err();
    assert_eq!(e.to_string(), "line 1, column 12: `y` is not defined");
}

#[test]
fn select_attribute_must_be_known() {
    let src = "d = ObjectDetection(Video, 'car_model')\ns = Select(ObjectTracking(d), speed > 1)";
    assert_eq!(kind(src).0, DslErrorKind::Type);
}

#[test]
fn render_of_shipped_programs_is_stable() {
    for name in ["parking.sq", "pedestrians.sq", "hazards.sq", "parking_objectives.sq"] {
        let p = parse(&program(name)).unwrap();
        let text = render(&p);
        let q = parse(&text).unwrap();
        assert_eq!(q.without_spans(), p.without_spans(), "{name}");
        assert_eq!(render(&q), text);
    }
}

fn arb_name() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "cars", "x1", "Video", "count_2"]).prop_map(String::from)
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let sp = Span::default();
    let leaf = prop_oneof![
        arb_name().prop_map(move |n| Expr::Name(n, sp)),
        (0u32..1000, 0u32..4).prop_map(move |(m, e)| Expr::Number(m as f64 / 10f64.powi(e as i32), sp)),
        prop::sample::select(vec!["car_model", "x.png", "a b"]).prop_map(move |s| Expr::Str(s.into(), sp)),
    ];
    leaf.prop_recursive(4, 24, 3, move |inner| {
        let ops = prop::sample::select(vec![
            BinOp::Add,
            BinOp::Sub,
            BinOp::Mul,
            BinOp::Div,
            BinOp::Lt,
            BinOp::Le,
            BinOp::Gt,
            BinOp::Ge,
            BinOp::Eq,
            BinOp::Ne,
        ]);
        let arg = prop_oneof![
            3 => inner.clone().prop_map(Arg::Positional),
            1 => (arb_name(), inner.clone()).prop_map(move |(key, value)| Arg::Keyword { key, value, span: sp }),
        ];
        prop_oneof![
            (ops, inner.clone(), inner.clone()).prop_map(move |(op, l, r)| Expr::Binary {
                op,
                lhs: Box::new(l),
                rhs: Box::new(r),
                span: sp
            }),
            inner.clone().prop_map(move |e| Expr::Neg(Box::new(e), sp)),
            (arb_name(), prop::collection::vec(arg, 0..4)).prop_map(move |(name, mut args)| {
                // Keyword arguments come last.
                args.sort_by_key(|a| matches!(a, Arg::Keyword { .. }));
                Expr::Call { name, args, span: sp }
            }),
        ]
    })
}

fn arb_program() -> impl Strategy<Value = Program> {
    let st = (prop::collection::vec((arb_name(), any::<bool>()), 1..3), arb_expr()).prop_map(|(ts, expr)| Statement {
        targets: ts
            .into_iter()
            .map(|(name, export)| Target {
                name,
                export,
                span: Span::default(),
            })
            .collect(),
        expr,
        span: Span::default(),
    });
    prop::collection::vec(st, 1..6).prop_map(|statements| Program { statements })
}

proptest! {
    #[test]
    fn render_then_parse_round_trips(p in arb_program()) {
        let text = render(&p);
        let back = parse_syntax(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back.without_spans(), p);
    }
}
