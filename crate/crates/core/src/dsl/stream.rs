use std::collections::BTreeMap;

use super::check::{Op, Plan};
use crate::analytics::{Aggregator, ArithExpr};

/// What a drone reports for a cell on each visit.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CellReading {
    /// Objects currently present.
    pub count: f64,
    /// Objects that appeared since the previous visit.
    pub new: f64,
}

#[derive(Clone, Debug)]
enum StreamNode {
    Feed(Aggregator),
    Fold { input: usize, agg: Aggregator },
    Arith { expr: ArithExpr, inputs: Vec<usize> },
}

/// Per-cell incremental evaluation of a program's matrix statements.
///
/// `ToMatrix` statements read the visit reading directly (`Count` and
/// `CountSum` the present count, `CountNew` the new arrivals), `Aggregate`
/// with `Sum` or `Max` folds over visits, and arithmetic is recomputed from
/// its inputs. Statements outside that fragment are not tracked.
#[derive(Clone, Debug)]
pub struct StreamEvaluator {
    nodes: Vec<Option<StreamNode>>,
    names: BTreeMap<String, usize>,
    state: Vec<Vec<f64>>,
    seen: Vec<Vec<bool>>,
}

impl StreamEvaluator {
    pub fn new(plan: &Plan, n_cells: usize) -> Self {
        let mut nodes: Vec<Option<StreamNode>> = Vec::with_capacity(plan.nodes.len());
        for node in &plan.nodes {
            let ok = |i: &usize| nodes[*i].is_some();
            let s = match &node.op {
                Op::ToMatrix { agg, cell_size: None } => Some(StreamNode::Feed(*agg)),
                Op::Aggregate(agg @ (Aggregator::Sum | Aggregator::Max)) if ok(&node.inputs[0]) => {
                    Some(StreamNode::Fold {
                        input: node.inputs[0],
                        agg: *agg,
                    })
                }
                Op::Arith(expr) if node.inputs.iter().all(ok) => Some(StreamNode::Arith {
                    expr: expr.clone(),
                    inputs: node.inputs.clone(),
                }),
                _ => None,
            };
            nodes.push(s);
        }
        let names = plan
            .names
            .iter()
            .filter(|(_, id)| nodes[**id].is_some())
            .map(|(n, id)| (n.clone(), *id))
            .collect();
        let len = nodes.len();
        Self {
            nodes,
            names,
            state: vec![vec![0.0; n_cells]; len],
            seen: vec![vec![false; n_cells]; len],
        }
    }

    /// Whether `name` is tracked.
    pub fn supports(&self, name: &str) -> bool {
        self.names.contains_key(name)
    }

    pub fn observe(&mut self, cell: usize, reading: CellReading) {
        for i in 0..self.nodes.len() {
            let Some(node) = &self.nodes[i] else { continue };
            let v = match node {
                StreamNode::Feed(Aggregator::CountNew) => reading.new,
                StreamNode::Feed(_) => reading.count,
                StreamNode::Fold { input, agg } => {
                    let x = self.state[*input][cell];
                    if !self.seen[i][cell] {
                        x
                    } else if *agg == Aggregator::Sum {
                        self.state[i][cell] + x
                    } else {
                        self.state[i][cell].max(x)
                    }
                }
                StreamNode::Arith { expr, inputs } => {
                    let mut dz = 0;
                    expr.eval_scalar(&|k| self.state[inputs[k]][cell], &mut dz)
                }
            };
            self.state[i][cell] = v;
            self.seen[i][cell] = true;
        }
    }

    /// Current value of `name` at `cell`; 0 before the first visit.
    pub fn value(&self, name: &str, cell: usize) -> Option<f64> {
        self.names.get(name).map(|&id| self.state[id][cell])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, plan};

    const OBJECTIVES: &str = "\
cars = ObjectDetection(Video, 'car_model')
stopped = Select(ObjectTracking(cars), displacement < 3)
parked = Select(Merge(stopped), duration>120)
*counts = ToMatrix(parked, Count)
capacities = Aggregate(counts, Max)
*open = counts <= capacities/2
new = ToMatrix(parked, CountNew)
*total = Aggregate(new, Sum)
";

    #[test]
    fn objectives_update_per_visit() {
        let p = plan(&parse(OBJECTIVES).unwrap()).unwrap();
        let mut s = StreamEvaluator::new(&p, 2);
        for name in ["counts", "capacities", "open", "total"] {
            assert!(s.supports(name), "{name}");
        }
        assert!(!s.supports("parked"));

        s.observe(0, CellReading { count: 4.0, new: 4.0 });
        assert_eq!(s.value("counts", 0), Some(4.0));
        assert_eq!(s.value("open", 0), Some(0.0));
        s.observe(0, CellReading { count: 1.0, new: 1.0 });
        assert_eq!(s.value("capacities", 0), Some(4.0));
        assert_eq!(s.value("open", 0), Some(1.0));
        assert_eq!(s.value("total", 0), Some(5.0));
        assert_eq!(s.value("total", 1), Some(0.0));
    }
}
