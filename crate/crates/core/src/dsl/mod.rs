//! The analytics query language.
//!
//! A program is a list of assignments; each right-hand side is a call to a
//! built-in operator, a name, or matrix arithmetic:
//!
//! ```text
//! cars = ObjectDetection(Video, 'car_model')
//! stopped = Select(ObjectTracking(cars), displacement < 3)
//! *counts = ToMatrix(stopped, Count)
//! ```
//!
//! Targets marked `*` are exported. [`parse`] checks syntax, names and
//! types; [`plan`] lowers a program to an operator DAG that [`execute`] runs
//! against bound input files.

mod ast;
mod check;
mod error;
mod exec;
mod lexer;
mod parser;
mod render;
mod stream;

pub use ast::{Arg, Expr, Program, Statement, Target};
pub use check::{plan, DfType, Node, NodeType, Op, Plan, PRIORITIES};
pub use error::{DslError, DslErrorKind, Span};
pub use exec::{execute, Bindings, ExecOptions, ProgramOutput, Value, DEFAULT_MERGE_THRESHOLD};
pub use parser::parse_syntax;
pub use render::{render, render_expr};
pub use stream::{CellReading, StreamEvaluator};

/// Parses and checks a program.
pub fn parse(src: &str) -> Result<Program, DslError> {
    let p = parse_syntax(src)?;
    plan(&p)?;
    Ok(p)
}

/// Parses, plans and executes a program.
pub fn run(src: &str, bindings: &Bindings, opts: &ExecOptions) -> Result<ProgramOutput, DslError> {
    execute(&plan(&parse_syntax(src)?)?, bindings, opts)
}

#[cfg(test)]
mod tests;
