use std::fmt::Write;

use super::ast::{Arg, Expr, Program};
use crate::analytics::BinOp;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op, .. } => match op {
            BinOp::Add | BinOp::Sub => 2,
            BinOp::Mul | BinOp::Div => 3,
            _ => 1,
        },
        Expr::Neg(..) => 4,
        _ => 5,
    }
}

fn expr(e: &Expr, min: u8, out: &mut String) {
    let p = prec(e);
    if p < min {
        out.push('(');
    }
    match e {
        Expr::Name(n, _) => out.push_str(n),
        Expr::Number(v, _) => write!(out, "{v}").unwrap(),
        Expr::Str(s, _) => write!(out, "'{s}'").unwrap(),
        Expr::Neg(inner, _) => {
            out.push('-');
            expr(inner, 4, out);
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            expr(lhs, p, out);
            write!(out, " {} ", op.symbol()).unwrap();
            expr(rhs, p + 1, out);
        }
        Expr::Call { name, args, .. } => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                match a {
                    Arg::Positional(e) => expr(e, 0, out),
                    Arg::Keyword { key, value, .. } => {
                        out.push_str(key);
                        out.push('=');
                        expr(value, 0, out);
                    }
                }
            }
            out.push(')');
        }
    }
    if p < min {
        out.push(')');
    }
}

pub fn render_expr(e: &Expr) -> String {
    let mut s = String::new();
    expr(e, 0, &mut s);
    s
}

/// Canonical text of a program: one statement per line, single spaces around
/// binary operators, minimal parentheses.
pub fn render(p: &Program) -> String {
    let mut out = String::new();
    for st in &p.statements {
        let targets: Vec<String> = st
            .targets
            .iter()
            .map(|t| format!("{}{}", if t.export { "*" } else { "" }, t.name))
            .collect();
        writeln!(out, "{} = {}", targets.join(", "), render_expr(&st.expr)).unwrap();
    }
    out
}
