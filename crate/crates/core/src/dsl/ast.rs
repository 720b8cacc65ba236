use super::Span;
use crate::analytics::BinOp;

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub statements: Vec<Statement>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Statement {
    pub targets: Vec<Target>,
    pub expr: Expr,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Target {
    pub name: String,
    pub export: bool,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Name(String, Span),
    Number(f64, Span),
    Str(String, Span),
    Call {
        name: String,
        args: Vec<Arg>,
        span: Span,
    },
    Neg(Box<Expr>, Span),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        span: Span,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Arg {
    Positional(Expr),
    Keyword { key: String, value: Expr, span: Span },
}

impl Arg {
    pub fn span(&self) -> Span {
        match self {
            Arg::Positional(e) => e.span(),
            Arg::Keyword { span, .. } => *span,
        }
    }
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Name(_, s) | Expr::Number(_, s) | Expr::Str(_, s) | Expr::Neg(_, s) => *s,
            Expr::Call { span, .. } | Expr::Binary { span, .. } => *span,
        }
    }

    fn strip(&mut self) {
        match self {
            Expr::Name(_, s) | Expr::Number(_, s) | Expr::Str(_, s) => *s = Span::default(),
            Expr::Neg(e, s) => {
                *s = Span::default();
                e.strip();
            }
            Expr::Call { args, span, .. } => {
                *span = Span::default();
                for a in args {
                    match a {
                        Arg::Positional(e) => e.strip(),
                        Arg::Keyword { value, span, .. } => {
                            *span = Span::default();
                            value.strip();
                        }
                    }
                }
            }
            Expr::Binary { lhs, rhs, span, .. } => {
                *span = Span::default();
                lhs.strip();
                rhs.strip();
            }
        }
    }

    /// Names referenced anywhere in the expression (including bare
    /// identifiers that operators interpret as parameters).
    pub fn names(&self, out: &mut Vec<(String, Span)>) {
        match self {
            Expr::Name(n, s) => out.push((n.clone(), *s)),
            Expr::Number(..) | Expr::Str(..) => {}
            Expr::Neg(e, _) => e.names(out),
            Expr::Call { args, .. } => {
                for a in args {
                    match a {
                        Arg::Positional(e) => e.names(out),
                        Arg::Keyword { value, .. } => value.names(out),
                    }
                }
            }
            Expr::Binary { lhs, rhs, .. } => {
                lhs.names(out);
                rhs.names(out);
            }
        }
    }
}

impl Program {
    /// Copy with every source position cleared, for structural comparison.
    pub fn without_spans(&self) -> Program {
        let mut p = self.clone();
        for st in &mut p.statements {
            st.span = Span::default();
            for t in &mut st.targets {
                t.span = Span::default();
            }
            st.expr.strip();
        }
        p
    }

    pub fn exports(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for st in &self.statements {
            for t in &st.targets {
                if t.export && !out.contains(&t.name) {
                    out.push(t.name.clone());
                }
            }
        }
        out
    }

    pub fn defines(&self, name: &str) -> bool {
        self.statements.iter().any(|s| s.targets.iter().any(|t| t.name == name))
    }
}
