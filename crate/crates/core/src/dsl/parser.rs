use super::ast::{Arg, Expr, Program, Statement, Target};
use super::lexer::{tokenize, Tok, Token};
use super::{DslError, DslErrorKind, Span};
use crate::analytics::BinOp;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> DslError {
        DslError::new(
            DslErrorKind::Syntax,
            self.span(),
            format!("expected {expected}, found {}", self.peek().describe()),
        )
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, DslError> {
        if *self.peek() == tok {
            Ok(self.bump())
        } else {
            Err(self.error(what))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Span), DslError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.bump().span;
                Ok((name, span))
            }
            _ => Err(self.error(what)),
        }
    }

    fn program(&mut self) -> Result<Program, DslError> {
        let mut statements = Vec::new();
        loop {
            while *self.peek() == Tok::Newline {
                self.bump();
            }
            if *self.peek() == Tok::Eof {
                return Ok(Program { statements });
            }
            statements.push(self.statement()?);
            match self.peek() {
                Tok::Newline | Tok::Eof => {}
                _ => return Err(self.error("end of line")),
            }
        }
    }

    fn statement(&mut self) -> Result<Statement, DslError> {
        let span = self.span();
        let mut targets = Vec::new();
        loop {
            let export = if *self.peek() == Tok::Star {
                self.bump();
                true
            } else {
                false
            };
            let (name, tspan) = self.ident("a dataframe name")?;
            targets.push(Target {
                name,
                export,
                span: tspan,
            });
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::Assign, "`=`")?;
        let expr = self.expr()?;
        Ok(Statement { targets, expr, span })
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.additive()?;
        loop {
            let op = match self.peek() {
                Tok::Lt => BinOp::Lt,
                Tok::Le => BinOp::Le,
                Tok::Gt => BinOp::Gt,
                Tok::Ge => BinOp::Ge,
                Tok::EqEq => BinOp::Eq,
                Tok::Ne => BinOp::Ne,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.additive()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn additive(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if *self.peek() == Tok::Minus {
            let span = self.bump().span;
            let e = self.unary()?;
            return Ok(Expr::Neg(Box::new(e), span));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Number(v) => {
                self.bump();
                Ok(Expr::Number(v, span))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s, span))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() != Tok::LParen {
                    return Ok(Expr::Name(name, span));
                }
                self.bump();
                let mut args = Vec::new();
                if *self.peek() != Tok::RParen {
                    loop {
                        args.push(self.arg()?);
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen, "`,` or `)`")?;
                Ok(Expr::Call { name, args, span })
            }
            _ => Err(self.error("an expression")),
        }
    }

    fn arg(&mut self) -> Result<Arg, DslError> {
        if let (Tok::Ident(key), Tok::Assign) = (self.peek().clone(), self.peek_at(1)) {
            let span = self.bump().span;
            self.bump();
            let value = self.expr()?;
            return Ok(Arg::Keyword { key, value, span });
        }
        Ok(Arg::Positional(self.expr()?))
    }
}

fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
    let span = lhs.span();
    Expr::Binary {
        op,
        lhs: Box::new(lhs),
        rhs: Box::new(rhs),
        span,
    }
}

/// Parses program text into statements (syntax only; see
/// [`super::check`] for name and type rules).
pub fn parse_syntax(src: &str) -> Result<Program, DslError> {
    let toks = tokenize(src)?;
    Parser { toks, pos: 0 }.program()
}
