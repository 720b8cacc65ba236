use super::{DslError, DslErrorKind, Span};

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    Star,
    Comma,
    Assign,
    LParen,
    RParen,
    Plus,
    Minus,
    Slash,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    Newline,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("name `{s}`"),
            Tok::Number(v) => format!("number {v}"),
            Tok::Str(s) => format!("string '{s}'"),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::Star => "*",
            Tok::Comma => ",",
            Tok::Assign => "=",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Slash => "/",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            _ => "",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

/// Splits program text into tokens. Newlines end statements except inside
/// parentheses or after a `\` continuation; `#` starts a comment. Curly
/// quotes and backticks are accepted as string delimiters.
pub fn tokenize(src: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut depth = 0i32;
    let syntax = |line, col, msg: String| DslError::new(DslErrorKind::Syntax, Span { line, col }, msg);

    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        let adv = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        match c {
            ' ' | '\t' | '\r' => adv(1, &mut i, &mut col),
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '\\' => {
                let mut j = i + 1;
                while j < chars.len() && matches!(chars[j], ' ' | '\t' | '\r') {
                    j += 1;
                }
                if j < chars.len() && chars[j] != '\n' {
                    return Err(syntax(line, col, "`\\` must end the line".into()));
                }
                i = j + 1;
                line += 1;
                col = 1;
            }
            '\n' => {
                if depth == 0 {
                    out.push(Token { tok: Tok::Newline, span });
                }
                i += 1;
                line += 1;
                col = 1;
            }
            '\'' | '`' | '\u{2018}' | '\u{2019}' => {
                let mut j = i + 1;
                let mut s = String::new();
                while j < chars.len() && !matches!(chars[j], '\'' | '\u{2019}' | '\n') {
                    s.push(chars[j]);
                    j += 1;
                }
                if j >= chars.len() || chars[j] == '\n' {
                    return Err(syntax(line, col, "unterminated string".into()));
                }
                out.push(Token { tok: Tok::Str(s), span });
                adv(j + 1 - i, &mut i, &mut col);
            }
            c if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                if j < chars.len() && matches!(chars[j], 'e' | 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && matches!(chars[k], '+' | '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text: String = chars[i..j].iter().collect();
                let v: f64 = text
                    .parse()
                    .map_err(|_| syntax(line, col, format!("bad number `{text}`")))?;
                out.push(Token { tok: Tok::Number(v), span });
                adv(j - i, &mut i, &mut col);
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(chars[i..j].iter().collect()),
                    span,
                });
                adv(j - i, &mut i, &mut col);
            }
            _ => {
                let next = chars.get(i + 1).copied();
                let (tok, n) = match (c, next) {
                    ('<', Some('=')) | ('\u{2264}', _) => (Tok::Le, if c == '<' { 2 } else { 1 }),
                    ('>', Some('=')) | ('\u{2265}', _) => (Tok::Ge, if c == '>' { 2 } else { 1 }),
                    ('=', Some('=')) => (Tok::EqEq, 2),
                    ('!', Some('=')) => (Tok::Ne, 2),
                    ('<', _) => (Tok::Lt, 1),
                    ('>', _) => (Tok::Gt, 1),
                    ('=', _) => (Tok::Assign, 1),
                    ('*', _) => (Tok::Star, 1),
                    (',', _) => (Tok::Comma, 1),
                    ('(', _) => {
                        depth += 1;
                        (Tok::LParen, 1)
                    }
                    (')', _) => {
                        depth -= 1;
                        (Tok::RParen, 1)
                    }
                    ('+', _) => (Tok::Plus, 1),
                    ('-', _) | ('\u{2212}', _) => (Tok::Minus, 1),
                    ('/', _) => (Tok::Slash, 1),
                    _ => return Err(syntax(line, col, format!("unexpected character `{c}`"))),
                };
                out.push(Token { tok, span });
                adv(n, &mut i, &mut col);
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span { line, col },
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn statement_tokens() {
        assert_eq!(
            toks("*open = counts > capacities/2"),
            vec![
                Tok::Star,
                Tok::Ident("open".into()),
                Tok::Assign,
                Tok::Ident("counts".into()),
                Tok::Gt,
                Tok::Ident("capacities".into()),
                Tok::Slash,
                Tok::Number(2.0),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comments_continuations_and_parens() {
        let t = toks("a = F(b,\n c) # note\nx = \\\n y\n");
        let newlines = t.iter().filter(|t| **t == Tok::Newline).count();
        assert_eq!(newlines, 2);
    }

    #[test]
    fn typographic_quotes_and_minus() {
        assert_eq!(
            toks("Import(`crosswalks.png') 1 \u{2212} x"),
            vec![
                Tok::Ident("Import".into()),
                Tok::LParen,
                Tok::Str("crosswalks.png".into()),
                Tok::RParen,
                Tok::Number(1.0),
                Tok::Minus,
                Tok::Ident("x".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn errors_carry_position() {
        let e = tokenize("a = 1\nb = $").unwrap_err();
        assert_eq!(e.span, Span { line: 2, col: 5 });
        let e = tokenize("a = 'open").unwrap_err();
        assert_eq!(e.span, Span { line: 1, col: 5 });
    }
}
