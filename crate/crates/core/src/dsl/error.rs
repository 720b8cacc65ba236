use std::fmt;

/// Source position, 1-based.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DslErrorKind {
    Syntax,
    UndefinedName,
    UnknownOperator,
    Arity,
    Cycle,
    DuplicateDefinition,
    Type,
    UnboundSource,
    Execution,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {}, column {}: {message}", span.line, span.col)]
pub struct DslError {
    pub kind: DslErrorKind,
    pub span: Span,
    pub message: String,
}

impl DslError {
    pub fn new(kind: DslErrorKind, span: Span, message: impl Into<String>) -> Self {
        Self {
            kind,
            span,
            message: message.into(),
        }
    }
}
