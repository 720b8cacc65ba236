use std::fmt;
use std::str::FromStr;

use super::SequenceFrame;
use crate::error::{Error, Result};
use crate::model::Sequence;

/// Sequence attribute usable in a selection predicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SeqAttribute {
    /// Number of detections.
    Length,
    /// Distance in meters between the first and last box centers.
    Displacement,
    /// Seconds between the first and last detection.
    Duration,
}

impl SeqAttribute {
    pub const ALL: [SeqAttribute; 3] = [Self::Length, Self::Displacement, Self::Duration];

    pub fn name(self) -> &'static str {
        match self {
            Self::Length => "length",
            Self::Displacement => "displacement",
            Self::Duration => "duration",
        }
    }

    pub fn eval(self, frame: &SequenceFrame, seq: &Sequence) -> f64 {
        match self {
            Self::Length => seq.detections.len() as f64,
            Self::Displacement => {
                let a = frame.first(seq).bounds.center();
                let b = frame.last(seq).bounds.center();
                (b.x - a.x).hypot(b.y - a.y)
            }
            Self::Duration => frame.last(seq).time.secs_since(frame.first(seq).time),
        }
    }
}

impl FromStr for SeqAttribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown sequence attribute `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl Comparator {
    pub fn apply(self, a: f64, b: f64) -> bool {
        match self {
            Self::Lt => a < b,
            Self::Le => a <= b,
            Self::Gt => a > b,
            Self::Ge => a >= b,
            Self::Eq => a == b,
            Self::Ne => a != b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Self::Lt => "<",
            Self::Le => "<=",
            Self::Gt => ">",
            Self::Ge => ">=",
            Self::Eq => "==",
            Self::Ne => "!=",
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectPredicate {
    pub attribute: SeqAttribute,
    pub cmp: Comparator,
    pub threshold: f64,
}

impl SelectPredicate {
    pub fn new(attribute: SeqAttribute, cmp: Comparator, threshold: f64) -> Self {
        Self {
            attribute,
            cmp,
            threshold,
        }
    }

    pub fn test(&self, frame: &SequenceFrame, seq: &Sequence) -> bool {
        self.cmp.apply(self.attribute.eval(frame, seq), self.threshold)
    }
}

impl fmt::Display for SelectPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.attribute.name(), self.cmp, self.threshold)
    }
}

/// Keeps the sequences satisfying the predicate, preserving order.
pub fn select(frame: &SequenceFrame, pred: &SelectPredicate) -> SequenceFrame {
    frame.with_sequences(
        frame
            .sequences
            .iter()
            .filter(|s| pred.test(frame, s))
            .cloned()
            .collect(),
    )
}
