//! Dataframe operators over detections, sequences and spatio-temporal matrices.
//!
//! Detections come from a line-delimited log already projected to world
//! coordinates. Tracking links them into sequences; sequences can be filtered,
//! merged across unobserved gaps and binned into grid matrices, and matrices
//! combine cell-wise or feed back as spatial filters on sequences.

mod detection;
pub mod io;
mod matrix_ops;
mod merge;
mod raster;
mod select;
mod thin;
mod tracking;

pub use detection::{object_detection_ingest, write_detection_log, DetectionFrame, SequenceFrame};
pub use matrix_ops::{aggregate, eval_algebra, join, to_matrix, Aggregator, AlgebraOutput, ArithExpr, BinOp};
pub use merge::{appearance_similarity, can_merge, merge, CoverageLog, CoverageRecord};
pub use raster::{import_raster, matrix_to_raster, raster_to_matrix, write_raster};
pub use select::{select, Comparator, SelectPredicate, SeqAttribute};
pub use thin::{thin, zhang_suen, Mask};
pub use tracking::{object_tracking, TrackerParams};
