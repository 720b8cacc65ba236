pub mod alignment;
pub mod analytics;
pub mod commands;
pub mod dsl;
mod error;
pub mod model;
pub mod routing;
pub mod scheduling;
pub mod simulator;

pub use error::{Error, Result};
