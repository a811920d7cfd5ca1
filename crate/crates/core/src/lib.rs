pub mod backtest;
pub mod error;
pub mod explain;
pub mod factors;
pub mod ingest;
pub mod models;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod rolling;
pub mod selection;
pub mod synth;

pub use error::{Error, Result};
