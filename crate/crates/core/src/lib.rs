//! Liquidity-aware price forecasting.
//!
//! OHLCV ingestion, lag/indicator/liquidity features, chronological splits
//! with train-fitted scaling, four regressor families and an evaluation
//! harness that runs each family with and without the liquidity columns.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod fsutil;
pub mod hashing;
pub mod market_data;
pub mod models;
pub mod run;
mod optional;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
