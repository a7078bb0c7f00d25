//! Stochastic scenario generation for distribution-grid studies: EV charging
//! sessions, PV generation and residential net load.

pub mod calendar;
pub mod cli;
pub mod empdist;
pub mod error;
pub mod ev_scenario;
pub mod ingest;
pub mod load_analytics;
pub mod pv_scenario;

pub use error::{Error, Result};
