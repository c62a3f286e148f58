//! Dataset loaders, configuration, training loop and reports for comparing
//! NIRMAL pooling against 2×2 max pooling.

pub mod config;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod poolcheck;
pub mod report;
pub mod train;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use report::RunReport;
