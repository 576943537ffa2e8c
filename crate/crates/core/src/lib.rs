pub mod cli;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod io;
pub mod models;
pub mod second_order;
pub mod tail_probability;

pub use error::{Error, Result};
pub use cli::run_cli;
pub use models::{sample, Sample, TailModel};
