pub mod config;
pub mod criteria;
pub mod error;
pub mod geometry;
pub mod matcher;
pub mod network;
pub mod overrides;
pub mod report;
pub mod run;
pub mod synth;

pub use error::{Error, Result};
