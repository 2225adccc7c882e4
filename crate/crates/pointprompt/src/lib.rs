//! Scene IO, mask providers and the pipeline driver on top of
//! `pointprompt-core`.

pub mod dataset;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod provider;

pub use error::{Error, Result};
