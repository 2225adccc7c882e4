//! On-disk formats.

pub mod frames;
pub mod labels;
pub mod masks;
pub mod ply;
pub mod prompts;
pub mod raster;
