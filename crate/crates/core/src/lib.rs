//! Geometry, prompt selection, mask fusion and evaluation kernels for
//! prompt-driven 3D instance segmentation of point clouds.
//!
//! `no_std` with `alloc`; file formats, threading and the command line live in
//! the `pointprompt` crate.

#![no_std]
extern crate alloc;

pub mod archive;
pub mod camera;
pub mod cloud;
pub mod consolidation;
pub mod eval;
pub mod mask;
pub mod projection;
pub mod sampling;
pub mod segmentation;
pub mod selection;
pub mod spatial;
pub mod synthetic;
pub mod union_find;
