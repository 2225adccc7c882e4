//! Analytic synthetic scenes: labeled point clouds plus ray-cast depth and
//! instance-id rasters.

pub mod fixtures;
mod raster;
mod scene;
mod shape;

pub use raster::{InstanceRaster, RasterSizeError, NO_INSTANCE};
pub use scene::{
    instance_color, render_frame, render_sequence, sample_cloud, Primitive, RenderedFrame,
    SceneError, SceneSpec, Trajectory, SOLID_EPS,
};
pub use shape::{Shape, PLANE_SLAB};
