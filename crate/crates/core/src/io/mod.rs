//! Configuration files, CSV serialization, and raster rendering.

pub mod config;
pub mod csv;
pub mod ppm;
