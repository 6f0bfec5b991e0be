//! Tree-ring delineation on wood cross-section images.
//!
//! The pipeline runs a boundary-probability predictor over overlapping tiles
//! of several rotated copies of the image, thresholds and thins the averaged
//! map into pixel curves, keeps curve pixels whose normals point at the pith,
//! samples them along rays from the pith and groups the samples into closed,
//! nested rings. [`pipeline`] ties the stages together; [`metrics`] scores
//! results against annotations.

pub mod annotation;
pub mod detector;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod overlay;
pub mod pipeline;
pub mod preprocess;
pub mod raster;
pub mod segmentation;
pub mod skeleton;
pub mod spiderweb;
pub mod trace;

pub use error::{Error, Result};
pub use raster::{Mask, Pith, ProbMap, Raster, RgbImage};
