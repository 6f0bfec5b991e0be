//! Ring-boundary probability maps from a pluggable tile predictor, using
//! overlapping tiles whose predictions are averaged where they overlap.

mod backends;
mod gradient;
mod neural;
mod tiling;

pub use backends::{ConstantBackend, PmapBackend};
pub use gradient::GradientBackend;
pub use neural::{NeuralBackend, OutputActivation, ACTIVATION_KEY};
pub use tiling::{infer_map, plan_tiles, TilePlan, MIN_TILE_SIZE};

use crate::error::Result;
use crate::raster::{Pith, ProbMap, RgbImage};

/// Where a tile sits in the image handed to [`infer_map`], and how that
/// image relates to the upright working frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TileContext {
    pub index: usize,
    /// Top-left corner of the tile in image coordinates.
    pub origin: (usize, usize),
    /// Size of the full (unpadded) image the tile was cut from.
    pub image_dims: (usize, usize),
    pub frame: Frame,
}

/// Rotation (degrees, counter-clockwise) applied to the working image about
/// `center` before it reached the tiler.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub rotation: f64,
    pub center: Pith,
}

impl Frame {
    pub fn upright() -> Self {
        Self {
            rotation: 0.0,
            center: Pith::new(0.0, 0.0),
        }
    }

    pub fn rotated(rotation: f64, center: Pith) -> Self {
        Self { rotation, center }
    }
}

/// Tile predictor: maps an RGB tile to a same-size map of ring-boundary
/// probabilities in `[0, 1]`. Must be deterministic for a fixed input.
pub trait Backend: Send + Sync {
    fn predict(&self, tile: &RgbImage, ctx: &TileContext) -> Result<ProbMap>;

    /// Backends that cannot serve concurrent calls return `false` and the
    /// tiler serializes them.
    fn concurrent(&self) -> bool {
        true
    }

    fn name(&self) -> &str;
}
