use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("raster must have non-zero dimensions, got {width}x{height}x{channels}")]
    EmptyRaster {
        width: usize,
        height: usize,
        channels: usize,
    },

    #[error("raster buffer holds {actual} samples, expected {expected}")]
    BufferSize { expected: usize, actual: usize },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("expected a {expected}-channel raster, got {actual} channels")]
    ChannelMismatch { expected: usize, actual: usize },

    #[error("nothing to average: the map list is empty")]
    NoMaps,

    #[error("disc mask has no foreground pixels")]
    EmptyMask,

    #[error("pith ({x:.2}, {y:.2}) lies outside the {width}x{height} raster")]
    PithOutside {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },

    #[error("pith ({x:.2}, {y:.2}) is not on the disc mask")]
    PithOffDisc { x: f64, y: f64 },

    #[error("invalid tile size {tile_size} for a {width}x{height} image (use 0 or 32..=max side)")]
    InvalidTileSize {
        tile_size: usize,
        width: usize,
        height: usize,
    },

    #[error("tile {index} at ({x}, {y}): {reason}")]
    Tile {
        index: usize,
        x: usize,
        y: usize,
        reason: String,
    },

    #[error("model {}: {reason}", path.display())]
    Model { path: PathBuf, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("curve has {0} pixels, at least 3 are required")]
    CurveTooShort(usize),

    #[error("point ({x}, {y}) coincides with the pith")]
    PointAtPith { x: f64, y: f64 },

    #[error("rings {ring_a} and {ring_b} cross")]
    CrossingRings { ring_a: usize, ring_b: usize },

    #[error("malformed PMAP data: {0}")]
    Pmap(String),

    #[error("annotation field `{field}`: {reason}")]
    Annotation { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
