use super::{Backend, TileContext};
use crate::error::{Error, Result};
use crate::raster::{sample_bilinear, ProbMap, RgbImage, Rotation};

/// Predicts the same probability everywhere.
#[derive(Clone, Copy, Debug)]
pub struct ConstantBackend {
    value: f32,
}

impl ConstantBackend {
    pub fn new(value: f32) -> Self {
        Self {
            value: value.clamp(0.0, 1.0),
        }
    }
}

impl Backend for ConstantBackend {
    fn predict(&self, tile: &RgbImage, _: &TileContext) -> Result<ProbMap> {
        ProbMap::filled(tile.width(), tile.height(), 1, self.value)
    }

    fn name(&self) -> &str {
        "constant"
    }
}

/// Serves a precomputed probability map of the upright working image.
///
/// Tiles are answered by sampling the stored map at the tile's location, so
/// when the tiler works on a rotated copy of the image the backend returns
/// the identically rotated map (bilinear, 0 outside).
#[derive(Clone, Debug)]
pub struct PmapBackend {
    map: ProbMap,
}

impl PmapBackend {
    pub fn new(map: ProbMap) -> Result<Self> {
        map.ensure_channels(1)?;
        Ok(Self {
            map: map.map(|v| v.clamp(0.0, 1.0)),
        })
    }

    pub fn map(&self) -> &ProbMap {
        &self.map
    }
}

impl Backend for PmapBackend {
    fn predict(&self, tile: &RgbImage, ctx: &TileContext) -> Result<ProbMap> {
        if ctx.image_dims != self.map.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.map.dims(),
                actual: ctx.image_dims,
            });
        }
        let rot = Rotation::new(ctx.frame.center, ctx.frame.rotation);
        let (x0, y0) = ctx.origin;
        let (w, h) = self.map.dims();
        let mut out = [0.0f32];
        ProbMap::from_fn(tile.width(), tile.height(), |i, j| {
            let (gx, gy) = (x0 + i, y0 + j);
            if rot.is_identity() {
                return if gx < w && gy < h { self.map.get(gx, gy) } else { 0.0 };
            }
            let (sx, sy) = rot.source(gx as f64, gy as f64);
            sample_bilinear(&self.map, sx, sy, 0.0, &mut out);
            out[0]
        })
    }

    fn name(&self) -> &str {
        "pmap"
    }
}
