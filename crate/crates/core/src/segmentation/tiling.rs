use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Backend, Frame, TileContext};
use crate::error::{Error, Result};
use crate::raster::{ProbMap, RgbImage};

pub const MIN_TILE_SIZE: usize = 32;

/// Overlapping square tiling of an image. `tile_size == 0` means a single
/// tile spanning the whole image.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilePlan {
    pub width: usize,
    pub height: usize,
    pub tile_size: usize,
    pub overlap: usize,
    pub stride: usize,
    pub xs: Vec<usize>,
    pub ys: Vec<usize>,
    /// Zero padding added on the right and bottom so the last tiles fit.
    pub pad: (usize, usize),
}

impl TilePlan {
    /// Tile origins in row-major order.
    pub fn origins(&self) -> Vec<(usize, usize)> {
        self.ys
            .iter()
            .flat_map(|&y| self.xs.iter().map(move |&x| (x, y)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tile_dims(&self) -> (usize, usize) {
        if self.tile_size == 0 {
            (self.width, self.height)
        } else {
            (self.tile_size, self.tile_size)
        }
    }

    pub fn padded_dims(&self) -> (usize, usize) {
        (self.width + self.pad.0, self.height + self.pad.1)
    }
}

fn axis_origins(len: usize, tile: usize, stride: usize) -> (Vec<usize>, usize) {
    if len <= tile {
        return (vec![0], tile - len);
    }
    let steps = (len - tile).div_ceil(stride);
    let origins: Vec<usize> = (0..=steps).map(|k| k * stride).collect();
    let pad = steps * stride + tile - len;
    (origins, pad)
}

/// Plans the overlapping tiles for a `width`x`height` image. Neighbouring
/// tiles share `round(0.1 * tile_size)` pixels.
pub fn plan_tiles(width: usize, height: usize, tile_size: usize) -> Result<TilePlan> {
    if width == 0 || height == 0 {
        return Err(Error::EmptyRaster {
            width,
            height,
            channels: 3,
        });
    }
    if tile_size == 0 {
        return Ok(TilePlan {
            width,
            height,
            tile_size: 0,
            overlap: 0,
            stride: 0,
            xs: vec![0],
            ys: vec![0],
            pad: (0, 0),
        });
    }
    if tile_size < MIN_TILE_SIZE || tile_size > width.max(height) {
        return Err(Error::InvalidTileSize {
            tile_size,
            width,
            height,
        });
    }
    let overlap = (0.1 * tile_size as f64).round() as usize;
    let stride = tile_size - overlap;
    let (xs, pad_x) = axis_origins(width, tile_size, stride);
    let (ys, pad_y) = axis_origins(height, tile_size, stride);
    Ok(TilePlan {
        width,
        height,
        tile_size,
        overlap,
        stride,
        xs,
        ys,
        pad: (pad_x, pad_y),
    })
}

/// Predicts every tile of `plan` and fuses them into a map of the image's
/// size. Overlaps receive the unweighted mean of the contributing tiles and
/// the zero padding is cropped away. Tiles may be predicted in parallel but
/// are always fused in row-major order, so the result does not depend on
/// the thread count.
pub fn infer_map(image: &RgbImage, plan: &TilePlan, backend: &dyn Backend, frame: Frame) -> Result<ProbMap> {
    image.ensure_channels(3)?;
    let (w, h) = image.dims();
    if (plan.width, plan.height) != (w, h) {
        return Err(Error::DimensionMismatch {
            expected: (plan.width, plan.height),
            actual: (w, h),
        });
    }
    let (tw, th) = plan.tile_dims();
    let origins = plan.origins();

    let predict = |index: usize| -> Result<ProbMap> {
        let (x, y) = origins[index];
        let tile = if plan.tile_size == 0 {
            image.clone()
        } else {
            image.window(x as isize, y as isize, tw, th, 0)?
        };
        let ctx = TileContext {
            index,
            origin: (x, y),
            image_dims: (w, h),
            frame,
        };
        let out = backend.predict(&tile, &ctx)?;
        validate_tile(&out, index, (x, y), (tw, th))?;
        Ok(out)
    };
    let predictions: Vec<Result<ProbMap>> = if backend.concurrent() {
        (0..origins.len()).into_par_iter().map(predict).collect()
    } else {
        (0..origins.len()).map(predict).collect()
    };

    let mut sum = vec![0.0f64; w * h];
    let mut count = vec![0u16; w * h];
    for (&(x0, y0), pred) in origins.iter().zip(predictions) {
        let pred = pred?;
        let x_end = (x0 + tw).min(w);
        let y_end = (y0 + th).min(h);
        for y in y0..y_end {
            let row = &pred.data()[(y - y0) * tw..(y - y0 + 1) * tw];
            for x in x0..x_end {
                let i = y * w + x;
                sum[i] += row[x - x0] as f64;
                count[i] += 1;
            }
        }
    }
    let data = sum
        .into_iter()
        .zip(count)
        .map(|(s, c)| (s / c as f64) as f32)
        .collect();
    ProbMap::new(w, h, 1, data)
}

fn validate_tile(out: &ProbMap, index: usize, (x, y): (usize, usize), dims: (usize, usize)) -> Result<()> {
    let fail = |reason: String| Error::Tile { index, x, y, reason };
    if out.dims() != dims || out.channels() != 1 {
        return Err(fail(format!(
            "backend returned {}x{}x{}, expected {}x{}x1",
            out.width(),
            out.height(),
            out.channels(),
            dims.0,
            dims.1
        )));
    }
    if let Some(v) = out.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(fail(format!("backend value {v} outside [0, 1]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::ConstantBackend;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn plan_1504_by_256() {
        let plan = plan_tiles(1504, 1504, 256).unwrap();
        assert_eq!(plan.overlap, 26);
        assert_eq!(plan.stride, 230);
        assert_eq!(plan.xs, vec![0, 230, 460, 690, 920, 1150, 1380]);
        assert_eq!(plan.ys, plan.xs);
        assert_eq!(plan.len(), 49);
        assert_eq!(plan.pad, (132, 132));
    }

    #[test]
    fn plan_whole_image() {
        let plan = plan_tiles(1504, 1504, 0).unwrap();
        assert_eq!(plan.origins(), vec![(0, 0)]);
        assert_eq!(plan.tile_dims(), (1504, 1504));
        assert_eq!(plan.pad, (0, 0));
    }

    #[test]
    fn plan_single_exact_tile() {
        let plan = plan_tiles(256, 256, 256).unwrap();
        assert_eq!(plan.origins(), vec![(0, 0)]);
        assert_eq!(plan.pad, (0, 0));
    }

    #[test]
    fn plan_rejects_bad_sizes() {
        assert!(plan_tiles(100, 100, 16).is_err());
        assert!(plan_tiles(100, 100, 101).is_err());
        assert!(plan_tiles(0, 100, 64).is_err());
        // non-square: short side shorter than the tile is padded
        let plan = plan_tiles(300, 40, 64).unwrap();
        assert_eq!(plan.ys, vec![0]);
        assert_eq!(plan.pad.1, 24);
    }

    #[test]
    fn coverage_and_seams() {
        for (w, h, t) in [(1504, 1504, 256), (500, 333, 64), (97, 200, 32)] {
            let plan = plan_tiles(w, h, t).unwrap();
            let (pw, ph) = plan.padded_dims();
            let mut hits = vec![0u8; pw * ph];
            for (x0, y0) in plan.origins() {
                for y in y0..y0 + t {
                    for x in x0..x0 + t {
                        hits[y * pw + x] += 1;
                    }
                }
            }
            assert!(hits.iter().all(|&c| c >= 1));
            assert_eq!(plan.xs.last().unwrap() + t, pw);
            assert_eq!(plan.ys.last().unwrap() + t, ph);
            // a pixel inside a vertical seam but away from horizontal seams
            if plan.xs.len() > 1 && plan.ys.len() > 1 {
                let x = plan.xs[1];
                let y = plan.ys[0] + plan.overlap + 1;
                assert_eq!(hits[y * pw + x], 2);
            }
        }
    }

    #[test]
    fn constant_backend_gives_constant_map() {
        let img = RgbImage::filled(300, 270, 3, 10).unwrap();
        let plan = plan_tiles(300, 270, 64).unwrap();
        let out = infer_map(&img, &plan, &ConstantBackend::new(0.7), Frame::upright()).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.7).abs() < 1e-6));
    }

    struct Counting {
        calls: AtomicUsize,
    }

    impl Backend for Counting {
        fn predict(&self, tile: &RgbImage, _: &TileContext) -> Result<ProbMap> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            ProbMap::filled(tile.width(), tile.height(), 1, 0.0)
        }

        fn name(&self) -> &str {
            "counting"
        }
    }

    #[test]
    fn every_tile_predicted_once() {
        let img = RgbImage::filled(1504, 1504, 3, 0).unwrap();
        let plan = plan_tiles(1504, 1504, 256).unwrap();
        let backend = Counting {
            calls: AtomicUsize::new(0),
        };
        infer_map(&img, &plan, &backend, Frame::upright()).unwrap();
        assert_eq!(backend.calls.load(Ordering::SeqCst), 49);
    }

    struct Broken {
        bad_tile: usize,
        wrong_size: bool,
    }

    impl Backend for Broken {
        fn predict(&self, tile: &RgbImage, ctx: &TileContext) -> Result<ProbMap> {
            if ctx.index != self.bad_tile {
                return ProbMap::filled(tile.width(), tile.height(), 1, 0.5);
            }
            if self.wrong_size {
                ProbMap::filled(tile.width() - 1, tile.height(), 1, 0.5)
            } else {
                ProbMap::filled(tile.width(), tile.height(), 1, 1.5)
            }
        }

        fn name(&self) -> &str {
            "broken"
        }
    }

    #[test]
    fn bad_backend_output_names_tile() {
        let img = RgbImage::filled(200, 200, 3, 0).unwrap();
        let plan = plan_tiles(200, 200, 64).unwrap();
        for wrong_size in [true, false] {
            let err = infer_map(
                &img,
                &plan,
                &Broken {
                    bad_tile: 5,
                    wrong_size,
                },
                Frame::upright(),
            )
            .unwrap_err();
            match err {
                Error::Tile { index, x, y, .. } => {
                    assert_eq!(index, 5);
                    assert_eq!((x, y), plan.origins()[5]);
                }
                other => panic!("unexpected error {other}"),
            }
        }
    }

    #[test]
    fn plan_must_match_image() {
        let img = RgbImage::filled(200, 200, 3, 0).unwrap();
        let plan = plan_tiles(201, 200, 64).unwrap();
        assert!(infer_map(&img, &plan, &ConstantBackend::new(0.1), Frame::upright()).is_err());
    }
}
