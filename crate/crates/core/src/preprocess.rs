//! Normalizes input discs to the working geometry: background whitening,
//! crop to the disc with a margin, and an aspect-preserving resize to a
//! square working canvas.
//!
//! Every geometric step returns a [`PreprocessTransform`] so that the pith
//! can be moved into the working frame and detected rings moved back out.

use image::imageops::{self, FilterType};
use image::{ImageBuffer, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Mask, ProbMap, Raster, RgbImage};

pub const DEFAULT_MARGIN: usize = 50;
pub const DEFAULT_TARGET: usize = 1504;

/// Affine map from the original frame to the working frame.
///
/// `forward(p) = (p - offset + 0.5) * scale - 0.5`, i.e. the crop window
/// starts at `offset` and pixel centers are scaled about pixel edges, which
/// is how the resampler maps grids. Padding only extends the canvas to the
/// right and bottom, so it never moves a coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessTransform {
    pub crop_offset: (f64, f64),
    pub scale: f64,
    pub pad: (usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Default for PreprocessTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl PreprocessTransform {
    pub fn identity() -> Self {
        Self {
            crop_offset: (0.0, 0.0),
            scale: 1.0,
            pad: (0, 0),
        }
    }

    /// The transform equivalent to applying `self` and then `next`.
    pub fn then(&self, next: &PreprocessTransform) -> PreprocessTransform {
        PreprocessTransform {
            crop_offset: (
                self.crop_offset.0 + next.crop_offset.0 / self.scale,
                self.crop_offset.1 + next.crop_offset.1 / self.scale,
            ),
            scale: self.scale * next.scale,
            pad: next.pad,
        }
    }

    pub fn forward(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let s = self.scale;
        (
            (x - self.crop_offset.0 + 0.5) * s - 0.5,
            (y - self.crop_offset.1 + 0.5) * s - 0.5,
        )
    }

    pub fn inverse(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let s = self.scale;
        (
            (x + 0.5) / s - 0.5 + self.crop_offset.0,
            (y + 0.5) / s - 0.5 + self.crop_offset.1,
        )
    }
}

pub fn map_coords(t: &PreprocessTransform, pts: &[(f64, f64)], direction: Direction) -> Vec<(f64, f64)> {
    match direction {
        Direction::Forward => pts.iter().map(|&p| t.forward(p)).collect(),
        Direction::Inverse => pts.iter().map(|&p| t.inverse(p)).collect(),
    }
}

/// Sets every background pixel (mask = 0) to white on all channels.
pub fn whiten_background(image: &RgbImage, disc_mask: &Mask) -> Result<RgbImage> {
    image.ensure_channels(3)?;
    image.ensure_same_dims(disc_mask)?;
    let mut out = image.clone();
    for y in 0..image.height() {
        for x in 0..image.width() {
            if !disc_mask.is_set(x, y) {
                out.pixel_mut(x, y).fill(255);
            }
        }
    }
    Ok(out)
}

/// Inclusive bounding box `(x_min, y_min, x_max, y_max)` of the foreground.
pub fn mask_bbox(mask: &Mask) -> Option<(usize, usize, usize, usize)> {
    let mut bbox: Option<(usize, usize, usize, usize)> = None;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.is_set(x, y) {
                bbox = Some(match bbox {
                    None => (x, y, x, y),
                    Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                });
            }
        }
    }
    bbox
}

/// Crop window for the disc: the mask's bounding box grown by `margin` on
/// every side. Returns the transform and the window size.
pub fn disc_window(disc_mask: &Mask, margin: usize) -> Result<(PreprocessTransform, (usize, usize))> {
    let (x0, y0, x1, y1) = mask_bbox(disc_mask).ok_or(Error::EmptyMask)?;
    let m = margin as isize;
    let ox = x0 as isize - m;
    let oy = y0 as isize - m;
    let w = x1 - x0 + 1 + 2 * margin;
    let h = y1 - y0 + 1 + 2 * margin;
    let t = PreprocessTransform {
        crop_offset: (ox as f64, oy as f64),
        scale: 1.0,
        pad: (0, 0),
    };
    Ok((t, (w, h)))
}

/// Applies the crop part of `t` (scale must be 1) with `fill` outside the
/// source raster.
pub fn apply_crop<T: Copy>(raster: &Raster<T>, t: &PreprocessTransform, size: (usize, usize), fill: T) -> Result<Raster<T>> {
    raster.window(
        t.crop_offset.0.round() as isize,
        t.crop_offset.1.round() as isize,
        size.0,
        size.1,
        fill,
    )
}

/// Crops `image` to the disc bounding box expanded by `margin` pixels, padding
/// with white where the expansion leaves the original image.
pub fn crop_to_disc(image: &RgbImage, disc_mask: &Mask, margin: usize) -> Result<(RgbImage, PreprocessTransform)> {
    image.ensure_same_dims(disc_mask)?;
    let (t, size) = disc_window(disc_mask, margin)?;
    Ok((apply_crop(image, &t, size, 255)?, t))
}

/// Scale and padding that bring a `width`x`height` raster to `target`x`target`.
pub fn resize_plan(width: usize, height: usize, target: usize) -> Result<(PreprocessTransform, (usize, usize))> {
    if target == 0 {
        return Err(Error::param("target", "must be positive"));
    }
    let long = width.max(height);
    let scale = target as f64 / long as f64;
    let scaled = |side: usize| {
        if side == long {
            target
        } else {
            ((side as f64 * scale).round() as usize).clamp(1, target)
        }
    };
    let (sw, sh) = (scaled(width), scaled(height));
    let t = PreprocessTransform {
        crop_offset: (0.0, 0.0),
        scale,
        pad: (target - sw, target - sh),
    };
    Ok((t, (sw, sh)))
}

/// Scales the longer side to `target` with Lanczos-3 resampling and pads the
/// shorter side with white on the right/bottom to a square canvas.
pub fn resize_pad(image: &RgbImage, target: usize) -> Result<(RgbImage, PreprocessTransform)> {
    image.ensure_channels(3)?;
    let (t, (sw, sh)) = resize_plan(image.width(), image.height(), target)?;
    let scaled = if (sw, sh) == image.dims() {
        image.clone()
    } else {
        let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
            ImageBuffer::from_raw(image.width() as u32, image.height() as u32, image.data().to_vec())
                .expect("buffer length checked by Raster");
        let out = imageops::resize(&buf, sw as u32, sh as u32, FilterType::Lanczos3);
        RgbImage::new(sw, sh, 3, out.into_raw())?
    };
    Ok((scaled.window(0, 0, target, target, 255)?, t))
}

/// Resamples a probability map the same way [`resize_pad`] treats an image,
/// padding with 0 and clamping Lanczos overshoot back into `[0, 1]`.
pub fn resize_pad_map(map: &ProbMap, target: usize) -> Result<(ProbMap, PreprocessTransform)> {
    map.ensure_channels(1)?;
    let (t, (sw, sh)) = resize_plan(map.width(), map.height(), target)?;
    let scaled = if (sw, sh) == map.dims() {
        map.clone()
    } else {
        let buf: ImageBuffer<Luma<f32>, Vec<f32>> =
            ImageBuffer::from_raw(map.width() as u32, map.height() as u32, map.data().to_vec())
                .expect("buffer length checked by Raster");
        let out = imageops::resize(&buf, sw as u32, sh as u32, FilterType::Lanczos3);
        ProbMap::new(sw, sh, 1, out.into_raw())?.map(|v| v.clamp(0.0, 1.0))
    };
    Ok((scaled.window(0, 0, target, target, 0.0)?, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn checker(w: usize, h: usize) -> RgbImage {
        let mut data = Vec::with_capacity(w * h * 3);
        for y in 0..h {
            for x in 0..w {
                let v = ((x / 3 + y / 5) % 2 * 200) as u8;
                data.extend_from_slice(&[v, v / 2, 30]);
            }
        }
        RgbImage::new(w, h, 3, data).unwrap()
    }

    #[test]
    fn whiten_trivial_masks() {
        let img = checker(12, 9);
        let ones = Mask::filled(12, 9, 1, 1).unwrap();
        assert_eq!(whiten_background(&img, &ones).unwrap(), img);
        let zeros = Mask::filled(12, 9, 1, 0).unwrap();
        let white = whiten_background(&img, &zeros).unwrap();
        assert!(white.data().iter().all(|&v| v == 255));
    }

    #[test]
    fn whiten_half_plane() {
        let img = checker(12, 9);
        let mask = Mask::from_fn(12, 9, |x, _| u8::from(x < 6)).unwrap();
        let out = whiten_background(&img, &mask).unwrap();
        for y in 0..9 {
            for x in 0..12 {
                if x < 6 {
                    assert_eq!(out.pixel(x, y), img.pixel(x, y));
                } else {
                    assert_eq!(out.pixel(x, y), &[255, 255, 255]);
                }
            }
        }
        assert_eq!(whiten_background(&out, &mask).unwrap(), out);
    }

    #[test]
    fn whiten_dimension_mismatch() {
        let img = checker(12, 9);
        let mask = Mask::filled(9, 12, 1, 1).unwrap();
        assert!(whiten_background(&img, &mask).is_err());
    }

    #[test]
    fn crop_centered_disc() {
        let img = RgbImage::filled(1000, 1000, 3, 7).unwrap();
        let mask = Mask::from_fn(1000, 1000, |x, y| u8::from((450..550).contains(&x) && (450..550).contains(&y))).unwrap();
        let (out, t) = crop_to_disc(&img, &mask, 50).unwrap();
        assert_eq!(out.dims(), (200, 200));
        assert_eq!(t.crop_offset, (400.0, 400.0));
        assert!(out.data().iter().all(|&v| v == 7));
    }

    #[test]
    fn crop_pads_when_disc_touches_border() {
        let img = RgbImage::filled(100, 80, 3, 0).unwrap();
        // disc hugs the left and top border
        let mask = Mask::from_fn(100, 80, |x, y| u8::from(x < 30 && y < 20)).unwrap();
        let (out, t) = crop_to_disc(&img, &mask, 50).unwrap();
        assert_eq!(out.dims(), (130, 120));
        assert_eq!(t.crop_offset, (-50.0, -50.0));
        assert_eq!(out.pixel(49, 60), &[255, 255, 255]);
        assert_eq!(out.pixel(50, 60), &[0, 0, 0]);
        assert_eq!(out.pixel(60, 49), &[255, 255, 255]);
        // 50 px of content are available on the right/bottom, so no white there
        assert_eq!(out.pixel(129, 119), &[0, 0, 0]);
    }

    #[test]
    fn crop_zero_margin_is_bbox() {
        let img = checker(40, 30);
        let mask = Mask::from_fn(40, 30, |x, y| u8::from((5..=14).contains(&x) && (3..=9).contains(&y))).unwrap();
        let (out, _) = crop_to_disc(&img, &mask, 0).unwrap();
        assert_eq!(out.dims(), (10, 7));
        assert_eq!(out.pixel(0, 0), img.pixel(5, 3));
        assert_eq!(out.pixel(9, 6), img.pixel(14, 9));
    }

    #[test]
    fn crop_empty_mask_fails() {
        let img = checker(10, 10);
        let mask = Mask::filled(10, 10, 1, 0).unwrap();
        assert!(matches!(crop_to_disc(&img, &mask, 50), Err(Error::EmptyMask)));
    }

    #[test]
    fn resize_wide_image() {
        let img = RgbImage::filled(3008, 1504, 3, 90).unwrap();
        let (out, t) = resize_pad(&img, 1504).unwrap();
        assert_eq!(out.dims(), (1504, 1504));
        assert_eq!(t.scale, 0.5);
        assert_eq!(t.pad, (0, 752));
        assert_eq!(out.pixel(700, 751), &[90, 90, 90]);
        assert_eq!(out.pixel(700, 752), &[255, 255, 255]);
        assert_eq!(out.pixel(1503, 1503), &[255, 255, 255]);
    }

    #[test]
    fn resize_same_size_is_unchanged() {
        let img = checker(64, 64);
        let (out, t) = resize_pad(&img, 64).unwrap();
        assert_eq!(out, img);
        assert_eq!(t, PreprocessTransform::identity());
    }

    #[test]
    fn lanczos_does_not_ring_on_constants() {
        let img = RgbImage::filled(300, 200, 3, 123).unwrap();
        let (out, _) = resize_pad(&img, 451).unwrap();
        for y in 0..301 {
            for x in 0..451 {
                assert_eq!(out.pixel(x, y), &[123, 123, 123], "at ({x},{y})");
            }
        }
    }

    #[test]
    fn resize_output_is_always_square() {
        for (w, h) in [(1, 1), (17, 3), (3, 17), (640, 480), (1000, 1001)] {
            let img = RgbImage::filled(w, h, 3, 0).unwrap();
            let (out, _) = resize_pad(&img, 97).unwrap();
            assert_eq!(out.dims(), (97, 97));
        }
    }

    #[test]
    fn scale_half_forward() {
        let t = PreprocessTransform {
            crop_offset: (0.0, 0.0),
            scale: 0.5,
            pad: (0, 0),
        };
        // pixel-edge-aligned scaling: (100 + 0.5) * 0.5 - 0.5
        assert_eq!(t.forward((100.0, 100.0)), (49.75, 49.75));
        let id = PreprocessTransform::identity();
        let pts = vec![(3.5, -2.0), (10.0, 11.25)];
        assert_eq!(map_coords(&id, &pts, Direction::Forward), pts);
        assert_eq!(map_coords(&id, &pts, Direction::Inverse), pts);
    }

    #[test]
    fn pith_round_trip_through_crop_and_resize() {
        let img = RgbImage::filled(700, 500, 3, 0).unwrap();
        let mask = Mask::from_fn(700, 500, |x, y| {
            let (dx, dy) = (x as f64 - 400.0, y as f64 - 260.0);
            u8::from(dx * dx + dy * dy < 180.0 * 180.0)
        })
        .unwrap();
        let (cropped, t1) = crop_to_disc(&img, &mask, 50).unwrap();
        let (_, t2) = resize_pad(&cropped, 1504).unwrap();
        let t = t1.then(&t2);
        let pith = (400.3, 259.6);
        let back = t.inverse(t.forward(pith));
        assert!((back.0 - pith.0).abs() <= 0.5 && (back.1 - pith.1).abs() <= 0.5);
        // composition agrees with applying the steps one after the other
        let (a, b) = (t.forward(pith), t2.forward(t1.forward(pith)));
        assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
    }

    #[test]
    fn random_points_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let t = PreprocessTransform {
                crop_offset: (rng.gen_range(-80.0..400.0), rng.gen_range(-80.0..400.0)),
                scale: rng.gen_range(0.2..4.0),
                pad: (0, 0),
            };
            let pts: Vec<(f64, f64)> = (0..50)
                .map(|_| (rng.gen_range(0.0..2000.0), rng.gen_range(0.0..2000.0)))
                .collect();
            let fw = map_coords(&t, &pts, Direction::Forward);
            let back = map_coords(&t, &fw, Direction::Inverse);
            for (p, q) in pts.iter().zip(&back) {
                assert!((p.0 - q.0).abs() <= 0.5 && (p.1 - q.1).abs() <= 0.5);
            }
        }
    }

    #[test]
    fn resize_map_stays_in_unit_interval() {
        let map = ProbMap::from_fn(40, 20, |x, _| if x % 4 == 0 { 1.0 } else { 0.0 }).unwrap();
        let (out, t) = resize_pad_map(&map, 100).unwrap();
        assert_eq!(out.dims(), (100, 100));
        assert_eq!(t.pad, (0, 50));
        assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(out.data()[50 * 100..].iter().all(|&v| v == 0.0));
    }
}
