//! Rotation-averaged probability maps and their reduction to traced curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DEFAULT_ALPHA, DEFAULT_NUM_RAYS};
use crate::raster::{accumulate_mean, rotate_about, Mask, Pith, ProbMap, RgbImage};
use crate::segmentation::{infer_map, plan_tiles, Backend, Frame};
use crate::skeleton::skeletonize;
use crate::trace::{trace_curves, CurveSet};

pub const DEFAULT_TILE_SIZE: usize = 256;
pub const DEFAULT_ROTATIONS: usize = 5;
pub const DEFAULT_THRESHOLD: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Tile side in pixels; 0 runs the whole image as one tile.
    pub tile_size: usize,
    pub total_rotations: usize,
    pub threshold: f64,
    /// Normal filter half-width in degrees.
    pub alpha: f64,
    pub num_rays: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            tile_size: DEFAULT_TILE_SIZE,
            total_rotations: DEFAULT_ROTATIONS,
            threshold: DEFAULT_THRESHOLD,
            alpha: DEFAULT_ALPHA,
            num_rays: DEFAULT_NUM_RAYS,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_rotations == 0 {
            return Err(Error::param("total_rotations", "must be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::param("threshold", format!("{} is not in (0, 1)", self.threshold)));
        }
        if !(self.alpha > 0.0 && self.alpha < 90.0) {
            return Err(Error::param("alpha", format!("{} is not in (0, 90)", self.alpha)));
        }
        if self.num_rays < 4 {
            return Err(Error::param("num_rays", format!("{} is below 4", self.num_rays)));
        }
        Ok(())
    }
}

/// Evenly spaced test-time rotation angles in degrees, starting at 0.
pub fn rotation_angles(total_rotations: usize) -> Result<Vec<f64>> {
    if total_rotations == 0 {
        return Err(Error::param("total_rotations", "must be at least 1"));
    }
    let step = 360.0 / total_rotations as f64;
    Ok((0..total_rotations).map(|k| k as f64 * step).collect())
}

/// Ring-boundary probability of every pixel, averaged over rotations of the
/// image about the pith. Each rotated copy is tiled and predicted, and the
/// prediction is rotated back before averaging. Areas that some rotations
/// cannot see (outside the largest disc around the pith that stays inside
/// the image) are diluted by the zero fill.
pub fn detect_probability(image: &RgbImage, pith: Pith, cfg: &DetectorConfig, backend: &dyn Backend) -> Result<ProbMap> {
    image.ensure_channels(3)?;
    pith.check_inside(image.width(), image.height())?;
    let angles = rotation_angles(cfg.total_rotations)?;
    let plan = plan_tiles(image.width(), image.height(), cfg.tile_size)?;

    let mut maps = Vec::with_capacity(angles.len());
    for theta in angles {
        let map = if theta == 0.0 {
            infer_map(image, &plan, backend, Frame::upright())?
        } else {
            let rotated = rotate_about(image, pith, theta, 255u8);
            let pred = infer_map(&rotated, &plan, backend, Frame::rotated(theta, pith))?;
            rotate_about(&pred, pith, -theta, 0.0f32)
        };
        maps.push(map);
    }
    if maps.len() == 1 {
        return Ok(maps.pop().unwrap());
    }
    accumulate_mean(&maps)
}

/// Foreground where `p >= threshold`.
pub fn binarize(p: &ProbMap, threshold: f64) -> Mask {
    let t = threshold as f32;
    p.map(|v| u8::from(v >= t))
}

/// Intermediate rasters of one detection, kept for debug dumps.
#[derive(Clone, Debug)]
pub struct Detection {
    pub probability: ProbMap,
    pub mask: Mask,
    pub skeleton: Mask,
    pub curves: CurveSet,
}

/// Probability map, thresholding, thinning and curve tracing.
/// Full curve extraction. When `region` is given, probabilities outside it
/// are zeroed before thresholding.
pub fn detect_curves(
    image: &RgbImage,
    region: Option<&Mask>,
    pith: Pith,
    cfg: &DetectorConfig,
    backend: &dyn Backend,
) -> Result<Detection> {
    cfg.validate()?;
    let mut probability = detect_probability(image, pith, cfg, backend)?;
    if let Some(region) = region {
        probability.ensure_same_dims(region)?;
        for (p, &m) in probability.data_mut().iter_mut().zip(region.data()) {
            if m == 0 {
                *p = 0.0;
            }
        }
    }
    let mask = binarize(&probability, cfg.threshold);
    let skeleton = skeletonize(&mask);
    let curves = trace_curves(&skeleton);
    Ok(Detection {
        probability,
        mask,
        skeleton,
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::{ConstantBackend, PmapBackend};

    fn ring_image(n: usize) -> (RgbImage, ProbMap, Pith) {
        let c = (n as f64 - 1.0) / 2.0;
        let pith = Pith::new(c, c);
        let prob = ProbMap::from_fn(n, n, |x, y| {
            let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
            let f = (d / 12.0).fract();
            (1.0 - (f - 0.5).abs() * 2.0).powi(4) as f32
        })
        .unwrap();
        let img = RgbImage::filled(n, n, 3, 200).unwrap();
        (img, prob, pith)
    }

    #[test]
    fn angles() {
        assert_eq!(rotation_angles(5).unwrap(), vec![0.0, 72.0, 144.0, 216.0, 288.0]);
        assert_eq!(rotation_angles(1).unwrap(), vec![0.0]);
        assert_eq!(rotation_angles(3).unwrap(), vec![0.0, 120.0, 240.0]);
        assert!(rotation_angles(0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::default().validate().is_ok());
        for bad in [
            DetectorConfig { threshold: 0.0, ..Default::default() },
            DetectorConfig { threshold: 1.0, ..Default::default() },
            DetectorConfig { alpha: 90.0, ..Default::default() },
            DetectorConfig { num_rays: 3, ..Default::default() },
            DetectorConfig { total_rotations: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn single_rotation_reproduces_the_map() {
        let (img, prob, pith) = ring_image(97);
        let backend = PmapBackend::new(prob.clone()).unwrap();
        let cfg = DetectorConfig { total_rotations: 1, tile_size: 40, ..Default::default() };
        let out = detect_probability(&img, pith, &cfg, &backend).unwrap();
        assert_eq!(out, prob);
    }

    #[test]
    fn rotations_agree_on_symmetric_input() {
        let (img, prob, pith) = ring_image(129);
        let backend = PmapBackend::new(prob).unwrap();
        let run = |r| {
            let cfg = DetectorConfig { total_rotations: r, tile_size: 64, ..Default::default() };
            detect_probability(&img, pith, &cfg, &backend).unwrap()
        };
        let (a, b) = (run(1), run(5));
        let r_in = 64.0 - 2.0;
        let mut sum = 0.0;
        let mut n = 0;
        for y in 0..129 {
            for x in 0..129 {
                if ((x as f64 - 64.0).powi(2) + (y as f64 - 64.0).powi(2)).sqrt() <= r_in {
                    sum += (a.get(x, y) - b.get(x, y)).abs() as f64;
                    n += 1;
                }
            }
        }
        assert!(sum / n as f64 <= 0.02, "mean abs diff {}", sum / n as f64);
    }

    #[test]
    fn constant_backend_inside_the_inscribed_disc() {
        let (img, _, _) = ring_image(80);
        let pith = Pith::new(41.0, 37.0);
        let cfg = DetectorConfig { total_rotations: 5, tile_size: 0, ..Default::default() };
        let out = detect_probability(&img, pith, &cfg, &ConstantBackend::new(0.7)).unwrap();
        let r = 40.0 - 2.0;
        for y in 0..80 {
            for x in 0..80 {
                if ((x as f64 - pith.x).powi(2) + (y as f64 - pith.y).powi(2)).sqrt() <= r - 3.0 {
                    assert!((out.get(x, y) - 0.7).abs() <= 1e-6, "({x},{y}) = {}", out.get(x, y));
                }
            }
        }
    }

    #[test]
    fn binarize_boundary_and_extremes() {
        let p = ProbMap::new(3, 1, 1, vec![0.2, 0.19999, 0.0]).unwrap();
        assert_eq!(binarize(&p, 0.2).data(), &[1, 0, 0]);
        assert_eq!(binarize(&p, 0.0).data(), &[1, 1, 1]);
        let zeros = ProbMap::filled(4, 4, 1, 0.0).unwrap();
        assert_eq!(binarize(&zeros, 0.2).count_foreground(), 0);
    }

    #[test]
    fn pith_outside_is_rejected() {
        let (img, _, _) = ring_image(20);
        let cfg = DetectorConfig { tile_size: 0, ..Default::default() };
        let err = detect_probability(&img, Pith::new(25.0, 3.0), &cfg, &ConstantBackend::new(0.5));
        assert!(matches!(err, Err(Error::PithOutside { .. })));
    }
}
