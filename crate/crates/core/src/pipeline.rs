//! End-to-end ring detection: preprocessing, probability inference, curve
//! extraction, filtering, ray sampling and ring grouping, with results
//! mapped back to the coordinates of the input image.

use serde::{Deserialize, Serialize};

use crate::detector::{detect_curves, DetectorConfig, Detection};
use crate::error::{Error, Result};
use crate::geometry::{filter_by_normal, sample_chains};
use crate::preprocess::{
    apply_crop, disc_window, resize_pad, resize_pad_map, whiten_background, PreprocessTransform, DEFAULT_MARGIN,
    DEFAULT_TARGET,
};
use crate::raster::{Mask, Pith, ProbMap, RgbImage};
use crate::segmentation::Backend;
use crate::spiderweb::{connect_chains, RingSet, SpiderwebConfig};
use crate::trace::CurveSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub detector: DetectorConfig,
    pub spiderweb: SpiderwebConfig,
    /// Margin kept around the disc mask when cropping.
    pub margin: usize,
    /// Side of the square working canvas; 0 keeps the cropped size.
    pub target: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            detector: DetectorConfig::default(),
            spiderweb: SpiderwebConfig::default(),
            margin: DEFAULT_MARGIN,
            target: DEFAULT_TARGET,
        }
    }
}

/// Working-frame copy of the input, ready for inference.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub image: RgbImage,
    pub pith: Pith,
    /// Original frame to working frame.
    pub transform: PreprocessTransform,
    /// Disc mask in the working frame.
    pub region: Option<Mask>,
    crop: Option<(PreprocessTransform, (usize, usize))>,
}

impl Prepared {
    /// Brings a probability map given in the original frame into the
    /// working frame, the same way the image was treated.
    pub fn map_to_working(&self, map: &ProbMap, target: usize) -> Result<ProbMap> {
        let cropped = match &self.crop {
            Some((t, size)) => apply_crop(map, t, *size, 0.0)?,
            None => map.clone(),
        };
        if target == 0 {
            return Ok(cropped);
        }
        Ok(resize_pad_map(&cropped, target)?.0)
    }
}

/// Whitens everything outside the disc, crops to the disc with a margin and
/// resizes onto a square canvas. Without a mask the whole image is used.
pub fn prepare(image: &RgbImage, disc_mask: Option<&Mask>, pith: Pith, cfg: &PipelineConfig) -> Result<Prepared> {
    image.ensure_channels(3)?;
    pith.check_inside(image.width(), image.height())?;
    let (cropped, crop) = match disc_mask {
        Some(mask) => {
            image.ensure_same_dims(mask)?;
            if !mask.is_set(pith.x.round() as usize, pith.y.round() as usize) {
                return Err(Error::PithOffDisc { x: pith.x, y: pith.y });
            }
            let white = whiten_background(image, mask)?;
            let (t, size) = disc_window(mask, cfg.margin)?;
            (apply_crop(&white, &t, size, 255)?, Some((t, size)))
        }
        None => (image.clone(), None),
    };
    let t1 = crop.map(|c| c.0).unwrap_or_else(PreprocessTransform::identity);
    let (working, t2) = if cfg.target == 0 {
        (cropped, PreprocessTransform::identity())
    } else {
        resize_pad(&cropped, cfg.target)?
    };
    let transform = t1.then(&t2);
    let region = match (disc_mask, crop) {
        (Some(mask), Some((t, size))) => {
            let m = apply_crop(&mask.map(|v| if v != 0 { 1.0f32 } else { 0.0 }), &t, size, 0.0)?;
            let m = if cfg.target == 0 { m } else { resize_pad_map(&m, cfg.target)?.0 };
            Some(m.map(|v| u8::from(v >= 0.5)))
        }
        _ => None,
    };
    let (px, py) = transform.forward((pith.x, pith.y));
    let working_pith = Pith::new(px, py);
    working_pith.check_inside(working.width(), working.height())?;
    Ok(Prepared {
        image: working,
        pith: working_pith,
        transform,
        region,
        crop,
    })
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    /// Ring polygons in the original image frame, innermost first.
    pub rings: Vec<Vec<(f64, f64)>>,
    /// Rings in the working frame.
    pub ring_set: RingSet,
    pub detection: Detection,
    pub filtered: CurveSet,
    pub num_chains: usize,
}

/// Runs detection on a prepared image and maps the rings back.
pub fn run(prepared: &Prepared, cfg: &PipelineConfig, backend: &dyn Backend) -> Result<PipelineOutput> {
    let det = &cfg.detector;
    let detection = detect_curves(&prepared.image, prepared.region.as_ref(), prepared.pith, det, backend)?;
    let filtered = filter_by_normal(&detection.curves, prepared.pith, det.alpha);
    let chains = sample_chains(&filtered, prepared.pith, det.num_rays)?;
    let ring_set = connect_chains(&chains, prepared.pith, det.num_rays, &cfg.spiderweb);
    let rings = ring_set
        .polygons()
        .into_iter()
        .map(|poly| poly.into_iter().map(|p| prepared.transform.inverse(p)).collect())
        .collect();
    Ok(PipelineOutput {
        rings,
        ring_set,
        detection,
        filtered,
        num_chains: chains.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::{GradientBackend, PmapBackend};

    fn rings_map(w: usize, h: usize, c: (f64, f64), radii: &[f64]) -> ProbMap {
        ProbMap::from_fn(w, h, |x, y| {
            let d = ((x as f64 - c.0).powi(2) + (y as f64 - c.1).powi(2)).sqrt();
            let near = radii.iter().map(|r| (d - r).abs()).fold(f64::INFINITY, f64::min);
            (-near * near / 2.0).exp() as f32
        })
        .unwrap()
    }

    #[test]
    fn rings_come_back_in_the_original_frame() {
        let (w, h) = (300, 260);
        let c = (140.0, 128.0);
        let radii = [30.0, 60.0, 90.0];
        // the last ring lies inside the crop margin but off the disc
        let map = rings_map(w, h, c, &[30.0, 60.0, 90.0, 115.0]);
        let mask = Mask::from_fn(w, h, |x, y| u8::from((x as f64 - c.0).powi(2) + (y as f64 - c.1).powi(2) <= 110.0f64.powi(2))).unwrap();
        let image = RgbImage::filled(w, h, 3, 180).unwrap();
        let cfg = PipelineConfig {
            detector: DetectorConfig { tile_size: 128, total_rotations: 1, ..Default::default() },
            target: 400,
            margin: 10,
            ..Default::default()
        };
        let prepared = prepare(&image, Some(&mask), Pith::new(c.0, c.1), &cfg).unwrap();
        let backend = PmapBackend::new(prepared.map_to_working(&map, cfg.target).unwrap()).unwrap();
        let out = run(&prepared, &cfg, &backend).unwrap();
        assert_eq!(out.rings.len(), 3);
        for (poly, r) in out.rings.iter().zip(radii) {
            for &(x, y) in poly {
                let d = ((x - c.0).powi(2) + (y - c.1).powi(2)).sqrt();
                assert!((d - r).abs() < 1.5, "vertex at radius {d}, expected {r}");
            }
        }
    }

    #[test]
    fn pith_off_the_disc() {
        let mask = Mask::from_fn(50, 50, |x, _| u8::from(x < 20)).unwrap();
        let image = RgbImage::filled(50, 50, 3, 0).unwrap();
        let err = prepare(&image, Some(&mask), Pith::new(30.0, 10.0), &PipelineConfig::default());
        assert!(matches!(err, Err(Error::PithOffDisc { .. })));
    }

    #[test]
    fn constant_image_gives_no_rings() {
        let image = RgbImage::filled(96, 96, 3, 120).unwrap();
        let cfg = PipelineConfig {
            detector: DetectorConfig { tile_size: 0, total_rotations: 1, ..Default::default() },
            target: 0,
            ..Default::default()
        };
        let prepared = prepare(&image, None, Pith::new(48.0, 48.0), &cfg).unwrap();
        let out = run(&prepared, &cfg, &GradientBackend::new(1.0).unwrap()).unwrap();
        assert!(out.rings.is_empty());
    }
}
