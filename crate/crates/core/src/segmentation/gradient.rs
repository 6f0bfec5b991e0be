use super::{Backend, TileContext};
use crate::error::{Error, Result};
use crate::raster::{ProbMap, RgbImage};

/// Classical stand-in for a trained model: Gaussian-smoothed gradient
/// magnitude of the grayscale tile, divided by its 99th percentile and
/// clipped to `[0, 1]`.
#[derive(Clone, Debug)]
pub struct GradientBackend {
    sigma: f64,
    kernel: Vec<f64>,
}

impl GradientBackend {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
        }
        let radius = (3.0 * sigma).ceil() as isize;
        let mut kernel: Vec<f64> = (-radius..=radius)
            .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = kernel.iter().sum();
        kernel.iter_mut().for_each(|k| *k /= total);
        Ok(Self { sigma, kernel })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn blur(&self, src: &[f64], w: usize, h: usize) -> Vec<f64> {
        let r = (self.kernel.len() / 2) as isize;
        let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, weight) in self.kernel.iter().enumerate() {
                    acc += weight * src[y * w + clamp(x as isize + k as isize - r, w)];
                }
                tmp[y * w + x] = acc;
            }
        }
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, weight) in self.kernel.iter().enumerate() {
                    acc += weight * tmp[clamp(y as isize + k as isize - r, h) * w + x];
                }
                out[y * w + x] = acc;
            }
        }
        out
    }

    pub fn gradient_magnitude(&self, tile: &RgbImage) -> Vec<f64> {
        let (w, h) = tile.dims();
        let gray: Vec<f64> = tile
            .data()
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect();
        let b = self.blur(&gray, w, h);
        let at = |x: usize, y: usize| b[y * w + x];
        let mut mag = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let gx = (at((x + 1).min(w - 1), y) - at(x.saturating_sub(1), y)) / 2.0;
                let gy = (at(x, (y + 1).min(h - 1)) - at(x, y.saturating_sub(1))) / 2.0;
                mag[y * w + x] = gx.hypot(gy);
            }
        }
        mag
    }
}

impl Backend for GradientBackend {
    fn predict(&self, tile: &RgbImage, _: &TileContext) -> Result<ProbMap> {
        tile.ensure_channels(3)?;
        let mag = self.gradient_magnitude(tile);
        let mut sorted = mag.clone();
        let k = ((sorted.len() - 1) as f64 * 0.99).floor() as usize;
        let (_, p99, _) = sorted.select_nth_unstable_by(k, f64::total_cmp);
        let mut norm = *p99;
        // sparse edges leave the percentile at zero; fall back to the peak
        if norm <= 1e-9 {
            norm = mag.iter().copied().fold(0.0, f64::max);
        }
        let data = if norm <= 1e-9 {
            vec![0.0; mag.len()]
        } else {
            mag.iter().map(|&m| (m / norm).min(1.0) as f32).collect()
        };
        ProbMap::new(tile.width(), tile.height(), 1, data)
    }

    fn name(&self) -> &str {
        "gradient"
    }
}
