//! Raster containers shared by every stage of the pipeline, plus the two
//! warps the rotation ensemble needs: rotation about an arbitrary center and
//! pointwise averaging.
//!
//! Coordinates follow the image convention: `x` grows to the right, `y` grows
//! downwards, and pixel `(i, j)` has its center at the continuous coordinate
//! `(i, j)`. Angles are in degrees and positive angles rotate the picture
//! counter-clockwise as seen on screen.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major, channel-interleaved 2-D grid of samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

/// 8-bit RGB image.
pub type RgbImage = Raster<u8>;
/// Single-channel probability map with values in `[0, 1]`.
pub type ProbMap = Raster<f32>;
/// Single-channel binary mask with values in `{0, 1}`.
pub type Mask = Raster<u8>;

impl<T: Copy> Raster<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::EmptyRaster {
                width,
                height,
                channels,
            });
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::BufferSize {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds a single-channel raster by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[(y * self.width + x) * self.channels]
    }

    #[inline]
    pub fn get_channel(&self, x: usize, y: usize, c: usize) -> T {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[T] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[(y * self.width + x) * self.channels] = value;
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [T] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Applies `f` to every sample, keeping the geometry.
    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copies the `width`x`height` window whose top-left corner is `(x0, y0)`.
    /// Samples falling outside this raster take `fill`.
    pub fn window(&self, x0: isize, y0: isize, width: usize, height: usize, fill: T) -> Result<Self> {
        let mut out = Self::filled(width, height, self.channels, fill)?;
        for j in 0..height {
            let sy = y0 + j as isize;
            if sy < 0 || sy >= self.height as isize {
                continue;
            }
            for i in 0..width {
                let sx = x0 + i as isize;
                if sx < 0 || sx >= self.width as isize {
                    continue;
                }
                out.pixel_mut(i, j)
                    .copy_from_slice(self.pixel(sx as usize, sy as usize));
            }
        }
        Ok(out)
    }

    pub(crate) fn ensure_same_dims<U: Copy>(&self, other: &Raster<U>) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }

    pub(crate) fn ensure_channels(&self, expected: usize) -> Result<()> {
        if self.channels != expected {
            return Err(Error::ChannelMismatch {
                expected,
                actual: self.channels,
            });
        }
        Ok(())
    }
}

impl Mask {
    pub fn count_foreground(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    #[inline]
    pub fn is_set(&self, x: usize, y: usize) -> bool {
        self.get(x, y) != 0
    }
}

/// Pith location in raster coordinates; sub-pixel positions are allowed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pith {
    pub x: f64,
    pub y: f64,
}

impl Pith {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Fails unless `0 <= x < width` and `0 <= y < height`.
    pub fn check_inside(&self, width: usize, height: usize) -> Result<()> {
        let inside = self.x >= 0.0
            && self.y >= 0.0
            && self.x < width as f64
            && self.y < height as f64;
        if inside {
            Ok(())
        } else {
            Err(Error::PithOutside {
                x: self.x,
                y: self.y,
                width,
                height,
            })
        }
    }
}

/// Sample types that can be bilinearly interpolated.
pub trait Sample: Copy + Send + Sync {
    fn to_f64(self) -> f64;
    fn from_f64(v: f64) -> Self;
}

impl Sample for u8 {
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }

    #[inline]
    fn from_f64(v: f64) -> Self {
        v.round().clamp(0.0, 255.0) as u8
    }
}

impl Sample for f32 {
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }

    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

/// Reduces an angle in degrees to `[0, 360)`.
pub fn normalize_degrees(theta: f64) -> f64 {
    let r = theta.rem_euclid(360.0);
    // rem_euclid can return exactly 360.0 for tiny negative inputs
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Inverse mapping of a rotation about `center`: for an output pixel it
/// yields the input location to sample.
#[derive(Clone, Copy, Debug)]
pub struct Rotation {
    center: Pith,
    sin: f64,
    cos: f64,
    identity: bool,
}

impl Rotation {
    pub fn new(center: Pith, theta: f64) -> Self {
        let theta = normalize_degrees(theta);
        let (sin, cos) = theta.to_radians().sin_cos();
        Self {
            center,
            sin,
            cos,
            identity: theta == 0.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// Source coordinate for output pixel `(x, y)`.
    #[inline]
    pub fn source(&self, x: f64, y: f64) -> (f64, f64) {
        if self.identity {
            return (x, y);
        }
        let dx = x - self.center.x;
        let dy = y - self.center.y;
        (
            self.center.x + dx * self.cos - dy * self.sin,
            self.center.y + dx * self.sin + dy * self.cos,
        )
    }
}

/// Rotates `raster` by `theta` degrees (counter-clockwise on screen) about
/// `center`. Each output pixel is the bilinear interpolation of the input at
/// the inverse-rotated location; taps that fall outside the input take `fill`.
pub fn rotate_about<T: Sample>(raster: &Raster<T>, center: Pith, theta: f64, fill: T) -> Raster<T> {
    let rot = Rotation::new(center, theta);
    if rot.is_identity() {
        return raster.clone();
    }
    let (w, h, ch) = (raster.width, raster.height, raster.channels);
    let mut data = vec![fill; raster.data.len()];
    data.par_chunks_mut(w * ch).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let (sx, sy) = rot.source(x as f64, y as f64);
            let out = &mut row[x * ch..(x + 1) * ch];
            sample_bilinear(raster, sx, sy, fill, out);
        }
    });
    Raster {
        width: w,
        height: h,
        channels: ch,
        data,
    }
}

/// Bilinear sample of every channel at `(sx, sy)`; taps outside the raster
/// read as `fill`.
#[inline]
pub fn sample_bilinear<T: Sample>(raster: &Raster<T>, sx: f64, sy: f64, fill: T, out: &mut [T]) {
    let (w, h) = (raster.width as isize, raster.height as isize);
    let x0f = sx.floor();
    let y0f = sy.floor();
    let fx = sx - x0f;
    let fy = sy - y0f;
    let x0 = x0f as isize;
    let y0 = y0f as isize;
    if x0 < -1 || y0 < -1 || x0 >= w || y0 >= h {
        out.iter_mut().for_each(|v| *v = fill);
        return;
    }
    let fillf = fill.to_f64();
    let corners = [(x0, y0), (x0 + 1, y0), (x0, y0 + 1), (x0 + 1, y0 + 1)];
    let mut taps = [0.0f64; 4];
    for (c, o) in out.iter_mut().enumerate() {
        for (t, &(cx, cy)) in taps.iter_mut().zip(corners.iter()) {
            *t = if cx >= 0 && cy >= 0 && cx < w && cy < h {
                raster.get_channel(cx as usize, cy as usize, c).to_f64()
            } else {
                fillf
            };
        }
        let top = taps[0] + fx * (taps[1] - taps[0]);
        let bottom = taps[2] + fx * (taps[3] - taps[2]);
        *o = T::from_f64(top + fy * (bottom - top));
    }
}

/// Pointwise arithmetic mean of equally sized probability maps. Summation
/// follows the input order in `f64`, so repeated runs are bit-identical.
pub fn accumulate_mean(maps: &[ProbMap]) -> Result<ProbMap> {
    let first = maps.first().ok_or(Error::NoMaps)?;
    for m in &maps[1..] {
        first.ensure_same_dims(m)?;
        m.ensure_channels(first.channels)?;
    }
    let n = maps.len() as f64;
    let mut acc = vec![0.0f64; first.data.len()];
    for m in maps {
        for (a, &v) in acc.iter_mut().zip(&m.data) {
            *a += v as f64;
        }
    }
    let data = acc.into_iter().map(|s| (s / n) as f32).collect();
    Raster::new(first.width, first.height, first.channels, data)
}
