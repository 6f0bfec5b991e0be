//! Raster file formats: raw `PMAP` probability maps and 8-bit PNG/JPEG
//! images and masks.
//!
//! A `PMAP` file is the magic `b"PMAP"`, then width and height as
//! little-endian `u32`, then `width * height` little-endian `f32` samples in
//! row-major order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{Mask, ProbMap, RgbImage};

const PMAP_MAGIC: &[u8; 4] = b"PMAP";

pub fn encode_pmap(map: &ProbMap) -> Result<Vec<u8>> {
    map.ensure_channels(1)?;
    let mut out = Vec::with_capacity(12 + map.data().len() * 4);
    out.extend_from_slice(PMAP_MAGIC);
    for side in [map.width(), map.height()] {
        let side = u32::try_from(side).map_err(|_| Error::Pmap(format!("side {side} exceeds u32")))?;
        out.extend_from_slice(&side.to_le_bytes());
    }
    for v in map.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_pmap(mut bytes: &[u8]) -> Result<ProbMap> {
    let mut header = [0u8; 12];
    bytes
        .read_exact(&mut header)
        .map_err(|_| Error::Pmap("truncated header".into()))?;
    if &header[..4] != PMAP_MAGIC {
        return Err(Error::Pmap("bad magic".into()));
    }
    let width = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Pmap("dimensions overflow".into()))?;
    if bytes.len() != n * 4 {
        return Err(Error::Pmap(format!(
            "expected {} payload bytes for {width}x{height}, found {}",
            n * 4,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ProbMap::new(width, height, 1, data)
}

pub fn read_pmap(path: impl AsRef<Path>) -> Result<ProbMap> {
    decode_pmap(&fs::read(path)?)
}

pub fn write_pmap(map: &ProbMap, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_pmap(map)?)?;
    Ok(())
}

pub fn read_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let img = image::open(path)?.to_rgb8();
    let (w, h) = img.dimensions();
    RgbImage::new(w as usize, h as usize, 3, img.into_raw())
}

pub fn write_rgb(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    img.ensure_channels(3)?;
    image::save_buffer(
        path,
        img.data(),
        img.width() as u32,
        img.height() as u32,
        image::ColorType::Rgb8,
    )?;
    Ok(())
}

/// Loads a binary mask: any luma value above 127 is foreground.
pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let img = image::open(path)?.to_luma8();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| u8::from(v > 127)).collect();
    Mask::new(w as usize, h as usize, 1, data)
}

/// Writes a mask as black/white PNG.
pub fn write_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    mask.ensure_channels(1)?;
    let data: Vec<u8> = mask.data().iter().map(|&v| if v != 0 { 255 } else { 0 }).collect();
    image::save_buffer(
        path,
        &data,
        mask.width() as u32,
        mask.height() as u32,
        image::ColorType::L8,
    )?;
    Ok(())
}
