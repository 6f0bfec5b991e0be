#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ringtrace::io::{write_mask, write_pmap, write_rgb};
use ringtrace::{Mask, ProbMap, RgbImage};

pub const SIZE: usize = 512;
pub const CENTER: f64 = 255.5;
pub const DISC_RADIUS: f64 = 230.0;
pub const RADII: [f64; 8] = [25.0, 50.0, 75.0, 100.0, 125.0, 150.0, 175.0, 200.0];

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ringtrace"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn dist(x: usize, y: usize) -> f64 {
    ((x as f64 - CENTER).powi(2) + (y as f64 - CENTER).powi(2)).sqrt()
}

pub fn disc_mask() -> Mask {
    Mask::from_fn(SIZE, SIZE, |x, y| u8::from(dist(x, y) <= DISC_RADIUS)).unwrap()
}

/// Wood-coloured disc with darker latewood bands at the ring radii.
pub fn disc_image() -> RgbImage {
    let mut img = RgbImage::filled(SIZE, SIZE, 3, 255).unwrap();
    for y in 0..SIZE {
        for x in 0..SIZE {
            let d = dist(x, y);
            if d > DISC_RADIUS {
                continue;
            }
            let near = RADII.iter().map(|r| (d - r).abs()).fold(f64::INFINITY, f64::min);
            let dark = (-near * near / 8.0).exp();
            let v = |base: f64| (base * (1.0 - 0.5 * dark)) as u8;
            img.pixel_mut(x, y).copy_from_slice(&[v(222.0), v(184.0), v(135.0)]);
        }
    }
    img
}

pub fn gaussian_blur(map: &ProbMap, sigma: f64) -> ProbMap {
    let r = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = k.iter().sum();
    let (w, h) = map.dims();
    let pass = |src: &ProbMap, horizontal: bool| {
        ProbMap::from_fn(w, h, |x, y| {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                let o = j as isize - r;
                let (sx, sy) = if horizontal { (x as isize + o, y as isize) } else { (x as isize, y as isize + o) };
                let sx = sx.clamp(0, w as isize - 1) as usize;
                let sy = sy.clamp(0, h as isize - 1) as usize;
                acc += kv * src.get(sx, sy) as f64;
            }
            (acc / norm) as f32
        })
        .unwrap()
    };
    pass(&pass(map, true), false)
}

/// 3-px annuli on the ring radii, blurred with sigma 1.
pub fn ring_pmap() -> ProbMap {
    let sharp = ProbMap::from_fn(SIZE, SIZE, |x, y| {
        let d = dist(x, y);
        f32::from(RADII.iter().any(|r| (d - r).abs() <= 1.5))
    })
    .unwrap();
    gaussian_blur(&sharp, 1.0)
}

pub fn circle(r: f64, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            (CENTER + r * a.cos(), CENTER + r * a.sin())
        })
        .collect()
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub image: PathBuf,
    pub mask: PathBuf,
    pub pmap: PathBuf,
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

pub fn synthetic_fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let image = dir.path().join("disc.png");
    let mask = dir.path().join("mask.png");
    let pmap = dir.path().join("disc.pmap");
    write_rgb(&disc_image(), &image).unwrap();
    write_mask(&disc_mask(), &mask).unwrap();
    write_pmap(&ring_pmap(), &pmap).unwrap();
    Fixture { dir, image, mask, pmap }
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn detect_args<'a>(f: &'a Fixture, out: &'a Path) -> Vec<&'a str> {
    vec![
        "detect",
        s(&f.image),
        "--mask",
        s(&f.mask),
        "--pith-x",
        "255.5",
        "--pith-y",
        "255.5",
        "--backend",
        "pmap",
        "--pmap",
        s(&f.pmap),
        "--tile-size",
        "256",
        "--rotations",
        "5",
        "--alpha",
        "45",
        "--threshold",
        "0.2",
        "--output",
        s(out),
    ]
}
