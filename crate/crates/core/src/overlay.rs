//! 1-pixel polyline drawing for result overlays.

use crate::raster::RgbImage;

pub const RING_COLOR: [u8; 3] = [0, 0, 255];

fn plot(img: &mut RgbImage, x: i64, y: i64, color: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as usize) < img.width() && (y as usize) < img.height() {
        img.pixel_mut(x as usize, y as usize).copy_from_slice(&color);
    }
}

/// Bresenham line between pixel centres; pixels off the image are skipped.
pub fn draw_line(img: &mut RgbImage, from: (f64, f64), to: (f64, f64), color: [u8; 3]) {
    let (mut x0, mut y0) = (from.0.round() as i64, from.1.round() as i64);
    let (x1, y1) = (to.0.round() as i64, to.1.round() as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        plot(img, x0, y0, color);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

pub fn draw_polyline(img: &mut RgbImage, points: &[(f64, f64)], closed: bool, color: [u8; 3]) {
    for w in points.windows(2) {
        draw_line(img, w[0], w[1], color);
    }
    if closed && points.len() > 2 {
        draw_line(img, points[points.len() - 1], points[0], color);
    }
}

/// Copy of `image` with every ring drawn as a closed 1-pixel blue outline.
pub fn draw_rings(image: &RgbImage, rings: &[Vec<(f64, f64)>]) -> RgbImage {
    let mut out = image.clone();
    for ring in rings {
        draw_polyline(&mut out, ring, true, RING_COLOR);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_line_is_one_pixel_wide() {
        let mut img = RgbImage::filled(10, 10, 3, 0).unwrap();
        draw_line(&mut img, (1.0, 1.0), (8.0, 8.0), RING_COLOR);
        for i in 0..10 {
            for j in 0..10 {
                let on = img.pixel(i, j) == RING_COLOR;
                assert_eq!(on, i == j && (1..=8).contains(&i), "({i},{j})");
            }
        }
    }

    #[test]
    fn closed_square_and_clipping() {
        let mut img = RgbImage::filled(6, 6, 3, 0).unwrap();
        draw_polyline(&mut img, &[(1.0, 1.0), (4.0, 1.0), (4.0, 4.0), (1.0, 4.0)], true, RING_COLOR);
        let n = (0..36).filter(|i| img.pixel(i % 6, i / 6) == RING_COLOR).count();
        assert_eq!(n, 12);
        draw_line(&mut img, (-5.0, 2.0), (20.0, 2.0), [1, 2, 3]);
        assert_eq!(img.pixel(0, 2), &[1, 2, 3]);
    }
}
