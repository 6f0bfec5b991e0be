//! Curve extraction from 1-pixel-wide skeletons, and the flat curve-list
//! representation used by the filtering stages.

use serde::{Deserialize, Serialize};

use crate::raster::Mask;

/// Pixel coordinate `(x, y)`.
pub type Pixel = (i32, i32);

/// Row separating two curves in a [`CurveSet`].
pub const SENTINEL: Pixel = (-1, -1);

/// Minimum number of pixels for a curve to be kept.
pub const MIN_CURVE_LEN: usize = 3;

/// Ordered pixel polylines stored as one flat list, curves separated by
/// [`SENTINEL`] rows. Always normalized: no leading, trailing or doubled
/// sentinels.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveSet {
    rows: Vec<Pixel>,
}

impl CurveSet {
    /// Builds a set from raw rows, collapsing redundant sentinels.
    pub fn from_rows(rows: impl IntoIterator<Item = Pixel>) -> Self {
        let mut out: Vec<Pixel> = Vec::new();
        for p in rows {
            if p == SENTINEL && out.last().is_none_or(|&l| l == SENTINEL) {
                continue;
            }
            out.push(p);
        }
        if out.last() == Some(&SENTINEL) {
            out.pop();
        }
        Self { rows: out }
    }

    pub fn from_curves<C: AsRef<[Pixel]>>(curves: impl IntoIterator<Item = C>) -> Self {
        let mut rows = Vec::new();
        for c in curves {
            rows.extend_from_slice(c.as_ref());
            rows.push(SENTINEL);
        }
        Self::from_rows(rows)
    }

    pub fn rows(&self) -> &[Pixel] {
        &self.rows
    }

    pub fn curves(&self) -> impl Iterator<Item = &[Pixel]> {
        self.rows.split(|&p| p == SENTINEL).filter(|c| !c.is_empty())
    }

    pub fn num_curves(&self) -> usize {
        self.curves().count()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn num_pixels(&self) -> usize {
        self.rows.iter().filter(|&&p| p != SENTINEL).count()
    }
}

// Direction k and (k + 4) % 8 are opposite.
const DIRS: [(i32, i32); 8] = [(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)];

/// Skeleton pixel graph under mixed adjacency: 4-neighbours are always
/// linked, diagonal neighbours only when the two pixels they share are both
/// background. This removes the spurious triangles at staircase corners of
/// 8-connected curves, so a plain curve has degree 2 everywhere.
struct PixelGraph<'a> {
    skel: &'a Mask,
    links: Vec<u8>,
}

impl<'a> PixelGraph<'a> {
    fn new(skel: &'a Mask) -> Self {
        let (w, h) = skel.dims();
        let mut links = vec![0u8; w * h];
        let on = |x: i32, y: i32| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && skel.is_set(x as usize, y as usize);
        for y in 0..h as i32 {
            for x in 0..w as i32 {
                if !on(x, y) {
                    continue;
                }
                let mut bits = 0u8;
                for (k, (dx, dy)) in DIRS.iter().enumerate() {
                    if !on(x + dx, y + dy) {
                        continue;
                    }
                    let diagonal = *dx != 0 && *dy != 0;
                    if diagonal && (on(x + dx, y) || on(x, y + dy)) {
                        continue;
                    }
                    bits |= 1 << k;
                }
                links[y as usize * w + x as usize] = bits;
            }
        }
        Self { skel, links }
    }

    fn idx(&self, (x, y): Pixel) -> usize {
        y as usize * self.skel.width() + x as usize
    }

    fn degree(&self, p: Pixel) -> u32 {
        self.links[self.idx(p)].count_ones()
    }
}

/// Walks the skeleton graph and returns one curve per maximal path.
///
/// Paths run between pixels whose degree is not 2 (end points and
/// junctions), so a junction pixel starts or ends every branch that touches
/// it. Closed loops without junctions are opened at their first pixel in
/// raster order; the two ends of such a curve are neighbours. Curves shorter
/// than [`MIN_CURVE_LEN`] are dropped.
pub fn trace_curves(skeleton: &Mask) -> CurveSet {
    let graph = PixelGraph::new(skeleton);
    let (w, h) = skeleton.dims();
    let mut used = vec![0u8; w * h];
    let mut curves: Vec<Vec<Pixel>> = Vec::new();

    let step = |p: Pixel, k: usize| (p.0 + DIRS[k].0, p.1 + DIRS[k].1);
    let mark = |used: &mut Vec<u8>, p: Pixel, k: usize| {
        let q = step(p, k);
        used[graph.idx(p)] |= 1 << k;
        used[graph.idx(q)] |= 1 << ((k + 4) % 8);
    };
    let next_free = |used: &Vec<u8>, p: Pixel| -> Option<usize> {
        let free = graph.links[graph.idx(p)] & !used[graph.idx(p)];
        (free != 0).then(|| free.trailing_zeros() as usize)
    };

    let walk = |used: &mut Vec<u8>, start: Pixel, first: usize, stop_at_start: bool| -> Vec<Pixel> {
        let mut path = vec![start];
        mark(used, start, first);
        let mut cur = step(start, first);
        loop {
            if stop_at_start && cur == start {
                break;
            }
            path.push(cur);
            if !stop_at_start && graph.degree(cur) != 2 {
                break;
            }
            match next_free(used, cur) {
                Some(k) => {
                    mark(used, cur, k);
                    cur = step(cur, k);
                }
                None => break,
            }
        }
        path
    };

    // Branches that start at end points or junctions.
    for y in 0..h as i32 {
        for x in 0..w as i32 {
            let p = (x, y);
            if !skeleton.is_set(x as usize, y as usize) || graph.degree(p) == 2 {
                continue;
            }
            while let Some(k) = next_free(&used, p) {
                curves.push(walk(&mut used, p, k, false));
            }
        }
    }
    // Whatever is left are loops made only of degree-2 pixels.
    for y in 0..h as i32 {
        for x in 0..w as i32 {
            let p = (x, y);
            if !skeleton.is_set(x as usize, y as usize) {
                continue;
            }
            if let Some(k) = next_free(&used, p) {
                curves.push(walk(&mut used, p, k, true));
            }
        }
    }

    CurveSet::from_curves(curves.into_iter().filter(|c| c.len() >= MIN_CURVE_LEN))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(w: usize, h: usize, pixels: &[Pixel]) -> Mask {
        let mut m = Mask::filled(w, h, 1, 0).unwrap();
        for &(x, y) in pixels {
            m.set(x as usize, y as usize, 1);
        }
        m
    }

    fn eight_connected(c: &[Pixel]) -> bool {
        c.windows(2)
            .all(|p| (p[0].0 - p[1].0).abs() <= 1 && (p[0].1 - p[1].1).abs() <= 1 && p[0] != p[1])
    }

    #[test]
    fn normalization() {
        let s = CurveSet::from_rows([SENTINEL, (1, 1), SENTINEL, SENTINEL, (2, 2), (3, 3), SENTINEL]);
        assert_eq!(s.rows(), &[(1, 1), SENTINEL, (2, 2), (3, 3)]);
        assert_eq!(s.num_curves(), 2);
        assert!(CurveSet::from_rows([SENTINEL, SENTINEL]).is_empty());
    }

    #[test]
    fn open_arc_is_one_ordered_curve() {
        // a 50-pixel arc with a staircase section
        let mut pts = Vec::new();
        for i in 0..20 {
            pts.push((5 + i, 10));
        }
        for i in 0..10 {
            pts.push((25 + i, 11 + i));
        }
        for i in 0..20 {
            pts.push((35 + i, 21));
        }
        assert_eq!(pts.len(), 50);
        let curves = trace_curves(&mask_from(64, 32, &pts));
        let all: Vec<&[Pixel]> = curves.curves().collect();
        assert_eq!(all.len(), 1);
        let c = all[0];
        assert_eq!(c.len(), 50);
        assert!(eight_connected(c));
        let ends = [c[0], c[49]];
        assert!(ends.contains(&(5, 10)) && ends.contains(&(54, 21)));
    }

    #[test]
    fn staircase_corners_do_not_split() {
        // an L-shaped 4-connected corner next to a diagonal
        let pts = [(0, 0), (1, 0), (1, 1), (2, 2), (3, 3), (3, 4), (4, 4)];
        let curves = trace_curves(&mask_from(8, 8, &pts));
        assert_eq!(curves.num_curves(), 1);
        assert_eq!(curves.num_pixels(), 7);
    }

    #[test]
    fn closed_loop_ends_are_neighbours() {
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push((5 + i, 5));
            pts.push((15, 5 + i));
            pts.push((15 - i, 15));
            pts.push((5, 15 - i));
        }
        let curves = trace_curves(&mask_from(20, 20, &pts));
        let all: Vec<&[Pixel]> = curves.curves().collect();
        assert_eq!(all.len(), 1);
        let c = all[0];
        assert_eq!(c.len(), 40);
        assert!(eight_connected(c));
        let (a, b) = (c[0], c[c.len() - 1]);
        assert!((a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1);
    }

    #[test]
    fn y_junction_gives_three_branches() {
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push((i, 10)); // left arm
            pts.push((11 + i, 10)); // right arm
            pts.push((10, 11 + i)); // down arm
        }
        pts.push((10, 10));
        let curves = trace_curves(&mask_from(24, 24, &pts));
        let all: Vec<&[Pixel]> = curves.curves().collect();
        assert_eq!(all.len(), 3);
        for c in &all {
            assert!(c[0] == (10, 10) || c[c.len() - 1] == (10, 10));
            assert_eq!(c.len(), 11);
            assert!(eight_connected(c));
        }
    }

    #[test]
    fn short_fragments_are_dropped() {
        let curves = trace_curves(&mask_from(10, 10, &[(1, 1), (2, 1), (7, 7)]));
        assert!(curves.is_empty());
    }

    #[test]
    fn rows_are_skeleton_pixels_and_simple_pixels_appear_once() {
        let mut pts = Vec::new();
        for i in 0..15 {
            pts.push((i, 7));
            pts.push((7, i));
        }
        let m = mask_from(16, 16, &pts);
        let curves = trace_curves(&m);
        let mut seen = std::collections::HashMap::new();
        for &p in curves.rows().iter().filter(|&&p| p != SENTINEL) {
            assert!(m.is_set(p.0 as usize, p.1 as usize));
            *seen.entry(p).or_insert(0) += 1;
        }
        for (p, n) in seen {
            if p != (7, 7) {
                assert_eq!(n, 1, "{p:?}");
            }
        }
    }
}
