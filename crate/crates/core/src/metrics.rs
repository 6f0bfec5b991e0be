//! Region-based evaluation of ring delineations: mean average recall over
//! IoU thresholds and the adapted Rand error.
//!
//! Both metrics compare label rasters in which every disc pixel carries the
//! index of the annulus it falls in (1 for the innermost region) and pixels
//! outside the disc are 0.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::raster::{Mask, Raster};

/// Per-pixel region index; 0 is background.
pub type RegionLabels = Raster<u32>;

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn iou_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

/// Horizontal runs `[x0, x1]` of pixel centres on row `y` that lie inside
/// the polygon (even-odd rule, half-open edge crossings).
fn row_spans(poly: &[(f64, f64)], y: f64, width: usize) -> Vec<(usize, usize)> {
    let mut xs = Vec::new();
    let n = poly.len();
    for i in 0..n {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % n];
        if (y0 <= y) != (y1 <= y) {
            xs.push(x0 + (y - y0) * (x1 - x0) / (y1 - y0));
        }
    }
    xs.sort_by(f64::total_cmp);
    let mut spans = Vec::new();
    for pair in xs.chunks_exact(2) {
        // pixel centres x with pair[0] < x <= pair[1]
        let lo = (pair[0].floor() + 1.0).max(0.0);
        let hi = pair[1].floor().min(width as f64 - 1.0);
        if lo <= hi {
            spans.push((lo as usize, hi as usize));
        }
    }
    spans
}

fn overlap(a: &[(usize, usize)], b: &[(usize, usize)]) -> u64 {
    let (mut i, mut j, mut total) = (0, 0, 0u64);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if lo <= hi {
            total += (hi - lo + 1) as u64;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// Labels every disc pixel with `K + 1 - c`, clipped to `[1, K + 1]`, where
/// `K` is the number of rings and `c` the number of ring polygons that
/// contain the pixel centre. Pixels outside the disc get 0.
///
/// Rings must be nested or disjoint: if two polygons partially overlap the
/// result would be meaningless and [`Error::CrossingRings`] is returned.
pub fn rasterize_regions(rings: &[Vec<(f64, f64)>], disc_mask: &Mask) -> Result<RegionLabels> {
    let (w, h) = disc_mask.dims();
    let k = rings.len();
    for (i, r) in rings.iter().enumerate() {
        if r.len() < 3 {
            return Err(Error::param("rings", format!("ring {i} has {} vertices, at least 3 are required", r.len())));
        }
    }
    let mut counts = vec![0u32; w * h];
    let mut area = vec![0u64; k];
    let mut inter: HashMap<(usize, usize), u64> = HashMap::new();
    let bbox: Vec<(f64, f64)> = rings
        .iter()
        .map(|r| {
            r.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)))
        })
        .collect();

    for y in 0..h {
        let yf = y as f64;
        let spans: Vec<Vec<(usize, usize)>> = rings
            .iter()
            .zip(&bbox)
            .map(|(r, &(lo, hi))| if yf < lo || yf > hi { Vec::new() } else { row_spans(r, yf, w) })
            .collect();
        for (i, s) in spans.iter().enumerate() {
            for &(a, b) in s {
                area[i] += (b - a + 1) as u64;
                for c in &mut counts[y * w + a..=y * w + b] {
                    *c += 1;
                }
            }
        }
        let active: Vec<usize> = (0..k).filter(|&i| !spans[i].is_empty()).collect();
        for (n, &i) in active.iter().enumerate() {
            for &j in &active[n + 1..] {
                let o = overlap(&spans[i], &spans[j]);
                if o > 0 {
                    *inter.entry((i, j)).or_default() += o;
                }
            }
        }
    }

    let mut crossing: Vec<(usize, usize)> = inter
        .iter()
        .filter(|(&(i, j), &o)| o < area[i] && o < area[j])
        .map(|(&pair, _)| pair)
        .collect();
    crossing.sort_unstable();
    if let Some(&(ring_a, ring_b)) = crossing.first() {
        return Err(Error::CrossingRings { ring_a, ring_b });
    }

    let top = k as u32 + 1;
    let labels = counts
        .iter()
        .zip(disc_mask.data())
        .map(|(&c, &m)| if m == 0 { 0 } else { top.saturating_sub(c).max(1) })
        .collect();
    Raster::new(w, h, 1, labels)
}

fn ensure_same(pred: &RegionLabels, gt: &RegionLabels) -> Result<()> {
    if pred.dims() != gt.dims() {
        return Err(Error::DimensionMismatch {
            expected: gt.dims(),
            actual: pred.dims(),
        });
    }
    Ok(())
}

/// Mean over the IoU thresholds of the fraction of ground-truth regions
/// matched one-to-one to a predicted region with IoU at or above the
/// threshold. Matching is greedy by descending IoU. Background is ignored.
///
/// With no ground-truth regions the score is 1 if the prediction is also
/// empty and 0 otherwise.
pub fn mean_average_recall(pred: &RegionLabels, gt: &RegionLabels) -> Result<f64> {
    ensure_same(pred, gt)?;
    let mut size_p: HashMap<u32, u64> = HashMap::new();
    let mut size_g: HashMap<u32, u64> = HashMap::new();
    let mut joint: HashMap<(u32, u32), u64> = HashMap::new();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        if p != 0 {
            *size_p.entry(p).or_default() += 1;
        }
        if g != 0 {
            *size_g.entry(g).or_default() += 1;
        }
        if p != 0 && g != 0 {
            *joint.entry((g, p)).or_default() += 1;
        }
    }
    if size_g.is_empty() {
        return Ok(if size_p.is_empty() { 1.0 } else { 0.0 });
    }

    let mut pairs: Vec<(f64, u32, u32)> = joint
        .iter()
        .map(|(&(g, p), &n)| {
            let union = size_g[&g] + size_p[&p] - n;
            (n as f64 / union as f64, g, p)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut used_g = std::collections::HashSet::new();
    let mut used_p = std::collections::HashSet::new();
    let mut matched_iou = Vec::new();
    for (iou, g, p) in pairs {
        if used_g.contains(&g) || used_p.contains(&p) {
            continue;
        }
        used_g.insert(g);
        used_p.insert(p);
        matched_iou.push(iou);
    }

    let n_gt = size_g.len() as f64;
    let thresholds = iou_thresholds();
    let total: f64 = thresholds
        .iter()
        .map(|&t| matched_iou.iter().filter(|&&iou| iou >= t).count() as f64 / n_gt)
        .sum();
    Ok(total / thresholds.len() as f64)
}

/// Pair-count sums behind the adapted Rand error, over pixels with a
/// non-zero ground-truth label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandCounts {
    /// Σ n_ij² over the contingency table.
    pub joint: u128,
    /// Σ a_i² over predicted-label marginals.
    pub pred: u128,
    /// Σ b_j² over ground-truth marginals.
    pub gt: u128,
}

pub fn rand_counts(pred: &RegionLabels, gt: &RegionLabels) -> Result<RandCounts> {
    ensure_same(pred, gt)?;
    let mut a: HashMap<u32, u64> = HashMap::new();
    let mut b: HashMap<u32, u64> = HashMap::new();
    let mut n: HashMap<(u32, u32), u64> = HashMap::new();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        if g == 0 {
            continue;
        }
        *a.entry(p).or_default() += 1;
        *b.entry(g).or_default() += 1;
        *n.entry((p, g)).or_default() += 1;
    }
    let sq = |m: &mut dyn Iterator<Item = u64>| m.map(|v| v as u128 * v as u128).sum::<u128>();
    Ok(RandCounts {
        joint: sq(&mut n.into_values()),
        pred: sq(&mut a.into_values()),
        gt: sq(&mut b.into_values()),
    })
}

impl RandCounts {
    pub fn precision(&self) -> f64 {
        self.joint as f64 / self.pred as f64
    }

    pub fn recall(&self) -> f64 {
        self.joint as f64 / self.gt as f64
    }

    pub fn error(&self) -> f64 {
        if self.gt == 0 {
            return 0.0;
        }
        let (p, r) = (self.precision(), self.recall());
        1.0 - 2.0 * p * r / (p + r)
    }
}

/// `1 - F1` of pair-counting precision and recall, ignoring pixels whose
/// ground-truth label is background. Predicted background inside the disc
/// counts as one more predicted region.
pub fn adapted_rand_error(pred: &RegionLabels, gt: &RegionLabels) -> Result<f64> {
    Ok(rand_counts(pred, gt)?.error())
}
