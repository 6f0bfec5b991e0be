//! Curve normals, the pith-relative normal filter, and resampling of curves
//! at their crossings with rays cast from the pith.
//!
//! Ray `k` of `n` leaves the pith at angle `360 * k / n` degrees, measured
//! from the +x axis towards +y (clockwise on screen, since y points down).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Pith;
use crate::trace::{CurveSet, Pixel, MIN_CURVE_LEN, SENTINEL};

pub const DEFAULT_ALPHA: f64 = 45.0;
pub const DEFAULT_NUM_RAYS: usize = 360;

/// A curve's crossing with one ray.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub ray: usize,
    pub radius: f64,
    pub x: f64,
    pub y: f64,
    pub chain_id: usize,
}

/// Consecutive ray crossings of one filtered curve, at most one per ray.
/// Ray indices increase by one (modulo the ray count) from node to node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub id: usize,
    pub nodes: Vec<Node>,
    /// Index of the curve this chain was sampled from.
    pub source_curve: usize,
}

impl Chain {
    pub fn first_ray(&self) -> usize {
        self.nodes[0].ray
    }

    pub fn last_ray(&self) -> usize {
        self.nodes[self.nodes.len() - 1].ray
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Unit normals along an ordered pixel curve. Interior pixels use the
/// central difference `T = p[i+1] - p[i-1]`, the end points one-sided
/// differences, and `N = (-T.y, T.x)`. `None` marks a zero tangent.
pub fn curve_normals(curve: &[Pixel]) -> Result<Vec<Option<(f64, f64)>>> {
    if curve.len() < MIN_CURVE_LEN {
        return Err(Error::CurveTooShort(curve.len()));
    }
    let n = curve.len();
    let normals = (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (curve[0], curve[1]),
                i if i == n - 1 => (curve[n - 2], curve[n - 1]),
                i => (curve[i - 1], curve[i + 1]),
            };
            let tx = (b.0 - a.0) as f64;
            let ty = (b.1 - a.1) as f64;
            let norm = tx.hypot(ty);
            (norm > 0.0).then(|| (-ty / norm, tx / norm))
        })
        .collect();
    Ok(normals)
}

/// Angle in degrees, in `[0, 180]`, between the ray from the pith through
/// `p` and the vector `normal`.
pub fn angle_delta(pith: Pith, p: (f64, f64), normal: (f64, f64)) -> Result<f64> {
    let rx = p.0 - pith.x;
    let ry = p.1 - pith.y;
    let rn = rx.hypot(ry);
    if rn == 0.0 {
        return Err(Error::PointAtPith { x: p.0, y: p.1 });
    }
    let nn = normal.0.hypot(normal.1);
    if nn == 0.0 {
        return Err(Error::param("normal", "zero-length vector"));
    }
    let cos = ((rx * normal.0 + ry * normal.1) / (rn * nn)).clamp(-1.0, 1.0);
    Ok(cos.acos().to_degrees())
}

/// True when a pixel with this angle to its ray passes the filter, i.e. its
/// normal is within `alpha` of the ray direction in either sense.
pub fn passes_filter(delta: f64, alpha: f64) -> bool {
    delta < alpha || delta > 180.0 - alpha
}

/// Removes every pixel whose normal makes an angle in `[alpha, 180 - alpha]`
/// with its pith ray, splitting curves at removed pixels. Fragments shorter
/// than three pixels are dropped. Runs to a fixed point, since splitting
/// changes the end-point normals of the new fragments; the result therefore
/// satisfies the filter pixel by pixel and filtering it again is a no-op.
pub fn filter_by_normal(curves: &CurveSet, pith: Pith, alpha: f64) -> CurveSet {
    let mut current = curves.clone();
    loop {
        let (next, removed) = filter_pass(&current, pith, alpha);
        if removed == 0 {
            return next;
        }
        current = next;
    }
}

fn filter_pass(curves: &CurveSet, pith: Pith, alpha: f64) -> (CurveSet, usize) {
    let mut rows = Vec::with_capacity(curves.rows().len());
    let mut removed = 0;
    for curve in curves.curves() {
        let Ok(normals) = curve_normals(curve) else {
            removed += curve.len();
            continue;
        };
        let mut fragment: Vec<Pixel> = Vec::new();
        let flush = |fragment: &mut Vec<Pixel>, rows: &mut Vec<Pixel>, removed: &mut usize| {
            if fragment.len() >= MIN_CURVE_LEN {
                rows.append(fragment);
                rows.push(SENTINEL);
            } else {
                *removed += fragment.len();
                fragment.clear();
            }
        };
        for (&p, normal) in curve.iter().zip(&normals) {
            let keep = normal
                .and_then(|n| angle_delta(pith, (p.0 as f64, p.1 as f64), n).ok())
                .is_some_and(|d| passes_filter(d, alpha));
            if keep {
                fragment.push(p);
            } else {
                removed += 1;
                flush(&mut fragment, &mut rows, &mut removed);
            }
        }
        flush(&mut fragment, &mut rows, &mut removed);
    }
    (CurveSet::from_rows(rows), removed)
}

/// Unit direction of ray `k` out of `num_rays`.
pub fn ray_direction(k: usize, num_rays: usize) -> (f64, f64) {
    let phi = (360.0 * k as f64 / num_rays as f64).to_radians();
    (phi.cos(), phi.sin())
}

fn polar_angle(pith: Pith, p: (f64, f64)) -> f64 {
    (p.1 - pith.y).atan2(p.0 - pith.x).to_degrees()
}

/// Crossing of the segment `a -> b` with the ray of direction `u`.
fn intersect(pith: Pith, a: (f64, f64), b: (f64, f64), u: (f64, f64)) -> (f64, f64) {
    let cross = |v: (f64, f64), w: (f64, f64)| v.0 * w.1 - v.1 * w.0;
    let ra = (a.0 - pith.x, a.1 - pith.y);
    let d = (b.0 - a.0, b.1 - a.1);
    let denom = cross(u, d);
    let t = if denom.abs() < 1e-12 {
        0.0
    } else {
        (-cross(u, ra) / denom).clamp(0.0, 1.0)
    };
    (a.0 + t * d.0, a.1 + t * d.1)
}

/// Samples each curve at its crossings with `num_rays` rays from the pith.
///
/// A crossing is placed on the ray by linear interpolation between the two
/// pixels that straddle it. Curves whose two ends are neighbours are treated
/// as closed loops. A curve that meets the same ray twice (it turned back,
/// or wound past a full turn) is split so that every chain holds at most one
/// node per ray; chains with fewer than two nodes are dropped. Chains are
/// oriented so ray indices increase along them.
pub fn sample_chains(curves: &CurveSet, pith: Pith, num_rays: usize) -> Result<Vec<Chain>> {
    if num_rays < 4 {
        return Err(Error::param("num_rays", format!("need at least 4, got {num_rays}")));
    }
    let step = 360.0 / num_rays as f64;
    let mut chains = Vec::new();

    for (ci, curve) in curves.curves().enumerate() {
        let mut pts: Vec<(f64, f64)> = curve.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
        let n = pts.len();
        let closed = n >= 8 && {
            let (a, b) = (curve[0], curve[n - 1]);
            (a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1
        };
        if closed {
            pts.push(pts[0]);
        }
        if pts.iter().any(|&p| p == (pith.x, pith.y)) {
            // angles are undefined at the pith itself; split there
            let mut start = 0;
            for (i, &p) in pts.iter().enumerate() {
                if p == (pith.x, pith.y) {
                    sample_run(&pts[start..i], pith, num_rays, step, ci, &mut chains);
                    start = i + 1;
                }
            }
            sample_run(&pts[start..], pith, num_rays, step, ci, &mut chains);
        } else {
            sample_run(&pts, pith, num_rays, step, ci, &mut chains);
        }
    }
    for (id, chain) in chains.iter_mut().enumerate() {
        chain.id = id;
        chain.nodes.iter_mut().for_each(|n| n.chain_id = id);
    }
    Ok(chains)
}

fn sample_run(pts: &[(f64, f64)], pith: Pith, num_rays: usize, step: f64, source: usize, chains: &mut Vec<Chain>) {
    if pts.len() < 2 {
        return;
    }
    // unwrapped polar angle along the run
    let mut angles = Vec::with_capacity(pts.len());
    let mut prev = polar_angle(pith, pts[0]);
    angles.push(prev);
    for &p in &pts[1..] {
        let mut a = polar_angle(pith, p);
        while a - prev > 180.0 {
            a -= 360.0;
        }
        while a - prev < -180.0 {
            a += 360.0;
        }
        angles.push(a);
        prev = a;
    }

    let mut current: Vec<Node> = Vec::new();
    let mut seen = vec![false; num_rays];
    let mut finish = |current: &mut Vec<Node>, seen: &mut Vec<bool>| {
        for node in current.iter() {
            seen[node.ray] = false;
        }
        if current.len() >= 2 {
            let mut nodes = std::mem::take(current);
            let forward = (nodes[0].ray + 1) % num_rays == nodes[1].ray;
            if !forward {
                nodes.reverse();
            }
            chains.push(Chain {
                id: 0,
                nodes,
                source_curve: source,
            });
        } else {
            current.clear();
        }
    };

    for i in 0..pts.len() - 1 {
        let (a0, a1) = (angles[i], angles[i + 1]);
        if a0 == a1 {
            continue;
        }
        // ray angles k * step inside [a0, a1) going up, or (a1, a0] going down
        let ks: Vec<i64> = if a1 > a0 {
            let lo = (a0 / step).ceil() as i64;
            let hi = (a1 / step).ceil() as i64 - 1;
            (lo..=hi).collect()
        } else {
            let lo = (a1 / step).floor() as i64 + 1;
            let hi = (a0 / step).floor() as i64;
            (lo..=hi).rev().collect()
        };
        for k in ks {
            let ray = k.rem_euclid(num_rays as i64) as usize;
            let dir = ray_direction(ray, num_rays);
            let (x, y) = intersect(pith, pts[i], pts[i + 1], dir);
            let radius = (x - pith.x).hypot(y - pith.y);
            // a ray met twice ends the chain; also break if the walk skipped
            // around (should not happen for 8-connected curves)
            let contiguous = current
                .last()
                .is_none_or(|last| (last.ray + 1) % num_rays == ray || (ray + 1) % num_rays == last.ray);
            let same_direction = current.len() < 2 || {
                let l = current.len();
                let d_prev = (current[l - 1].ray + num_rays - current[l - 2].ray) % num_rays;
                let d_new = (ray + num_rays - current[l - 1].ray) % num_rays;
                d_prev == d_new
            };
            if seen[ray] || !contiguous || !same_direction {
                finish(&mut current, &mut seen);
            }
            seen[ray] = true;
            current.push(Node {
                ray,
                radius,
                x,
                y,
                chain_id: 0,
            });
        }
    }
    finish(&mut current, &mut seen);
}
