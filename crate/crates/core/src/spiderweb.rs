//! Grouping of ray-sampled chains into closed, mutually non-crossing rings.
//!
//! Every chain is a run of radii on consecutive rays. Chains are merged
//! greedily, cheapest gap first, where the cost of joining the end of chain
//! `a` to the start of chain `b` is the radial jump per ray across the gap.
//! A merge is accepted only if the straight radial interpolation across the
//! gap stays under the smoothness threshold and the merged chain keeps the
//! same radial order against every other chain on all shared rays. Chains
//! that end up covering enough of the rays are closed; the rest are dropped.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::geometry::{ray_direction, Chain};
use crate::raster::Pith;

pub const DEFAULT_SMOOTH_THR: f64 = 2.0;
pub const DEFAULT_MIN_COVERAGE: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpiderwebConfig {
    /// Largest radial change per ray allowed when bridging a gap, in pixels.
    pub smooth_thr: f64,
    /// Fraction of rays a chain must span to be closed into a ring.
    pub min_coverage: f64,
}

impl Default for SpiderwebConfig {
    fn default() -> Self {
        Self {
            smooth_thr: DEFAULT_SMOOTH_THR,
            min_coverage: DEFAULT_MIN_COVERAGE,
        }
    }
}

/// Closed ring in polar form: one radius per ray.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub radii: Vec<f64>,
    /// Number of radii that come from detected nodes rather than gap filling.
    pub measured: usize,
}

impl Ring {
    pub fn mean_radius(&self) -> f64 {
        self.radii.iter().sum::<f64>() / self.radii.len() as f64
    }
}

/// Rings ordered from the pith outwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingSet {
    pub rings: Vec<Ring>,
    pub pith: Pith,
    pub num_rays: usize,
}

impl RingSet {
    pub fn empty(pith: Pith, num_rays: usize) -> Self {
        Self {
            rings: Vec::new(),
            pith,
            num_rays,
        }
    }

    /// Builds a set from per-ray radius lists (all of length `num_rays`).
    pub fn from_radii(pith: Pith, num_rays: usize, radii: Vec<Vec<f64>>) -> Self {
        let rings = radii
            .into_iter()
            .map(|r| {
                debug_assert_eq!(r.len(), num_rays);
                Ring {
                    measured: r.len(),
                    radii: r,
                }
            })
            .collect();
        Self {
            rings,
            pith,
            num_rays,
        }
    }

    pub fn len(&self) -> usize {
        self.rings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rings.is_empty()
    }

    /// Vertices of ring `i`, one per ray, in the pith's frame.
    pub fn polygon(&self, i: usize) -> Vec<(f64, f64)> {
        self.rings[i]
            .radii
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                let (ux, uy) = ray_direction(k, self.num_rays);
                (self.pith.x + r * ux, self.pith.y + r * uy)
            })
            .collect()
    }

    pub fn polygons(&self) -> Vec<Vec<(f64, f64)>> {
        (0..self.rings.len()).map(|i| self.polygon(i)).collect()
    }
}

/// A ray on which ring `ring_i` does not lie strictly inside `ring_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub ray: usize,
    pub ring_i: usize,
    pub ring_j: usize,
}

/// Lists every ray where consecutive rings are not strictly increasing in
/// radius. Empty means the set is properly nested.
pub fn check_noncrossing(rings: &RingSet) -> Vec<Violation> {
    let mut out = Vec::new();
    for i in 1..rings.rings.len() {
        let (inner, outer) = (&rings.rings[i - 1], &rings.rings[i]);
        for ray in 0..rings.num_rays {
            if !(inner.radii[ray] < outer.radii[ray]) {
                out.push(Violation {
                    ray,
                    ring_i: i - 1,
                    ring_j: i,
                });
            }
        }
    }
    out
}

/// Chain under construction: radii on the cyclic ray span starting at
/// `start`, interpolated values included.
#[derive(Clone, Debug)]
struct Arc {
    id: usize,
    start: usize,
    radii: Vec<f64>,
    measured: usize,
    version: u32,
    alive: bool,
}

impl Arc {
    fn len(&self) -> usize {
        self.radii.len()
    }

    fn end(&self, n: usize) -> usize {
        (self.start + self.len() - 1) % n
    }

    fn radius_on(&self, ray: usize, n: usize) -> Option<f64> {
        let off = (ray + n - self.start) % n;
        self.radii.get(off).copied()
    }
}

/// Radii of `a` followed by a linear bridge of `gap - 1` rays and then `b`.
struct Bridge<'a> {
    a: &'a Arc,
    b: &'a Arc,
    gap: usize,
}

impl Bridge<'_> {
    fn len(&self) -> usize {
        self.a.len() + self.gap - 1 + self.b.len()
    }

    fn radius_at_offset(&self, off: usize) -> Option<f64> {
        let la = self.a.len();
        if off < la {
            return Some(self.a.radii[off]);
        }
        let bridge_end = la + self.gap - 1;
        if off < bridge_end {
            let j = (off - la + 1) as f64;
            let ra = self.a.radii[la - 1];
            let rb = self.b.radii[0];
            return Some(ra + (rb - ra) * j / self.gap as f64);
        }
        self.b.radii.get(off - bridge_end).copied()
    }

    fn radius_on(&self, ray: usize, n: usize) -> Option<f64> {
        let off = (ray + n - self.a.start) % n;
        (off < self.len()).then(|| self.radius_at_offset(off)).flatten()
    }

    fn radii(&self) -> Vec<f64> {
        (0..self.len()).map(|o| self.radius_at_offset(o).unwrap()).collect()
    }
}

/// Relative radial order of two chains over their shared rays: `Some(true)`
/// if the first is strictly outside everywhere, `Some(false)` if strictly
/// inside, `None` if they touch or swap order. Disjoint chains are
/// compatible either way.
fn consistent_order(n: usize, c: &Arc, other: impl Fn(usize) -> Option<f64>) -> bool {
    let mut sign: Option<bool> = None;
    for (off, &rc) in c.radii.iter().enumerate() {
        let ray = (c.start + off) % n;
        let Some(r) = other(ray) else { continue };
        if r == rc {
            return false;
        }
        let outside = r > rc;
        match sign {
            None => sign = Some(outside),
            Some(s) if s != outside => return false,
            _ => {}
        }
    }
    true
}

#[derive(Debug)]
struct Candidate {
    cost: f64,
    strength: usize,
    a: usize,
    b: usize,
    a_version: u32,
    b_version: u32,
    a_id: usize,
    b_id: usize,
}

impl Candidate {
    fn key(&self) -> (f64, std::cmp::Reverse<usize>, usize, usize) {
        (self.cost, std::cmp::Reverse(self.strength), self.a_id, self.b_id)
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // reversed: BinaryHeap is a max-heap and we want the cheapest first
    fn cmp(&self, other: &Self) -> Ordering {
        let (c1, s1, a1, b1) = self.key();
        let (c2, s2, a2, b2) = other.key();
        c2.total_cmp(&c1)
            .then_with(|| s2.cmp(&s1))
            .then_with(|| a2.cmp(&a1))
            .then_with(|| b2.cmp(&b1))
    }
}

fn candidate(arcs: &[Arc], a: usize, b: usize, n: usize, thr: f64) -> Option<Candidate> {
    let (ca, cb) = (&arcs[a], &arcs[b]);
    if ca.len() + cb.len() > n {
        return None;
    }
    let gap = (cb.start + n - ca.end(n)) % n;
    if gap == 0 || gap - 1 + cb.len() > n - ca.len() {
        return None;
    }
    let cost = (ca.radii[ca.len() - 1] - cb.radii[0]).abs() / gap as f64;
    (cost <= thr).then(|| Candidate {
        cost,
        strength: ca.measured + cb.measured,
        a,
        b,
        a_version: ca.version,
        b_version: cb.version,
        a_id: ca.id,
        b_id: cb.id,
    })
}

fn arcs_from_chains(chains: &[Chain], n: usize) -> Vec<Arc> {
    let mut arcs: Vec<Arc> = chains
        .iter()
        .filter(|c| c.len() >= 2 && c.len() <= n)
        .filter(|c| {
            c.nodes
                .windows(2)
                .all(|w| (w[0].ray + 1) % n == w[1].ray && w[0].radius > 0.0)
        })
        .map(|c| Arc {
            id: c.id,
            start: c.first_ray(),
            radii: c.nodes.iter().map(|node| node.radius).collect(),
            measured: c.len(),
            version: 0,
            alive: true,
        })
        .collect();
    arcs.sort_by_key(|a| a.id);

    // Input chains that already cross each other cannot both belong to a
    // valid web: keep the better supported one.
    let mut order: Vec<usize> = (0..arcs.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(arcs[i].measured), arcs[i].id));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let ok = kept
            .iter()
            .all(|&j| consistent_order(n, &arcs[j], |ray| arcs[i].radius_on(ray, n)));
        if ok {
            kept.push(i);
        } else {
            arcs[i].alive = false;
        }
    }
    arcs
}

/// Groups chains into closed rings around the pith. The output is sorted
/// by mean radius and always passes [`check_noncrossing`].
pub fn connect_chains(chains: &[Chain], pith: Pith, num_rays: usize, cfg: &SpiderwebConfig) -> RingSet {
    let n = num_rays;
    if n == 0 {
        return RingSet::empty(pith, n);
    }
    let mut arcs = arcs_from_chains(chains, n);

    let mut heap = BinaryHeap::new();
    for a in 0..arcs.len() {
        for b in 0..arcs.len() {
            if a != b && arcs[a].alive && arcs[b].alive {
                if let Some(c) = candidate(&arcs, a, b, n, cfg.smooth_thr) {
                    heap.push(c);
                }
            }
        }
    }

    while let Some(cand) = heap.pop() {
        let (a, b) = (cand.a, cand.b);
        let fresh = arcs[a].alive
            && arcs[b].alive
            && arcs[a].version == cand.a_version
            && arcs[b].version == cand.b_version;
        if !fresh {
            continue;
        }
        let gap = (arcs[b].start + n - arcs[a].end(n)) % n;
        let bridge = Bridge {
            a: &arcs[a],
            b: &arcs[b],
            gap,
        };
        let crosses = arcs.iter().enumerate().any(|(i, c)| {
            i != a && i != b && c.alive && !consistent_order(n, c, |ray| bridge.radius_on(ray, n))
        });
        if crosses {
            continue;
        }
        let radii = bridge.radii();
        let measured = arcs[a].measured + arcs[b].measured;
        let id = arcs[a].id.min(arcs[b].id);
        arcs[b].alive = false;
        let merged = &mut arcs[a];
        merged.radii = radii;
        merged.measured = measured;
        merged.id = id;
        merged.version += 1;
        for c in 0..arcs.len() {
            if c == a || !arcs[c].alive {
                continue;
            }
            if let Some(x) = candidate(&arcs, a, c, n, cfg.smooth_thr) {
                heap.push(x);
            }
            if let Some(x) = candidate(&arcs, c, a, n, cfg.smooth_thr) {
                heap.push(x);
            }
        }
    }

    // close chains with enough coverage
    let min_len = (cfg.min_coverage * n as f64).ceil() as usize;
    let mut closed: Vec<(usize, Ring)> = arcs
        .iter()
        .filter(|arc| arc.alive && arc.len() >= min_len.max(2))
        .map(|arc| {
            let mut radii = vec![0.0; n];
            for (off, &r) in arc.radii.iter().enumerate() {
                radii[(arc.start + off) % n] = r;
            }
            let gap = n - arc.len() + 1;
            let ra = arc.radii[arc.len() - 1];
            let rb = arc.radii[0];
            for j in 1..gap {
                let ray = (arc.end(n) + j) % n;
                radii[ray] = ra + (rb - ra) * j as f64 / gap as f64;
            }
            (
                arc.id,
                Ring {
                    radii,
                    measured: arc.measured,
                },
            )
        })
        .collect();

    // residual crossings (introduced by gap closing): keep the better
    // supported ring
    closed.sort_by_key(|(id, r)| (std::cmp::Reverse(r.measured), *id));
    let mut accepted: Vec<(usize, Ring)> = Vec::new();
    for (id, ring) in closed {
        let ok = accepted.iter().all(|(_, other)| {
            let outside = ring.radii[0] > other.radii[0];
            ring.radii
                .iter()
                .zip(&other.radii)
                .all(|(&r, &o)| r != o && (r > o) == outside)
        });
        if ok {
            accepted.push((id, ring));
        }
    }
    accepted.sort_by(|(ia, a), (ib, b)| a.mean_radius().total_cmp(&b.mean_radius()).then(ia.cmp(ib)));

    RingSet {
        rings: accepted.into_iter().map(|(_, r)| r).collect(),
        pith,
        num_rays: n,
    }
}
