//! Zhang–Suen thinning of binary masks down to 1-pixel-wide skeletons.
//!
//! Plain Zhang–Suen has two known defects that matter downstream: a
//! component that is exactly a 2x2 block is erased entirely, and a few
//! 2x2 foreground blocks can survive on thick diagonal strokes. After the
//! thinning passes we therefore (1) put back one pixel for every mask
//! component that lost all its pixels and (2) delete simple points from any
//! remaining 2x2 block.

use crate::raster::Mask;

// Neighbour offsets P2..P9: N, NE, E, SE, S, SW, W, NW.
const RING: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

/// Mask copy with a one-pixel zero border, so neighbourhood reads never go
/// out of bounds.
struct Grid {
    w: usize,
    cells: Vec<u8>,
}

impl Grid {
    fn from_mask(mask: &Mask) -> Self {
        let w = mask.width() + 2;
        let h = mask.height() + 2;
        let mut cells = vec![0u8; w * h];
        for y in 0..mask.height() {
            for x in 0..mask.width() {
                cells[(y + 1) * w + x + 1] = u8::from(mask.is_set(x, y));
            }
        }
        Self { w, cells }
    }

    #[inline]
    fn ring(&self, i: usize) -> [u8; 8] {
        let w = self.w as isize;
        let mut out = [0u8; 8];
        for (o, (dx, dy)) in out.iter_mut().zip(RING) {
            *o = self.cells[(i as isize + dy * w + dx) as usize];
        }
        out
    }

    #[inline]
    fn index(&self, x: usize, y: usize) -> usize {
        (y + 1) * self.w + x + 1
    }
}

fn transitions(p: &[u8; 8]) -> usize {
    (0..8).filter(|&k| p[k] == 0 && p[(k + 1) % 8] == 1).count()
}

/// Yokoi connectivity number for 8-connected foreground. A pixel whose
/// number is 1 can be deleted without changing the topology.
fn connectivity_number(p: &[u8; 8]) -> usize {
    // Yokoi indexes x1 = E, x2 = NE, x3 = N, ... counter-clockwise
    let x = |k: usize| -> i32 {
        let idx = [2, 1, 0, 7, 6, 5, 4, 3][k % 8];
        1 - p[idx] as i32
    };
    let mut n = 0;
    for k in [0, 2, 4, 6] {
        n += x(k) - x(k) * x(k + 1) * x(k + 2);
    }
    n as usize
}

/// Thins `mask` to a 1-pixel-wide, 8-connected skeleton contained in it.
pub fn skeletonize(mask: &Mask) -> Mask {
    let (w, h) = mask.dims();
    let mut g = Grid::from_mask(mask);
    let mut active: Vec<usize> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| mask.is_set(x, y))
        .map(|(x, y)| g.index(x, y))
        .collect();

    let mut doomed = Vec::new();
    loop {
        let mut changed = false;
        for step in 0..2 {
            doomed.clear();
            for &i in &active {
                let p = g.ring(i);
                let b: u8 = p.iter().sum();
                if !(2..=6).contains(&b) || transitions(&p) != 1 {
                    continue;
                }
                // p[0]=P2 N, p[2]=P4 E, p[4]=P6 S, p[6]=P8 W
                let (n, e, s, wv) = (p[0], p[2], p[4], p[6]);
                let keep = if step == 0 {
                    n * e * s != 0 || e * s * wv != 0
                } else {
                    n * e * wv != 0 || n * s * wv != 0
                };
                if !keep {
                    doomed.push(i);
                }
            }
            for &i in &doomed {
                g.cells[i] = 0;
            }
            if !doomed.is_empty() {
                changed = true;
                active.retain(|&i| g.cells[i] != 0);
            }
        }
        if !changed {
            break;
        }
    }

    restore_vanished_components(mask, &mut g);
    remove_square_blocks(&mut g, w, h);

    Mask::from_fn(w, h, |x, y| g.cells[g.index(x, y)]).expect("dimensions come from a valid mask")
}

/// 8-connected components of `mask`, as lists of pixel coordinates.
pub fn components(mask: &Mask) -> Vec<Vec<(usize, usize)>> {
    let (w, h) = mask.dims();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.is_set(x, y) || seen[y * w + x] {
                continue;
            }
            let mut comp = Vec::new();
            seen[y * w + x] = true;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                comp.push((cx, cy));
                for (dx, dy) in RING {
                    let nx = cx as isize + dx;
                    let ny = cy as isize + dy;
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if mask.is_set(nx, ny) && !seen[ny * w + nx] {
                        seen[ny * w + nx] = true;
                        stack.push((nx, ny));
                    }
                }
            }
            out.push(comp);
        }
    }
    out
}

fn restore_vanished_components(mask: &Mask, g: &mut Grid) {
    for comp in components(mask) {
        if comp.iter().any(|&(x, y)| g.cells[g.index(x, y)] != 0) {
            continue;
        }
        let n = comp.len() as f64;
        let cx = comp.iter().map(|p| p.0 as f64).sum::<f64>() / n;
        let cy = comp.iter().map(|p| p.1 as f64).sum::<f64>() / n;
        // nearest pixel to the centroid; components are in raster order so
        // the first minimum is deterministic
        let mut best = comp[0];
        let mut best_d = f64::INFINITY;
        for &(x, y) in &comp {
            let d = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            if d < best_d {
                best_d = d;
                best = (x, y);
            }
        }
        let i = g.index(best.0, best.1);
        g.cells[i] = 1;
    }
}

fn block_at(g: &Grid, i: usize) -> bool {
    g.cells[i] != 0 && g.cells[i + 1] != 0 && g.cells[i + g.w] != 0 && g.cells[i + g.w + 1] != 0
}

fn remove_square_blocks(g: &mut Grid, w: usize, h: usize) {
    loop {
        let blocks: Vec<usize> = (0..h.saturating_sub(1))
            .flat_map(|y| (0..w - 1).map(move |x| (x, y)))
            .map(|(x, y)| g.index(x, y))
            .filter(|&i| block_at(g, i))
            .collect();
        if blocks.is_empty() {
            return;
        }
        let mut removed = false;
        for &top_left in &blocks {
            if !block_at(g, top_left) {
                continue;
            }
            for i in [top_left, top_left + 1, top_left + g.w, top_left + g.w + 1] {
                if connectivity_number(&g.ring(i)) == 1 {
                    g.cells[i] = 0;
                    removed = true;
                    break;
                }
            }
        }
        if removed {
            continue;
        }
        // Every pixel of every block is a cut point (e.g. an X of diagonal
        // strokes). Width wins over connectivity here: drop the pixel with
        // the fewest neighbours.
        for &top_left in &blocks {
            if !block_at(g, top_left) {
                continue;
            }
            let victim = [top_left, top_left + 1, top_left + g.w, top_left + g.w + 1]
                .into_iter()
                .min_by_key(|&i| g.ring(i).iter().map(|&v| v as usize).sum::<usize>())
                .unwrap();
            g.cells[victim] = 0;
        }
    }
}

/// True when some 2x2 window is entirely foreground.
pub fn has_square_block(mask: &Mask) -> bool {
    let (w, h) = mask.dims();
    (0..h.saturating_sub(1)).any(|y| {
        (0..w.saturating_sub(1)).any(|x| {
            mask.is_set(x, y) && mask.is_set(x + 1, y) && mask.is_set(x, y + 1) && mask.is_set(x + 1, y + 1)
        })
    })
}
