//! Directional sequential thinning.
//!
//! Each pass takes the border pixels facing one direction (N, S, E, W), then
//! deletes them one by one in raster order whenever the pixel is still
//! simple and not a line end. Deleting only simple pixels keeps the
//! 8-connected topology. Any 2×2 block left at the fixpoint is broken by
//! removing one of its pixels (plus whatever hangs only off it).

use std::collections::VecDeque;
use std::sync::OnceLock;

use super::{binary_band, mask_like, MorphError};
use crate::raster::GeoRaster;

/// Ring of the 8 neighbors, clockwise from east with rows growing down.
const RING: [(i64, i64); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

fn simple_table() -> &'static [bool; 256] {
    static TABLE: OnceLock<[bool; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [false; 256];
        for (cfg, slot) in t.iter_mut().enumerate() {
            *slot = compute_simple(cfg as u8);
        }
        t
    })
}

/// Simple pixel test on a neighborhood configuration (bit k = RING[k]):
/// exactly one 8-component of foreground neighbors and exactly one
/// 4-component of background neighbors touching a 4-neighbor.
fn compute_simple(cfg: u8) -> bool {
    let fg = |k: usize| cfg >> k & 1 == 1;
    let components = |want_fg: bool, eight: bool| -> Vec<Vec<usize>> {
        let mut seen = [false; 8];
        let mut comps = Vec::new();
        for s in 0..8 {
            if seen[s] || fg(s) != want_fg {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut i = 0;
            while i < comp.len() {
                let a = RING[comp[i]];
                for (t, &b) in RING.iter().enumerate() {
                    if seen[t] || fg(t) != want_fg {
                        continue;
                    }
                    let (dx, dy) = ((a.0 - b.0).abs(), (a.1 - b.1).abs());
                    let adjacent = if eight { dx.max(dy) == 1 } else { dx + dy == 1 };
                    if adjacent {
                        seen[t] = true;
                        comp.push(t);
                    }
                }
                i += 1;
            }
            comps.push(comp);
        }
        comps
    };
    let fg_comps = components(true, true).len();
    let bg_comps = components(false, false)
        .into_iter()
        .filter(|c| c.iter().any(|&k| k % 2 == 0))
        .count();
    fg_comps == 1 && bg_comps == 1
}

struct Canvas {
    w: usize,
    h: usize,
    px: Vec<u8>,
}

impl Canvas {
    #[inline]
    fn at(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.w && (y as usize) < self.h && self.px[y as usize * self.w + x as usize] == 1
    }

    #[inline]
    fn config(&self, x: i64, y: i64) -> u8 {
        let mut cfg = 0u8;
        for (k, (dx, dy)) in RING.iter().enumerate() {
            if self.at(x + dx, y + dy) {
                cfg |= 1 << k;
            }
        }
        cfg
    }

    fn pass(&mut self, dir: (i64, i64)) -> bool {
        let table = simple_table();
        let mut candidates = Vec::new();
        for y in 0..self.h {
            for x in 0..self.w {
                if self.px[y * self.w + x] == 1 && !self.at(x as i64 + dir.0, y as i64 + dir.1) {
                    candidates.push((x as i64, y as i64));
                }
            }
        }
        let mut changed = false;
        for (x, y) in candidates {
            let cfg = self.config(x, y);
            if cfg.count_ones() >= 2 && table[cfg as usize] {
                self.px[y as usize * self.w + x as usize] = 0;
                changed = true;
            }
        }
        changed
    }

    fn first_block(&self) -> Option<(i64, i64)> {
        for y in 0..self.h.saturating_sub(1) {
            for x in 0..self.w.saturating_sub(1) {
                let i = y * self.w + x;
                if self.px[i] & self.px[i + 1] & self.px[i + self.w] & self.px[i + self.w + 1] == 1 {
                    return Some((x as i64, y as i64));
                }
            }
        }
        None
    }

    /// Pixels that would lose their connection to `anchors` if `p` were
    /// removed.
    fn detached_by(&self, p: (i64, i64), anchors: &[(i64, i64)]) -> Vec<(i64, i64)> {
        let mut detached = Vec::new();
        let mut visited = std::collections::HashSet::new();
        visited.insert(p);
        for (dx, dy) in RING {
            let n = (p.0 + dx, p.1 + dy);
            if !self.at(n.0, n.1) || visited.contains(&n) || anchors.contains(&n) {
                continue;
            }
            let mut piece = vec![n];
            let mut local = std::collections::HashSet::from([n]);
            let mut q = VecDeque::from([n]);
            let mut attached = false;
            'bfs: while let Some(c) = q.pop_front() {
                for (ex, ey) in RING {
                    let m = (c.0 + ex, c.1 + ey);
                    if m == p || !self.at(m.0, m.1) || local.contains(&m) {
                        continue;
                    }
                    if anchors.contains(&m) || visited.contains(&m) {
                        attached = true;
                        break 'bfs;
                    }
                    local.insert(m);
                    piece.push(m);
                    q.push_back(m);
                }
            }
            if attached {
                visited.extend(local);
            } else {
                visited.extend(local);
                detached.extend(piece);
            }
        }
        detached
    }

    /// Removes one pixel of the first 2×2 block; returns false if none exists.
    fn break_block(&mut self) -> bool {
        let Some((x, y)) = self.first_block() else { return false };
        let block = [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)];
        let table = simple_table();
        for &(bx, by) in &block {
            if table[self.config(bx, by) as usize] {
                self.px[by as usize * self.w + bx as usize] = 0;
                return true;
            }
        }
        let (victim, loose) = block
            .iter()
            .map(|&b| {
                let rest: Vec<_> = block.iter().copied().filter(|&o| o != b).collect();
                (b, self.detached_by(b, &rest))
            })
            .min_by_key(|(_, d)| d.len())
            .expect("block has four pixels");
        for (px, py) in std::iter::once(victim).chain(loose) {
            self.px[py as usize * self.w + px as usize] = 0;
        }
        true
    }
}

/// Thins a binary mask to one-pixel-wide lines.
///
/// The result is a subset of the input without any 2×2 foreground block,
/// with the same number of 8-connected components, and is a fixpoint of
/// this function.
pub fn skeletonize(mask: &GeoRaster<u8>) -> Result<GeoRaster<u8>, MorphError> {
    let band = binary_band(mask)?;
    let mut c = Canvas { w: mask.width(), h: mask.height(), px: band.to_vec() };
    loop {
        let mut changed = false;
        for dir in [(0, -1), (0, 1), (1, 0), (-1, 0)] {
            changed |= c.pass(dir);
        }
        if !changed && !c.break_block() {
            break;
        }
    }
    Ok(mask_like(mask, c.px))
}

/// Whether the pixel at (`col`, `row`) could be removed without changing
/// the 8-connected topology of `mask`.
pub fn is_simple(mask: &GeoRaster<u8>, col: usize, row: usize) -> bool {
    let c = Canvas { w: mask.width(), h: mask.height(), px: mask.band(0).to_vec() };
    simple_table()[c.config(col as i64, row as i64) as usize]
}
