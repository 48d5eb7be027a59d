use super::{binary_band, mask_like, MorphError};
use crate::raster::GeoRaster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

/// Component label per pixel (0 = background, 1..=K in raster order of
/// first appearance) and the pixel count of each component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentLabeling {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    /// `counts[k - 1]` is the size of component `k`.
    pub counts: Vec<usize>,
}

impl ComponentLabeling {
    pub fn component_count(&self) -> usize {
        self.counts.len()
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Two-pass union-find labeling.
pub fn connected_components(mask: &GeoRaster<u8>, connectivity: Connectivity) -> Result<ComponentLabeling, MorphError> {
    let band = binary_band(mask)?;
    Ok(label_band(band, mask.width(), mask.height(), connectivity))
}

pub(crate) fn label_band(band: &[u8], w: usize, h: usize, connectivity: Connectivity) -> ComponentLabeling {
    let mut provisional = vec![u32::MAX; w * h];
    let mut ds = DisjointSet { parent: Vec::new() };
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if band[i] == 0 {
                continue;
            }
            let mut neighbors = [u32::MAX; 4];
            let mut n = 0;
            let mut push = |j: usize| {
                if provisional[j] != u32::MAX {
                    neighbors[n] = provisional[j];
                    n += 1;
                }
            };
            if x > 0 {
                push(i - 1);
            }
            if y > 0 {
                push(i - w);
                if connectivity == Connectivity::Eight {
                    if x > 0 {
                        push(i - w - 1);
                    }
                    if x + 1 < w {
                        push(i - w + 1);
                    }
                }
            }
            let label = if n == 0 {
                ds.make()
            } else {
                let first = neighbors[0];
                for &other in &neighbors[1..n] {
                    ds.union(first, other);
                }
                first
            };
            provisional[i] = label;
        }
    }
    let mut remap = vec![0u32; ds.parent.len()];
    let mut counts = Vec::new();
    let mut labels = vec![0u32; w * h];
    for i in 0..w * h {
        let p = provisional[i];
        if p == u32::MAX {
            continue;
        }
        let root = ds.find(p) as usize;
        if remap[root] == 0 {
            counts.push(0);
            remap[root] = counts.len() as u32;
        }
        let k = remap[root];
        labels[i] = k;
        counts[k as usize - 1] += 1;
    }
    ComponentLabeling { width: w, height: h, labels, counts }
}

/// Clears every 8-connected component with fewer than `min_area` pixels.
pub fn remove_small_components(mask: &GeoRaster<u8>, min_area: usize) -> Result<GeoRaster<u8>, MorphError> {
    let band = binary_band(mask)?;
    let cc = label_band(band, mask.width(), mask.height(), Connectivity::Eight);
    let out = cc
        .labels
        .iter()
        .map(|&k| (k != 0 && cc.counts[k as usize - 1] >= min_area) as u8)
        .collect();
    Ok(mask_like(mask, out))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::raster::GeoTransform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::VecDeque;

    /// Breadth-first flood fill, labels in raster order of first pixel.
    pub(crate) fn flood_fill(band: &[u8], w: usize, h: usize, eight: bool) -> (Vec<u32>, Vec<usize>) {
        let mut labels = vec![0u32; w * h];
        let mut sizes = Vec::new();
        for start in 0..w * h {
            if band[start] == 0 || labels[start] != 0 {
                continue;
            }
            sizes.push(0);
            let k = sizes.len() as u32;
            let mut q = VecDeque::from([start]);
            labels[start] = k;
            while let Some(i) = q.pop_front() {
                sizes[k as usize - 1] += 1;
                let (x, y) = ((i % w) as i64, (i / w) as i64);
                for dy in -1..=1i64 {
                    for dx in -1..=1i64 {
                        if (dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0) {
                            continue;
                        }
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let j = ny as usize * w + nx as usize;
                        if band[j] == 1 && labels[j] == 0 {
                            labels[j] = k;
                            q.push_back(j);
                        }
                    }
                }
            }
        }
        (labels, sizes)
    }

    fn mask_from(band: Vec<u8>, w: usize, h: usize) -> GeoRaster<u8> {
        GeoRaster::new(w, h, GeoTransform::default(), crate::raster::BandSemantics::BinaryMask, vec![band]).unwrap()
    }

    fn blob(w: usize, band: &mut [u8], x0: usize, y0: usize, size: usize) {
        // fills `size` pixels row by row inside a 10-wide box
        for k in 0..size {
            band[(y0 + k / 10) * w + x0 + k % 10] = 1;
        }
    }

    #[test]
    fn empty_mask_has_no_components() {
        let m = mask_from(vec![0; 16], 4, 4);
        assert_eq!(connected_components(&m, Connectivity::Eight).unwrap().component_count(), 0);
        assert_eq!(remove_small_components(&m, 100).unwrap(), m);
    }

    #[test]
    fn diagonal_pixels_depend_on_connectivity() {
        let m = mask_from(vec![1, 0, 0, 1], 2, 2);
        assert_eq!(connected_components(&m, Connectivity::Eight).unwrap().component_count(), 1);
        assert_eq!(connected_components(&m, Connectivity::Four).unwrap().component_count(), 2);
    }

    #[test]
    fn labels_match_flood_fill() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let band: Vec<u8> = (0..64 * 64).map(|_| rng.gen_bool(0.45) as u8).collect();
            let m = mask_from(band.clone(), 64, 64);
            for (conn, eight) in [(Connectivity::Eight, true), (Connectivity::Four, false)] {
                let cc = connected_components(&m, conn).unwrap();
                let (labels, sizes) = flood_fill(&band, 64, 64, eight);
                assert_eq!(cc.labels, labels);
                assert_eq!(cc.counts, sizes);
            }
        }
    }

    #[test]
    fn area_threshold_is_strict() {
        let (w, h) = (80, 40);
        let mut band = vec![0u8; w * h];
        blob(w, &mut band, 1, 1, 99);
        blob(w, &mut band, 20, 1, 100);
        let out = remove_small_components(&mask_from(band, w, h), 100).unwrap();
        assert_eq!(out.count_nonzero(), 100);
        assert_eq!(out.get(0, 20, 1), 1);
        assert_eq!(out.get(0, 1, 1), 0);
    }

    #[test]
    fn sizes_50_100_300() {
        let (w, h) = (80, 40);
        let mut band = vec![0u8; w * h];
        blob(w, &mut band, 1, 1, 50);
        blob(w, &mut band, 15, 1, 100);
        blob(w, &mut band, 30, 1, 300);
        let out = remove_small_components(&mask_from(band, w, h), 100).unwrap();
        let (_, sizes) = flood_fill(out.band(0), w, h, true);
        assert_eq!(sizes, vec![100, 300]);
    }

    #[test]
    fn raising_min_area_never_adds_pixels() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let band: Vec<u8> = (0..50 * 50).map(|_| rng.gen_bool(0.4) as u8).collect();
        let m = mask_from(band, 50, 50);
        let mut prev = m.band(0).to_vec();
        for min_area in [1, 2, 5, 10, 50, 100, 1000] {
            let out = remove_small_components(&m, min_area).unwrap();
            assert!(out.band(0).iter().zip(&prev).all(|(&a, &b)| a <= b));
            prev = out.band(0).to_vec();
        }
    }
}
