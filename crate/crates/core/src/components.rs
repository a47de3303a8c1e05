//! Connected-component labeling on boolean masks (two-pass union-find).

use crate::grid::Grid;

/// Pixel adjacency used when labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            // Path halving.
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            // Attach the larger root to the smaller so roots stay raster-minimal.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Label the true pixels of `mask`. Background is 0; components are numbered
/// 1..=K in raster order of their first pixel.
pub fn connected_components(mask: &Grid<bool>, connectivity: Connectivity) -> Grid<u32> {
    let (h, w) = mask.shape();
    let mut uf = UnionFind::new(h * w);

    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) {
                continue;
            }
            let i = (r * w + c) as u32;
            if c > 0 && mask.get(r, c - 1) {
                uf.union(i, i - 1);
            }
            if r > 0 {
                if mask.get(r - 1, c) {
                    uf.union(i, i - w as u32);
                }
                if connectivity == Connectivity::Eight {
                    if c > 0 && mask.get(r - 1, c - 1) {
                        uf.union(i, i - w as u32 - 1);
                    }
                    if c + 1 < w && mask.get(r - 1, c + 1) {
                        uf.union(i, i - w as u32 + 1);
                    }
                }
            }
        }
    }

    // Second pass: assign labels in raster order of the first pixel per root.
    let mut out = Grid::filled(h, w, 0u32);
    let mut label_of_root: Vec<u32> = vec![0; h * w];
    let mut next = 1u32;
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) {
                continue;
            }
            let root = uf.find((r * w + c) as u32) as usize;
            if label_of_root[root] == 0 {
                label_of_root[root] = next;
                next += 1;
            }
            out.set(r, c, label_of_root[root]);
        }
    }
    out
}

/// Pixel count per label (index 0 is background).
pub fn component_sizes(labels: &Grid<u32>) -> Vec<usize> {
    let max = labels.iter().copied().max().unwrap_or(0) as usize;
    let mut sizes = vec![0usize; max + 1];
    for &l in labels.iter() {
        sizes[l as usize] += 1;
    }
    sizes
}

/// Zero out labels whose component is smaller than `min_size`, then renumber
/// the survivors 1..=K in raster order of their first pixel.
pub fn drop_small_components(labels: &Grid<u32>, min_size: usize) -> Grid<u32> {
    let sizes = component_sizes(labels);
    let mut remap: Vec<u32> = vec![0; sizes.len()];
    let mut next = 1u32;
    let mut out = Grid::filled(labels.height(), labels.width(), 0u32);
    for ((r, c), l) in labels.indexed_iter() {
        if l == 0 || sizes[l as usize] < min_size {
            continue;
        }
        if remap[l as usize] == 0 {
            remap[l as usize] = next;
            next += 1;
        }
        out.set(r, c, remap[l as usize]);
    }
    out
}
