//! Connected lesion regions of a binary mask.
//!
//! Regions are maximal sets of 8-connected foreground pixels. Labeling is the
//! classic two-pass scheme: the first raster pass assigns provisional labels
//! and records equivalences in a disjoint-set forest, the second resolves each
//! pixel to its root and accumulates per-region statistics.

use crate::mask_io::{LesionClass, LesionMask};

/// Inclusive pixel bounds of a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    pub min_row: usize,
    pub min_col: usize,
    pub max_row: usize,
    pub max_col: usize,
}

impl BoundingBox {
    fn point(row: usize, col: usize) -> Self {
        Self { min_row: row, min_col: col, max_row: row, max_col: col }
    }

    fn include(&mut self, row: usize, col: usize) {
        self.min_row = self.min_row.min(row);
        self.min_col = self.min_col.min(col);
        self.max_row = self.max_row.max(row);
        self.max_col = self.max_col.max(col);
    }

    pub fn area(&self) -> usize {
        (self.max_row - self.min_row + 1) * (self.max_col - self.min_col + 1)
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.min_row..=self.max_row).contains(&row) && (self.min_col..=self.max_col).contains(&col)
    }
}

/// One connected lesion region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Region {
    /// Number of member pixels.
    pub size: usize,
    pub bbox: BoundingBox,
    /// Lexicographically smallest `(row, col)` member pixel.
    pub seed: (usize, usize),
}

/// All regions of one mask, sorted by seed pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionSet {
    lesion_class: LesionClass,
    regions: Vec<Region>,
}

impl RegionSet {
    pub fn new(lesion_class: LesionClass, mut regions: Vec<Region>) -> Self {
        regions.sort_by_key(|r| r.seed);
        Self { lesion_class, regions }
    }

    /// A region set with regions of the given sizes and placeholder geometry.
    /// Useful when only sizes matter, as in feature construction.
    pub fn from_sizes(lesion_class: LesionClass, sizes: impl IntoIterator<Item = usize>) -> Self {
        let regions = sizes
            .into_iter()
            .enumerate()
            .map(|(i, size)| {
                let row = 2 * i;
                Region {
                    size,
                    bbox: BoundingBox { min_row: row, min_col: 0, max_row: row, max_col: size.max(1) - 1 },
                    seed: (row, 0),
                }
            })
            .collect();
        Self::new(lesion_class, regions)
    }

    pub fn lesion_class(&self) -> LesionClass {
        self.lesion_class
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.regions.iter().map(|r| r.size)
    }
}

/// Number of regions, |S| for one lesion class.
pub fn count_regions(region_set: &RegionSet) -> usize {
    region_set.len()
}

/// Disjoint-set forest with path compression and union by rank.
#[derive(Debug, Default)]
struct DisjointSets {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn make_set(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        self.rank.push(0);
        id
    }

    fn find(&mut self, x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut node = x;
        while self.parent[node as usize] != root {
            let next = self.parent[node as usize];
            self.parent[node as usize] = root;
            node = next;
        }
        root
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let (hi, lo) = if self.rank[ra as usize] >= self.rank[rb as usize] { (ra, rb) } else { (rb, ra) };
        self.parent[lo as usize] = hi;
        if self.rank[hi as usize] == self.rank[lo as usize] {
            self.rank[hi as usize] += 1;
        }
        hi
    }
}

const BACKGROUND: u32 = u32::MAX;

/// Labels the 8-connected foreground regions of `mask`.
pub fn extract_regions(mask: &LesionMask) -> RegionSet {
    let (width, height) = (mask.width(), mask.height());
    let pixels = mask.pixels();
    let mut labels = vec![BACKGROUND; pixels.len()];
    let mut sets = DisjointSets::default();

    // First pass: the already-visited neighbours are W, NW, N and NE.
    for row in 0..height {
        for col in 0..width {
            let idx = row * width + col;
            if !pixels[idx] {
                continue;
            }
            let mut label = BACKGROUND;
            let mut visit = |neighbour: u32, sets: &mut DisjointSets| {
                if neighbour != BACKGROUND {
                    label = if label == BACKGROUND { neighbour } else { sets.union(label, neighbour) };
                }
            };
            if col > 0 {
                visit(labels[idx - 1], &mut sets);
            }
            if row > 0 {
                let above = idx - width;
                if col > 0 {
                    visit(labels[above - 1], &mut sets);
                }
                visit(labels[above], &mut sets);
                if col + 1 < width {
                    visit(labels[above + 1], &mut sets);
                }
            }
            labels[idx] = if label == BACKGROUND { sets.make_set() } else { label };
        }
    }

    // Second pass. Raster order visits each region's smallest pixel first, so
    // regions are created already sorted by seed.
    let mut region_of_root = vec![usize::MAX; sets.parent.len()];
    let mut regions: Vec<Region> = Vec::new();
    for row in 0..height {
        for col in 0..width {
            let label = labels[row * width + col];
            if label == BACKGROUND {
                continue;
            }
            let root = sets.find(label) as usize;
            match region_of_root[root] {
                usize::MAX => {
                    region_of_root[root] = regions.len();
                    regions.push(Region { size: 1, bbox: BoundingBox::point(row, col), seed: (row, col) });
                }
                i => {
                    let region = &mut regions[i];
                    region.size += 1;
                    region.bbox.include(row, col);
                }
            }
        }
    }
    RegionSet::new(mask.lesion_class(), regions)
}
