use std::collections::BTreeMap;

use crate::model::{CellId, Matrix, RegionConfig};

/// Binary grid mask indexed by `(cx, cy)`; `cy` grows northward.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub cols: usize,
    pub rows: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(cols: usize, rows: usize) -> Self {
        Self {
            cols,
            rows,
            bits: vec![false; cols * rows],
        }
    }

    pub fn get(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.cols
            && (y as usize) < self.rows
            && self.bits[y as usize * self.cols + x as usize]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.cols + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Foreground cells where the matrix, collapsed over time with `Max`, is non-zero.
    pub fn from_matrix(m: &Matrix) -> Self {
        let mut max: BTreeMap<CellId, f64> = BTreeMap::new();
        for o in m.rows() {
            let e = max.entry(o.cell).or_insert(o.value);
            *e = e.max(o.value);
        }
        let mut mask = Self::new(m.grid.cols() as usize, m.grid.rows() as usize);
        for (c, v) in max {
            if v != 0.0 {
                mask.set(c.cx as usize, c.cy as usize, true);
            }
        }
        mask
    }

    pub fn to_matrix(&self, grid: &RegionConfig) -> Matrix {
        let cells = (0..self.rows).flat_map(|y| (0..self.cols).map(move |x| (x, y)));
        Matrix::new_static(
            *grid,
            cells
                .filter(|&(x, y)| self.get(x as i64, y as i64))
                .map(|(x, y)| (CellId::new(x as u32, y as u32), 1.0))
                .collect::<Vec<_>>(),
        )
    }

    /// Number of 8-connected foreground components.
    pub fn components(&self) -> usize {
        let mut seen = vec![false; self.bits.len()];
        let mut n = 0;
        for start in 0..self.bits.len() {
            if !self.bits[start] || seen[start] {
                continue;
            }
            n += 1;
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(i) = stack.pop() {
                let (x, y) = ((i % self.cols) as i64, (i / self.cols) as i64);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if self.get(nx, ny) {
                            let j = ny as usize * self.cols + nx as usize;
                            if !seen[j] {
                                seen[j] = true;
                                stack.push(j);
                            }
                        }
                    }
                }
            }
        }
        n
    }

    /// Neighbors P2..P9, clockwise from north.
    fn neighbors(&self, x: usize, y: usize) -> [bool; 8] {
        let (x, y) = (x as i64, y as i64);
        [
            self.get(x, y + 1),
            self.get(x + 1, y + 1),
            self.get(x + 1, y),
            self.get(x + 1, y - 1),
            self.get(x, y - 1),
            self.get(x - 1, y - 1),
            self.get(x - 1, y),
            self.get(x - 1, y + 1),
        ]
    }
}

/// `(B, A)`: foreground neighbor count and 0->1 transitions around the ring.
fn ring_stats(p: &[bool; 8]) -> (usize, usize) {
    let b = p.iter().filter(|v| **v).count();
    let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
    (b, a)
}

fn simple(p: &[bool; 8]) -> bool {
    let (b, a) = ring_stats(p);
    (2..=6).contains(&b) && a == 1
}

/// Zhang-Suen thinning. Candidates of each sub-iteration are marked against
/// the mask as it stood, then removed one at a time in row-major order; a
/// candidate is kept if earlier removals made it no longer simple, so
/// two-cell-thick runs cannot vanish or split.
pub fn zhang_suen(mask: &Mask) -> Mask {
    let mut m = mask.clone();
    loop {
        let mut changed = false;
        for step in 0..2 {
            let mut marked = Vec::new();
            for y in 0..m.rows {
                for x in 0..m.cols {
                    if !m.get(x as i64, y as i64) {
                        continue;
                    }
                    let p = m.neighbors(x, y);
                    let [p2, _, p4, _, p6, _, p8, _] = p;
                    let cond = if step == 0 {
                        !(p2 && p4 && p6) && !(p4 && p6 && p8)
                    } else {
                        !(p2 && p4 && p8) && !(p2 && p6 && p8)
                    };
                    if cond && simple(&p) {
                        marked.push((x, y));
                    }
                }
            }
            for (x, y) in marked {
                if simple(&m.neighbors(x, y)) {
                    m.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            return m;
        }
    }
}

/// Skeleton of a matrix's non-zero region as a static 0/1 matrix.
pub fn thin(m: &Matrix) -> Matrix {
    zhang_suen(&Mask::from_matrix(m)).to_matrix(&m.grid)
}
