//! Grid primitives shared by the simulator and the perception stack: cells,
//! dense binary bitmaps, and an exact Euclidean distance transform.

use serde::{Deserialize, Serialize};

/// A grid cell. `x` is the column, `y` the row. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn dist(self, other: Cell) -> f64 {
        (self.dist2(other) as f64).sqrt()
    }

    pub fn dist2(self, other: Cell) -> i64 {
        let dx = (self.x - other.x) as i64;
        let dy = (self.y - other.y) as i64;
        dx * dx + dy * dy
    }

    pub fn offset(self, dx: i32, dy: i32) -> Cell {
        Cell::new(self.x + dx, self.y + dy)
    }

    pub fn neighbors4(self) -> [Cell; 4] {
        [
            self.offset(1, 0),
            self.offset(-1, 0),
            self.offset(0, 1),
            self.offset(0, -1),
        ]
    }
}

impl From<[i32; 2]> for Cell {
    fn from(v: [i32; 2]) -> Self {
        Cell::new(v[0], v[1])
    }
}

impl From<Cell> for [i32; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

/// Width and height of a grid in cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub width: usize,
    pub height: usize,
}

impl GridDims {
    pub const fn new(width: usize, height: usize) -> Self {
        GridDims { width, height }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    /// Row-major flat index. Caller guarantees `contains(c)`.
    pub fn index(&self, c: Cell) -> usize {
        c.y as usize * self.width + c.x as usize
    }

    pub fn cell(&self, idx: usize) -> Cell {
        Cell::new((idx % self.width) as i32, (idx / self.width) as i32)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(move |i| self.cell(i))
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0)
    }
}

/// Axis-aligned inclusive cell rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRect {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
}

impl CellRect {
    pub fn intersects(&self, o: &CellRect) -> bool {
        self.x0 <= o.x1 && o.x0 <= self.x1 && self.y0 <= o.y1 && o.y0 <= self.y1
    }

    pub fn width(&self) -> i32 {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> i32 {
        self.y1 - self.y0 + 1
    }

    /// Diagonal length in cells, measured corner to corner of the covered area.
    pub fn diagonal(&self) -> f64 {
        let w = (self.width() - 1) as f64;
        let h = (self.height() - 1) as f64;
        (w * w + h * h).sqrt()
    }
}

/// Dense binary grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bitmap {
    dims: GridDims,
    bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(dims: GridDims) -> Self {
        Bitmap {
            dims,
            bits: vec![false; dims.len()],
        }
    }

    /// Builds a bitmap from cells; cells outside the grid are ignored.
    pub fn from_cells<'a>(dims: GridDims, cells: impl IntoIterator<Item = &'a Cell>) -> Self {
        let mut b = Bitmap::new(dims);
        for &c in cells {
            b.set(c, true);
        }
        b
    }

    pub fn from_bits(dims: GridDims, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), dims.len(), "bit count must match grid");
        Bitmap { dims, bits }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, c: Cell) -> bool {
        self.dims.contains(c) && self.bits[self.dims.index(c)]
    }

    pub fn get_index(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    pub fn set(&mut self, c: Cell, v: bool) {
        if self.dims.contains(c) {
            let i = self.dims.index(c);
            self.bits[i] = v;
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Set cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| self.dims.cell(i))
    }

    pub fn intersection_count(&self, other: &Bitmap) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| **a && **b)
            .count()
    }

    pub fn union_count(&self, other: &Bitmap) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| **a || **b)
            .count()
    }

    pub fn union_with(&mut self, other: &Bitmap) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }

    pub fn bbox(&self) -> Option<CellRect> {
        let mut it = self.cells();
        let first = it.next()?;
        let mut r = CellRect {
            x0: first.x,
            y0: first.y,
            x1: first.x,
            y1: first.y,
        };
        for c in it {
            r.x0 = r.x0.min(c.x);
            r.x1 = r.x1.max(c.x);
            r.y0 = r.y0.min(c.y);
            r.y1 = r.y1.max(c.y);
        }
        Some(r)
    }

    /// Set cells with at least one 4-neighbor outside the set (grid edge counts
    /// as outside).
    pub fn boundary_cells(&self) -> Vec<Cell> {
        self.cells()
            .filter(|c| c.neighbors4().iter().any(|n| !self.get(*n)))
            .collect()
    }

    /// Number of unit edges separating set cells from non-set cells.
    pub fn perimeter(&self) -> usize {
        self.cells()
            .map(|c| c.neighbors4().iter().filter(|n| !self.get(**n)).count())
            .sum()
    }

    /// Centroid of the set cells in cell coordinates.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let mut n = 0usize;
        let (mut sx, mut sy) = (0.0, 0.0);
        for c in self.cells() {
            n += 1;
            sx += c.x as f64;
            sy += c.y as f64;
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    /// 4-connected components, each listed in row-major order; components are
    /// ordered by their first cell.
    pub fn components(&self) -> Vec<Vec<Cell>> {
        let mut seen = vec![false; self.dims.len()];
        let mut out = Vec::new();
        for start in self.cells() {
            let si = self.dims.index(start);
            if seen[si] {
                continue;
            }
            seen[si] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(c) = stack.pop() {
                comp.push(c);
                for n in c.neighbors4() {
                    if self.get(n) {
                        let ni = self.dims.index(n);
                        if !seen[ni] {
                            seen[ni] = true;
                            stack.push(n);
                        }
                    }
                }
            }
            comp.sort_by_key(|c| (c.y, c.x));
            out.push(comp);
        }
        out
    }

    /// Exact squared Euclidean distance from every cell to the nearest cell
    /// outside the set. Cells beyond the grid edge count as outside, so a set
    /// touching the border sees distance 1 there. Unset cells get 0.
    pub fn distance_to_complement_sq(&self) -> Vec<i64> {
        // Work on a grid padded by one background ring so the border is honored.
        let w = self.dims.width + 2;
        let h = self.dims.height + 2;
        let inf = i64::MAX / 4;
        let mut f = vec![inf; w * h];
        for y in 0..h {
            for x in 0..w {
                let inside = x >= 1
                    && y >= 1
                    && x <= self.dims.width
                    && y <= self.dims.height
                    && self.bits[(y - 1) * self.dims.width + (x - 1)];
                if !inside {
                    f[y * w + x] = 0;
                }
            }
        }
        let mut col = vec![0i64; h];
        let mut out_col = vec![0i64; h];
        for x in 0..w {
            for y in 0..h {
                col[y] = f[y * w + x];
            }
            edt_1d(&col, &mut out_col);
            for y in 0..h {
                f[y * w + x] = out_col[y];
            }
        }
        let mut row = vec![0i64; w];
        let mut out_row = vec![0i64; w];
        for y in 0..h {
            row.copy_from_slice(&f[y * w..(y + 1) * w]);
            edt_1d(&row, &mut out_row);
            f[y * w..(y + 1) * w].copy_from_slice(&out_row);
        }
        let mut out = vec![0i64; self.dims.len()];
        for y in 0..self.dims.height {
            for x in 0..self.dims.width {
                out[y * self.dims.width + x] = f[(y + 1) * w + (x + 1)];
            }
        }
        out
    }
}

/// One-dimensional squared distance transform of a sampled function
/// (lower envelope of parabolas).
fn edt_1d(f: &[i64], d: &mut [i64]) {
    let n = f.len();
    let inf = i64::MAX / 4;
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    let mut k = 0usize;
    // Skip leading infinite samples: they cannot host a parabola.
    let first = match f.iter().position(|&x| x < inf) {
        Some(p) => p,
        None => {
            d.iter_mut().for_each(|x| *x = inf);
            return;
        }
    };
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if f[q] >= inf {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as i64) - (f[p] + (p * p) as i64)) as f64
                / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, dq) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dx = q as i64 - p as i64;
        *dq = dx * dx + f[p];
    }
}
