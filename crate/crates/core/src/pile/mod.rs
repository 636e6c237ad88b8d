//! Layered 2.5D garment piles.
//!
//! A pile is an ordered stack of garment footprints on a cell grid. Later
//! entries sit on top. Everything downstream (occlusion, depth, co-lifting,
//! sag, wall collisions) is derived from the footprints and the stack order.

mod footprint;
mod generate;
mod io;
mod oracle;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::color::{PaletteColor, Rgb};
use crate::error::{Error, Result};
use crate::grid::{Bitmap, Cell, CellRect, GridDims};

pub use generate::{generate_scene, BoundaryKind, SceneConfig};
pub use io::SceneFile;
pub use oracle::{
    apply_retrieval, drop_back, lifted_scene, render_lifted, sag_length, shake_perturb,
    simulate_dual_delivery, simulate_single_grasp, GraspOracle, GraspOutcome, GraspResult,
    ShakeConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Dress,
    Trousers,
    Tops,
    Skirt,
    Socks,
    Glove,
    Hat,
    Scarf,
    Underpants,
}

impl Category {
    pub const ALL: [Category; 9] = [
        Category::Dress,
        Category::Trousers,
        Category::Tops,
        Category::Skirt,
        Category::Socks,
        Category::Glove,
        Category::Hat,
        Category::Scarf,
        Category::Underpants,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Dress => "dress",
            Category::Trousers => "trousers",
            Category::Tops => "tops",
            Category::Skirt => "skirt",
            Category::Socks => "socks",
            Category::Glove => "glove",
            Category::Hat => "hat",
            Category::Scarf => "scarf",
            Category::Underpants => "underpants",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Category::ALL
            .iter()
            .copied()
            .find(|c| c.name() == lower || format!("{}s", c.name()) == lower)
            .ok_or_else(|| format!("unknown garment category `{s}`"))
    }
}

/// Footprint family used by the procedural generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    TShape,
    Trapezoid,
    TwoLeg,
    LShape,
    Palm,
    Disk,
    Strip,
    Notched,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarmentSpec {
    pub id: u32,
    pub category: Category,
    pub color: Rgb,
    /// Footprint cells, row-major sorted.
    pub cells: Vec<Cell>,
    pub shape: ShapeClass,
}

impl GarmentSpec {
    pub fn new(id: u32, category: Category, color: Rgb, mut cells: Vec<Cell>, shape: ShapeClass) -> Self {
        cells.sort_by_key(|c| (c.y, c.x));
        cells.dedup();
        GarmentSpec {
            id,
            category,
            color,
            cells,
            shape,
        }
    }

    pub fn area(&self) -> usize {
        self.cells.len()
    }

    pub fn palette(&self) -> PaletteColor {
        PaletteColor::nearest(self.color)
    }

    pub fn contains(&self, c: Cell) -> bool {
        self.cells
            .binary_search_by_key(&(c.y, c.x), |k| (k.y, k.x))
            .is_ok()
    }

    pub fn bbox(&self) -> Option<CellRect> {
        let first = self.cells.first()?;
        let mut r = CellRect {
            x0: first.x,
            y0: first.y,
            x1: first.x,
            y1: first.y,
        };
        for c in &self.cells {
            r.x0 = r.x0.min(c.x);
            r.x1 = r.x1.max(c.x);
            r.y0 = r.y0.min(c.y);
            r.y1 = r.y1.max(c.y);
        }
        Some(r)
    }

    pub fn translated(&self, dx: i32, dy: i32) -> GarmentSpec {
        GarmentSpec {
            cells: self.cells.iter().map(|c| c.offset(dx, dy)).collect(),
            ..self.clone()
        }
    }

    pub fn is_connected(&self) -> bool {
        if self.cells.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.cells.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut n = 1;
        while let Some(i) = stack.pop() {
            for nb in self.cells[i].neighbors4() {
                if let Ok(j) = self.cells.binary_search_by_key(&(nb.y, nb.x), |k| (k.y, k.x)) {
                    if !seen[j] {
                        seen[j] = true;
                        n += 1;
                        stack.push(j);
                    }
                }
            }
        }
        n == self.cells.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Boundary {
    Open,
    /// Walled container; `container` is the inclusive interior rectangle.
    Closed { container: CellRect, wall_margin: i32 },
}

impl Boundary {
    /// Distance in cells from `c` to the nearest wall, `None` when open.
    /// Cells touching a wall have distance 0.
    pub fn wall_distance(&self, c: Cell) -> Option<i32> {
        match self {
            Boundary::Open => None,
            Boundary::Closed { container: r, .. } => {
                Some((c.x - r.x0).min(r.x1 - c.x).min(c.y - r.y0).min(r.y1 - c.y))
            }
        }
    }

    /// True when a gripper at `c` would hit the container wall.
    pub fn collides(&self, c: Cell) -> bool {
        match self {
            Boundary::Open => false,
            Boundary::Closed { wall_margin, .. } => {
                self.wall_distance(c).is_some_and(|d| d < *wall_margin)
            }
        }
    }
}

/// Overlap coupling between two garments; `a` is the lower one in the stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entanglement {
    pub a: u32,
    pub b: u32,
    pub w: f64,
}

/// World state: the pile.
#[derive(Debug, Clone, PartialEq)]
pub struct PileScene {
    pub dims: GridDims,
    /// Meters per cell.
    pub cell_size: f64,
    /// Height added by each covering garment, in meters.
    pub layer_thickness: f64,
    /// Container floor height added to every cell inside a closed container.
    pub floor_offset: f64,
    pub boundary: Boundary,
    /// Bottom to top.
    pub stack: Vec<GarmentSpec>,
    pub entanglement: Vec<Entanglement>,
    pub seed: u64,
}

pub const BACKGROUND: Rgb = Rgb([60, 60, 70]);

/// RGB-D frame rendered from a pile.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub dims: GridDims,
    pub cell_size: f64,
    pub background: Rgb,
    /// Row-major colors.
    pub color: Vec<Rgb>,
    /// Row-major heights in meters.
    pub depth: Vec<f64>,
}

impl Observation {
    pub fn color_at(&self, c: Cell) -> Rgb {
        self.color[self.dims.index(c)]
    }

    pub fn depth_at(&self, c: Cell) -> f64 {
        self.depth[self.dims.index(c)]
    }

    pub fn is_covered(&self, c: Cell) -> bool {
        self.color_at(c) != self.background
    }
}

impl PileScene {
    /// An empty scene with default physical constants.
    pub fn empty(dims: GridDims, boundary: Boundary) -> Self {
        PileScene {
            dims,
            cell_size: 0.02,
            layer_thickness: 0.005,
            floor_offset: 0.0,
            boundary,
            stack: Vec::new(),
            entanglement: Vec::new(),
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.stack.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stack.is_empty()
    }

    pub fn stack_index(&self, id: u32) -> Option<usize> {
        self.stack.iter().position(|g| g.id == id)
    }

    pub fn garment(&self, id: u32) -> Option<&GarmentSpec> {
        self.stack.iter().find(|g| g.id == id)
    }

    pub fn ids(&self) -> Vec<u32> {
        self.stack.iter().map(|g| g.id).collect()
    }

    pub fn entanglement_between(&self, a: u32, b: u32) -> f64 {
        self.entanglement
            .iter()
            .find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a))
            .map_or(0.0, |e| e.w)
    }

    /// Rectangle every footprint must stay inside.
    pub fn placement_region(&self) -> CellRect {
        match self.boundary {
            Boundary::Open => CellRect {
                x0: 0,
                y0: 0,
                x1: self.dims.width as i32 - 1,
                y1: self.dims.height as i32 - 1,
            },
            Boundary::Closed { container, .. } => container,
        }
    }

    /// Per-cell list of covering stack indices, ascending.
    pub fn cover_lists(&self) -> Vec<Vec<usize>> {
        let mut cover = vec![Vec::new(); self.dims.len()];
        for (si, g) in self.stack.iter().enumerate() {
            for &c in &g.cells {
                if self.dims.contains(c) {
                    cover[self.dims.index(c)].push(si);
                }
            }
        }
        cover
    }

    /// Stack index of the topmost garment per cell.
    pub fn top_map(&self) -> Vec<Option<usize>> {
        let mut top = vec![None; self.dims.len()];
        for (si, g) in self.stack.iter().enumerate() {
            for &c in &g.cells {
                if self.dims.contains(c) {
                    top[self.dims.index(c)] = Some(si);
                }
            }
        }
        top
    }

    pub fn topmost_at(&self, c: Cell) -> Option<&GarmentSpec> {
        self.stack.iter().rev().find(|g| g.contains(c))
    }

    pub fn footprint(&self, id: u32) -> Option<Bitmap> {
        self.garment(id).map(|g| Bitmap::from_cells(self.dims, &g.cells))
    }

    /// Cells where each garment is the topmost cover. Every garment in the
    /// stack has an entry, possibly empty.
    pub fn visible_regions(&self) -> BTreeMap<u32, Vec<Cell>> {
        let mut out: BTreeMap<u32, Vec<Cell>> = self.stack.iter().map(|g| (g.id, Vec::new())).collect();
        for (i, t) in self.top_map().into_iter().enumerate() {
            if let Some(si) = t {
                out.get_mut(&self.stack[si].id)
                    .expect("id present")
                    .push(self.dims.cell(i));
            }
        }
        out
    }

    pub fn visible_bitmaps(&self) -> BTreeMap<u32, Bitmap> {
        self.visible_regions()
            .into_iter()
            .map(|(id, cells)| (id, Bitmap::from_cells(self.dims, &cells)))
            .collect()
    }

    pub fn render_observation(&self) -> Observation {
        let floor = |c: Cell| match self.boundary {
            Boundary::Closed { container, .. }
                if c.x >= container.x0 && c.x <= container.x1 && c.y >= container.y0 && c.y <= container.y1 =>
            {
                self.floor_offset
            }
            _ => 0.0,
        };
        let mut color = vec![BACKGROUND; self.dims.len()];
        let mut depth: Vec<f64> = self.dims.cells().map(floor).collect();
        let mut count = vec![0u32; self.dims.len()];
        for g in &self.stack {
            for &c in &g.cells {
                if self.dims.contains(c) {
                    let i = self.dims.index(c);
                    color[i] = g.color;
                    count[i] += 1;
                }
            }
        }
        for (d, n) in depth.iter_mut().zip(&count) {
            *d += self.layer_thickness * *n as f64;
        }
        Observation {
            dims: self.dims,
            cell_size: self.cell_size,
            background: BACKGROUND,
            color,
            depth,
        }
    }

    /// Recomputes every entanglement edge from footprints and stack order.
    ///
    /// For an overlapping pair the weight is
    /// `clamp(overlap / min(area_a, area_b) * interleave, 0, 1)` where
    /// `interleave` is 1 when some garment between them in the stack covers an
    /// overlap cell and 0.5 otherwise.
    pub fn recompute_entanglement(&mut self) {
        let n = self.stack.len();
        let mut overlap = vec![0usize; n * n];
        let mut separated = vec![false; n * n];
        for list in self.cover_lists() {
            for (pa, &a) in list.iter().enumerate() {
                for (pb, &b) in list.iter().enumerate().skip(pa + 1) {
                    overlap[a * n + b] += 1;
                    if pb > pa + 1 {
                        separated[a * n + b] = true;
                    }
                }
            }
        }
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let ov = overlap[a * n + b];
                if ov == 0 {
                    continue;
                }
                let min_area = self.stack[a].area().min(self.stack[b].area()) as f64;
                let factor = if separated[a * n + b] { 1.0 } else { 0.5 };
                let w = (ov as f64 / min_area * factor).clamp(0.0, 1.0);
                edges.push(Entanglement {
                    a: self.stack[a].id,
                    b: self.stack[b].id,
                    w,
                });
            }
        }
        self.entanglement = edges;
    }

    /// Number of footprint cells shared by two garments.
    pub fn overlap_area(&self, a: u32, b: u32) -> usize {
        match (self.garment(a), self.garment(b)) {
            (Some(ga), Some(gb)) => ga.cells.iter().filter(|c| gb.contains(**c)).count(),
            _ => 0,
        }
    }

    /// Checks the structural invariants; used by tests and the scene loader.
    pub fn validate(&self) -> Result<()> {
        let mut ids: Vec<u32> = self.ids();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain("duplicate garment id in stack"));
        }
        let region = self.placement_region();
        for g in &self.stack {
            if g.cells.is_empty() {
                return Err(Error::domain(format!("garment {} has an empty footprint", g.id)));
            }
            if !g.is_connected() {
                return Err(Error::domain(format!("garment {} footprint is not 4-connected", g.id)));
            }
            for c in &g.cells {
                if c.x < region.x0 || c.x > region.x1 || c.y < region.y0 || c.y > region.y1 {
                    return Err(Error::domain(format!(
                        "garment {} cell ({}, {}) outside placement region",
                        g.id, c.x, c.y
                    )));
                }
            }
        }
        for e in &self.entanglement {
            if !(0.0..=1.0).contains(&e.w) {
                return Err(Error::domain("entanglement weight outside [0, 1]"));
            }
            if e.w > 0.0 && self.overlap_area(e.a, e.b) == 0 {
                return Err(Error::domain(format!(
                    "entanglement between non-overlapping garments {} and {}",
                    e.a, e.b
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;

    pub fn rect_cells(x0: i32, y0: i32, w: i32, h: i32) -> Vec<Cell> {
        (y0..y0 + h)
            .flat_map(|y| (x0..x0 + w).map(move |x| Cell::new(x, y)))
            .collect()
    }

    pub fn garment(id: u32, color: PaletteColor, cells: Vec<Cell>) -> GarmentSpec {
        GarmentSpec::new(id, Category::Tops, color.rgb(), cells, ShapeClass::Custom)
    }

    pub fn scene_with(dims: GridDims, boundary: Boundary, stack: Vec<GarmentSpec>) -> PileScene {
        let mut s = PileScene::empty(dims, boundary);
        s.stack = stack;
        s.recompute_entanglement();
        s
    }
}
