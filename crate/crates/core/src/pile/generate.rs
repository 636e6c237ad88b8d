use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::footprint::generate_footprint;
use super::{Boundary, Category, GarmentSpec, PileScene};
use crate::color::{PaletteColor, Rgb};
use crate::error::{Error, Result};
use crate::grid::{CellRect, GridDims};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Open,
    Closed,
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryKind::Open => "open",
            BoundaryKind::Closed => "closed",
        })
    }
}

impl FromStr for BoundaryKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "open" => Ok(BoundaryKind::Open),
            "closed" => Ok(BoundaryKind::Closed),
            other => Err(format!("unknown boundary `{other}` (expected open|closed)")),
        }
    }
}

/// Scene-generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub grid_width: usize,
    pub grid_height: usize,
    pub cell_size: f64,
    pub layer_thickness: f64,
    pub floor_offset: f64,
    pub boundary: BoundaryKind,
    /// Cells between the grid edge and the container interior (closed only).
    pub container_inset: i32,
    pub wall_margin: i32,
    pub count_min: usize,
    pub count_max: usize,
    /// Per-channel uniform color jitter around the palette entry.
    pub color_jitter: u8,
}

impl SceneConfig {
    /// Open surface, 6-16 garments.
    pub fn open() -> Self {
        SceneConfig {
            grid_width: 64,
            grid_height: 64,
            cell_size: 0.02,
            layer_thickness: 0.005,
            floor_offset: 0.0,
            boundary: BoundaryKind::Open,
            container_inset: 10,
            wall_margin: 2,
            count_min: 6,
            count_max: 16,
            color_jitter: 8,
        }
    }

    /// Walled container, 3-8 garments.
    pub fn closed() -> Self {
        SceneConfig {
            boundary: BoundaryKind::Closed,
            count_min: 3,
            count_max: 8,
            ..SceneConfig::open()
        }
    }

    pub fn for_boundary(kind: BoundaryKind) -> Self {
        match kind {
            BoundaryKind::Open => SceneConfig::open(),
            BoundaryKind::Closed => SceneConfig::closed(),
        }
    }

    pub fn with_counts(mut self, min: usize, max: usize) -> Self {
        self.count_min = min;
        self.count_max = max;
        self
    }

    pub fn dims(&self) -> GridDims {
        GridDims::new(self.grid_width, self.grid_height)
    }

    pub fn boundary_geometry(&self) -> Boundary {
        match self.boundary {
            BoundaryKind::Open => Boundary::Open,
            BoundaryKind::Closed => Boundary::Closed {
                container: CellRect {
                    x0: self.container_inset,
                    y0: self.container_inset,
                    x1: self.grid_width as i32 - 1 - self.container_inset,
                    y1: self.grid_height as i32 - 1 - self.container_inset,
                },
                wall_margin: self.wall_margin,
            },
        }
    }

    fn validate(&self) -> Result<CellRect> {
        if self.grid_width < 32 || self.grid_height < 32 {
            return Err(Error::Generation(format!(
                "grid {}x{} is smaller than 32x32",
                self.grid_width, self.grid_height
            )));
        }
        if self.count_min > self.count_max {
            return Err(Error::Generation(format!(
                "garment count range {}..{} is empty",
                self.count_min, self.count_max
            )));
        }
        let region = PileScene::empty(self.dims(), self.boundary_geometry()).placement_region();
        // The longest generated footprint is 40 cells.
        if region.width() < 40 || region.height() < 40 {
            return Err(Error::Generation(format!(
                "placement region {}x{} cannot hold the largest garment",
                region.width(),
                region.height()
            )));
        }
        let capacity = (region.width() * region.height()) as usize / 16;
        if self.count_max > capacity {
            return Err(Error::Generation(format!(
                "count_max {} exceeds grid capacity {}",
                self.count_max, capacity
            )));
        }
        Ok(region)
    }
}

/// Draws a random garment pile. Identical `(config, seed)` pairs give
/// identical scenes.
pub fn generate_scene(config: &SceneConfig, seed: u64) -> Result<PileScene> {
    let region = config.validate()?;
    let mut rng = seeded(seed);
    let n = rng.gen_range(config.count_min..=config.count_max);
    let mut scene = PileScene::empty(config.dims(), config.boundary_geometry());
    scene.cell_size = config.cell_size;
    scene.layer_thickness = config.layer_thickness;
    scene.floor_offset = config.floor_offset;
    scene.seed = seed;
    for i in 0..n {
        let category = *Category::ALL.choose(&mut rng).expect("non-empty");
        let palette = *PaletteColor::ALL.choose(&mut rng).expect("non-empty");
        let j = config.color_jitter as i32;
        let base = palette.rgb().0;
        let mut color = [0u8; 3];
        for (k, c) in color.iter_mut().enumerate() {
            let d = if j > 0 { rng.gen_range(-j..=j) } else { 0 };
            *c = (base[k] as i32 + d).clamp(0, 255) as u8;
        }
        let (shape, cells) = generate_footprint(category, &mut rng);
        let w = cells.iter().map(|c| c.x).max().unwrap_or(0) + 1;
        let h = cells.iter().map(|c| c.y).max().unwrap_or(0) + 1;
        if w > region.width() || h > region.height() {
            return Err(Error::Generation(format!(
                "{category} footprint {w}x{h} does not fit the placement region"
            )));
        }
        let ox = rng.gen_range(region.x0..=region.x1 - w + 1);
        let oy = rng.gen_range(region.y0..=region.y1 - h + 1);
        let cells = cells.into_iter().map(|c| c.offset(ox, oy)).collect();
        scene
            .stack
            .push(GarmentSpec::new(i as u32 + 1, category, Rgb(color), cells, shape));
    }
    scene.recompute_entanglement();
    Ok(scene)
}
