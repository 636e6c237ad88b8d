use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{Boundary, Category, Entanglement, GarmentSpec, PileScene, ShapeClass};
use crate::color::Rgb;
use crate::error::{Error, Result};
use crate::grid::{Cell, GridDims};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarmentRecord {
    pub id: u32,
    pub category: Category,
    pub color: Rgb,
    pub cells: Vec<Cell>,
    #[serde(default = "custom_shape")]
    pub shape: ShapeClass,
}

fn custom_shape() -> ShapeClass {
    ShapeClass::Custom
}

/// On-disk scene layout. Garments are listed by ascending id; `stack_order`
/// lists ids bottom to top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub grid: GridDims,
    pub cell_size: f64,
    pub layer_thickness: f64,
    #[serde(default)]
    pub floor_offset: f64,
    pub boundary: Boundary,
    pub garments: Vec<GarmentRecord>,
    pub stack_order: Vec<u32>,
    pub entanglement: Vec<Entanglement>,
    pub seed: u64,
}

impl From<&PileScene> for SceneFile {
    fn from(s: &PileScene) -> Self {
        let mut garments: Vec<GarmentRecord> = s
            .stack
            .iter()
            .map(|g| GarmentRecord {
                id: g.id,
                category: g.category,
                color: g.color,
                cells: g.cells.clone(),
                shape: g.shape,
            })
            .collect();
        garments.sort_by_key(|g| g.id);
        SceneFile {
            grid: s.dims,
            cell_size: s.cell_size,
            layer_thickness: s.layer_thickness,
            floor_offset: s.floor_offset,
            boundary: s.boundary,
            garments,
            stack_order: s.ids(),
            entanglement: s.entanglement.clone(),
            seed: s.seed,
        }
    }
}

impl TryFrom<SceneFile> for PileScene {
    type Error = Error;

    fn try_from(f: SceneFile) -> Result<Self> {
        if f.stack_order.len() != f.garments.len() {
            return Err(Error::domain("stack_order length does not match garments"));
        }
        let mut stack = Vec::with_capacity(f.garments.len());
        for id in &f.stack_order {
            let g = f
                .garments
                .iter()
                .find(|g| g.id == *id)
                .ok_or_else(|| Error::domain(format!("stack_order names unknown garment {id}")))?;
            stack.push(GarmentSpec::new(g.id, g.category, g.color, g.cells.clone(), g.shape));
        }
        let scene = PileScene {
            dims: f.grid,
            cell_size: f.cell_size,
            layer_thickness: f.layer_thickness,
            floor_offset: f.floor_offset,
            boundary: f.boundary,
            stack,
            entanglement: f.entanglement,
            seed: f.seed,
        };
        scene.validate()?;
        Ok(scene)
    }
}

impl PileScene {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SceneFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: SceneFile = serde_json::from_str(text)?;
        PileScene::try_from(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        PileScene::from_json(&std::fs::read_to_string(path)?)
    }
}
