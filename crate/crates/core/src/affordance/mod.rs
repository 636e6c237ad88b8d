//! Per-point retrieval affordance: point-cloud features, a small dense
//! network trained with binary cross-entropy, and grasp-point selection.

mod data;
mod model;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, GridDims};
use crate::perception::MaskSet;
use crate::pile::{Boundary, Observation};

pub use data::{collect_training_data, grasp_label, read_dataset, write_dataset, CollectConfig, TrainingExample};
pub use model::{bce_loss, grad, train, AffordanceModel, Gradient, TrainConfig, BCE_EPS};

pub const FEATURE_DIM: usize = 7;
pub const FEATURE_VERSION: u32 = 1;

/// Wall distance (cells) at which the wall channel saturates.
const WALL_SCALE: f64 = 10.0;
/// Centroid distance (cells) at which the centroid channel saturates.
const CENTROID_SCALE: f64 = 20.0;
const DENSITY_RADIUS: i32 = 3;

pub type FeatureVector = [f64; FEATURE_DIM];

/// One point per covered cell, in row-major cell order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    /// Meters.
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Cell>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn pointcloud_from(observation: &Observation) -> PointCloud {
    let s = observation.cell_size;
    let mut cloud = PointCloud::default();
    for c in observation.dims.cells().filter(|c| observation.is_covered(*c)) {
        cloud.points.push([(c.x as f64 + 0.5) * s, (c.y as f64 + 0.5) * s, observation.depth_at(c)]);
        cloud.cells.push(c);
    }
    cloud
}

/// Featurized points: those lying under at least one mask.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSet {
    pub cells: Vec<Cell>,
    pub features: Vec<FeatureVector>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

struct MaskGeometry {
    edt: Vec<i64>,
    diameter: f64,
    centroid: (f64, f64),
}

pub fn compute_features(cloud: &PointCloud, masks: &MaskSet, n_selection: u32, boundary: &Boundary) -> Result<FeatureSet> {
    let selected = masks
        .get(n_selection)
        .ok_or_else(|| Error::domain(format!("no mask with marker {n_selection}")))?;
    let dims = masks.dims;
    let geometry: Vec<Option<MaskGeometry>> = masks
        .masks
        .iter()
        .map(|m| {
            Some(MaskGeometry {
                edt: m.bitmap.distance_to_complement_sq(),
                diameter: m.bitmap.bbox()?.diagonal().max(1.0),
                centroid: m.bitmap.centroid()?,
            })
        })
        .collect();
    let mut height = vec![0.0; dims.len()];
    let max_z = cloud.points.iter().map(|p| p[2]).fold(0.0_f64, f64::max);
    for (c, p) in cloud.cells.iter().zip(&cloud.points) {
        if dims.contains(*c) {
            height[dims.index(*c)] = p[2];
        }
    }
    let norm = |z: f64| if max_z > 0.0 { (z / max_z).clamp(0.0, 1.0) } else { 0.0 };
    let disk: Vec<(i32, i32)> = (-DENSITY_RADIUS..=DENSITY_RADIUS)
        .flat_map(|dy| (-DENSITY_RADIUS..=DENSITY_RADIUS).map(move |dx| (dx, dy)))
        .filter(|(dx, dy)| dx * dx + dy * dy <= DENSITY_RADIUS * DENSITY_RADIUS)
        .collect();

    let mut out = FeatureSet::default();
    for (&c, p) in cloud.cells.iter().zip(&cloud.points) {
        if !dims.contains(c) {
            continue;
        }
        let in_selected = selected.bitmap.get(c);
        let own = if in_selected {
            Some(masks.masks.iter().position(|m| m.marker_id == n_selection).expect("selected exists"))
        } else {
            masks.masks.iter().position(|m| m.bitmap.get(c))
        };
        let Some(own) = own else { continue };
        let Some(geo) = &geometry[own] else { continue };

        let local = window_mean(dims, &height, c);
        let edge = (geo.edt[dims.index(c)] as f64).sqrt() / geo.diameter;
        let wall = boundary
            .wall_distance(c)
            .map_or(1.0, |d| (d.max(0) as f64 / WALL_SCALE).min(1.0));
        let (cx, cy) = geo.centroid;
        let centroid = ((c.x as f64 - cx).hypot(c.y as f64 - cy) / CENTROID_SCALE).min(1.0);
        let density = disk
            .iter()
            .filter(|(dx, dy)| selected.bitmap.get(c.offset(*dx, *dy)))
            .count() as f64
            / disk.len() as f64;
        out.cells.push(c);
        out.features.push([
            if in_selected { 1.0 } else { 0.0 },
            norm(p[2]),
            norm(local),
            edge.min(1.0),
            wall,
            centroid,
            density,
        ]);
    }
    Ok(out)
}

/// Mean height over the 3x3 window (off-grid cells count as zero).
fn window_mean(dims: GridDims, height: &[f64], c: Cell) -> f64 {
    let mut sum = 0.0;
    for dy in -1..=1 {
        for dx in -1..=1 {
            let n = c.offset(dx, dy);
            if dims.contains(n) {
                sum += height[dims.index(n)];
            }
        }
    }
    sum / 9.0
}

/// Scores aligned with a feature set's cells.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AffordanceMap {
    pub cells: Vec<Cell>,
    pub scores: Vec<f64>,
}

pub fn forward(model: &AffordanceModel, features: &FeatureSet) -> Result<AffordanceMap> {
    Ok(AffordanceMap {
        cells: features.cells.clone(),
        scores: model.predict_batch(&features.features)?,
    })
}

/// Highest-scoring cell under the selected mask; ties go to the lowest
/// row-major index.
pub fn pick_retrieval_point(map: &AffordanceMap, masks: &MaskSet, n_selection: u32) -> Result<Cell> {
    let selected = masks
        .get(n_selection)
        .ok_or_else(|| Error::domain(format!("no mask with marker {n_selection}")))?;
    let dims = masks.dims;
    let mut best: Option<(f64, usize, Cell)> = None;
    for (&c, &s) in map.cells.iter().zip(&map.scores) {
        if !dims.contains(c) || !selected.bitmap.get(c) {
            continue;
        }
        let idx = dims.index(c);
        let better = match best {
            None => true,
            Some((bs, bi, _)) => s > bs || (s == bs && idx < bi),
        };
        if better {
            best = Some((s, idx, c));
        }
    }
    best.map(|(_, _, c)| c)
        .ok_or_else(|| Error::domain(format!("mask {n_selection} covers no scored point")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::PaletteColor;
    use crate::grid::Bitmap;
    use crate::perception::{segment, SegmenterConfig};
    use crate::pile::test_util::*;
    use crate::pile::{Boundary, PileScene};
    use proptest::prelude::*;

    const DIMS: GridDims = GridDims::new(32, 32);

    fn two_garments() -> PileScene {
        let a = garment(1, PaletteColor::Green, rect_cells(4, 4, 9, 9));
        let b = garment(2, PaletteColor::Red, rect_cells(10, 10, 8, 8));
        let c = garment(3, PaletteColor::Blue, rect_cells(12, 12, 3, 3));
        scene_with(DIMS, Boundary::Open, vec![a, b, c])
    }

    #[test]
    fn cloud_examples() {
        let empty = scene_with(DIMS, Boundary::Open, vec![]);
        assert!(pointcloud_from(&empty.render_observation()).is_empty());
        let one = scene_with(DIMS, Boundary::Open, vec![garment(1, PaletteColor::Red, rect_cells(3, 3, 5, 2))]);
        let cloud = pointcloud_from(&one.render_observation());
        assert_eq!(cloud.len(), 10);
        assert_eq!(cloud.points[0], [3.5 * 0.02, 3.5 * 0.02, one.layer_thickness]);
        let scene = two_garments();
        let cloud = pointcloud_from(&scene.render_observation());
        let i = cloud.cells.iter().position(|&c| c == Cell::new(12, 12)).unwrap();
        assert!((cloud.points[i][2] - 3.0 * scene.layer_thickness).abs() < 1e-15);
    }

    #[test]
    fn feature_examples() {
        let scene = two_garments();
        let obs = scene.render_observation();
        let masks = segment(&obs, &scene, &SegmenterConfig::clean(), 0);
        let cloud = pointcloud_from(&obs);
        let sel = masks.masks.iter().find(|m| m.bitmap.get(Cell::new(5, 5))).unwrap().marker_id;
        let f = compute_features(&cloud, &masks, sel, &scene.boundary).unwrap();
        assert_eq!(f.len(), cloud.len());
        for (c, v) in f.cells.iter().zip(&f.features) {
            assert_eq!(v[0] == 1.0, masks.get(sel).unwrap().bitmap.get(*c));
            assert_eq!(v[4], 1.0);
            assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
        }
        assert!(compute_features(&cloud, &masks, 99, &scene.boundary).is_err());
    }

    #[test]
    fn centroid_channel_zero_at_centroid() {
        let scene = scene_with(DIMS, Boundary::Open, vec![garment(1, PaletteColor::Red, rect_cells(5, 5, 5, 5))]);
        let obs = scene.render_observation();
        let masks = segment(&obs, &scene, &SegmenterConfig::clean(), 0);
        let f = compute_features(&pointcloud_from(&obs), &masks, 1, &scene.boundary).unwrap();
        let i = f.cells.iter().position(|&c| c == Cell::new(7, 7)).unwrap();
        assert_eq!(f.features[i][5], 0.0);
    }

    #[test]
    fn wall_channel_in_container() {
        let boundary = Boundary::Closed {
            container: crate::grid::CellRect { x0: 4, y0: 4, x1: 27, y1: 27 },
            wall_margin: 2,
        };
        let scene = scene_with(DIMS, boundary, vec![garment(1, PaletteColor::Red, rect_cells(4, 12, 12, 4))]);
        let obs = scene.render_observation();
        let masks = segment(&obs, &scene, &SegmenterConfig::clean(), 0);
        let f = compute_features(&pointcloud_from(&obs), &masks, 1, &scene.boundary).unwrap();
        let at = |x, y| f.features[f.cells.iter().position(|&c| c == Cell::new(x, y)).unwrap()][4];
        assert_eq!(at(4, 13), 0.0);
        assert_eq!(at(6, 13), 0.2);
        assert_eq!(at(15, 14), 1.0);
    }

    fn map(cells: &[(i32, i32)], scores: &[f64]) -> AffordanceMap {
        AffordanceMap {
            cells: cells.iter().map(|&(x, y)| Cell::new(x, y)).collect(),
            scores: scores.to_vec(),
        }
    }

    #[test]
    fn pick_examples() {
        let masks = MaskSet::from_bitmaps(DIMS, [Bitmap::from_cells(DIMS, &rect_cells(0, 0, 2, 1))]);
        let m = map(&[(0, 0), (1, 0), (5, 5)], &[0.2, 0.9, 0.99]);
        assert_eq!(pick_retrieval_point(&m, &masks, 1).unwrap(), Cell::new(1, 0));
        let m = map(&[(1, 0), (0, 0)], &[0.9, 0.9]);
        assert_eq!(pick_retrieval_point(&m, &masks, 1).unwrap(), Cell::new(0, 0));
        let single = MaskSet::from_bitmaps(DIMS, [Bitmap::from_cells(DIMS, &[Cell::new(3, 3)])]);
        let m = map(&[(3, 3), (4, 4)], &[0.01, 0.99]);
        assert_eq!(pick_retrieval_point(&m, &single, 1).unwrap(), Cell::new(3, 3));
        assert!(pick_retrieval_point(&map(&[(9, 9)], &[0.5]), &single, 1).is_err());
    }

    proptest! {
        #[test]
        fn pick_invariant_under_monotone_rescaling(scores in proptest::collection::vec(0.0f64..1.0, 12), k in 0.1f64..5.0) {
            let cells: Vec<(i32, i32)> = (0..12).map(|i| (i % 4, i / 4)).collect();
            let masks = MaskSet::from_bitmaps(DIMS, [Bitmap::from_cells(DIMS, &rect_cells(0, 0, 4, 2))]);
            let a = pick_retrieval_point(&map(&cells, &scores), &masks, 1).unwrap();
            let scaled: Vec<f64> = scores.iter().map(|s| (k * s).exp()).collect();
            let b = pick_retrieval_point(&map(&cells, &scaled), &masks, 1).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
