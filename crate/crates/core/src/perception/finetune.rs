//! Mask repair: pinch-lift-shake-release, tracking of trusted masks through
//! the shake, and center-outward point-prompt regeneration on the last frame.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use super::hygiene::{bitmap_iou, filter_masks, nms, place_marker};
use super::segment::{merge_eligible, shared_boundaries};
use super::{Mask, MaskSet, SegmenterConfig};
use crate::error::{Error, Result};
use crate::grid::{Bitmap, Cell};
use crate::pile::{shake_perturb, GraspOracle, Observation, PileScene, ShakeConfig};
use crate::rng::{derive, seeded};

/// One video frame: the rendered image and the pile it came from.
#[derive(Debug, Clone)]
pub struct Frame {
    pub observation: Observation,
    pub scene: PileScene,
}

impl Frame {
    pub fn of(scene: PileScene) -> Self {
        Frame {
            observation: scene.render_observation(),
            scene,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FineTuneConfig {
    /// Frames recorded during the shake (including first and last).
    pub frames: usize,
    pub shake: ShakeConfig,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        FineTuneConfig {
            frames: 8,
            shake: ShakeConfig::default(),
        }
    }
}

/// Follows each mask through a frame sequence. A mask is bound on the first
/// frame to the garment whose visible region overlaps it best (ties: lower
/// garment id) and becomes that garment's visible region in the last frame.
/// Masks with no overlapping garment, or whose garment is no longer visible,
/// are dropped.
pub fn track_masks(frames: &[Frame], masks: &MaskSet) -> MaskSet {
    let (Some(first), Some(last)) = (frames.first(), frames.last()) else {
        return MaskSet::empty(masks.dims);
    };
    let start = first.scene.visible_bitmaps();
    let end = last.scene.visible_bitmaps();
    let tracked = masks.masks.iter().filter_map(|m| {
        let mut best: Option<(f64, u32)> = None;
        for (id, region) in &start {
            let iou = bitmap_iou(&m.bitmap, region).unwrap_or(0.0);
            if iou > 0.0 && best.is_none_or(|(b, _)| iou > b) {
                best = Some((iou, *id));
            }
        }
        let (_, id) = best?;
        end.get(&id).filter(|b| !b.is_empty()).cloned()
    });
    MaskSet::from_bitmaps(masks.dims, tracked.collect::<Vec<_>>())
}

/// Prompted segmentation at `pixel`: the visible region of the topmost garment
/// there, fused with any neighbor that still meets the merge condition (with
/// probability `p_merge`).
pub fn point_prompt_segment(
    observation: &Observation,
    scene: &PileScene,
    pixel: Cell,
    cfg: &SegmenterConfig,
    seed: u64,
) -> Result<Mask> {
    if !observation.dims.contains(pixel) {
        return Err(Error::domain(format!("prompt pixel ({}, {}) outside the image", pixel.x, pixel.y)));
    }
    let g = scene
        .topmost_at(pixel)
        .ok_or(Error::NoGarment { x: pixel.x, y: pixel.y })?
        .id;
    let regions = scene.visible_bitmaps();
    let mut bitmap = regions[&g].clone();
    if cfg.p_merge > 0.0 {
        let shared = shared_boundaries(scene);
        let mut rng = seeded(seed);
        for (&h, region) in &regions {
            if h != g && merge_eligible(scene, &shared, g, h, cfg) && rng.gen_bool(cfg.p_merge) {
                bitmap.union_with(region);
            }
        }
    }
    let marker_pixel = place_marker(&bitmap)?;
    Ok(Mask {
        bitmap,
        marker_id: 1,
        marker_pixel,
    })
}

/// Cells ordered by distance from the image center, then row, then column.
fn center_out_order(frame: &Frame) -> Vec<Cell> {
    let dims = frame.observation.dims;
    let (w, h) = (dims.width as i64, dims.height as i64);
    let mut cells: Vec<Cell> = dims.cells().collect();
    cells.sort_by_key(|c| {
        let dx = 2 * c.x as i64 - (w - 1);
        let dy = 2 * c.y as i64 - (h - 1);
        (dx * dx + dy * dy, c.y, c.x)
    });
    cells
}

/// Scans from the image center outward and prompts at every covered pixel no
/// mask covers yet; then filters and suppresses the union of kept and new masks.
pub fn regenerate_from_center(frame: &Frame, kept: &MaskSet, cfg: &SegmenterConfig, seed: u64) -> MaskSet {
    let obs = &frame.observation;
    let mut covered = kept.coverage();
    let mut all: Vec<Bitmap> = kept.masks.iter().map(|m| m.bitmap.clone()).collect();
    for (k, c) in center_out_order(frame).into_iter().enumerate() {
        if !obs.is_covered(c) || covered.get(c) {
            continue;
        }
        if let Ok(m) = point_prompt_segment(obs, &frame.scene, c, cfg, derive(seed, k as u64)) {
            covered.union_with(&m.bitmap);
            all.push(m.bitmap);
        }
    }
    let raw = MaskSet::from_bitmaps(obs.dims, all);
    let filtered = filter_masks(&raw, &obs.depth, cfg, frame.scene.layer_thickness);
    nms(&filtered, cfg.nms_iou)
}

/// Repairs the masks listed in `flagged` (marker ids) by shaking the pile.
/// Returns the settled pile and the regenerated mask set.
#[allow(clippy::too_many_arguments)]
pub fn fine_tune(
    oracle: &GraspOracle,
    ft: &FineTuneConfig,
    scene: &PileScene,
    masks: &MaskSet,
    flagged: &BTreeSet<u32>,
    cfg: &SegmenterConfig,
    seed: u64,
) -> Result<(PileScene, MaskSet)> {
    if flagged.is_empty() {
        return Err(Error::Contract("fine-tuning requires at least one flagged mask".into()));
    }
    let mut region = Bitmap::new(masks.dims);
    for id in flagged {
        let m = masks
            .get(*id)
            .ok_or_else(|| Error::domain(format!("flagged mask {id} does not exist")))?;
        region.union_with(&m.bitmap);
    }
    let candidates: Vec<Cell> = region.cells().filter(|c| scene.topmost_at(*c).is_some()).collect();
    let pinch = *candidates
        .choose(&mut seeded(derive(seed, 0)))
        .ok_or_else(|| Error::domain("flagged masks cover no garment"))?;
    let frames: Vec<Frame> = shake_perturb(oracle, &ft.shake, scene, pinch, ft.frames.max(2), derive(seed, 1))?
        .into_iter()
        .map(Frame::of)
        .collect();
    let trusted = MaskSet::renumbered(
        masks.dims,
        masks.masks.iter().filter(|m| !flagged.contains(&m.marker_id)).cloned(),
    );
    let tracked = track_masks(&frames, &trusted);
    let last = frames.last().expect("at least two frames");
    let regenerated = regenerate_from_center(last, &tracked, cfg, derive(seed, 2));
    Ok((last.scene.clone(), regenerated))
}
