//! Oracle segmentation with a corruption model, mask hygiene (filtering, NMS,
//! markers), annotation, simulated video tracking, and mask fine-tuning.

mod annotate;
mod finetune;
mod hygiene;
mod segment;

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Bitmap, Cell, GridDims};
use crate::pile::{Observation, PileScene};

pub use annotate::{annotate, AnnotatedImage, OverlayKind};
pub use finetune::{fine_tune, point_prompt_segment, regenerate_from_center, track_masks, FineTuneConfig, Frame};
pub use hygiene::{filter_masks, mask_iou, nms, place_marker};
pub use segment::segment;

/// Segmenter corruption and mask-hygiene constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmenterConfig {
    /// Probability that an eligible touching pair of similar-color regions fuses.
    pub p_merge: f64,
    /// Largest RGB L-infinity distance still considered "similar color".
    pub merge_color_threshold: u8,
    /// Minimum number of shared boundary edges for a pair to be merge-eligible.
    pub merge_overlap_threshold: usize,
    /// Probability that a remaining region is split into fragments.
    pub p_frag: f64,
    pub frag_pieces: usize,
    /// Masks smaller than this (cells) are discarded as fragments.
    pub min_area: usize,
    /// Depth standard deviation (m) below which a mask counts as flat.
    pub planar_eps: f64,
    pub nms_iou: f64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            p_merge: 0.8,
            merge_color_threshold: 40,
            merge_overlap_threshold: 4,
            p_frag: 0.15,
            frag_pieces: 2,
            min_area: 8,
            planar_eps: 0.002,
            nms_iou: 0.5,
        }
    }
}

impl SegmenterConfig {
    /// Corruption disabled: masks equal the visible regions.
    pub fn clean() -> Self {
        SegmenterConfig {
            p_merge: 0.0,
            p_frag: 0.0,
            ..SegmenterConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_merge) || !(0.0..=1.0).contains(&self.p_frag) {
            return Err(Error::Config("segmenter probabilities must lie in [0, 1]".into()));
        }
        if !(2..=4).contains(&self.frag_pieces) {
            return Err(Error::Config("frag_pieces must be 2..=4".into()));
        }
        if !(0.0..=1.0).contains(&self.nms_iou) || self.planar_eps <= 0.0 || self.min_area == 0 {
            return Err(Error::Config("mask hygiene thresholds out of range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub bitmap: Bitmap,
    pub marker_id: u32,
    pub marker_pixel: Cell,
}

impl Mask {
    pub fn area(&self) -> usize {
        self.bitmap.count()
    }
}

/// Masks numbered `1..=N` in list order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSet {
    pub dims: GridDims,
    pub masks: Vec<Mask>,
}

impl MaskSet {
    pub fn empty(dims: GridDims) -> Self {
        MaskSet { dims, masks: Vec::new() }
    }

    /// Numbers non-empty bitmaps `1..=N` in order and places their markers.
    pub fn from_bitmaps(dims: GridDims, bitmaps: impl IntoIterator<Item = Bitmap>) -> Self {
        let masks = bitmaps
            .into_iter()
            .filter(|b| !b.is_empty())
            .enumerate()
            .map(|(i, bitmap)| {
                let marker_pixel = place_marker(&bitmap).expect("non-empty bitmap");
                Mask {
                    bitmap,
                    marker_id: i as u32 + 1,
                    marker_pixel,
                }
            })
            .collect();
        MaskSet { dims, masks }
    }

    /// Renumbers `1..=N` keeping order and existing marker pixels.
    pub fn renumbered(dims: GridDims, masks: impl IntoIterator<Item = Mask>) -> Self {
        let masks = masks
            .into_iter()
            .enumerate()
            .map(|(i, m)| Mask {
                marker_id: i as u32 + 1,
                ..m
            })
            .collect();
        MaskSet { dims, masks }
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn get(&self, marker_id: u32) -> Option<&Mask> {
        self.masks.iter().find(|m| m.marker_id == marker_id)
    }

    pub fn marker_ids(&self) -> Vec<u32> {
        self.masks.iter().map(|m| m.marker_id).collect()
    }

    /// Union of all mask bitmaps.
    pub fn coverage(&self) -> Bitmap {
        let mut b = Bitmap::new(self.dims);
        for m in &self.masks {
            b.union_with(&m.bitmap);
        }
        b
    }

    pub fn to_file(&self) -> MaskSetFile {
        MaskSetFile {
            grid: self.dims,
            masks: self
                .masks
                .iter()
                .map(|m| MaskRecord {
                    marker_id: m.marker_id,
                    marker_pixel: m.marker_pixel,
                    rle: rle_encode(&m.bitmap),
                })
                .collect(),
        }
    }

    pub fn from_file(f: &MaskSetFile) -> Result<Self> {
        let mut masks = Vec::with_capacity(f.masks.len());
        for (i, r) in f.masks.iter().enumerate() {
            if r.marker_id != i as u32 + 1 {
                return Err(Error::domain("mask marker ids must be 1..N in order"));
            }
            let bitmap = rle_decode(f.grid, &r.rle)?;
            if bitmap.is_empty() || !bitmap.get(r.marker_pixel) {
                return Err(Error::domain(format!("mask {} is empty or its marker lies outside it", r.marker_id)));
            }
            masks.push(Mask {
                bitmap,
                marker_id: r.marker_id,
                marker_pixel: r.marker_pixel,
            });
        }
        Ok(MaskSet { dims: f.grid, masks })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.to_file())?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f: MaskSetFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        MaskSet::from_file(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRecord {
    pub marker_id: u32,
    pub marker_pixel: Cell,
    pub rle: Vec<u32>,
}

/// On-disk mask set; bitmaps are run-length encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSetFile {
    pub grid: GridDims,
    pub masks: Vec<MaskRecord>,
}

/// Row-major run lengths, alternating unset/set and starting with an unset
/// run (which may be zero).
/// Segmentation followed by filtering and suppression.
pub fn perceive(
    observation: &Observation,
    scene: &PileScene,
    cfg: &SegmenterConfig,
    seed: u64,
) -> MaskSet {
    let raw = segment(observation, scene, cfg, seed);
    let kept = filter_masks(&raw, &observation.depth, cfg, scene.layer_thickness);
    nms(&kept, cfg.nms_iou)
}

pub fn rle_encode(b: &Bitmap) -> Vec<u32> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0u32;
    for &bit in b.bits() {
        if bit == current {
            len += 1;
        } else {
            runs.push(len);
            current = bit;
            len = 1;
        }
    }
    runs.push(len);
    runs
}

pub fn rle_decode(dims: GridDims, runs: &[u32]) -> Result<Bitmap> {
    let total: u64 = runs.iter().map(|&r| r as u64).sum();
    if total != dims.len() as u64 {
        return Err(Error::domain(format!(
            "run lengths cover {total} cells, grid has {}",
            dims.len()
        )));
    }
    let mut bits = Vec::with_capacity(dims.len());
    for (i, &r) in runs.iter().enumerate() {
        bits.extend(std::iter::repeat_n(i % 2 == 1, r as usize));
    }
    Ok(Bitmap::from_bits(dims, bits))
}
