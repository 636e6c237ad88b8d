use super::{Mask, MaskSet, SegmenterConfig};
use crate::error::{Error, Result};
use crate::grid::{Bitmap, Cell};

/// Intersection over union of two masks on the same grid.
pub fn mask_iou(a: &Mask, b: &Mask) -> Result<f64> {
    bitmap_iou(&a.bitmap, &b.bitmap)
}

pub(crate) fn bitmap_iou(a: &Bitmap, b: &Bitmap) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::domain("mask grids differ in size"));
    }
    let union = a.union_count(b);
    if union == 0 {
        return Ok(0.0);
    }
    Ok(a.intersection_count(b) as f64 / union as f64)
}

/// Drops fragments (area below `min_area`) and background-like flat masks:
/// depth spread below `planar_eps` with mean depth under half a layer.
pub fn filter_masks(masks: &MaskSet, depth: &[f64], cfg: &SegmenterConfig, layer_thickness: f64) -> MaskSet {
    let keep = masks.masks.iter().filter(|m| {
        let n = m.area();
        if n < cfg.min_area {
            return false;
        }
        let idx: Vec<usize> = m.bitmap.cells().map(|c| masks.dims.index(c)).collect();
        let mean = idx.iter().map(|&i| depth[i]).sum::<f64>() / n as f64;
        let var = idx.iter().map(|&i| (depth[i] - mean).powi(2)).sum::<f64>() / n as f64;
        let planar = var.sqrt() < cfg.planar_eps && mean < 0.5 * layer_thickness;
        !planar
    });
    MaskSet::renumbered(masks.dims, keep.cloned())
}

/// Greedy non-maximum suppression by descending area (ties: lower marker id).
/// A mask is dropped iff its IoU with an already kept mask strictly exceeds
/// `iou_threshold`. Survivors keep their original relative order.
pub fn nms(masks: &MaskSet, iou_threshold: f64) -> MaskSet {
    let mut order: Vec<usize> = (0..masks.len()).collect();
    let areas: Vec<usize> = masks.masks.iter().map(Mask::area).collect();
    order.sort_by(|&i, &j| {
        areas[j]
            .cmp(&areas[i])
            .then(masks.masks[i].marker_id.cmp(&masks.masks[j].marker_id))
    });
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let suppressed = kept.iter().any(|&k| {
            bitmap_iou(&masks.masks[i].bitmap, &masks.masks[k].bitmap).unwrap_or(0.0) > iou_threshold
        });
        if !suppressed {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    MaskSet::renumbered(masks.dims, kept.into_iter().map(|i| masks.masks[i].clone()))
}

/// The in-mask cell farthest from the mask's complement (pole of
/// inaccessibility). Ties go to the lowest row, then column.
pub fn place_marker(bitmap: &Bitmap) -> Result<Cell> {
    let dt = bitmap.distance_to_complement_sq();
    let dims = bitmap.dims();
    let mut best: Option<(i64, usize)> = None;
    for (i, &d) in dt.iter().enumerate() {
        if bitmap.get_index(i) && best.is_none_or(|(bd, _)| d > bd) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| dims.cell(i))
        .ok_or_else(|| Error::domain("cannot place a marker on an empty mask"))
}
