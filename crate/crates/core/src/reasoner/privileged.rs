use std::collections::{BTreeMap, BTreeSet};

use super::{require_masks, Context, CoopAnswer, LiftInfo, Reasoner, TaskKind, TaskSpec};
use crate::error::Result;
use crate::grid::Bitmap;
use crate::pile::PileScene;

/// Reads the simulator state directly. Used as an upper bound and as the test
/// oracle for the pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivilegedReasoner {
    pub l_arm: f64,
    /// A mask covering less than this fraction of its garment's visible
    /// region is flagged as a fragment.
    pub min_coverage: f64,
}

impl Default for PrivilegedReasoner {
    fn default() -> Self {
        PrivilegedReasoner {
            l_arm: 0.35,
            min_coverage: 0.6,
        }
    }
}

/// Per-mask cell counts by visible garment.
fn garment_counts(scene: &PileScene, mask: &Bitmap) -> BTreeMap<u32, usize> {
    let top = scene.top_map();
    let mut counts = BTreeMap::new();
    for c in mask.cells() {
        if let Some(si) = top[scene.dims.index(c)] {
            *counts.entry(scene.stack[si].id).or_insert(0) += 1;
        }
    }
    counts
}

/// Garment a mask mostly shows (ties: lower id).
fn dominant_garment(scene: &PileScene, mask: &Bitmap) -> Option<u32> {
    garment_counts(scene, mask)
        .into_iter()
        .min_by_key(|&(id, n)| (std::cmp::Reverse(n), id))
        .map(|(id, _)| id)
}

/// Mask that best shows garment `id` (ties: smaller marker id).
fn mask_of(ctx: &Context, id: u32) -> Option<u32> {
    let region = ctx.truth.visible_bitmaps().remove(&id)?;
    ctx.masks
        .masks
        .iter()
        .map(|m| (m.bitmap.intersection_count(&region), m.marker_id))
        .filter(|&(n, _)| n > 0)
        .min_by_key(|&(n, id)| (std::cmp::Reverse(n), id))
        .map(|(_, id)| id)
}

/// Highest garment above stack entry `si` whose footprint overlaps it.
fn covering(scene: &PileScene, si: usize) -> Option<usize> {
    let g = &scene.stack[si];
    (si + 1..scene.stack.len())
        .rev()
        .find(|&j| scene.stack[j].cells.iter().any(|c| g.contains(*c)))
}

impl PrivilegedReasoner {
    /// Mask of the highest garment in the stack that some mask shows.
    fn topmost(&self, ctx: &Context) -> u32 {
        let scene = ctx.truth;
        ctx.masks
            .masks
            .iter()
            .filter_map(|m| {
                let g = dominant_garment(scene, &m.bitmap)?;
                Some((scene.stack_index(g)?, m.marker_id))
            })
            .min_by_key(|&(si, id)| (std::cmp::Reverse(si), id))
            .map_or(ctx.summaries[0].marker_id, |(_, id)| id)
    }
}

impl Reasoner for PrivilegedReasoner {
    fn name(&self) -> &'static str {
        "privileged"
    }

    fn decide_adjust(&self, ctx: &Context) -> Result<BTreeSet<u32>> {
        let visible = ctx.truth.visible_bitmaps();
        Ok(ctx
            .masks
            .masks
            .iter()
            .filter(|m| {
                let counts = garment_counts(ctx.truth, &m.bitmap);
                if counts.len() >= 2 {
                    return true;
                }
                counts.iter().any(|(id, &n)| {
                    let total = visible.get(id).map_or(0, Bitmap::count);
                    (n as f64) < self.min_coverage * total as f64
                })
            })
            .map(|m| m.marker_id)
            .collect())
    }

    fn select_target(&self, ctx: &Context, task: &TaskSpec) -> Result<u32> {
        require_masks(ctx)?;
        let target = match (task.kind, task.target) {
            (TaskKind::B, Some(t)) => t,
            _ => return Ok(self.topmost(ctx)),
        };
        let scene = ctx.truth;
        let Some(mut si) = scene.stack.iter().rposition(|g| target.matches(g)) else {
            return Ok(self.topmost(ctx));
        };
        // Walk up the chain of covering garments to one that lies free.
        while let Some(above) = covering(scene, si) {
            si = above;
        }
        Ok(mask_of(ctx, scene.stack[si].id).unwrap_or_else(|| self.topmost(ctx)))
    }

    fn decide_cooperation(&self, _ctx: &Context, lift: &LiftInfo) -> Result<CoopAnswer> {
        let out = lift.outcome;
        Ok(CoopAnswer::new(out.lifted_ids.len() >= 2, out.sag > self.l_arm))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::PaletteColor;
    use crate::grid::{Cell, GridDims};
    use crate::perception::{segment, SegmenterConfig};
    use crate::pile::test_util::*;
    use crate::pile::{simulate_single_grasp, Boundary, GraspOracle, GraspOutcome, GraspResult};
    use crate::reasoner::test_util::Frame;
    use crate::reasoner::TargetDescriptor;

    const DIMS: GridDims = GridDims::new(40, 40);

    fn overlapping() -> PileScene {
        let a = garment(1, PaletteColor::Green, rect_cells(5, 5, 10, 10));
        let b = garment(2, PaletteColor::Green, rect_cells(10, 8, 10, 10));
        let c = garment(3, PaletteColor::Red, rect_cells(25, 25, 6, 6));
        scene_with(DIMS, Boundary::Open, vec![a, b, c])
    }

    #[test]
    fn clean_masks_need_no_adjustment() {
        let f = Frame::clean(overlapping());
        assert!(PrivilegedReasoner::default().decide_adjust(&f.ctx()).unwrap().is_empty());
    }

    #[test]
    fn merged_and_fragmented_masks_flagged() {
        let scene = overlapping();
        let cfg = SegmenterConfig { p_merge: 1.0, p_frag: 0.0, ..SegmenterConfig::default() };
        let masks = segment(&scene.render_observation(), &scene, &cfg, 0);
        let f = Frame::with_masks(scene.clone(), masks);
        let flagged = PrivilegedReasoner::default().decide_adjust(&f.ctx()).unwrap();
        assert_eq!(flagged.len(), 1);

        let half = crate::perception::MaskSet::from_bitmaps(DIMS, [Bitmap::from_cells(DIMS, &rect_cells(25, 25, 6, 2))]);
        let f = Frame::with_masks(scene, half);
        assert_eq!(PrivilegedReasoner::default().decide_adjust(&f.ctx()).unwrap(), BTreeSet::from([1]));
    }

    #[test]
    fn cooperation_examples() {
        let f = Frame::clean(overlapping());
        let picked = Bitmap::new(DIMS);
        let mut out = GraspOutcome {
            garment: Some(3),
            lifted_ids: BTreeSet::from([3]),
            result: GraspResult::Success,
            sag: 0.1,
            steps: 1,
        };
        let lift = |out: &GraspOutcome| {
            let lift = LiftInfo {
                observation: &f.observation,
                picked: &picked,
                selected_area: 1,
                grasp: Cell::new(0, 0),
                outcome: out,
            };
            PrivilegedReasoner::default().decide_cooperation(&f.ctx(), &lift).unwrap()
        };
        assert_eq!(lift(&out), CoopAnswer::new(false, false));
        out.lifted_ids.insert(5);
        assert!(lift(&out).error());
        out.lifted_ids.remove(&5);
        out.sag = 0.4;
        assert_eq!(lift(&out), CoopAnswer::new(false, true));
    }

    #[test]
    fn selection_follows_stack() {
        let f = Frame::clean(overlapping());
        let r = PrivilegedReasoner::default();
        let id = r.select_target(&f.ctx(), &TaskSpec::retrieve_all()).unwrap();
        assert_eq!(dominant_garment(&f.scene, &f.masks.get(id).unwrap().bitmap), Some(3));
        // Green garment 1 lies under green garment 2.
        let t = TaskSpec::retrieve(TargetDescriptor { color: PaletteColor::Green, category: None });
        let id = r.select_target(&f.ctx(), &t).unwrap();
        assert_eq!(dominant_garment(&f.scene, &f.masks.get(id).unwrap().bitmap), Some(2));
        let t = TaskSpec::retrieve(TargetDescriptor { color: PaletteColor::Red, category: None });
        let id = r.select_target(&f.ctx(), &t).unwrap();
        assert_eq!(dominant_garment(&f.scene, &f.masks.get(id).unwrap().bitmap), Some(3));
    }

    #[test]
    fn obstructor_chain() {
        let target = garment(1, PaletteColor::Blue, rect_cells(5, 5, 6, 6));
        let mid = garment(2, PaletteColor::Red, rect_cells(8, 8, 6, 6));
        let top = garment(3, PaletteColor::Yellow, rect_cells(12, 12, 6, 6));
        let f = Frame::clean(scene_with(DIMS, Boundary::Open, vec![target, mid, top]));
        let t = TaskSpec::retrieve(TargetDescriptor { color: PaletteColor::Blue, category: None });
        let id = PrivilegedReasoner::default().select_target(&f.ctx(), &t).unwrap();
        assert_eq!(dominant_garment(&f.scene, &f.masks.get(id).unwrap().bitmap), Some(3));
    }

    #[test]
    fn brute_force_error_flag_matches_oracle() {
        let oracle = GraspOracle::default();
        let scene = overlapping();
        let f = Frame::clean(scene.clone());
        for c in DIMS.cells() {
            let out = simulate_single_grasp(&oracle, &scene, c);
            let picked = Bitmap::new(DIMS);
            let lift = LiftInfo { observation: &f.observation, picked: &picked, selected_area: 1, grasp: c, outcome: &out };
            let ans = PrivilegedReasoner::default().decide_cooperation(&f.ctx(), &lift).unwrap();
            assert_eq!(ans.error(), out.lifted_ids.len() >= 2);
        }
    }
}
