use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use super::{dominant_colors, require_masks, Context, CoopAnswer, LiftInfo, MaskSummary, Reasoner, TaskKind, TaskSpec};
use crate::error::Result;
use crate::grid::Cell;

/// Decisions from observable mask statistics only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleReasoner {
    pub ragged_threshold: f64,
    /// Colors further apart than this (RGB L-infinity) count as distinct garments.
    pub color_threshold: u8,
    /// Share the second color needs before a mask counts as two-colored.
    pub second_share: f64,
    /// Smallest cluster share considered in the post-lift color check.
    pub lifted_share: f64,
    pub l_arm: f64,
}

impl Default for RuleReasoner {
    fn default() -> Self {
        RuleReasoner {
            ragged_threshold: 60.0,
            color_threshold: 40,
            second_share: 0.25,
            lifted_share: 0.1,
            l_arm: 0.35,
        }
    }
}

/// Highest mean depth first, then the smaller marker id.
fn topmost<'a>(it: impl Iterator<Item = &'a MaskSummary>) -> Option<&'a MaskSummary> {
    it.min_by(|a, b| b.mean_depth.total_cmp(&a.mean_depth).then(a.marker_id.cmp(&b.marker_id)))
}

impl RuleReasoner {
    fn two_colored(&self, s: &MaskSummary) -> bool {
        match s.dominant_colors.as_slice() {
            [first, second, ..] => {
                second.share >= self.second_share && first.rgb.linf(second.rgb) > self.color_threshold
            }
            _ => false,
        }
    }

    fn obstructor<'a>(&self, summaries: &'a [MaskSummary], s: &MaskSummary) -> Option<&'a MaskSummary> {
        topmost(
            summaries
                .iter()
                .filter(|o| s.overlap_ids.contains(&o.marker_id) && o.mean_depth > s.mean_depth),
        )
    }
}

impl Reasoner for RuleReasoner {
    fn name(&self) -> &'static str {
        "rule"
    }

    fn decide_adjust(&self, ctx: &Context) -> Result<BTreeSet<u32>> {
        Ok(ctx
            .summaries
            .iter()
            .filter(|s| self.two_colored(s) || s.raggedness > self.ragged_threshold)
            .map(|s| s.marker_id)
            .collect())
    }

    fn select_target(&self, ctx: &Context, task: &TaskSpec) -> Result<u32> {
        require_masks(ctx)?;
        let top = topmost(ctx.summaries.iter()).expect("non-empty").marker_id;
        let target = match (task.kind, task.target) {
            (TaskKind::B, Some(t)) => t,
            _ => return Ok(top),
        };
        let mut matching: Vec<&MaskSummary> = ctx
            .summaries
            .iter()
            .filter(|s| s.dominant_colors.first().is_some_and(|c| c.palette == target.color))
            .collect();
        matching.sort_by(|a, b| b.mean_depth.total_cmp(&a.mean_depth).then(a.marker_id.cmp(&b.marker_id)));
        if let Some(free) = matching.iter().find(|s| self.obstructor(ctx.summaries, s).is_none()) {
            return Ok(free.marker_id);
        }
        Ok(matching
            .first()
            .and_then(|s| self.obstructor(ctx.summaries, s))
            .map_or(top, |o| o.marker_id))
    }

    fn decide_cooperation(&self, _ctx: &Context, lift: &LiftInfo) -> Result<CoopAnswer> {
        let cells: Vec<Cell> = lift.picked.cells().collect();
        if cells.is_empty() {
            return Ok(CoopAnswer::default());
        }
        let clusters: Vec<_> = dominant_colors(lift.observation, &cells)
            .into_iter()
            .filter(|c| c.share >= self.lifted_share)
            .collect();
        let multicolor = clusters
            .iter()
            .enumerate()
            .any(|(i, a)| clusters[i + 1..].iter().any(|b| a.rgb.linf(b.rgb) > self.color_threshold));
        let error = multicolor || cells.len() > 2 * lift.selected_area;
        let (lo, hi) = cells.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| {
            let z = lift.observation.depth_at(c);
            (lo.min(z), hi.max(z))
        });
        Ok(CoopAnswer::new(error, hi - lo > self.l_arm))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::PaletteColor;
    use crate::grid::{Bitmap, GridDims};
    use crate::perception::MaskSet;
    use crate::pile::test_util::*;
    use crate::pile::{lifted_scene, render_lifted, simulate_single_grasp, Boundary, GraspOracle};
    use crate::reasoner::test_util::Frame;
    use crate::reasoner::TargetDescriptor;

    const DIMS: GridDims = GridDims::new(48, 48);

    fn summary(id: u32, depth: f64, bbox: (i32, i32, i32, i32), overlap: &[u32]) -> MaskSummary {
        MaskSummary {
            marker_id: id,
            area: 10,
            dominant_colors: vec![],
            raggedness: 16.0,
            mean_depth: depth,
            bbox: crate::grid::CellRect { x0: bbox.0, y0: bbox.1, x1: bbox.2, y1: bbox.3 },
            overlap_ids: overlap.to_vec(),
        }
    }

    #[test]
    fn adjust_examples() {
        let a = garment(1, PaletteColor::Green, rect_cells(2, 2, 6, 6));
        let b = garment(2, PaletteColor::Blue, rect_cells(8, 2, 6, 6));
        let scene = scene_with(DIMS, Boundary::Open, vec![a, b]);
        let clean = Frame::clean(scene.clone());
        assert!(RuleReasoner::default().decide_adjust(&clean.ctx()).unwrap().is_empty());
        let merged = MaskSet::from_bitmaps(DIMS, [Bitmap::from_cells(DIMS, &rect_cells(2, 2, 12, 6))]);
        let f = Frame::with_masks(scene, merged);
        assert_eq!(RuleReasoner::default().decide_adjust(&f.ctx()).unwrap(), BTreeSet::from([1]));
    }

    #[test]
    fn ragged_mask_flagged() {
        let mut cells = rect_cells(2, 2, 20, 1);
        cells.extend(rect_cells(2, 4, 20, 1));
        cells.extend(rect_cells(2, 3, 1, 1));
        let scene = scene_with(DIMS, Boundary::Open, vec![garment(1, PaletteColor::Red, cells)]);
        let f = Frame::clean(scene);
        assert!(f.summaries[0].raggedness > 60.0);
        assert_eq!(RuleReasoner::default().decide_adjust(&f.ctx()).unwrap(), BTreeSet::from([1]));
    }

    #[test]
    fn select_task_a_by_depth() {
        let scene = scene_with(DIMS, Boundary::Open, vec![]);
        let obs = scene.render_observation();
        let masks = MaskSet::empty(DIMS);
        let s = vec![summary(1, 0.01, (0, 0, 1, 1), &[]), summary(2, 0.03, (5, 5, 6, 6), &[])];
        let ctx = Context { observation: &obs, masks: &masks, summaries: &s, images: None, task: TaskSpec::retrieve_all(), truth: &scene };
        assert_eq!(RuleReasoner::default().select_target(&ctx, &TaskSpec::retrieve_all()).unwrap(), 2);
        let tie = vec![summary(3, 0.02, (0, 0, 1, 1), &[]), summary(1, 0.02, (5, 5, 6, 6), &[])];
        let ctx = Context { summaries: &tie, ..ctx };
        assert_eq!(RuleReasoner::default().select_target(&ctx, &TaskSpec::retrieve_all()).unwrap(), 1);
        let none: Vec<MaskSummary> = vec![];
        let ctx = Context { summaries: &none, ..ctx };
        assert!(RuleReasoner::default().select_target(&ctx, &TaskSpec::retrieve_all()).is_err());
    }

    #[test]
    fn select_task_b_examples() {
        let green = TaskSpec::retrieve(TargetDescriptor { color: PaletteColor::Green, category: None });
        let g = garment(1, PaletteColor::Green, rect_cells(2, 2, 6, 6));
        let r = garment(2, PaletteColor::Red, rect_cells(20, 20, 6, 6));
        let f = Frame::clean(scene_with(DIMS, Boundary::Open, vec![r.clone(), g.clone()]));
        let id = RuleReasoner::default().select_target(&f.ctx(), &green).unwrap();
        assert_eq!(f.summaries[id as usize - 1].dominant_colors[0].palette, PaletteColor::Green);

        // Red lies across the green garment.
        let cover = garment(2, PaletteColor::Red, rect_cells(4, 0, 3, 12));
        let f = Frame::clean(scene_with(DIMS, Boundary::Open, vec![g, cover]));
        let id = RuleReasoner::default().select_target(&f.ctx(), &green).unwrap();
        assert_eq!(f.summaries[id as usize - 1].dominant_colors[0].palette, PaletteColor::Red);
    }

    #[test]
    fn long_strip_needs_two_arms() {
        let oracle = GraspOracle::default();
        let strip = garment(1, PaletteColor::Yellow, rect_cells(4, 20, 40, 2));
        let scene = scene_with(DIMS, Boundary::Open, vec![strip]);
        let f = Frame::clean(scene.clone());
        for (x, dual) in [(4, true), (24, true), (44 - 14, true)] {
            let grasp = Cell::new(x, 20);
            let out = simulate_single_grasp(&oracle, &scene, grasp);
            let post = render_lifted(&oracle, &scene, &out.lifted_ids, grasp);
            let picked = lifted_scene(&scene, &out.lifted_ids).footprint(1).unwrap();
            let lift = LiftInfo { observation: &post, picked: &picked, selected_area: 80, grasp, outcome: &out };
            let ans = RuleReasoner::default().decide_cooperation(&f.ctx(), &lift).unwrap();
            assert_eq!(ans, CoopAnswer::new(false, dual), "grasp at x = {x}");
        }
        let small = garment(1, PaletteColor::Yellow, rect_cells(4, 20, 10, 4));
        let scene = scene_with(DIMS, Boundary::Open, vec![small]);
        let grasp = Cell::new(8, 21);
        let out = simulate_single_grasp(&oracle, &scene, grasp);
        let post = render_lifted(&oracle, &scene, &out.lifted_ids, grasp);
        let picked = scene.footprint(1).unwrap();
        let lift = LiftInfo { observation: &post, picked: &picked, selected_area: 40, grasp, outcome: &out };
        let ans = RuleReasoner::default().decide_cooperation(&Frame::clean(scene.clone()).ctx(), &lift).unwrap();
        assert_eq!(ans, CoopAnswer::new(false, false));
    }

    #[test]
    fn two_garment_clump_is_an_error() {
        let oracle = GraspOracle::default();
        let a = garment(1, PaletteColor::Green, rect_cells(10, 10, 8, 8));
        let b = garment(2, PaletteColor::Red, rect_cells(14, 14, 8, 8));
        let scene = scene_with(DIMS, Boundary::Open, vec![a, b]);
        let grasp = Cell::new(13, 13);
        let out = simulate_single_grasp(&oracle, &scene, grasp);
        assert_eq!(out.lifted_ids.len(), 2);
        let post = render_lifted(&oracle, &scene, &out.lifted_ids, grasp);
        let mut picked = scene.footprint(1).unwrap();
        picked.union_with(&scene.footprint(2).unwrap());
        let lift = LiftInfo { observation: &post, picked: &picked, selected_area: 64, grasp, outcome: &out };
        let ans = RuleReasoner::default().decide_cooperation(&Frame::clean(scene.clone()).ctx(), &lift).unwrap();
        assert!(ans.error());
    }

    #[test]
    fn deterministic() {
        let a = garment(1, PaletteColor::Green, rect_cells(2, 2, 6, 6));
        let b = garment(2, PaletteColor::Green, rect_cells(5, 5, 6, 6));
        let f = Frame::clean(scene_with(DIMS, Boundary::Open, vec![a, b]));
        let r = RuleReasoner::default();
        assert_eq!(r.decide_adjust(&f.ctx()).unwrap(), r.decide_adjust(&f.ctx()).unwrap());
        assert_eq!(
            r.select_target(&f.ctx(), &TaskSpec::retrieve_all()).unwrap(),
            r.select_target(&f.ctx(), &TaskSpec::retrieve_all()).unwrap()
        );
    }
}
