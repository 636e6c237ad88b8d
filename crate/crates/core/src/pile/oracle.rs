//! Physics-lite grasp oracle: rule cascade for single-arm grasps, dual-arm
//! delivery, drop-back after failed lifts, and the shake perturbation used by
//! mask fine-tuning.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use super::{Boundary, GarmentSpec, Observation, PileScene};
use crate::error::{Error, Result};
use crate::grid::{Cell, CellRect};
use crate::rng::seeded;

/// Constants of the grasp oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspOracle {
    /// Radius (cells) around the grasp point within which garments lying on
    /// top of the grasped one get dragged along.
    pub r_drag: f64,
    /// Entanglement weight at or above which a neighbor is co-lifted.
    pub theta_ent: f64,
    /// Height (m) a single arm can lift a garment clear of the pile.
    pub l_arm: f64,
    /// Gripper height (m) of the post-lift frame.
    pub lift_height: f64,
    /// Drop-back offset bound per axis, in cells.
    pub dropback_offset: i32,
}

impl Default for GraspOracle {
    fn default() -> Self {
        GraspOracle {
            r_drag: 3.0,
            theta_ent: 0.5,
            l_arm: 0.35,
            lift_height: 1.0,
            dropback_offset: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspResult {
    Success,
    MultiLift,
    Drop,
    BoundaryCollision,
    EmptyGrasp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspOutcome {
    /// Garment under the gripper, if any.
    pub garment: Option<u32>,
    pub lifted_ids: BTreeSet<u32>,
    pub result: GraspResult,
    /// Meters.
    pub sag: f64,
    pub steps: u32,
}

impl GraspOutcome {
    fn nothing(result: GraspResult, garment: Option<u32>, steps: u32) -> Self {
        GraspOutcome {
            garment,
            lifted_ids: BTreeSet::new(),
            result,
            sag: 0.0,
            steps,
        }
    }
}

fn max_dist(g: &GarmentSpec, point: Cell) -> f64 {
    g.cells
        .iter()
        .map(|c| c.dist2(point))
        .max()
        .map_or(0.0, |d| (d as f64).sqrt())
}

/// Longest in-footprint distance from `point`, in meters.
pub fn sag_length(scene: &PileScene, garment_id: u32, point: Cell) -> Result<f64> {
    let g = scene
        .garment(garment_id)
        .ok_or_else(|| Error::domain(format!("unknown garment {garment_id}")))?;
    if !g.contains(point) {
        return Err(Error::domain(format!(
            "grasp point ({}, {}) outside garment {garment_id}",
            point.x, point.y
        )));
    }
    Ok(scene.cell_size * max_dist(g, point))
}

/// Garments that come up together with stack entry `si` when it is grasped at
/// `point`: itself, anything above it overlapping it within `r_drag`, and
/// anything entangled with it at or above `theta_ent`.
fn co_lifted(oracle: &GraspOracle, scene: &PileScene, si: usize, point: Cell) -> BTreeSet<u32> {
    let g = &scene.stack[si];
    let r2 = oracle.r_drag * oracle.r_drag;
    let mut lifted = BTreeSet::from([g.id]);
    let near: Vec<Cell> = g
        .cells
        .iter()
        .copied()
        .filter(|c| c.dist2(point) as f64 <= r2)
        .collect();
    for h in &scene.stack[si + 1..] {
        if near.iter().any(|c| h.contains(*c)) {
            lifted.insert(h.id);
        }
    }
    for e in &scene.entanglement {
        if e.w >= oracle.theta_ent {
            if e.a == g.id {
                lifted.insert(e.b);
            } else if e.b == g.id {
                lifted.insert(e.a);
            }
        }
    }
    lifted
}

/// Single-arm grasp at `point`, evaluated as an ordered rule cascade.
pub fn simulate_single_grasp(oracle: &GraspOracle, scene: &PileScene, point: Cell) -> GraspOutcome {
    let Some(si) = scene.stack.iter().rposition(|g| g.contains(point)) else {
        return GraspOutcome::nothing(GraspResult::EmptyGrasp, None, 1);
    };
    let g = &scene.stack[si];
    if scene.boundary.collides(point) {
        return GraspOutcome::nothing(GraspResult::BoundaryCollision, Some(g.id), 1);
    }
    let lifted = co_lifted(oracle, scene, si, point);
    let sag = scene.cell_size * max_dist(g, point);
    let result = if lifted.len() >= 2 {
        GraspResult::MultiLift
    } else if sag > oracle.l_arm {
        GraspResult::Drop
    } else {
        GraspResult::Success
    };
    GraspOutcome {
        garment: Some(g.id),
        lifted_ids: lifted,
        result,
        sag,
        steps: 1,
    }
}

/// Second grasp by the slave arm at `p2` followed by a horizontal two-arm
/// delivery.
pub fn simulate_dual_delivery(
    oracle: &GraspOracle,
    scene: &PileScene,
    garment_id: u32,
    p1: Cell,
    p2: Cell,
) -> Result<GraspOutcome> {
    let g = scene
        .garment(garment_id)
        .ok_or_else(|| Error::domain(format!("unknown garment {garment_id}")))?;
    if p1 == p2 {
        return Err(Error::domain("dual grasp points coincide"));
    }
    if !g.contains(p1) || !g.contains(p2) {
        return Err(Error::domain("dual grasp point outside the garment footprint"));
    }
    let span = g
        .cells
        .iter()
        .map(|c| c.dist2(p1).min(c.dist2(p2)))
        .max()
        .map_or(0.0, |d| (d as f64).sqrt())
        * scene.cell_size;
    let result = if scene.boundary.collides(p1) || scene.boundary.collides(p2) {
        GraspResult::BoundaryCollision
    } else if span <= oracle.l_arm {
        GraspResult::Success
    } else {
        GraspResult::Drop
    };
    Ok(GraspOutcome {
        garment: Some(garment_id),
        lifted_ids: BTreeSet::from([garment_id]),
        result,
        sag: span,
        steps: 2,
    })
}

/// Range of translations keeping every footprint cell of `ids` inside `region`.
fn offset_range(scene: &PileScene, ids: &BTreeSet<u32>, region: CellRect) -> (i32, i32, i32, i32) {
    let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) = (i32::MIN, i32::MAX, i32::MIN, i32::MAX);
    for g in scene.stack.iter().filter(|g| ids.contains(&g.id)) {
        if let Some(b) = g.bbox() {
            lo_x = lo_x.max(region.x0 - b.x0);
            hi_x = hi_x.min(region.x1 - b.x1);
            lo_y = lo_y.max(region.y0 - b.y0);
            hi_y = hi_y.min(region.y1 - b.y1);
        }
    }
    (lo_x, hi_x.max(lo_x), lo_y, hi_y.max(lo_y))
}

/// Moves `ids` to the top of the stack (keeping their relative order),
/// translated by `offset`.
fn move_to_top(scene: &PileScene, ids: &BTreeSet<u32>, offset: (i32, i32)) -> PileScene {
    let mut out = scene.clone();
    let (moved, rest): (Vec<GarmentSpec>, Vec<GarmentSpec>) =
        out.stack.drain(..).partition(|g| ids.contains(&g.id));
    out.stack = rest;
    out.stack
        .extend(moved.into_iter().map(|g| g.translated(offset.0, offset.1)));
    out
}

/// Drops `ids` back onto the pile: each garment lands on top, shifted by a
/// seeded offset in `[-dropback_offset, dropback_offset]` per axis, clamped so
/// it stays inside the placement region.
pub fn drop_back(oracle: &GraspOracle, scene: &PileScene, ids: &BTreeSet<u32>, seed: u64) -> PileScene {
    let mut rng = seeded(seed);
    let region = scene.placement_region();
    let mut out = scene.clone();
    let order: Vec<u32> = scene.ids().into_iter().filter(|id| ids.contains(id)).collect();
    for id in order {
        let k = oracle.dropback_offset;
        let dx = rng.gen_range(-k..=k);
        let dy = rng.gen_range(-k..=k);
        let one = BTreeSet::from([id]);
        let (lx, hx, ly, hy) = offset_range(&out, &one, region);
        out = move_to_top(&out, &one, (dx.clamp(lx, hx), dy.clamp(ly, hy)));
    }
    out.recompute_entanglement();
    out
}

/// Updates the pile after a grasp: a success removes the garment, failed lifts
/// fall back on top, and grasps that lifted nothing leave the scene unchanged.
pub fn apply_retrieval(oracle: &GraspOracle, scene: &PileScene, outcome: &GraspOutcome, seed: u64) -> PileScene {
    match outcome.result {
        GraspResult::Success => {
            let mut out = scene.clone();
            out.stack.retain(|g| !outcome.lifted_ids.contains(&g.id));
            out.entanglement
                .retain(|e| !outcome.lifted_ids.contains(&e.a) && !outcome.lifted_ids.contains(&e.b));
            out
        }
        GraspResult::MultiLift | GraspResult::Drop => drop_back(oracle, scene, &outcome.lifted_ids, seed),
        GraspResult::EmptyGrasp | GraspResult::BoundaryCollision => scene.clone(),
    }
}

/// The pile as seen right after a lift: lifted garments are moved to the top
/// of the stack without changing position.
pub fn lifted_scene(scene: &PileScene, lifted: &BTreeSet<u32>) -> PileScene {
    move_to_top(scene, lifted, (0, 0))
}

/// Renders the post-lift frame. Lifted garments hang from the gripper at
/// `grasp`: a footprint cell at distance `d` from the grasp point sits at
/// height `lift_height - d * cell_size`, never below the remaining pile.
pub fn render_lifted(oracle: &GraspOracle, scene: &PileScene, lifted: &BTreeSet<u32>, grasp: Cell) -> Observation {
    let mut rest = scene.clone();
    rest.stack.retain(|g| !lifted.contains(&g.id));
    let mut obs = rest.render_observation();
    let base = obs.depth.clone();
    let mut hang = vec![f64::NEG_INFINITY; obs.depth.len()];
    for g in scene.stack.iter().filter(|g| lifted.contains(&g.id)) {
        for &c in &g.cells {
            if !scene.dims.contains(c) {
                continue;
            }
            let i = scene.dims.index(c);
            let z = (oracle.lift_height - c.dist(grasp) * scene.cell_size)
                .max(base[i] + scene.layer_thickness);
            if z >= hang[i] {
                hang[i] = z;
                obs.depth[i] = z;
                obs.color[i] = g.color;
            }
        }
    }
    obs
}

/// Random-walk shaking parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShakeConfig {
    /// Largest per-frame displacement per axis, in cells.
    pub max_step: i32,
    /// Radius (cells) around the walk end searched for the release spot.
    pub release_radius: i32,
}

impl Default for ShakeConfig {
    fn default() -> Self {
        ShakeConfig {
            max_step: 3,
            release_radius: 10,
        }
    }
}

/// Pinch at `pinch`, lift, shake, and release.
///
/// Frame 0 is the input. Intermediate frames show the pinched garment (and
/// whatever it drags along) held on top at the random-walk positions. In the
/// last frame the group is released at the spot near the walk end with the
/// least overlap and contact with the rest of the pile, subject to never
/// overlapping any other garment more than before the shake.
pub fn shake_perturb(
    oracle: &GraspOracle,
    cfg: &ShakeConfig,
    scene: &PileScene,
    pinch: Cell,
    frames: usize,
    seed: u64,
) -> Result<Vec<PileScene>> {
    if frames < 2 {
        return Err(Error::domain("shake needs at least two frames"));
    }
    let si = scene
        .stack
        .iter()
        .rposition(|g| g.contains(pinch))
        .ok_or(Error::NoGarment { x: pinch.x, y: pinch.y })?;
    let group = co_lifted(oracle, scene, si, pinch);
    let region = scene.placement_region();
    let (lx, hx, ly, hy) = offset_range(scene, &group, region);
    let mut rng = seeded(seed);
    let mut out = vec![scene.clone()];
    let mut pos = (0i32, 0i32);
    for f in 1..frames {
        let s = cfg.max_step;
        let (dx, dy) = if s > 0 {
            (rng.gen_range(-s..=s), rng.gen_range(-s..=s))
        } else {
            (0, 0)
        };
        pos = ((pos.0 + dx).clamp(lx, hx), (pos.1 + dy).clamp(ly, hy));
        if f < frames - 1 {
            out.push(move_to_top(scene, &group, pos));
        }
    }

    // Release search.
    let others: Vec<&GarmentSpec> = scene.stack.iter().filter(|g| !group.contains(&g.id)).collect();
    let movers: Vec<&GarmentSpec> = scene.stack.iter().filter(|g| group.contains(&g.id)).collect();
    let dims = scene.dims;
    let mut other_cover: Vec<Vec<usize>> = vec![Vec::new(); dims.len()];
    for (k, g) in others.iter().enumerate() {
        for &c in &g.cells {
            if dims.contains(c) {
                other_cover[dims.index(c)].push(k);
            }
        }
    }
    let overlaps_at = |off: (i32, i32)| -> Vec<Vec<usize>> {
        movers
            .iter()
            .map(|m| {
                let mut per = vec![0usize; others.len()];
                for c in &m.cells {
                    let c = c.offset(off.0, off.1);
                    if dims.contains(c) {
                        for &k in &other_cover[dims.index(c)] {
                            per[k] += 1;
                        }
                    }
                }
                per
            })
            .collect()
    };
    let before = overlaps_at((0, 0));
    let moved_cells: BTreeSet<Cell> = movers.iter().flat_map(|m| m.cells.iter().copied()).collect();
    let score = |off: (i32, i32), ov: &[Vec<usize>]| -> usize {
        let overlap: usize = ov.iter().flatten().sum();
        let mut contact = 0usize;
        for c in &moved_cells {
            let c = c.offset(off.0, off.1);
            for n in c.neighbors4() {
                if dims.contains(n)
                    && !moved_cells.contains(&n.offset(-off.0, -off.1))
                    && !other_cover[dims.index(n)].is_empty()
                {
                    contact += 1;
                }
            }
        }
        2 * overlap + contact
    };
    let r = cfg.release_radius;
    let mut candidates: Vec<(i32, i32)> = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let off = (pos.0 + dx, pos.1 + dy);
            if off.0 >= lx && off.0 <= hx && off.1 >= ly && off.1 <= hy {
                candidates.push(off);
            }
        }
    }
    candidates.sort_by_key(|&(x, y)| ((x - pos.0).pow(2) + (y - pos.1).pow(2), y, x));
    let mut best: Option<((i32, i32), usize)> = None;
    for off in candidates.into_iter().chain(std::iter::once((0, 0))) {
        let ov = overlaps_at(off);
        let allowed = ov
            .iter()
            .zip(&before)
            .all(|(now, was)| now.iter().zip(was).all(|(a, b)| a <= b));
        if !allowed {
            continue;
        }
        let s = score(off, &ov);
        if best.is_none_or(|(_, bs)| s < bs) {
            best = Some((off, s));
        }
    }
    let (release, _) = best.expect("zero offset is always admissible");
    let mut last = move_to_top(scene, &group, release);
    if last.ids() != scene.ids() || release != (0, 0) {
        last.recompute_entanglement();
    }
    out.push(last);
    Ok(out)
}

impl Boundary {
    pub fn is_closed(&self) -> bool {
        matches!(self, Boundary::Closed { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::PaletteColor;
    use crate::grid::GridDims;
    use crate::pile::test_util::*;
    use crate::pile::{generate_scene, SceneConfig};

    fn strip_scene(len: i32, cell_size: f64) -> PileScene {
        let mut s = scene_with(
            GridDims::new(64, 64),
            Boundary::Open,
            vec![garment(1, PaletteColor::Red, rect_cells(5, 5, len, 1))],
        );
        s.cell_size = cell_size;
        s
    }

    #[test]
    fn sag_examples() {
        let one = scene_with(
            GridDims::new(32, 32),
            Boundary::Open,
            vec![garment(1, PaletteColor::Red, vec![Cell::new(3, 3)])],
        );
        assert_eq!(sag_length(&one, 1, Cell::new(3, 3)).unwrap(), 0.0);
        let s = strip_scene(11, 0.05);
        assert!((sag_length(&s, 1, Cell::new(5, 5)).unwrap() - 0.5).abs() < 1e-12);
        assert!((sag_length(&s, 1, Cell::new(10, 5)).unwrap() - 0.25).abs() < 1e-12);
        assert!(sag_length(&s, 1, Cell::new(30, 30)).is_err());
    }

    #[test]
    fn isolated_centroid_grasp_succeeds() {
        let s = scene_with(
            GridDims::new(32, 32),
            Boundary::Open,
            vec![garment(1, PaletteColor::Red, rect_cells(10, 10, 7, 7))],
        );
        let o = simulate_single_grasp(&GraspOracle::default(), &s, Cell::new(13, 13));
        assert_eq!(o.result, GraspResult::Success);
        assert_eq!(o.lifted_ids, BTreeSet::from([1]));
        assert_eq!(o.steps, 1);
    }

    #[test]
    fn sliver_grasp_drags_the_garment_on_top() {
        // h (id 2) covers g except a two-column sliver on the left.
        let g = garment(1, PaletteColor::Red, rect_cells(10, 10, 8, 8));
        let h = garment(2, PaletteColor::Blue, rect_cells(12, 10, 8, 8));
        let s = scene_with(GridDims::new(32, 32), Boundary::Open, vec![g, h]);
        let oracle = GraspOracle { theta_ent: 1.1, ..GraspOracle::default() };
        let o = simulate_single_grasp(&oracle, &s, Cell::new(10, 14));
        // Rule 3 by hand: cell (12, 14) is in both footprints at distance 2 <= 3.
        assert_eq!(o.result, GraspResult::MultiLift);
        assert_eq!(o.lifted_ids, BTreeSet::from([1, 2]));
    }

    #[test]
    fn wall_grasp_collides_and_empty_grasp() {
        let container = CellRect { x0: 10, y0: 10, x1: 50, y1: 50 };
        let s = scene_with(
            GridDims::new(64, 64),
            Boundary::Closed { container, wall_margin: 2 },
            vec![garment(1, PaletteColor::Red, rect_cells(10, 20, 6, 6))],
        );
        let o = simulate_single_grasp(&GraspOracle::default(), &s, Cell::new(11, 22));
        assert_eq!(o.result, GraspResult::BoundaryCollision);
        let o = simulate_single_grasp(&GraspOracle::default(), &s, Cell::new(40, 40));
        assert_eq!(o.result, GraspResult::EmptyGrasp);
        assert!(o.lifted_ids.is_empty());
    }

    #[test]
    fn rule_precedence_boundary_before_multilift() {
        let container = CellRect { x0: 10, y0: 10, x1: 50, y1: 50 };
        let g = garment(1, PaletteColor::Red, rect_cells(10, 20, 8, 8));
        let h = garment(2, PaletteColor::Blue, rect_cells(11, 20, 8, 8));
        let s = scene_with(GridDims::new(64, 64), Boundary::Closed { container, wall_margin: 2 }, vec![g, h]);
        let o = simulate_single_grasp(&GraspOracle::default(), &s, Cell::new(10, 22));
        assert_eq!(o.result, GraspResult::BoundaryCollision);
    }

    #[test]
    fn long_strip_drops() {
        let s = strip_scene(40, 0.02);
        let o = simulate_single_grasp(&GraspOracle::default(), &s, Cell::new(5, 5));
        assert_eq!(o.result, GraspResult::Drop);
        assert!((o.sag - 39.0 * 0.02).abs() < 1e-12);
    }

    #[test]
    fn dual_delivery_examples() {
        let s = strip_scene(11, 0.05);
        let oracle = GraspOracle { l_arm: 0.3, ..GraspOracle::default() };
        let ok = simulate_dual_delivery(&oracle, &s, 1, Cell::new(5, 5), Cell::new(15, 5)).unwrap();
        assert_eq!(ok.result, GraspResult::Success);
        assert!((ok.sag - 0.25).abs() < 1e-12);
        assert_eq!(ok.steps, 2);
        let bad = simulate_dual_delivery(&oracle, &s, 1, Cell::new(5, 5), Cell::new(6, 5)).unwrap();
        // Farthest cell (15, 5) is 9 cells from the nearer grasp: 0.45 > 0.3.
        assert!((bad.sag - 0.45).abs() < 1e-12);
        assert_eq!(bad.result, GraspResult::Drop);
        assert!(simulate_dual_delivery(&oracle, &s, 1, Cell::new(5, 5), Cell::new(5, 5)).is_err());
        assert!(simulate_dual_delivery(&oracle, &s, 1, Cell::new(5, 5), Cell::new(5, 6)).is_err());
    }

    #[test]
    fn retrieval_updates() {
        let oracle = GraspOracle::default();
        let s = generate_scene(&SceneConfig::closed().with_counts(5, 5), 11).unwrap();
        let top = s.stack.last().unwrap().clone();
        let ok = GraspOutcome {
            garment: Some(top.id),
            lifted_ids: BTreeSet::from([top.id]),
            result: GraspResult::Success,
            sag: 0.1,
            steps: 1,
        };
        let after = apply_retrieval(&oracle, &s, &ok, 1);
        assert_eq!(after.len(), 4);
        assert!(after.entanglement.iter().all(|e| e.a != top.id && e.b != top.id));

        let empty = GraspOutcome::nothing(GraspResult::EmptyGrasp, None, 1);
        assert_eq!(apply_retrieval(&oracle, &s, &empty, 1), s);

        let bottom_two: BTreeSet<u32> = s.stack[..2].iter().map(|g| g.id).collect();
        let multi = GraspOutcome {
            garment: Some(s.stack[0].id),
            lifted_ids: bottom_two.clone(),
            result: GraspResult::MultiLift,
            sag: 0.1,
            steps: 1,
        };
        let after = apply_retrieval(&oracle, &s, &multi, 5);
        let mut before_ids = s.ids();
        let mut after_ids = after.ids();
        let top_two: BTreeSet<u32> = after_ids[3..].iter().copied().collect();
        assert_eq!(top_two, bottom_two);
        before_ids.sort();
        after_ids.sort();
        assert_eq!(before_ids, after_ids);
        after.validate().unwrap();
    }

    #[test]
    fn zero_displacement_shake_is_identity() {
        let s = scene_with(
            GridDims::new(32, 32),
            Boundary::Open,
            vec![
                garment(1, PaletteColor::Red, rect_cells(2, 2, 6, 6)),
                garment(2, PaletteColor::Blue, rect_cells(20, 20, 6, 6)),
            ],
        );
        let cfg = ShakeConfig { max_step: 0, release_radius: 0 };
        let frames = shake_perturb(&GraspOracle::default(), &cfg, &s, Cell::new(22, 22), 2, 9).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[1], frames[0]);
    }

    #[test]
    fn shake_separates_overlapping_pair() {
        let a = garment(1, PaletteColor::Red, rect_cells(10, 10, 8, 8));
        let b = garment(2, PaletteColor::Red, rect_cells(13, 12, 8, 8));
        let s = scene_with(GridDims::new(40, 40), Boundary::Open, vec![a, b]);
        let before = s.overlap_area(1, 2);
        assert_eq!(before, 30);
        let frames = shake_perturb(&GraspOracle::default(), &ShakeConfig::default(), &s, Cell::new(19, 18), 6, 4).unwrap();
        assert_eq!(frames.len(), 6);
        let last = frames.last().unwrap();
        assert!(last.overlap_area(1, 2) <= before);
        assert_eq!(last.len(), 2);
        last.validate().unwrap();
    }

    #[test]
    fn shake_rejects_background_pinch() {
        let s = scene_with(
            GridDims::new(32, 32),
            Boundary::Open,
            vec![garment(1, PaletteColor::Red, rect_cells(2, 2, 3, 3))],
        );
        let r = shake_perturb(&GraspOracle::default(), &ShakeConfig::default(), &s, Cell::new(30, 30), 4, 0);
        assert!(matches!(r, Err(Error::NoGarment { .. })));
    }

    #[test]
    fn lifted_render_hangs_from_grasp() {
        let s = strip_scene(20, 0.02);
        let oracle = GraspOracle::default();
        let lifted = BTreeSet::from([1]);
        let obs = render_lifted(&oracle, &s, &lifted, Cell::new(5, 5));
        assert!((obs.depth_at(Cell::new(5, 5)) - 1.0).abs() < 1e-12);
        assert!((obs.depth_at(Cell::new(24, 5)) - (1.0 - 19.0 * 0.02)).abs() < 1e-12);
    }
}
