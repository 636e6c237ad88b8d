use rand::seq::index::sample;
use rand::Rng;
use std::collections::{BTreeMap, VecDeque};

use super::{MaskSet, SegmenterConfig};
use crate::grid::{Bitmap, Cell};
use crate::pile::{Observation, PileScene};
use crate::rng::seeded;

/// Number of 4-neighbor edges between the visible regions of each garment
/// pair, keyed by `(lower id, higher id)`.
pub(super) fn shared_boundaries(scene: &PileScene) -> BTreeMap<(u32, u32), usize> {
    let top = scene.top_map();
    let dims = scene.dims;
    let mut out = BTreeMap::new();
    for c in dims.cells() {
        let Some(a) = top[dims.index(c)] else { continue };
        for n in [c.offset(1, 0), c.offset(0, 1)] {
            if !dims.contains(n) {
                continue;
            }
            if let Some(b) = top[dims.index(n)] {
                if a != b {
                    let (ia, ib) = (scene.stack[a].id, scene.stack[b].id);
                    *out.entry((ia.min(ib), ia.max(ib))).or_insert(0) += 1;
                }
            }
        }
    }
    out
}

/// True when two garments' visible regions are similar enough in color and
/// touch along enough boundary to be fused by the segmenter.
pub(super) fn merge_eligible(
    scene: &PileScene,
    shared: &BTreeMap<(u32, u32), usize>,
    a: u32,
    b: u32,
    cfg: &SegmenterConfig,
) -> bool {
    let key = (a.min(b), a.max(b));
    let touching = shared.get(&key).copied().unwrap_or(0);
    let (Some(ga), Some(gb)) = (scene.garment(a), scene.garment(b)) else {
        return false;
    };
    touching >= cfg.merge_overlap_threshold && ga.color.linf(gb.color) <= cfg.merge_color_threshold
}

/// Splits a region into `k` parts by multi-source breadth-first growth from
/// `k` random seed cells. Parts grown from a seed are connected; cells in
/// components no seed reaches join the first part.
fn fragment(region: &Bitmap, k: usize, rng: &mut impl Rng) -> Vec<Bitmap> {
    let cells: Vec<Cell> = region.cells().collect();
    if cells.len() < k {
        return vec![region.clone()];
    }
    let dims = region.dims();
    let mut owner = vec![usize::MAX; dims.len()];
    let mut queue = VecDeque::new();
    for (p, i) in sample(rng, cells.len(), k).into_iter().enumerate() {
        let c = cells[i];
        owner[dims.index(c)] = p;
        queue.push_back(c);
    }
    while let Some(c) = queue.pop_front() {
        let p = owner[dims.index(c)];
        for n in c.neighbors4() {
            if region.get(n) && owner[dims.index(n)] == usize::MAX {
                owner[dims.index(n)] = p;
                queue.push_back(n);
            }
        }
    }
    let mut parts = vec![Bitmap::new(dims); k];
    for c in cells {
        let p = owner[dims.index(c)];
        parts[if p == usize::MAX { 0 } else { p }].set(c, true);
    }
    parts
}

fn first_cell_key(b: &Bitmap) -> (i32, i32) {
    b.cells().next().map_or((i32::MAX, i32::MAX), |c| (c.y, c.x))
}

/// Segments the pile. Starts from the true visible regions and corrupts them:
/// merge-eligible touching pairs fuse with probability `p_merge`, and every
/// region left unmerged splits into `frag_pieces` parts with probability
/// `p_frag`. No filtering is applied here.
pub fn segment(observation: &Observation, scene: &PileScene, cfg: &SegmenterConfig, seed: u64) -> MaskSet {
    let dims = observation.dims;
    let mut rng = seeded(seed);
    let mut regions: Vec<(u32, Bitmap)> = scene
        .visible_bitmaps()
        .into_iter()
        .filter(|(_, b)| !b.is_empty())
        .collect();
    regions.sort_by_key(|(_, b)| first_cell_key(b));
    let index: BTreeMap<u32, usize> = regions.iter().enumerate().map(|(i, (id, _))| (*id, i)).collect();

    // Union-find over region indices.
    let mut parent: Vec<usize> = (0..regions.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let shared = shared_boundaries(scene);
    if cfg.p_merge > 0.0 {
        let mut pairs: Vec<(usize, usize)> = shared
            .keys()
            .filter(|(a, b)| merge_eligible(scene, &shared, *a, *b, cfg))
            .map(|(a, b)| {
                let (i, j) = (index[a], index[b]);
                (i.min(j), i.max(j))
            })
            .collect();
        pairs.sort_unstable();
        for (i, j) in pairs {
            if rng.gen_bool(cfg.p_merge) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[rj.max(ri)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..regions.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }

    let mut out: Vec<Bitmap> = Vec::new();
    for members in groups.values() {
        if members.len() > 1 {
            let mut b = Bitmap::new(dims);
            for &m in members {
                b.union_with(&regions[m].1);
            }
            out.push(b);
        } else {
            let region = &regions[members[0]].1;
            if cfg.p_frag > 0.0 && rng.gen_bool(cfg.p_frag) {
                out.extend(fragment(region, cfg.frag_pieces, &mut rng));
            } else {
                out.push(region.clone());
            }
        }
    }
    out.sort_by_key(first_cell_key);
    MaskSet::from_bitmaps(dims, out)
}
