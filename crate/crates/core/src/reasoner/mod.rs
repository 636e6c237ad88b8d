//! Decision functions of the retrieval loop: which masks need repair, which
//! garment to retrieve next, and whether a lift needs aborting or a second arm.

mod privileged;
mod remote;
mod rule;

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::color::{PaletteColor, Rgb};
use crate::error::{Error, Result};
use crate::grid::{Bitmap, Cell, CellRect};
use crate::perception::{AnnotatedImage, MaskSet};
use crate::pile::{Category, GarmentSpec, GraspOutcome, Observation, PileScene};

pub use privileged::PrivilegedReasoner;
pub use remote::{CoopWire, QueryKind, RemoteReasoner, WireImages, WireRequest, DEFAULT_TIMEOUT_MS};
pub use rule::RuleReasoner;

/// One palette cluster of a mask's pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorShare {
    pub palette: PaletteColor,
    /// Mean color of the pixels in the cluster.
    pub rgb: Rgb,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSummary {
    pub marker_id: u32,
    pub area: usize,
    /// Up to three clusters, largest first.
    pub dominant_colors: Vec<ColorShare>,
    /// perimeter² / area.
    pub raggedness: f64,
    pub mean_depth: f64,
    pub bbox: CellRect,
    /// Masks whose bounding box intersects this one.
    pub overlap_ids: Vec<u32>,
}

/// Palette histogram of `cells` in `observation`: clusters ordered by pixel
/// count (ties: palette order), at most three.
pub fn dominant_colors(observation: &Observation, cells: &[Cell]) -> Vec<ColorShare> {
    let mut count = [0usize; 12];
    let mut sum = [[0u64; 3]; 12];
    for &c in cells {
        let rgb = observation.color_at(c);
        let k = PaletteColor::nearest(rgb).index();
        count[k] += 1;
        for (s, v) in sum[k].iter_mut().zip(rgb.0) {
            *s += v as u64;
        }
    }
    let mut order: Vec<usize> = (0..12).filter(|&k| count[k] > 0).collect();
    order.sort_by_key(|&k| (std::cmp::Reverse(count[k]), k));
    order
        .into_iter()
        .take(3)
        .map(|k| {
            let n = count[k] as u64;
            ColorShare {
                palette: PaletteColor::ALL[k],
                rgb: Rgb(sum[k].map(|s| ((s + n / 2) / n) as u8)),
                share: count[k] as f64 / cells.len() as f64,
            }
        })
        .collect()
}

/// Observable description of every mask, in mask order.
pub fn summarize_masks(observation: &Observation, masks: &MaskSet) -> Vec<MaskSummary> {
    let boxes: Vec<Option<CellRect>> = masks.masks.iter().map(|m| m.bitmap.bbox()).collect();
    masks
        .masks
        .iter()
        .zip(&boxes)
        .filter_map(|(m, bbox)| {
            let bbox = (*bbox)?;
            let cells: Vec<Cell> = m.bitmap.cells().collect();
            let area = cells.len();
            let perimeter = m.bitmap.perimeter() as f64;
            let mean_depth = cells.iter().map(|&c| observation.depth_at(c)).sum::<f64>() / area as f64;
            let overlap_ids = masks
                .masks
                .iter()
                .zip(&boxes)
                .filter(|(o, b)| o.marker_id != m.marker_id && b.is_some_and(|b| b.intersects(&bbox)))
                .map(|(o, _)| o.marker_id)
                .collect();
            Some(MaskSummary {
                marker_id: m.marker_id,
                area,
                dominant_colors: dominant_colors(observation, &cells),
                raggedness: perimeter * perimeter / area as f64,
                mean_depth,
                bbox,
                overlap_ids,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    A,
    B,
}

/// Garment the specific-retrieval task is after.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetDescriptor {
    pub color: PaletteColor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
}

impl TargetDescriptor {
    /// Ground-truth identity check.
    pub fn matches(&self, g: &GarmentSpec) -> bool {
        g.palette() == self.color && self.category.is_none_or(|c| c == g.category)
    }
}

impl FromStr for TargetDescriptor {
    type Err = String;

    /// `COLOR[:CATEGORY]`, where COLOR is a palette name or `#rrggbb`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (color, category) = match s.split_once(':') {
            Some((c, k)) => (c, Some(k.parse::<Category>()?)),
            None => (s, None),
        };
        let color = match color.trim().strip_prefix('#') {
            Some(hex) if hex.len() == 6 => {
                let v = u32::from_str_radix(hex, 16).map_err(|_| format!("bad hex color `{color}`"))?;
                PaletteColor::nearest(Rgb([(v >> 16) as u8, (v >> 8) as u8, v as u8]))
            }
            Some(_) => return Err(format!("bad hex color `{color}`")),
            None => color.parse()?,
        };
        Ok(TargetDescriptor { color, category })
    }
}

impl fmt::Display for TargetDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.category {
            Some(c) => write!(f, "{}:{}", self.color, c),
            None => write!(f, "{}", self.color),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetDescriptor>,
}

impl TaskSpec {
    pub fn retrieve_all() -> Self {
        TaskSpec { kind: TaskKind::A, target: None }
    }

    pub fn retrieve(target: TargetDescriptor) -> Self {
        TaskSpec {
            kind: TaskKind::B,
            target: Some(target),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == TaskKind::B && self.target.is_none() {
            return Err(Error::Config("task b needs a target".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CoopAnswer {
    pub x_error: u8,
    pub x_dual: u8,
}

impl CoopAnswer {
    pub fn new(error: bool, dual: bool) -> Self {
        CoopAnswer {
            x_error: error as u8,
            x_dual: dual as u8,
        }
    }

    pub fn error(&self) -> bool {
        self.x_error == 1
    }

    pub fn dual(&self) -> bool {
        self.x_dual == 1
    }
}

/// Everything a reasoner may look at for one pre-grasp frame. `truth` is the
/// simulator state; only the privileged reasoner reads it.
#[derive(Debug, Clone, Copy)]
pub struct Context<'a> {
    pub observation: &'a Observation,
    pub masks: &'a MaskSet,
    pub summaries: &'a [MaskSummary],
    pub images: Option<(&'a AnnotatedImage, &'a AnnotatedImage)>,
    pub task: TaskSpec,
    pub truth: &'a PileScene,
}

/// The post-lift frame and what was tracked in it.
#[derive(Debug, Clone, Copy)]
pub struct LiftInfo<'a> {
    pub observation: &'a Observation,
    /// Region tracked as the lifted clump.
    pub picked: &'a Bitmap,
    /// Area of the selected mask before the lift.
    pub selected_area: usize,
    pub grasp: Cell,
    /// Simulator outcome of the lift; only the privileged reasoner reads it.
    pub outcome: &'a GraspOutcome,
}

pub trait Reasoner: Send + Sync {
    fn name(&self) -> &'static str;

    /// Marker ids of masks that should be repaired.
    fn decide_adjust(&self, ctx: &Context) -> Result<BTreeSet<u32>>;

    /// Marker id of the mask to retrieve next.
    fn select_target(&self, ctx: &Context, task: &TaskSpec) -> Result<u32>;

    fn decide_cooperation(&self, ctx: &Context, lift: &LiftInfo) -> Result<CoopAnswer>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasonerKind {
    Rule,
    Privileged,
    Remote,
}

impl FromStr for ReasonerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rule" => Ok(ReasonerKind::Rule),
            "privileged" => Ok(ReasonerKind::Privileged),
            "remote" => Ok(ReasonerKind::Remote),
            _ => Err(format!("unknown reasoner `{s}`")),
        }
    }
}

impl fmt::Display for ReasonerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReasonerKind::Rule => "rule",
            ReasonerKind::Privileged => "privileged",
            ReasonerKind::Remote => "remote",
        })
    }
}

fn require_masks(ctx: &Context) -> Result<()> {
    if ctx.summaries.is_empty() {
        return Err(Error::Contract("target selection needs at least one mask".into()));
    }
    Ok(())
}
