//! The retrieval loop: observe, segment (and repair), select, pick a grasp
//! point, lift, decide on cooperation, deliver. One call to [`run_attempt`]
//! is one pass; [`run_episode`] repeats until the task is done.

mod log;

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::affordance::{compute_features, forward, pick_retrieval_point, pointcloud_from, AffordanceModel, PointCloud};
use crate::error::{Error, Result};
use crate::grid::{Bitmap, Cell};
use crate::perception::{annotate, fine_tune, perceive, track_masks, FineTuneConfig, Frame, MaskSet, SegmenterConfig};
use crate::pile::{
    apply_retrieval, drop_back, lifted_scene, render_lifted, simulate_dual_delivery, simulate_single_grasp, GraspOracle,
    GraspOutcome, GraspResult, PileScene,
};
use crate::reasoner::{summarize_masks, Context, CoopAnswer, LiftInfo, Reasoner, TaskKind, TaskSpec};
use crate::rng::{derive, seeded};

pub use log::{read_logs, validate_log, write_logs, EpisodeHeader, LogLine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArmId {
    Left,
    Right,
}

/// Arm on the grasp cell's side of the workspace; the midline goes left.
pub fn choose_master_arm(grasp: Cell, midline_x: i32) -> ArmId {
    if grasp.x <= midline_x {
        ArmId::Left
    } else {
        ArmId::Right
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelinePhase {
    Observe,
    Segment,
    FineTune,
    Select,
    Afford,
    GraspLift,
    CoopDecide,
    SingleDeliver,
    DualGraspDeliver,
    AbortAttempt,
    Done,
}

impl PipelinePhase {
    pub fn is_terminal_action(self) -> bool {
        matches!(
            self,
            PipelinePhase::SingleDeliver | PipelinePhase::DualGraspDeliver | PipelinePhase::AbortAttempt
        )
    }

    pub fn can_precede(self, next: PipelinePhase) -> bool {
        use PipelinePhase::*;
        match self {
            Observe => next == Segment,
            Segment => matches!(next, FineTune | Select),
            FineTune => next == Segment,
            Select => next == Afford,
            Afford => next == GraspLift,
            GraspLift => next == CoopDecide,
            CoopDecide => next.is_terminal_action(),
            SingleDeliver | DualGraspDeliver | AbortAttempt => matches!(next, Observe | Done),
            Done => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    MaskFineTuning,
    Affordance,
    TrackingSelection,
    DualArm,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::MaskFineTuning,
        Ablation::Affordance,
        Ablation::TrackingSelection,
        Ablation::DualArm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::MaskFineTuning => "mask_fine_tuning",
            Ablation::Affordance => "affordance",
            Ablation::TrackingSelection => "tracking_selection",
            Ablation::DualArm => "dual_arm",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| format!("unknown ablation `{s}`"))
    }
}

/// Motion steps charged per primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCosts {
    pub single: u32,
    pub dual: u32,
    pub abort: u32,
    pub fine_tune: u32,
}

impl Default for StepCosts {
    fn default() -> Self {
        StepCosts {
            single: 1,
            dual: 2,
            abort: 1,
            fine_tune: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Removed components.
    pub ablations: BTreeSet<Ablation>,
    pub steps: StepCosts,
    /// Episode attempt cap per initially loaded garment.
    pub attempts_per_garment: usize,
    /// Size of the lowest-point pool the cooperative grasp is drawn from.
    pub coop_bottom: usize,
    pub oracle: GraspOracle,
    pub segmenter: SegmenterConfig,
    pub finetune: FineTuneConfig,
    /// Grasp cell used instead of the affordance choice (testing hook).
    #[serde(skip)]
    pub forced_grasp: Option<Cell>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            ablations: BTreeSet::new(),
            steps: StepCosts::default(),
            attempts_per_garment: 3,
            coop_bottom: 1,
            oracle: GraspOracle::default(),
            segmenter: SegmenterConfig::default(),
            finetune: FineTuneConfig::default(),
            forced_grasp: None,
        }
    }
}

impl PipelineConfig {
    pub fn ablated(&self, a: Ablation) -> bool {
        self.ablations.contains(&a)
    }

    pub fn with_ablations(mut self, ablations: impl IntoIterator<Item = Ablation>) -> Self {
        self.ablations = ablations.into_iter().collect();
        self
    }
}

/// The decision makers an attempt uses.
#[derive(Clone, Copy)]
pub struct Components<'a> {
    pub reasoner: &'a dyn Reasoner,
    /// Required unless the affordance ablation is active.
    pub model: Option<&'a AffordanceModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    Retrieved,
    Aborted,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: usize,
    pub masks_before: usize,
    pub masks_after: usize,
    pub fine_tune_triggered: bool,
    pub selected_id: Option<u32>,
    pub grasp_cell: Option<Cell>,
    pub master_arm: Option<ArmId>,
    /// Final outcome of the attempt (the dual delivery when one happened).
    pub outcome: Option<GraspOutcome>,
    pub coop: Option<CoopAnswer>,
    pub coop_cell: Option<Cell>,
    pub steps: u32,
    pub terminal_status: TerminalStatus,
    /// Task B only: the retrieved garment is the requested one.
    #[serde(default)]
    pub target_hit: bool,
    pub phases: Vec<PipelinePhase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// True when `error` came from the remote reasoner link.
    #[serde(default)]
    pub remote_error: bool,
}

impl AttemptRecord {
    pub fn new(attempt: usize) -> Self {
        AttemptRecord {
            attempt,
            masks_before: 0,
            masks_after: 0,
            fine_tune_triggered: false,
            selected_id: None,
            grasp_cell: None,
            master_arm: None,
            outcome: None,
            coop: None,
            coop_cell: None,
            steps: 0,
            terminal_status: TerminalStatus::Failed,
            target_hit: false,
            phases: Vec::new(),
            error: None,
            remote_error: false,
        }
    }

    /// Attempt whose lift went without a reported error.
    pub fn coop_eligible(&self) -> bool {
        self.coop.is_some_and(|c| !c.error())
    }

    pub fn dual_triggered(&self) -> bool {
        self.coop.is_some_and(|c| !c.error() && c.dual())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub header: EpisodeHeader,
    pub attempts: Vec<AttemptRecord>,
    pub task_completed: bool,
    pub total_steps: u64,
}

impl EpisodeLog {
    pub fn retrieved(&self) -> usize {
        self.attempts
            .iter()
            .filter(|a| a.terminal_status == TerminalStatus::Retrieved)
            .count()
    }

    /// First remote-link failure, if any.
    pub fn remote_failure(&self) -> Option<&str> {
        self.attempts
            .iter()
            .find(|a| a.remote_error)
            .and_then(|a| a.error.as_deref())
    }
}

/// Lowest points of `picked` in the post-lift cloud, ordered by height then
/// row-major index; one of the lowest `bottom` is drawn, avoiding the master
/// grasp cell when another candidate exists.
pub fn select_coop_point(cloud: &PointCloud, picked: &Bitmap, master: Cell, bottom: usize, seed: u64) -> Result<Cell> {
    let dims = picked.dims();
    let mut pts: Vec<(f64, usize, Cell)> = cloud
        .cells
        .iter()
        .zip(&cloud.points)
        .filter(|(c, _)| picked.get(**c))
        .map(|(&c, p)| (p[2], dims.index(c), c))
        .collect();
    if pts.is_empty() {
        return Err(Error::domain("picked mask covers no point"));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let others: Vec<Cell> = pts.iter().map(|p| p.2).filter(|&c| c != master).collect();
    if others.is_empty() {
        return Ok(master);
    }
    let k = bottom.clamp(1, others.len());
    let i = if k == 1 { 0 } else { seeded(seed).gen_range(0..k) };
    Ok(others[i])
}

/// Final outcome of a two-arm delivery after the single-arm lift `lift`.
fn dual_outcome(oracle: &GraspOracle, scene: &PileScene, lift: &GraspOutcome, grasp: Cell, coop: Cell) -> Result<GraspOutcome> {
    let Some(g) = lift.garment else { return Ok(lift.clone()) };
    if matches!(lift.result, GraspResult::EmptyGrasp | GraspResult::BoundaryCollision) {
        return Ok(lift.clone());
    }
    if lift.lifted_ids.len() >= 2 {
        return Ok(GraspOutcome {
            result: GraspResult::MultiLift,
            steps: 2,
            ..lift.clone()
        });
    }
    let on_garment = scene.garment(g).is_some_and(|s| s.contains(coop));
    if coop == grasp || !on_garment {
        // The second gripper found nothing to hold; the master carries alone.
        return Ok(GraspOutcome { steps: 2, ..lift.clone() });
    }
    simulate_dual_delivery(oracle, scene, g, grasp, coop)
}

fn seeded_cell(bitmap: &Bitmap, seed: u64) -> Option<Cell> {
    let cells: Vec<Cell> = bitmap.cells().collect();
    (!cells.is_empty()).then(|| cells[seeded(seed).gen_range(0..cells.len())])
}

struct Perceived {
    observation: crate::pile::Observation,
    masks: MaskSet,
    summaries: Vec<crate::reasoner::MaskSummary>,
    images: (crate::perception::AnnotatedImage, crate::perception::AnnotatedImage),
}

impl Perceived {
    fn new(observation: crate::pile::Observation, masks: MaskSet) -> Self {
        let summaries = summarize_masks(&observation, &masks);
        let images = annotate(&observation, &masks);
        Perceived {
            observation,
            masks,
            summaries,
            images,
        }
    }

    fn ctx<'a>(&'a self, task: &TaskSpec, scene: &'a PileScene) -> Context<'a> {
        Context {
            observation: &self.observation,
            masks: &self.masks,
            summaries: &self.summaries,
            images: Some((&self.images.0, &self.images.1)),
            task: *task,
            truth: scene,
        }
    }
}

fn attempt_body(
    rec: &mut AttemptRecord,
    scene: &PileScene,
    task: &TaskSpec,
    comps: &Components,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<PileScene> {
    let oracle = &cfg.oracle;
    rec.phases.push(PipelinePhase::Observe);
    let observation = scene.render_observation();
    rec.phases.push(PipelinePhase::Segment);
    let masks = perceive(&observation, scene, &cfg.segmenter, derive(seed, 1));
    rec.masks_before = masks.len();
    let mut scene = scene.clone();
    let mut view = Perceived::new(observation, masks);

    if !cfg.ablated(Ablation::MaskFineTuning) && !view.masks.is_empty() {
        let flagged = comps.reasoner.decide_adjust(&view.ctx(task, &scene))?;
        if !flagged.is_empty() {
            rec.phases.push(PipelinePhase::FineTune);
            rec.fine_tune_triggered = true;
            rec.steps += cfg.steps.fine_tune;
            let (shaken, repaired) = fine_tune(
                oracle,
                &cfg.finetune,
                &scene,
                &view.masks,
                &flagged,
                &cfg.segmenter,
                derive(seed, 2),
            )?;
            scene = shaken;
            rec.phases.push(PipelinePhase::Segment);
            view = Perceived::new(scene.render_observation(), repaired);
        }
    }
    rec.masks_after = view.masks.len();

    rec.phases.push(PipelinePhase::Select);
    let ctx = view.ctx(task, &scene);
    let selected = comps.reasoner.select_target(&ctx, task)?;
    let selected_mask = view
        .masks
        .get(selected)
        .ok_or_else(|| Error::Contract(format!("selected mask {selected} does not exist")))?
        .clone();
    rec.selected_id = Some(selected);

    rec.phases.push(PipelinePhase::Afford);
    let grasp = if let Some(c) = cfg.forced_grasp {
        c
    } else if cfg.ablated(Ablation::Affordance) {
        seeded_cell(&selected_mask.bitmap, derive(seed, 3)).expect("masks are non-empty")
    } else {
        let model = comps
            .model
            .ok_or_else(|| Error::Config("affordance model required".into()))?;
        let cloud = pointcloud_from(&view.observation);
        let features = compute_features(&cloud, &view.masks, selected, &scene.boundary)?;
        let map = forward(model, &features)?;
        pick_retrieval_point(&map, &view.masks, selected)?
    };
    rec.grasp_cell = Some(grasp);
    rec.master_arm = Some(choose_master_arm(grasp, scene.dims.width as i32 / 2));

    rec.phases.push(PipelinePhase::GraspLift);
    let lift = simulate_single_grasp(oracle, &scene, grasp);
    let post = render_lifted(oracle, &scene, &lift.lifted_ids, grasp);
    let after = lifted_scene(&scene, &lift.lifted_ids);
    let tracked = track_masks(
        &[Frame::of(scene.clone()), Frame::of(after.clone())],
        &MaskSet::renumbered(scene.dims, [selected_mask.clone()]),
    );
    let mut picked = tracked.coverage();
    for id in &lift.lifted_ids {
        if let Some(f) = after.footprint(*id) {
            picked.union_with(&f);
        }
    }

    rec.phases.push(PipelinePhase::CoopDecide);
    let info = LiftInfo {
        observation: &post,
        picked: &picked,
        selected_area: selected_mask.area(),
        grasp,
        outcome: &lift,
    };
    let coop = comps.reasoner.decide_cooperation(&ctx, &info)?;
    rec.coop = Some(coop);

    let (outcome, next) = if coop.error() {
        rec.phases.push(PipelinePhase::AbortAttempt);
        rec.steps += cfg.steps.abort;
        let next = if lift.lifted_ids.is_empty() {
            scene.clone()
        } else {
            drop_back(oracle, &scene, &lift.lifted_ids, derive(seed, 4))
        };
        (lift, next)
    } else {
        let outcome = if coop.dual() && !cfg.ablated(Ablation::DualArm) {
            rec.phases.push(PipelinePhase::DualGraspDeliver);
            rec.steps += cfg.steps.dual;
            let coop_cell = if cfg.ablated(Ablation::TrackingSelection) {
                let bbox = picked.bbox().map(|b| {
                    let mut rng = seeded(derive(seed, 5));
                    Cell::new(rng.gen_range(b.x0..=b.x1), rng.gen_range(b.y0..=b.y1))
                });
                bbox.unwrap_or(grasp)
            } else {
                select_coop_point(&pointcloud_from(&post), &picked, grasp, cfg.coop_bottom, derive(seed, 5))?
            };
            rec.coop_cell = Some(coop_cell);
            dual_outcome(oracle, &scene, &lift, grasp, coop_cell)?
        } else {
            rec.phases.push(PipelinePhase::SingleDeliver);
            rec.steps += cfg.steps.single;
            lift.clone()
        };
        let next = if outcome.result != GraspResult::Success && !lift.lifted_ids.is_empty() {
            // The master already holds the clump; a failed delivery drops it.
            drop_back(oracle, &scene, &lift.lifted_ids, derive(seed, 4))
        } else {
            apply_retrieval(oracle, &scene, &outcome, derive(seed, 4))
        };
        (outcome, next)
    };
    rec.terminal_status = if !coop.error() && outcome.result == GraspResult::Success {
        TerminalStatus::Retrieved
    } else {
        TerminalStatus::Aborted
    };
    if rec.terminal_status == TerminalStatus::Retrieved {
        if let (Some(target), Some(g)) = (task.target, outcome.garment.and_then(|id| scene.garment(id))) {
            rec.target_hit = task.kind == TaskKind::B && target.matches(g);
        }
    }
    rec.outcome = Some(outcome);
    Ok(next)
}

/// One pass of the loop. Component failures end the attempt as `Failed`
/// with the pile untouched.
pub fn run_attempt(
    scene: &PileScene,
    task: &TaskSpec,
    comps: &Components,
    cfg: &PipelineConfig,
    attempt: usize,
    seed: u64,
) -> (AttemptRecord, PileScene) {
    let mut rec = AttemptRecord::new(attempt);
    match attempt_body(&mut rec, scene, task, comps, cfg, seed) {
        Ok(next) => (rec, next),
        Err(e) => {
            rec.terminal_status = TerminalStatus::Failed;
            rec.remote_error = e.is_remote();
            rec.error = Some(e.to_string());
            rec.steps = rec.steps.max(1);
            (rec, scene.clone())
        }
    }
}

/// Repeats attempts until the task is done, an attempt fails, or the attempt
/// cap (`attempts_per_garment` times the initial garment count) is reached.
pub fn run_episode(
    scene: &PileScene,
    task: &TaskSpec,
    comps: &Components,
    cfg: &PipelineConfig,
    header: EpisodeHeader,
    seed: u64,
) -> EpisodeLog {
    let max_attempts = cfg.attempts_per_garment * scene.len();
    let mut current = scene.clone();
    let mut attempts: Vec<AttemptRecord> = Vec::new();
    let done = |s: &PileScene, recs: &[AttemptRecord]| match task.kind {
        TaskKind::A => s.is_empty(),
        TaskKind::B => recs.last().is_some_and(|r| r.target_hit),
    };
    while attempts.len() < max_attempts && !done(&current, &attempts) && !current.is_empty() {
        let (rec, next) = run_attempt(&current, task, comps, cfg, attempts.len(), derive(seed, attempts.len() as u64));
        debug_assert!(next.len() <= current.len());
        let failed = rec.terminal_status == TerminalStatus::Failed;
        attempts.push(rec);
        current = next;
        if failed {
            break;
        }
    }
    let task_completed = done(&current, &attempts);
    if let Some(last) = attempts.last_mut() {
        if last.terminal_status != TerminalStatus::Failed {
            last.phases.push(PipelinePhase::Done);
        }
    }
    let total_steps = attempts.iter().map(|a| a.steps as u64).sum();
    EpisodeLog {
        header,
        attempts,
        task_completed,
        total_steps,
    }
}
