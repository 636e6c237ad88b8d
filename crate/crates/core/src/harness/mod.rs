//! Benchmark metrics, the experiment runner, and report formatting.

mod metrics;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::affordance::AffordanceModel;
use crate::error::{Error, Result};
use crate::pile::{generate_scene, BoundaryKind, PileScene, SceneConfig};
use crate::pipeline::{run_episode, Ablation, Components, EpisodeHeader, EpisodeLog, PipelineConfig};
use crate::reasoner::{PrivilegedReasoner, Reasoner, ReasonerKind, RemoteReasoner, RuleReasoner, TaskKind, TaskSpec};
use crate::rng::{derive, seeded};

pub use metrics::{ams, asr_a, asr_b, fmt_ratio, pdr, report_table, MetricCounts, MetricsReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteSettings {
    pub url: String,
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskSpec,
    pub boundary: BoundaryKind,
    pub count_min: usize,
    pub count_max: usize,
    pub episodes: usize,
    pub base_seed: u64,
    pub reasoner: ReasonerKind,
    pub model_path: Option<PathBuf>,
    /// Falls back to `REASONER_URL` / `REASONER_TIMEOUT_MS` when absent.
    pub remote: Option<RemoteSettings>,
    /// Ablations, oracle and segmenter constants.
    pub pipeline: PipelineConfig,
}

impl ExperimentConfig {
    /// Task A, closed container, rule reasoner, nothing ablated.
    pub fn new(boundary: BoundaryKind, episodes: usize, base_seed: u64) -> Self {
        let scene = SceneConfig::for_boundary(boundary);
        ExperimentConfig {
            task: TaskSpec::retrieve_all(),
            boundary,
            count_min: scene.count_min,
            count_max: scene.count_max,
            episodes,
            base_seed,
            reasoner: ReasonerKind::Rule,
            model_path: None,
            remote: None,
            pipeline: PipelineConfig::default(),
        }
    }

    pub fn with_ablations(mut self, ablations: impl IntoIterator<Item = Ablation>) -> Self {
        self.pipeline.ablations = ablations.into_iter().collect();
        self
    }

    pub fn scene_config(&self) -> SceneConfig {
        SceneConfig::for_boundary(self.boundary).with_counts(self.count_min, self.count_max)
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be at least 1".into()));
        }
        if self.pipeline.attempts_per_garment == 0 {
            return Err(Error::Config("attempts_per_garment must be at least 1".into()));
        }
        self.pipeline.segmenter.validate()?;
        // Scene generation checks the count range against the grid.
        generate_scene(&self.scene_config(), self.base_seed).map(|_| ())
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Row label: `full` or the removed components.
    pub fn label(&self) -> String {
        ablation_label(&self.pipeline.ablations)
    }

    pub fn scene_seed(&self, episode: usize) -> u64 {
        self.base_seed.wrapping_add(episode as u64)
    }
}

pub fn ablation_label(ablations: &BTreeSet<Ablation>) -> String {
    if ablations.is_empty() {
        "full".into()
    } else {
        let names: Vec<&str> = ablations.iter().map(|a| a.name()).collect();
        format!("w/o {}", names.join(" & "))
    }
}

/// Makes sure a Task B scene holds its target by restyling one seeded garment.
pub fn ensure_target(scene: &mut PileScene, task: &TaskSpec, seed: u64) {
    let Some(target) = task.target.filter(|_| task.kind == TaskKind::B) else { return };
    if scene.stack.is_empty() || scene.stack.iter().any(|g| target.matches(g)) {
        return;
    }
    let i = seeded(seed).gen_range(0..scene.stack.len());
    let g = &mut scene.stack[i];
    g.color = target.color.rgb();
    if let Some(c) = target.category {
        g.category = c;
    }
}

/// Builds the reasoner an experiment asks for.
pub fn make_reasoner(cfg: &ExperimentConfig) -> Result<Box<dyn Reasoner>> {
    let l_arm = cfg.pipeline.oracle.l_arm;
    Ok(match cfg.reasoner {
        ReasonerKind::Rule => Box::new(RuleReasoner {
            l_arm,
            color_threshold: cfg.pipeline.segmenter.merge_color_threshold,
            ..RuleReasoner::default()
        }),
        ReasonerKind::Privileged => Box::new(PrivilegedReasoner {
            l_arm,
            ..PrivilegedReasoner::default()
        }),
        ReasonerKind::Remote => Box::new(match &cfg.remote {
            Some(r) => RemoteReasoner::new(&r.url, r.timeout_ms)?,
            None => RemoteReasoner::from_env()?,
        }),
    })
}

fn load_model(cfg: &ExperimentConfig) -> Result<Option<AffordanceModel>> {
    if cfg.pipeline.ablated(Ablation::Affordance) {
        return Ok(None);
    }
    let path = cfg
        .model_path
        .as_ref()
        .ok_or_else(|| Error::Config("an affordance model is required (or ablate affordance)".into()))?;
    AffordanceModel::load(path)
        .map(Some)
        .map_err(|e| Error::Config(format!("cannot load model {}: {e}", path.display())))
}

/// Episode `i` of an experiment.
pub fn run_one(cfg: &ExperimentConfig, comps: &Components, reasoner_name: &str, i: usize) -> Result<EpisodeLog> {
    let scene_seed = cfg.scene_seed(i);
    let mut scene = generate_scene(&cfg.scene_config(), scene_seed)?;
    ensure_target(&mut scene, &cfg.task, derive(scene_seed, 0x7a));
    let header = EpisodeHeader {
        episode: i,
        task: cfg.task,
        scene_seed,
        initial_count: scene.len(),
        reasoner: reasoner_name.to_string(),
        config: cfg.pipeline.clone(),
    };
    Ok(run_episode(&scene, &cfg.task, comps, &cfg.pipeline, header, derive(scene_seed, 0x9e)))
}

/// Runs every episode (in parallel) with explicitly supplied components.
/// Logs come back in episode order.
pub fn run_experiment_with(cfg: &ExperimentConfig, comps: &Components) -> Result<(Vec<EpisodeLog>, MetricsReport)> {
    cfg.validate()?;
    if comps.model.is_none() && !cfg.pipeline.ablated(Ablation::Affordance) {
        return Err(Error::Config("an affordance model is required (or ablate affordance)".into()));
    }
    let name = comps.reasoner.name();
    let logs: Vec<EpisodeLog> = (0..cfg.episodes)
        .into_par_iter()
        .map(|i| run_one(cfg, comps, name, i))
        .collect::<Result<_>>()?;
    let report = MetricsReport::from_logs(&cfg.label(), &logs);
    Ok((logs, report))
}

/// Loads the model and reasoner named in `cfg` and runs the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Vec<EpisodeLog>, MetricsReport)> {
    cfg.validate()?;
    let model = load_model(cfg)?;
    let reasoner = make_reasoner(cfg)?;
    let comps = Components {
        reasoner: reasoner.as_ref(),
        model: model.as_ref(),
    };
    run_experiment_with(cfg, &comps)
}

pub fn save_logs(path: &Path, logs: &[EpisodeLog]) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    crate::pipeline::write_logs(f, logs)
}

pub fn load_logs(path: &Path) -> Result<Vec<EpisodeLog>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    crate::pipeline::read_logs(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::PaletteColor;
    use crate::pipeline::validate_log;
    use crate::reasoner::TargetDescriptor;

    #[test]
    fn labels() {
        assert_eq!(ablation_label(&BTreeSet::new()), "full");
        let both = BTreeSet::from([Ablation::DualArm, Ablation::Affordance]);
        assert_eq!(ablation_label(&both), "w/o affordance & dual_arm");
    }

    #[test]
    fn target_is_planted() {
        let task = TaskSpec::retrieve(TargetDescriptor { color: PaletteColor::Cyan, category: Some(crate::pile::Category::Hat) });
        for seed in 0..20 {
            let mut scene = generate_scene(&SceneConfig::closed(), seed).unwrap();
            ensure_target(&mut scene, &task, seed);
            assert!(scene.stack.iter().any(|g| task.target.unwrap().matches(g)));
        }
    }

    #[test]
    fn config_errors() {
        let mut cfg = ExperimentConfig::new(BoundaryKind::Closed, 0, 1);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.episodes = 1;
        cfg.task.kind = TaskKind::B;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = ExperimentConfig::new(BoundaryKind::Closed, 1, 1);
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::new(BoundaryKind::Open, 1, 1);
        cfg.count_min = 9;
        cfg.count_max = 3;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn small_experiment_is_deterministic() {
        let cfg = ExperimentConfig::new(BoundaryKind::Closed, 6, 40).with_ablations([Ablation::Affordance]);
        let (a, ra) = run_experiment(&cfg).unwrap();
        let (b, rb) = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert_eq!(a.len(), 6);
        for (i, log) in a.iter().enumerate() {
            assert_eq!(log.header.episode, i);
            validate_log(log).unwrap();
        }
        assert_eq!(ra, MetricsReport::from_logs(&cfg.label(), &a));
    }
}
