use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{compute_features, pointcloud_from, FeatureVector};
use crate::error::{Error, Result};
use crate::grid::Cell;
use crate::perception::{perceive, SegmenterConfig};
use crate::pile::{generate_scene, simulate_single_grasp, GraspOracle, GraspResult, PileScene, SceneConfig};
use crate::reasoner::{summarize_masks, Context, PrivilegedReasoner, Reasoner, TaskSpec};
use crate::rng::{derive, seeded};

/// One labelled grasp: features of the cell and whether a single-arm grasp
/// there retrieved the garment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub features: FeatureVector,
    pub label: u8,
    pub scene_seed: u64,
    pub cell: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectConfig {
    pub scene: SceneConfig,
    pub segmenter: SegmenterConfig,
    pub oracle: GraspOracle,
    pub n_scenes: usize,
    pub samples_per_scene: usize,
    pub seed: u64,
}

impl CollectConfig {
    /// Closed-container scenes with default corruption.
    pub fn new(n_scenes: usize, samples_per_scene: usize, seed: u64) -> Self {
        CollectConfig {
            scene: SceneConfig::closed(),
            segmenter: SegmenterConfig::default(),
            oracle: GraspOracle::default(),
            n_scenes,
            samples_per_scene,
            seed,
        }
    }

    /// Seed of the `i`-th generated scene.
    pub fn scene_seed(&self, i: usize) -> u64 {
        derive(self.seed, i as u64)
    }
}

/// 1 iff a single-arm grasp at `cell` succeeds.
pub fn grasp_label(oracle: &GraspOracle, scene: &PileScene, cell: Cell) -> u8 {
    (simulate_single_grasp(oracle, scene, cell).result == GraspResult::Success) as u8
}

fn collect_scene(cfg: &CollectConfig, scene_seed: u64) -> Result<Vec<TrainingExample>> {
    let scene = generate_scene(&cfg.scene, scene_seed)?;
    let obs = scene.render_observation();
    let masks = perceive(&obs, &scene, &cfg.segmenter, derive(scene_seed, 1));
    if masks.is_empty() {
        return Ok(Vec::new());
    }
    let summaries = summarize_masks(&obs, &masks);
    let task = TaskSpec::retrieve_all();
    let ctx = Context {
        observation: &obs,
        masks: &masks,
        summaries: &summaries,
        images: None,
        task,
        truth: &scene,
    };
    let selected = PrivilegedReasoner::default().select_target(&ctx, &task)?;
    let features = compute_features(&pointcloud_from(&obs), &masks, selected, &scene.boundary)?;
    let pool: Vec<usize> = (0..features.len()).filter(|&i| features.features[i][0] == 1.0).collect();
    if pool.is_empty() {
        return Ok(Vec::new());
    }
    let mut rng = seeded(derive(scene_seed, 2));
    Ok((0..cfg.samples_per_scene)
        .map(|_| {
            let i = pool[rng.gen_range(0..pool.len())];
            let cell = features.cells[i];
            TrainingExample {
                features: features.features[i],
                label: grasp_label(&cfg.oracle, &scene, cell),
                scene_seed,
                cell,
            }
        })
        .collect())
}

/// Generates scenes, picks the target with the privileged reasoner, and labels
/// uniformly sampled cells of the selected mask by simulated single-arm grasps.
/// Scenes run in parallel; the output order is by scene index.
pub fn collect_training_data(cfg: &CollectConfig) -> Result<Vec<TrainingExample>> {
    cfg.segmenter.validate()?;
    let per_scene: Vec<Vec<TrainingExample>> = (0..cfg.n_scenes)
        .into_par_iter()
        .map(|i| collect_scene(cfg, cfg.scene_seed(i)))
        .collect::<Result<_>>()?;
    Ok(per_scene.into_iter().flatten().collect())
}

pub fn write_dataset(path: &Path, data: &[TrainingExample]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for e in data {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<TrainingExample>> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: TrainingExample = serde_json::from_str(&line)?;
        if e.label > 1 {
            return Err(Error::Config(format!("line {}: label must be 0 or 1", n + 1)));
        }
        out.push(e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_size_and_provenance() {
        let cfg = CollectConfig::new(6, 10, 4);
        let data = collect_training_data(&cfg).unwrap();
        assert_eq!(data.len(), 60);
        for e in &data {
            assert_eq!(e.features[0], 1.0);
            let scene = generate_scene(&cfg.scene, e.scene_seed).unwrap();
            assert_eq!(grasp_label(&cfg.oracle, &scene, e.cell), e.label);
            if scene.boundary.collides(e.cell) {
                assert_eq!(e.label, 0);
            }
        }
        assert_eq!(collect_training_data(&cfg).unwrap(), data);
    }

    #[test]
    fn dataset_file_round_trip() {
        let data = collect_training_data(&CollectConfig::new(2, 5, 1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&path, &data).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), data);
    }
}
