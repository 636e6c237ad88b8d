use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{FeatureVector, TrainingExample, FEATURE_DIM, FEATURE_VERSION};
use crate::error::{Error, Result};
use crate::rng::{derive, seeded};

/// Prediction clamp used by the loss.
pub const BCE_EPS: f64 = 1e-7;

/// Dense network: rectifier hidden layers, sigmoid output. Layer `l` maps
/// `layer_widths[l]` inputs to `layer_widths[l + 1]` outputs; its weights are
/// stored row-major (one row per output).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffordanceModel {
    pub layer_widths: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub feature_version: u32,
}

/// Same layout as the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.biases)
            .flatten()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.05,
            epochs: 50,
            batch_size: 64,
            seed: 0,
        }
    }
}

pub fn bce_loss(pred: f64, label: f64) -> f64 {
    let p = pred.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl AffordanceModel {
    pub fn zeros(layer_widths: &[usize]) -> Result<Self> {
        if layer_widths.len() < 2 || layer_widths.contains(&0) || *layer_widths.last().unwrap() != 1 {
            return Err(Error::Config(format!("bad layer widths {layer_widths:?}")));
        }
        Ok(AffordanceModel {
            layer_widths: layer_widths.to_vec(),
            weights: layer_widths.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect(),
            biases: layer_widths[1..].iter().map(|&n| vec![0.0; n]).collect(),
            feature_version: FEATURE_VERSION,
        })
    }

    /// He-uniform weights, zero biases.
    pub fn init(layer_widths: &[usize], seed: u64) -> Result<Self> {
        let mut m = AffordanceModel::zeros(layer_widths)?;
        let mut rng = seeded(seed);
        for (l, w) in m.weights.iter_mut().enumerate() {
            let bound = (6.0 / layer_widths[l] as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
        }
        Ok(m)
    }

    /// Default `[7, hidden, hidden, 1]` network.
    pub fn with_hidden(hidden: usize, seed: u64) -> Result<Self> {
        AffordanceModel::init(&[FEATURE_DIM, hidden, hidden, 1], seed)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.layer_widths;
        let ok = w.len() >= 2
            && !w.contains(&0)
            && w.last() == Some(&1)
            && self.weights.len() == w.len() - 1
            && self.biases.len() == w.len() - 1
            && (0..w.len() - 1).all(|l| self.weights[l].len() == w[l] * w[l + 1] && self.biases[l].len() == w[l + 1])
            && self.weights.iter().chain(&self.biases).flatten().all(|v| v.is_finite());
        if !ok {
            return Err(Error::Config("model parameters do not match layer widths".into()));
        }
        if self.feature_version != FEATURE_VERSION {
            return Err(Error::Config(format!(
                "model feature version {} (expected {FEATURE_VERSION})",
                self.feature_version
            )));
        }
        Ok(())
    }

    /// Pre-activations and activations of every layer; `acts[0]` is the input.
    fn activations(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = self.weights.len();
        let mut pre = Vec::with_capacity(n);
        let mut acts = vec![x.to_vec()];
        for l in 0..n {
            let (inp, out) = (self.layer_widths[l], self.layer_widths[l + 1]);
            let a = &acts[l];
            let z: Vec<f64> = (0..out)
                .map(|o| {
                    let row = &self.weights[l][o * inp..(o + 1) * inp];
                    self.biases[l][o] + row.iter().zip(a).map(|(w, v)| w * v).sum::<f64>()
                })
                .collect();
            let next = if l + 1 == n {
                z.iter().map(|&v| sigmoid(v)).collect()
            } else {
                z.iter().map(|&v| v.max(0.0)).collect()
            };
            pre.push(z);
            acts.push(next);
        }
        (pre, acts)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::domain(format!(
                "feature dimension {} does not match model input {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(self.activations(x).1.last().expect("output layer")[0])
    }

    pub fn predict_batch(&self, xs: &[FeatureVector]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    pub fn mean_loss(&self, data: &[TrainingExample]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::domain("empty dataset"));
        }
        let mut sum = 0.0;
        for e in data {
            sum += bce_loss(self.predict(&e.features)?, e.label as f64);
        }
        Ok(sum / data.len() as f64)
    }

    /// Fraction of examples whose thresholded prediction (0.5) equals the label.
    pub fn accuracy(&self, data: &[TrainingExample]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::domain("empty dataset"));
        }
        let mut hits = 0usize;
        for e in data {
            if (self.predict(&e.features)? >= 0.5) == (e.label == 1) {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: AffordanceModel = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        AffordanceModel::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Gradient of the mean loss over `batch` with respect to every parameter.
pub fn grad(model: &AffordanceModel, batch: &[TrainingExample]) -> Result<Gradient> {
    if batch.is_empty() {
        return Err(Error::domain("gradient of an empty batch"));
    }
    let n = model.weights.len();
    let mut g = Gradient {
        weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
        biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
    };
    let scale = 1.0 / batch.len() as f64;
    for e in batch {
        if e.features.len() != model.input_dim() {
            return Err(Error::domain("feature dimension does not match model input"));
        }
        let (pre, acts) = model.activations(&e.features);
        let p = acts[n][0];
        // The loss is flat where the prediction is clamped.
        let mut delta = if (BCE_EPS..=1.0 - BCE_EPS).contains(&p) {
            vec![(p - e.label as f64) * scale]
        } else {
            vec![0.0]
        };
        for l in (0..n).rev() {
            let inp = model.layer_widths[l];
            for (o, d) in delta.iter().enumerate() {
                g.biases[l][o] += d;
                let row = &mut g.weights[l][o * inp..(o + 1) * inp];
                for (gw, a) in row.iter_mut().zip(&acts[l]) {
                    *gw += d * a;
                }
            }
            if l > 0 {
                delta = (0..inp)
                    .map(|i| {
                        if pre[l - 1][i] <= 0.0 {
                            return 0.0;
                        }
                        delta
                            .iter()
                            .enumerate()
                            .map(|(o, d)| d * model.weights[l][o * inp + i])
                            .sum()
                    })
                    .collect();
            }
        }
    }
    Ok(g)
}

/// Mini-batch gradient descent with a reshuffle per epoch.
pub fn train(model: &AffordanceModel, data: &[TrainingExample], cfg: &TrainConfig) -> Result<AffordanceModel> {
    if data.is_empty() {
        return Err(Error::domain("cannot train on an empty dataset"));
    }
    if cfg.batch_size == 0 || !cfg.lr.is_finite() || cfg.lr < 0.0 {
        return Err(Error::Config("batch size must be positive and lr finite and non-negative".into()));
    }
    let mut m = model.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut seeded(derive(cfg.seed, epoch as u64)));
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i].clone()));
            let g = grad(&m, &batch)?;
            for (w, gw) in m.weights.iter_mut().zip(&g.weights).chain(m.biases.iter_mut().zip(&g.biases)) {
                for (v, d) in w.iter_mut().zip(gw) {
                    *v -= cfg.lr * d;
                }
            }
        }
    }
    Ok(m)
}
