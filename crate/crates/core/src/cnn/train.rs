use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{image_to_tensor, Classifier};
use super::network::{ArchConfig, Network};
use super::ops;
use super::tensor::Tensor;
use super::CnnError;
use crate::metrics::Label;
use crate::raster::RgbImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Validation runs every this many iterations (mini-batches).
    pub validation_frequency: usize,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            max_epochs: 16,
            validation_frequency: 60,
            momentum: 0.9,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), CnnError> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(CnnError::InvalidConfig("learning rate must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(CnnError::InvalidConfig("momentum must lie in [0, 1)".into()));
        }
        if self.max_epochs == 0 || self.batch_size == 0 || self.validation_frequency == 0 {
            return Err(CnnError::InvalidConfig(
                "epochs, batch size and validation frequency must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub image: RgbImage,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iteration: usize,
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub entries: Vec<LogEntry>,
}

impl TrainLog {
    pub fn train_entries(&self) -> impl Iterator<Item = &LogEntry> {
        self.entries.iter().filter(|e| e.split == Split::Train)
    }

    pub fn validation_entries(&self) -> impl Iterator<Item = &LogEntry> {
        self.entries.iter().filter(|e| e.split == Split::Validation)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `v ← momentum·v − lr·g`, then `w ← w + v`, for every tensor.
pub fn sgdm_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    velocity: &mut [Tensor],
    lr: f64,
    momentum: f64,
) -> Result<(), CnnError> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(CnnError::ShapeMismatch(format!(
            "{} params, {} grads, {} velocities",
            params.len(),
            grads.len(),
            velocity.len()
        )));
    }
    for ((p, g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        if p.shape() != g.shape() || p.shape() != v.shape() {
            return Err(CnnError::ShapeMismatch(format!(
                "param {:?}, grad {:?}, velocity {:?}",
                p.shape(),
                g.shape(),
                v.shape()
            )));
        }
    }
    for ((p, g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        for ((w, &gi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            *vi = momentum * *vi - lr * gi;
            *w += *vi;
        }
    }
    Ok(())
}

fn check_dataset(samples: &[Sample]) -> Result<(), CnnError> {
    if samples.is_empty() {
        return Err(CnnError::EmptyDataset);
    }
    let first = samples[0].label;
    if samples.iter().all(|s| s.label == first) {
        return Err(CnnError::SingleClassDataset(first));
    }
    Ok(())
}

struct Batcher<'a> {
    arch: &'a ArchConfig,
    inputs: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl<'a> Batcher<'a> {
    fn new(arch: &'a ArchConfig, samples: &[Sample]) -> Result<Self, CnnError> {
        let mut inputs = Vec::with_capacity(samples.len());
        for s in samples {
            inputs.push(image_to_tensor(&s.image, arch)?.into_data());
        }
        Ok(Self {
            arch,
            inputs,
            labels: samples.iter().map(|s| s.label.index()).collect(),
        })
    }

    fn batch(&self, idx: &[usize]) -> (Tensor, Vec<usize>) {
        let mut data = Vec::with_capacity(idx.len() * self.inputs.first().map_or(0, Vec::len));
        for &i in idx {
            data.extend_from_slice(&self.inputs[i]);
        }
        let shape = self.arch.input_shape(idx.len()).to_vec();
        (
            Tensor::from_parts(shape, data),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

fn accuracy(probs: &Tensor, targets: &[usize]) -> usize {
    probs
        .data()
        .chunks(2)
        .zip(targets)
        .filter(|(p, &t)| usize::from(p[1] > p[0]) == t)
        .count()
}

/// Inference-mode mean loss and accuracy of `model` over `samples`.
pub fn evaluate(model: &Classifier, samples: &[Sample], batch_size: usize) -> Result<(f64, f64), CnnError> {
    if samples.is_empty() {
        return Err(CnnError::EmptyDataset);
    }
    let batcher = Batcher::new(model.arch(), samples)?;
    let all: Vec<usize> = (0..samples.len()).collect();
    let (mut loss, mut correct) = (0.0, 0);
    for chunk in all.chunks(batch_size.max(1)) {
        let (x, y) = batcher.batch(chunk);
        let logits = model.network().forward_eval(&x)?;
        let (l, probs, _) = ops::softmax_cross_entropy(&logits, &y)?;
        loss += l * chunk.len() as f64;
        correct += accuracy(&probs, &y);
    }
    let n = samples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Mini-batch SGDM training. The training set is reshuffled every epoch
/// from a generator seeded with `cfg.seed`, which also seeds the weight
/// initialisation, so equal inputs give bit-identical runs. Validation, when
/// a validation set is given, runs every `validation_frequency` iterations
/// and after the final one.
pub fn train(
    train_set: &[Sample],
    validation: &[Sample],
    arch: &ArchConfig,
    cfg: &TrainConfig,
) -> Result<(Classifier, TrainLog), CnnError> {
    cfg.validate()?;
    check_dataset(train_set)?;
    let batcher = Batcher::new(arch, train_set)?;
    let mut model = Classifier::new(arch.clone(), Network::new(arch, cfg.seed)?)?;
    let mut velocity: Vec<Tensor> = model
        .network()
        .params()
        .iter()
        .map(|p| Tensor::zeros(p.shape()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = TrainLog::default();
    let mut iteration = 0;
    let mut last_validated = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            iteration += 1;
            let (x, y) = batcher.batch(chunk);
            let net = model.network_mut();
            let logits = net.forward_train(&x)?;
            let (loss, probs, grad) = ops::softmax_cross_entropy(&logits, &y)?;
            let grads = net.backward(&grad)?;
            sgdm_step(
                &mut net.params_mut(),
                &grads,
                &mut velocity,
                cfg.learning_rate,
                cfg.momentum,
            )?;
            log.entries.push(LogEntry {
                iteration,
                epoch,
                split: Split::Train,
                loss,
                accuracy: accuracy(&probs, &y) as f64 / y.len() as f64,
            });
            if !validation.is_empty() && iteration % cfg.validation_frequency == 0 {
                let (loss, acc) = evaluate(&model, validation, cfg.batch_size)?;
                log.entries.push(LogEntry {
                    iteration,
                    epoch,
                    split: Split::Validation,
                    loss,
                    accuracy: acc,
                });
                last_validated = iteration;
            }
        }
    }
    if !validation.is_empty() && last_validated != iteration {
        let (loss, acc) = evaluate(&model, validation, cfg.batch_size)?;
        log.entries.push(LogEntry {
            iteration,
            epoch: cfg.max_epochs,
            split: Split::Validation,
            loss,
            accuracy: acc,
        });
    }
    Ok((model, log))
}
