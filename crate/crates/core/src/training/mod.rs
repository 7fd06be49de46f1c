//! Mini-batch training with early stopping, and the repeated-run experiment
//! protocol built on it.

mod experiment;
mod loss;
mod metrics;
mod optim;

pub use experiment::{run_experiment, ExperimentData, ExperimentResult, RunRecord, SplitOptions};
pub use loss::cross_entropy;
pub use metrics::{accuracy, confusion, macro_f1, macro_f1_with, AbsentClass};
pub use optim::{sgd_step, Sgd};

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{stack_batch, Instance};
use crate::error::{Error, Result};
use crate::models::Model;
use crate::nn::Parameterized;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Epochs without improvement of the held-out metric before stopping.
    pub patience: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub repeats: usize,
    /// One seed per repeat; when empty, repeat `r` uses seed `r`.
    pub seeds: Vec<u64>,
    pub absent_class: AbsentClass,
    /// Stop as soon as held-out accuracy reaches this value.
    pub stop_at_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            patience: 20,
            lr: 0.01,
            momentum: 0.9,
            batch_size: 1024,
            repeats: 3,
            seeds: Vec::new(),
            absent_class: AbsentClass::Zero,
            stop_at_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.epochs == 0, "epochs must be positive"),
            (self.patience == 0, "patience must be positive"),
            (self.patience > self.epochs, "patience must not exceed epochs"),
            (!(self.lr > 0.0 && self.lr.is_finite()), "lr must be positive"),
            (!(0.0..1.0).contains(&self.momentum), "momentum must lie in [0, 1)"),
            (self.batch_size == 0, "batch size must be positive"),
            (self.repeats == 0, "repeats must be positive"),
            (!self.seeds.is_empty() && self.seeds.len() < self.repeats, "fewer seeds than repeats"),
        ];
        match checks.iter().find(|(bad, _)| *bad) {
            Some((_, msg)) => Err(Error::config(*msg)),
            None => Ok(()),
        }
    }

    /// The seed of each repeat.
    pub fn run_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.repeats as u64).collect()
        } else {
            self.seeds[..self.repeats].to_vec()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training loss over the epoch's mini-batches.
    pub loss: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
}

impl EpochStats {
    /// The early-stopping metric: accuracy plus macro-F1.
    pub fn metric(&self) -> f64 {
        self.accuracy + self.macro_f1
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub history: Vec<EpochStats>,
    pub seconds: f64,
}

const EVAL_CHUNK: usize = 256;

/// Predictions for every instance, evaluated in fixed-size chunks.
pub fn predict_instances<T: Scalar>(model: &Model<T>, instances: &[Instance]) -> Result<Vec<usize>> {
    let mut preds = Vec::with_capacity(instances.len());
    for chunk in instances.chunks(EVAL_CHUNK) {
        let refs: Vec<&Instance> = chunk.iter().collect();
        preds.extend(model.predict(&stack_batch::<T>(&refs), refs.len())?);
    }
    Ok(preds)
}

pub fn evaluate<T: Scalar>(model: &Model<T>, instances: &[Instance], absent: AbsentClass) -> Result<(f64, f64)> {
    let preds = predict_instances(model, instances)?;
    let labels: Vec<usize> = instances.iter().map(|i| i.label).collect();
    Ok((accuracy(&preds, &labels), macro_f1_with(&preds, &labels, model.config().class_count, absent)))
}

fn snapshot<T: Scalar>(model: &Model<T>) -> Vec<Vec<T>> {
    model.params().iter().map(|p| p.data.to_vec()).collect()
}

fn restore<T: Scalar>(model: &mut Model<T>, saved: &[Vec<T>]) {
    for (dst, src) in model.params_mut().into_iter().zip(saved) {
        dst.copy_from_slice(src);
    }
}

/// Trains `model` in place and leaves it holding the best-metric parameters.
///
/// Mini-batches are reshuffled every epoch from a stream derived from `seed`;
/// the last, possibly smaller, batch is kept.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    train_set: &[Instance],
    heldout: &[Instance],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptySet("training"));
    }
    if heldout.is_empty() {
        return Err(Error::EmptySet("held-out"));
    }
    let k = model.config().class_count;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut opt = Sgd::new(model, T::from_f64_lossy(cfg.lr), T::from_f64_lossy(cfg.momentum));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, Vec<Vec<T>>)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let refs: Vec<&Instance> = idx.iter().map(|&i| &train_set[i]).collect();
            let labels: Vec<usize> = refs.iter().map(|r| r.label).collect();
            let (logits, rec) = model.forward_train(&stack_batch::<T>(&refs), refs.len())?;
            let (loss, dlogits) = cross_entropy(&logits, &labels, k)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: b + 1 });
            }
            let grads = model.backward(&rec, &dlogits);
            opt.step(model, &grads);
            loss_sum += loss.to_f64_lossy();
            batches += 1;
        }
        if !model.is_finite() {
            return Err(Error::Divergence { epoch, batch: batches });
        }
        let (acc, f1) = evaluate(model, heldout, cfg.absent_class)?;
        let stats = EpochStats { epoch, loss: loss_sum / batches as f64, accuracy: acc, macro_f1: f1 };
        let metric = stats.metric();
        history.push(stats);
        if best.as_ref().is_none_or(|(_, m, _)| metric > *m) {
            best = Some((epoch, metric, snapshot(model)));
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.0);
        if epoch - best_epoch >= cfg.patience || cfg.stop_at_accuracy.is_some_and(|t| acc >= t) {
            break;
        }
    }

    let (best_epoch, _, params) = best.expect("at least one epoch ran");
    restore(model, &params);
    let chosen = &history[best_epoch - 1];
    Ok(TrainOutcome {
        best_epoch,
        epochs_run: history.len(),
        accuracy: chosen.accuracy,
        macro_f1: chosen.macro_f1,
        seconds: started.elapsed().as_secs_f64(),
        history,
    })
}
