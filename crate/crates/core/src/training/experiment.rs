use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, TrainConfig};
use crate::data::{build_instances, split_with, subjects_of, Instance, Normalization, Recording, SplitPlan};
use crate::error::{Error, Result};
use crate::models::{Model, ModelConfig};
use crate::nn::Parameterized;
use crate::scalar::Scalar;

/// How recordings become train and test instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitOptions {
    pub window: usize,
    pub stride: usize,
    pub normalization: Normalization,
    pub split_seed: u64,
    /// Held-out subject count; half of the subjects when unset.
    pub test_subjects: Option<usize>,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions { window: 80, stride: 40, normalization: Normalization::MinMax, split_seed: 0, test_subjects: None }
    }
}

/// Windowed instances of one dataset, split by subject.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub name: String,
    pub channels: usize,
    pub window: usize,
    pub class_count: usize,
    pub plan: SplitPlan,
    pub train: Vec<Instance>,
    pub test: Vec<Instance>,
}

impl ExperimentData {
    /// `class_count` defaults to one more than the largest label present.
    pub fn from_recordings(
        name: &str,
        recordings: &[Recording],
        opts: &SplitOptions,
        class_count: Option<usize>,
    ) -> Result<Self> {
        let channels = recordings.first().map(Recording::channels).ok_or(Error::EmptySet("recording"))?;
        if let Some(r) = recordings.iter().find(|r| r.channels() != channels) {
            return Err(Error::config(format!(
                "recording {} has {} channels, expected {channels}",
                r.subject_id,
                r.channels()
            )));
        }
        let plan = split_with(&subjects_of(recordings), opts.split_seed, opts.test_subjects)?;
        let instances = build_instances(recordings, opts.window, opts.stride, opts.normalization)?;
        let seen = instances.iter().map(|i| i.label + 1).max().unwrap_or(0);
        let class_count = class_count.unwrap_or(seen);
        if seen > class_count {
            return Err(Error::LabelOutOfRange { label: seen - 1, classes: class_count });
        }
        let (train, test) = plan.partition(instances);
        if train.is_empty() {
            return Err(Error::EmptySet("training"));
        }
        if test.is_empty() {
            return Err(Error::EmptySet("test"));
        }
        Ok(ExperimentData { name: name.to_string(), channels, window: opts.window, class_count, plan, train, test })
    }
}

/// One repeat of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub model: String,
    pub seed: u64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub params: usize,
    pub epochs: usize,
    /// Wall time; left empty when timing is not recorded.
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub model: String,
    pub params: usize,
    pub runs: Vec<RunRecord>,
    pub mean_macro_f1: f64,
    pub mean_accuracy: f64,
}

impl ExperimentResult {
    pub fn from_runs(runs: Vec<RunRecord>) -> Self {
        let n = runs.len().max(1) as f64;
        ExperimentResult {
            model: runs.first().map(|r| r.model.clone()).unwrap_or_default(),
            params: runs.first().map_or(0, |r| r.params),
            mean_macro_f1: runs.iter().map(|r| r.macro_f1).sum::<f64>() / n,
            mean_accuracy: runs.iter().map(|r| r.accuracy).sum::<f64>() / n,
            runs,
        }
    }
}

fn run_one<T: Scalar>(
    data: &ExperimentData,
    config: &ModelConfig,
    cfg: &TrainConfig,
    seed: u64,
    timing: bool,
) -> Result<RunRecord> {
    let mut model = Model::<T>::build(config, seed)?;
    let out = train(&mut model, &data.train, &data.test, cfg, seed)?;
    Ok(RunRecord {
        dataset: data.name.clone(),
        model: config.name.clone(),
        seed,
        macro_f1: out.macro_f1,
        accuracy: out.accuracy,
        params: model.param_count(),
        epochs: out.epochs_run,
        seconds: timing.then_some(out.seconds),
    })
}

/// Trains every config once per seed of `cfg`, on up to `jobs` threads, with
/// `T` as the working precision.
///
/// Results come back in config order with repeats in seed order, whatever
/// the scheduling, so the output is a pure function of the inputs (apart
/// from wall time, which is only recorded when `timing` is set).
pub fn run_experiment<T: Scalar>(
    data: &ExperimentData,
    configs: &[ModelConfig],
    cfg: &TrainConfig,
    jobs: usize,
    timing: bool,
) -> Result<Vec<ExperimentResult>> {
    cfg.validate()?;
    for c in configs {
        c.validate()?;
        if c.channels != data.channels || c.frame_len != data.window || c.class_count != data.class_count {
            return Err(Error::config(format!(
                "model {} expects [{}, {}] frames with {} classes, dataset {} has [{}, {}] with {}",
                c.name, c.channels, c.frame_len, c.class_count, data.name, data.channels, data.window, data.class_count
            )));
        }
    }
    let seeds = cfg.run_seeds();
    let tasks: Vec<(usize, u64)> = (0..configs.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let records: Vec<RunRecord> = if jobs <= 1 {
        tasks.iter().map(|&(i, s)| run_one::<T>(data, &configs[i], cfg, s, timing)).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::config(format!("cannot start {jobs} worker threads: {e}")))?;
        pool.install(|| {
            tasks.par_iter().map(|&(i, s)| run_one::<T>(data, &configs[i], cfg, s, timing)).collect::<Result<Vec<_>>>()
        })?
    };
    Ok(records.chunks(seeds.len()).map(|c| ExperimentResult::from_runs(c.to_vec())).collect())
}
