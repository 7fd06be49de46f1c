//! Recordings, sliding-window instances, per-instance normalization and
//! subject-level train/test splits.

mod canonical;
mod synth;

pub use canonical::{load_canonical, load_canonical_with, scan_canonical, write_canonical, FileReport, LoadOptions};
pub use synth::{synth_har, synth_har_with, SynthConfig};

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A continuous multichannel stream from one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub rate: f64,
    pub channel_names: Vec<String>,
    /// One stream per channel, all of equal length.
    pub samples: Vec<Vec<f64>>,
    /// Activity id per sample.
    pub labels: Vec<usize>,
}

impl Recording {
    pub fn channels(&self) -> usize {
        self.samples.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.channel_names.len() != self.samples.len() {
            return Err(Error::config(format!(
                "recording {}: {} channel names for {} streams",
                self.subject_id,
                self.channel_names.len(),
                self.samples.len()
            )));
        }
        let unique: BTreeSet<_> = self.channel_names.iter().collect();
        if unique.len() != self.channel_names.len() {
            return Err(Error::config(format!("recording {}: duplicate channel names", self.subject_id)));
        }
        if let Some((i, s)) = self.samples.iter().enumerate().find(|(_, s)| s.len() != self.labels.len()) {
            return Err(Error::config(format!(
                "recording {}: channel {i} has {} samples but {} labels",
                self.subject_id,
                s.len(),
                self.labels.len()
            )));
        }
        Ok(())
    }
}

/// One classification window, `[channels, window]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub subject_id: String,
    pub label: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Instance {
    pub fn window_len(&self) -> usize {
        self.data.len() / self.channels.max(1)
    }

    pub fn channel(&self, ch: usize) -> &[f64] {
        let w = self.window_len();
        &self.data[ch * w..(ch + 1) * w]
    }
}

/// Majority label; ties go to the center sample's label when it is among
/// the tied labels, otherwise to the smallest tied label.
pub fn majority_label(labels: &[usize]) -> Option<usize> {
    let mut counts = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    let top = *counts.values().max()?;
    let tied: Vec<usize> = counts.iter().filter(|(_, c)| **c == top).map(|(l, _)| *l).collect();
    let center = labels[labels.len() / 2];
    if tied.len() > 1 && tied.contains(&center) {
        Some(center)
    } else {
        tied.first().copied()
    }
}

/// Number of windows `floor((len - window) / stride) + 1`, or 0 when `len < window`.
pub fn window_count(len: usize, window: usize, stride: usize) -> usize {
    if len < window || stride == 0 {
        0
    } else {
        (len - window) / stride + 1
    }
}

/// Sliding windows starting at `0, stride, 2 * stride, ...`; windows that would
/// run past the end are dropped. Values are not normalized.
pub fn window_instances(rec: &Recording, window: usize, stride: usize) -> Result<Vec<Instance>> {
    if window == 0 || stride == 0 || stride > window {
        return Err(Error::config(format!("window {window} and stride {stride} must satisfy 1 <= stride <= window")));
    }
    rec.validate()?;
    let c = rec.channels();
    let count = window_count(rec.len(), window, stride);
    Ok((0..count)
        .map(|i| {
            let start = i * stride;
            let mut data = Vec::with_capacity(c * window);
            for stream in &rec.samples {
                data.extend_from_slice(&stream[start..start + window]);
            }
            Instance {
                subject_id: rec.subject_id.clone(),
                label: majority_label(&rec.labels[start..start + window]).unwrap_or(0),
                channels: c,
                data,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Per channel `(x - min) / (max - min)`; constant channels map to 0.5.
    #[default]
    MinMax,
    /// Per channel `(x - mean) / std`; constant channels map to 0.
    ZScore,
    None,
}

pub fn normalize(instance: &Instance, mode: Normalization) -> Instance {
    let mut out = instance.clone();
    normalize_in_place(&mut out, mode);
    out
}

pub fn normalize_in_place(instance: &mut Instance, mode: Normalization) {
    let w = instance.window_len();
    if w == 0 {
        return;
    }
    for chunk in instance.data.chunks_exact_mut(w) {
        match mode {
            Normalization::MinMax => {
                let lo = chunk.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = chunk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let span = hi - lo;
                for v in chunk.iter_mut() {
                    *v = if span > 0.0 { ((*v - lo) / span).clamp(0.0, 1.0) } else { 0.5 };
                }
            }
            Normalization::ZScore => {
                let mean = chunk.iter().sum::<f64>() / w as f64;
                let var = chunk.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / w as f64;
                let std = var.sqrt();
                for v in chunk.iter_mut() {
                    *v = if std > 0.0 { (*v - mean) / std } else { 0.0 };
                }
            }
            Normalization::None => {}
        }
    }
}

/// Windows and normalizes every recording, in the given order.
pub fn build_instances(
    recordings: &[Recording],
    window: usize,
    stride: usize,
    mode: Normalization,
) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for rec in recordings {
        for mut inst in window_instances(rec, window, stride)? {
            normalize_in_place(&mut inst, mode);
            out.push(inst);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
}

impl SplitPlan {
    pub fn is_test(&self, subject: &str) -> bool {
        self.test_subjects.iter().any(|s| s == subject)
    }

    /// Partitions instances by subject into `(train, test)`.
    pub fn partition(&self, instances: Vec<Instance>) -> (Vec<Instance>, Vec<Instance>) {
        instances.into_iter().partition(|i| !self.is_test(&i.subject_id))
    }
}

/// Leave-half-the-subjects-out split: sort, shuffle with `seed`, hold out the
/// first `floor(n / 2)` (or `test_count`) subjects.
pub fn split(subjects: &[String], seed: u64) -> Result<SplitPlan> {
    split_with(subjects, seed, None)
}

pub fn split_with(subjects: &[String], seed: u64, test_count: Option<usize>) -> Result<SplitPlan> {
    let mut unique: Vec<String> = subjects.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if unique.len() < 2 {
        return Err(Error::TooFewSubjects(unique.len()));
    }
    let k = test_count.unwrap_or(unique.len() / 2);
    if k == 0 || k >= unique.len() {
        return Err(Error::config(format!("cannot hold out {k} of {} subjects", unique.len())));
    }
    unique.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train = unique.split_off(k);
    let mut test = unique;
    let mut train = train;
    test.sort();
    train.sort();
    Ok(SplitPlan { train_subjects: train, test_subjects: test })
}

/// Distinct subject ids in sorted order.
pub fn subjects_of(recordings: &[Recording]) -> Vec<String> {
    recordings.iter().map(|r| r.subject_id.clone()).collect::<BTreeSet<_>>().into_iter().collect()
}

/// Stacks instances into a `[n, c, W]` batch of model scalars.
pub fn stack_batch<T: Scalar>(instances: &[&Instance]) -> Vec<T> {
    let mut out = Vec::with_capacity(instances.iter().map(|i| i.data.len()).sum());
    for inst in instances {
        out.extend(inst.data.iter().map(|v| T::from_f64_lossy(*v)));
    }
    out
}
