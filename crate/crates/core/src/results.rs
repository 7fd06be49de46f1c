//! Result tables: per-repeat CSV rows and the aggregates derived from them.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::training::RunRecord;

pub fn write_results_csv<W: Write>(w: W, rows: &[RunRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(r: R) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn save_results_csv(path: &Path, rows: &[RunRecord]) -> Result<()> {
    write_results_csv(fs::File::create(path)?, rows)
}

pub fn load_results_csv(path: &Path) -> Result<Vec<RunRecord>> {
    read_results_csv(fs::File::open(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    /// Pure KAN feature extractors.
    Kan,
    Cnn,
    /// KAN front end followed by convolutions.
    Hybrid,
}

impl ModelFamily {
    pub fn of(name: &str) -> Self {
        let upper = name.to_ascii_uppercase();
        if upper.starts_with("KAN-CNN") {
            ModelFamily::Hybrid
        } else if upper.starts_with("CNN") {
            ModelFamily::Cnn
        } else {
            ModelFamily::Kan
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub dataset: String,
    pub model: String,
    pub family: ModelFamily,
    pub params: usize,
    pub repeats: usize,
    pub mean_macro_f1: f64,
    pub mean_accuracy: f64,
    pub mean_epochs: f64,
    pub mean_seconds: Option<f64>,
}

/// Best pure-KAN model against best CNN model, by mean macro-F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub best_kan: String,
    pub best_cnn: String,
    /// Best-KAN minus best-CNN mean macro-F1.
    pub f1_delta: f64,
    /// Best-KAN over best-CNN parameter count.
    pub param_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub models: Vec<ModelSummary>,
    pub comparison: Option<Comparison>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Aggregates rows per (dataset, model), in order of first appearance.
pub fn summarize(rows: &[RunRecord]) -> Summary {
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.dataset.as_str(), r.model.as_str())) {
            keys.push((&r.dataset, &r.model));
        }
    }
    let models: Vec<ModelSummary> = keys
        .into_iter()
        .map(|(dataset, model)| {
            let group: Vec<&RunRecord> = rows.iter().filter(|r| r.dataset == dataset && r.model == model).collect();
            let seconds: Vec<f64> = group.iter().filter_map(|r| r.seconds).collect();
            ModelSummary {
                dataset: dataset.to_string(),
                model: model.to_string(),
                family: ModelFamily::of(model),
                params: group[0].params,
                repeats: group.len(),
                mean_macro_f1: mean(group.iter().map(|r| r.macro_f1)),
                mean_accuracy: mean(group.iter().map(|r| r.accuracy)),
                mean_epochs: mean(group.iter().map(|r| r.epochs as f64)),
                mean_seconds: (seconds.len() == group.len()).then(|| mean(seconds.into_iter())),
            }
        })
        .collect();
    let best = |family| {
        models
            .iter()
            .filter(|m| m.family == family)
            .max_by(|a, b| a.mean_macro_f1.total_cmp(&b.mean_macro_f1).then(b.params.cmp(&a.params)))
    };
    let comparison = match (best(ModelFamily::Kan), best(ModelFamily::Cnn)) {
        (Some(k), Some(c)) => Some(Comparison {
            best_kan: k.model.clone(),
            best_cnn: c.model.clone(),
            f1_delta: k.mean_macro_f1 - c.mean_macro_f1,
            param_ratio: k.params as f64 / c.params as f64,
        }),
        _ => None,
    };
    Summary { models, comparison }
}

pub fn summary_json(summary: &Summary) -> Result<String> {
    Ok(serde_json::to_string_pretty(summary)?)
}

/// Plain-text table ranked by mean macro-F1 (ties by fewer parameters).
pub fn ranked_table(summary: &Summary) -> String {
    let mut rows: Vec<&ModelSummary> = summary.models.iter().collect();
    rows.sort_by(|a, b| {
        b.mean_macro_f1.total_cmp(&a.mean_macro_f1).then(a.params.cmp(&b.params)).then(a.model.cmp(&b.model))
    });
    let width = rows.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(out, "{:>4}  {:<width$}  {:>8}  {:>8}  {:>10}  {:>7}", "rank", "model", "macro-F1", "accuracy", "params", "repeats");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:>4}  {:<width$}  {:>8.4}  {:>8.4}  {:>10}  {:>7}",
            i + 1,
            r.model,
            r.mean_macro_f1,
            r.mean_accuracy,
            r.params,
            r.repeats
        );
    }
    if let Some(c) = &summary.comparison {
        let _ = writeln!(
            out,
            "best KAN {} vs best CNN {}: macro-F1 delta {:+.4}, parameter ratio {:.4}",
            c.best_kan, c.best_cnn, c.f1_delta, c.param_ratio
        );
    }
    out
}
