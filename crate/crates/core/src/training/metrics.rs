use serde::{Deserialize, Serialize};

/// How a class absent from both predictions and labels enters the macro average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbsentClass {
    /// Counts as F1 = 0.
    #[default]
    Zero,
    /// Left out of the average.
    Exclude,
}

/// `[k, k]` counts, row = true label, column = prediction.
pub fn confusion(preds: &[usize], labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; k]; k];
    for (&p, &l) in preds.iter().zip(labels) {
        m[l][p] += 1;
    }
    m
}

pub fn accuracy(preds: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    preds.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / labels.len() as f64
}

pub fn macro_f1(preds: &[usize], labels: &[usize], k: usize) -> f64 {
    macro_f1_with(preds, labels, k, AbsentClass::Zero)
}

pub fn macro_f1_with(preds: &[usize], labels: &[usize], k: usize, absent: AbsentClass) -> f64 {
    let m = confusion(preds, labels, k);
    let mut sum = 0.0;
    let mut classes = 0;
    for c in 0..k {
        let tp = m[c][c];
        let fn_ = m[c].iter().sum::<usize>() - tp;
        let fp = (0..k).map(|r| m[r][c]).sum::<usize>() - tp;
        let denom = 2 * tp + fp + fn_;
        if denom == 0 && absent == AbsentClass::Exclude {
            continue;
        }
        classes += 1;
        if denom > 0 {
            sum += 2.0 * tp as f64 / denom as f64;
        }
    }
    if classes == 0 {
        0.0
    } else {
        sum / classes as f64
    }
}
