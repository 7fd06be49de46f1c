//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the library's numeric kernels: splines come from
//! the textbook recursion, filters are evaluated edge by edge, and gradients
//! are central finite differences.

#![allow(dead_code)]

use kanfe::models::Model;
use kanfe::nn::Parameterized;
use kanfe::training::cross_entropy;
use kanfe::{KanFilter, KanLayer, ModelConfig, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform knots extended by `degree` intervals on both sides.
pub fn extended_knots(degree: usize, intervals: usize, lo: f64, hi: f64) -> Vec<f64> {
    let h = (hi - lo) / intervals as f64;
    (0..=intervals + 2 * degree).map(|i| lo + (i as f64 - degree as f64) * h).collect()
}

/// Cox-de Boor recursion with half-open support `[t_k, t_{k+p+1})`.
pub fn cox_de_boor(knots: &[f64], k: usize, p: usize, x: f64) -> f64 {
    if p == 0 {
        return if knots[k] <= x && x < knots[k + 1] { 1.0 } else { 0.0 };
    }
    let left = (x - knots[k]) / (knots[k + p] - knots[k]) * cox_de_boor(knots, k, p - 1, x);
    let right = (knots[k + p + 1] - x) / (knots[k + p + 1] - knots[k + 1]) * cox_de_boor(knots, k + 1, p - 1, x);
    left + right
}

/// Basis vector at `x`, with `x` clamped into `[lo, hi]` and the right end
/// taken as a left limit.
pub fn basis_oracle(degree: usize, intervals: usize, lo: f64, hi: f64, x: f64) -> Vec<f64> {
    let knots = extended_knots(degree, intervals, lo, hi);
    let x = x.clamp(lo, hi);
    let x = if x >= hi { hi - 1e-12 * (hi - lo) } else { x };
    (0..intervals + degree).map(|k| cox_de_boor(&knots, k, degree, x)).collect()
}

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

/// One KAN layer evaluated edge by edge.
pub fn kan_layer_oracle(layer: &KanLayer<f64>, x: &[f64]) -> Vec<f64> {
    let spec = layer.spec();
    let g = spec.grid;
    let nb = g.intervals + g.degree;
    (0..layer.out_width())
        .map(|o| {
            let mut acc = 0.0;
            for (j, &xj) in x.iter().enumerate() {
                let e = o * layer.in_width() + j;
                let b = basis_oracle(g.degree, g.intervals, g.range_lo, g.range_hi, xj);
                let spline: f64 = (0..nb).map(|k| layer.coeffs[e * nb + k] * b[k]).sum();
                acc += layer.spline_scale[e] * spline;
                if layer.residual() {
                    acc += layer.base_weight[e] * silu(xj);
                }
            }
            acc
        })
        .collect()
}

pub fn filter_oracle(filter: &KanFilter<f64>, x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    for layer in filter.layers() {
        v = kan_layer_oracle(layer, &v);
    }
    v[0]
}

/// Channel-wise block by explicit loops: `frame` is `[c, T]`, result `[c, f, l]`.
pub fn channel_wise_oracle(filters: &[KanFilter<f64>], frame: &[f64], c: usize, n_w: usize, per_channel: bool) -> Vec<f64> {
    let t = frame.len() / c;
    let l = t / n_w;
    let f = if per_channel { filters.len() / c } else { filters.len() };
    let mut out = vec![0.0; c * f * l];
    for ch in 0..c {
        for i in 0..f {
            let filter = &filters[if per_channel { ch * f + i } else { i }];
            for w in 0..l {
                let window = &frame[ch * t + w * n_w..ch * t + (w + 1) * n_w];
                out[(ch * f + i) * l + w] = filter_oracle(filter, window);
            }
        }
    }
    out
}

/// Cross-channel block by explicit loops: result `[l, f_p]`.
pub fn cross_channel_oracle(filters: &[KanFilter<f64>], frame: &[f64], c: usize, n_w: usize) -> Vec<f64> {
    let t = frame.len() / c;
    let l = t / n_w;
    let mut out = Vec::new();
    for w in 0..l {
        let mut row = Vec::new();
        for ch in 0..c {
            row.extend_from_slice(&frame[ch * t + w * n_w..ch * t + (w + 1) * n_w]);
        }
        for filter in filters {
            out.push(filter_oracle(filter, &row));
        }
    }
    out
}

/// Level-2 block by explicit loops from a `[c, f, l]` tensor: result `[l, f_2]`.
pub fn level2_oracle(filters: &[KanFilter<f64>], l1: &[f64], cf: usize, l: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for w in 0..l {
        let row: Vec<f64> = (0..cf).map(|q| l1[q * l + w]).collect();
        for filter in filters {
            out.push(filter_oracle(filter, &row));
        }
    }
    out
}

/// Parameter count of a configuration, enumerated from the architecture
/// description: every edge of every KAN filter, every conv kernel and bias,
/// and the three-layer head.
pub fn param_count_oracle(cfg: &ModelConfig) -> usize {
    let g = &cfg.kan.grid;
    let per_edge = g.intervals + g.degree + if cfg.kan.residual { 2 } else { 1 };
    let filter = |inw: usize| -> usize {
        let widths: Vec<usize> = match cfg.kan.shape {
            kanfe::FilterShape::TwoLayer => vec![inw, 2 * inw + 1, 1],
            kanfe::FilterShape::SingleLayer => vec![inw, 1],
        };
        widths.windows(2).map(|p| p[0] * p[1] * per_edge).sum()
    };
    let (c, t, k, n_w) = (cfg.channels, cfg.frame_len, cfg.class_count, cfg.n_w);
    let l = t / n_w;
    let f = cfg.f.unwrap_or(0);
    let cw_filters = if cfg.kan.per_channel_filters { c * f } else { f };
    let conv = |mut ch: usize, mut len: usize| -> (usize, usize, usize) {
        let mut total = 0;
        for &o in &cfg.conv_channels {
            total += o * ch * 5 + o;
            ch = o;
            len -= 4;
        }
        (total, ch, len)
    };
    let (extractor, width) = match cfg.variant {
        Variant::Cnn => {
            let (p, ch, len) = conv(c, t);
            (p, ch * len)
        }
        Variant::OneLevel => (cw_filters * filter(n_w), c * f * l),
        Variant::TwoLevel => {
            let f2 = cfg.f2.unwrap();
            (cw_filters * filter(n_w) + f2 * filter(c * f), l * f2)
        }
        Variant::Residual => {
            let f2 = cfg.f2.unwrap();
            (cw_filters * filter(n_w) + f2 * filter(c * f), c * f * l + l * f2)
        }
        Variant::Parallel => {
            let fp = cfg.fp.unwrap();
            (cw_filters * filter(n_w) + fp * filter(c * n_w), c * f * l + l * fp)
        }
        Variant::KanCnn => {
            let (p, ch, len) = conv(c * f, l);
            (cw_filters * filter(n_w) + p, ch * len)
        }
    };
    let head = width * 256 + 256 + 256 * 128 + 128 + 128 * k + k;
    extractor + head
}

/// Outcome of a finite-difference gradient comparison.
#[derive(Debug, Default)]
pub struct GradReport {
    pub checked: usize,
    /// Entries where the finite differences themselves are unstable because
    /// the step crosses a kink; these are not compared.
    pub kinks: usize,
    pub worst_rel: f64,
    pub failures: Vec<String>,
}

impl GradReport {
    pub fn merge(&mut self, other: GradReport) {
        self.checked += other.checked;
        self.kinks += other.kinks;
        self.worst_rel = self.worst_rel.max(other.worst_rel);
        self.failures.extend(other.failures);
    }
}

pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Compares `analytic` with a central difference of `loss_at` around `base`.
/// A mismatch is re-examined with a ten times smaller step: when the two
/// numeric estimates disagree with each other the step straddles a kink
/// (ReLU, knot or clamp boundary) and the entry is counted as skipped.
fn compare(
    name: &str,
    analytic: f64,
    base: f64,
    mut loss_at: impl FnMut(f64) -> f64,
    tol: f64,
    report: &mut GradReport,
) {
    let mut central = |h: f64| (loss_at(base + h) - loss_at(base - h)) / (2.0 * h);
    let coarse = central(FD_STEP);
    let mut e = rel_err(analytic, coarse);
    let mut numeric = coarse;
    if e >= tol {
        let fine = central(FD_STEP / 10.0);
        if rel_err(coarse, fine) >= tol && rel_err(analytic, fine) >= tol {
            report.kinks += 1;
            return;
        }
        if rel_err(analytic, fine) < e {
            e = rel_err(analytic, fine);
            numeric = fine;
        }
    }
    report.checked += 1;
    report.worst_rel = report.worst_rel.max(e);
    if e >= tol {
        report.failures.push(format!("{name}: analytic {analytic:.6e} vs numeric {numeric:.6e} (rel {e:.2e})"));
    }
}

/// Entries to probe in a tensor: all of it when small, otherwise a random
/// sample plus the largest-gradient entries.
fn probe_indices(len: usize, grads: &[f64], budget: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if len <= budget {
        return (0..len).collect();
    }
    let mut idx: Vec<usize> = (0..budget / 2).map(|_| rng.random_range(0..len)).collect();
    let mut by_size: Vec<usize> = (0..len).collect();
    by_size.sort_by(|&a, &b| grads[b].abs().total_cmp(&grads[a].abs()));
    idx.extend(by_size.into_iter().take(budget - budget / 2));
    idx.sort_unstable();
    idx.dedup();
    idx
}

fn model_loss(model: &Model<f64>, x: &[f64], labels: &[usize]) -> f64 {
    let logits = model.forward_classify(x, labels.len()).unwrap();
    cross_entropy(&logits, labels, model.config().class_count).unwrap().0
}

/// Checks every parameter tensor of `model` (all entries when a tensor has
/// at most `budget` of them, otherwise a sample), plus one random-direction
/// derivative per tensor that involves every entry.
pub fn check_model_gradients(model: &mut Model<f64>, x: &[f64], labels: &[usize], budget: usize, tol: f64, seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = model.config().class_count;
    let (logits, rec) = model.forward_train(x, labels.len()).unwrap();
    let (_, dlogits) = cross_entropy(&logits, labels, k).unwrap();
    let grads = model.backward(&rec, &dlogits);
    let names: Vec<String> = model.params().iter().map(|p| p.name.clone()).collect();
    let mut report = GradReport::default();
    for (t, name) in names.iter().enumerate() {
        let g = &grads[t];
        for i in probe_indices(g.len(), g, budget, &mut rng) {
            let base = model.params_mut()[t][i];
            compare(
                &format!("{name}[{i}]"),
                g[i],
                base,
                |v| {
                    model.params_mut()[t][i] = v;
                    let l = model_loss(model, x, labels);
                    model.params_mut()[t][i] = base;
                    l
                },
                tol,
                &mut report,
            );
        }
        // directional derivative along a random unit vector over the whole tensor
        let dir: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-300);
        let dir: Vec<f64> = dir.iter().map(|d| d / norm).collect();
        let analytic: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let saved: Vec<f64> = model.params_mut()[t].to_vec();
        compare(
            &format!("{name} (direction)"),
            analytic,
            0.0,
            |s| {
                for ((p, o), d) in model.params_mut()[t].iter_mut().zip(&saved).zip(&dir) {
                    *p = o + s * d;
                }
                let l = model_loss(model, x, labels);
                model.params_mut()[t].copy_from_slice(&saved);
                l
            },
            tol,
            &mut report,
        );
    }
    report
}

/// Full check of one KAN layer under the loss `sum(w * y)`, for every
/// parameter and every input.
pub fn check_kan_layer_gradients(layer: &mut KanLayer<f64>, x: &[f64], n: usize, w: &[f64], tol: f64) -> GradReport {
    let loss = |layer: &KanLayer<f64>, x: &[f64]| -> f64 {
        layer.forward(x, n).unwrap().0.iter().zip(w).map(|(a, b)| a * b).sum()
    };
    let (_, rec) = layer.forward(x, n).unwrap();
    let g = layer.backward(&rec, w).unwrap();
    let analytic: Vec<Vec<f64>> = if layer.residual() {
        vec![g.coeffs, g.base_weight, g.spline_scale]
    } else {
        vec![g.coeffs, g.spline_scale]
    };
    let mut report = GradReport::default();
    for (t, ga) in analytic.iter().enumerate() {
        for i in 0..ga.len() {
            let base = layer.params_mut()[t][i];
            compare(
                &format!("tensor {t}[{i}]"),
                ga[i],
                base,
                |v| {
                    layer.params_mut()[t][i] = v;
                    let l = loss(layer, x);
                    layer.params_mut()[t][i] = base;
                    l
                },
                tol,
                &mut report,
            );
        }
    }
    let mut xm = x.to_vec();
    for i in 0..x.len() {
        compare(
            &format!("input[{i}]"),
            g.input[i],
            x[i],
            |v| {
                xm[i] = v;
                let l = loss(layer, &xm);
                xm[i] = x[i];
                l
            },
            tol,
            &mut report,
        );
    }
    report
}

/// Accuracy of a softmax-regression probe on per-channel mean and variance
/// features, trained by full-batch gradient descent and scored on `test`.
pub fn linear_probe_accuracy(train: &[kanfe::Instance], test: &[kanfe::Instance], classes: usize) -> f64 {
    let feats = |i: &kanfe::Instance| -> Vec<f64> {
        let mut v = vec![1.0];
        for ch in 0..i.channels {
            let s = i.channel(ch);
            let m = s.iter().sum::<f64>() / s.len() as f64;
            let var = s.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / s.len() as f64;
            v.push(m);
            v.push(var);
        }
        v
    };
    let xtr: Vec<Vec<f64>> = train.iter().map(feats).collect();
    let d = xtr[0].len();
    // standardize non-bias features with training statistics
    let mut mean = vec![0.0; d];
    let mut sd = vec![1.0; d];
    for j in 1..d {
        mean[j] = xtr.iter().map(|r| r[j]).sum::<f64>() / xtr.len() as f64;
        sd[j] = (xtr.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / xtr.len() as f64).sqrt().max(1e-12);
    }
    let z = |r: &[f64]| -> Vec<f64> { (0..d).map(|j| if j == 0 { 1.0 } else { (r[j] - mean[j]) / sd[j] }).collect() };
    let xtr: Vec<Vec<f64>> = xtr.iter().map(|r| z(r)).collect();
    let mut w = vec![vec![0.0; d]; classes];
    for _ in 0..2000 {
        let mut grad = vec![vec![0.0; d]; classes];
        for (r, inst) in xtr.iter().zip(train) {
            let logits: Vec<f64> = w.iter().map(|wc| wc.iter().zip(r).map(|(a, b)| a * b).sum()).collect();
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            for c in 0..classes {
                let p = e[c] / s - if c == inst.label { 1.0 } else { 0.0 };
                for j in 0..d {
                    grad[c][j] += p * r[j] / train.len() as f64;
                }
            }
        }
        for c in 0..classes {
            for j in 0..d {
                w[c][j] -= 0.5 * grad[c][j];
            }
        }
    }
    let correct = test
        .iter()
        .filter(|inst| {
            let r = z(&feats(inst));
            let scores: Vec<f64> = w.iter().map(|wc| wc.iter().zip(&r).map(|(a, b)| a * b).sum()).collect();
            let best = (0..classes).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
            best == inst.label
        })
        .count();
    correct as f64 / test.len() as f64
}
