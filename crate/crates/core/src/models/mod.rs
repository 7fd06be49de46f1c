//! Complete classifiers: a feature extractor followed by the shared MLP head.

mod config;
mod table1;

pub use config::{KanOptions, ModelConfig, Variant, DEFAULT_NW};
pub use table1::{canonical_name, enumerate_table1, with_window, TABLE1_NAMES};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{
    cross_channel_rows, level2_rows, level2_rows_backward, segment_batch, ChannelWiseBlock, ChannelWiseRecord,
    WindowBank, WindowBankRecord,
};
use crate::nn::{prefixed, ConvStack, ConvStackRecord, Grads, MlpHead, MlpRecord, ParamView, Parameterized};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
enum Extractor<T> {
    Cnn(ConvStack<T>),
    OneLevel(ChannelWiseBlock<T>),
    TwoLevel(ChannelWiseBlock<T>, WindowBank<T>),
    Residual(ChannelWiseBlock<T>, WindowBank<T>),
    Parallel(ChannelWiseBlock<T>, WindowBank<T>),
    KanCnn(ChannelWiseBlock<T>, ConvStack<T>),
}

#[derive(Debug, Clone)]
enum ExtractorRecord<T> {
    Cnn(ConvStackRecord<T>),
    OneLevel(ChannelWiseRecord<T>),
    Level2(ChannelWiseRecord<T>, WindowBankRecord<T>),
    Parallel(ChannelWiseRecord<T>, WindowBankRecord<T>),
    KanCnn(ChannelWiseRecord<T>, ConvStackRecord<T>),
}

#[derive(Debug, Clone)]
pub struct ModelRecord<T> {
    n: usize,
    extractor: ExtractorRecord<T>,
    head: MlpRecord<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    config: ModelConfig,
    extractor: Extractor<T>,
    head: MlpHead<T>,
}

/// Row-wise concatenation of `[n, a]` and `[n, b]`.
fn concat_rows<T: Scalar>(a: &[T], b: &[T], n: usize) -> Vec<T> {
    let (wa, wb) = (a.len() / n, b.len() / n);
    let mut out = Vec::with_capacity(a.len() + b.len());
    for s in 0..n {
        out.extend_from_slice(&a[s * wa..(s + 1) * wa]);
        out.extend_from_slice(&b[s * wb..(s + 1) * wb]);
    }
    out
}

fn split_rows<T: Scalar>(g: &[T], n: usize, wa: usize) -> (Vec<T>, Vec<T>) {
    let w = g.len() / n;
    let mut a = Vec::with_capacity(n * wa);
    let mut b = Vec::with_capacity(n * (w - wa));
    for row in g.chunks_exact(w) {
        a.extend_from_slice(&row[..wa]);
        b.extend_from_slice(&row[wa..]);
    }
    (a, b)
}

impl<T: Scalar> Model<T> {
    pub fn build(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, l) = (config.channels, config.windows());
        let kan = &config.kan;
        let channel_wise = |rng: &mut ChaCha8Rng| {
            let f = config.f.unwrap_or(0);
            ChannelWiseBlock::init_with(&kan.filter(config.n_w), f, c, kan.per_channel_filters, rng)
        };
        let extractor = match config.variant {
            Variant::Cnn => Extractor::Cnn(ConvStack::new(c, config.frame_len, &config.conv_channels, &mut rng)?),
            Variant::OneLevel => Extractor::OneLevel(channel_wise(&mut rng)?),
            Variant::TwoLevel | Variant::Residual => {
                let cw = channel_wise(&mut rng)?;
                let cf = c * config.f.unwrap_or(0);
                let l2 = WindowBank::init_with(&kan.filter(cf), config.f2.unwrap_or(0), &mut rng)?;
                if config.variant == Variant::TwoLevel {
                    Extractor::TwoLevel(cw, l2)
                } else {
                    Extractor::Residual(cw, l2)
                }
            }
            Variant::Parallel => {
                let cw = channel_wise(&mut rng)?;
                let cc = WindowBank::init_with(&kan.filter(c * config.n_w), config.fp.unwrap_or(0), &mut rng)?;
                Extractor::Parallel(cw, cc)
            }
            Variant::KanCnn => {
                let cw = channel_wise(&mut rng)?;
                let conv = ConvStack::new(c * config.f.unwrap_or(0), l, &config.conv_channels, &mut rng)?;
                Extractor::KanCnn(cw, conv)
            }
        };
        let head = MlpHead::new(config.feature_width(), config.class_count, &mut rng);
        Ok(Model { config: config.clone(), extractor, head })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn head(&self) -> &MlpHead<T> {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut MlpHead<T> {
        &mut self.head
    }

    /// Values per input frame, `c * T`.
    pub fn frame_size(&self) -> usize {
        self.config.channels * self.config.frame_len
    }

    pub fn channel_wise(&self) -> Option<&ChannelWiseBlock<T>> {
        match &self.extractor {
            Extractor::Cnn(_) => None,
            Extractor::OneLevel(cw)
            | Extractor::TwoLevel(cw, _)
            | Extractor::Residual(cw, _)
            | Extractor::Parallel(cw, _)
            | Extractor::KanCnn(cw, _) => Some(cw),
        }
    }

    pub fn channel_wise_mut(&mut self) -> Option<&mut ChannelWiseBlock<T>> {
        match &mut self.extractor {
            Extractor::Cnn(_) => None,
            Extractor::OneLevel(cw)
            | Extractor::TwoLevel(cw, _)
            | Extractor::Residual(cw, _)
            | Extractor::Parallel(cw, _)
            | Extractor::KanCnn(cw, _) => Some(cw),
        }
    }

    /// The second-level or cross-channel bank, when the variant has one.
    pub fn window_bank(&self) -> Option<&WindowBank<T>> {
        match &self.extractor {
            Extractor::TwoLevel(_, b) | Extractor::Residual(_, b) | Extractor::Parallel(_, b) => Some(b),
            _ => None,
        }
    }

    pub fn conv_stack(&self) -> Option<&ConvStack<T>> {
        match &self.extractor {
            Extractor::Cnn(s) | Extractor::KanCnn(_, s) => Some(s),
            _ => None,
        }
    }

    fn check_batch(&self, x: &[T], n: usize) -> Result<()> {
        if n == 0 || x.len() != n * self.frame_size() {
            return Err(Error::config(format!(
                "{}: batch has {} values, expected {n} frames of {} channels x {} samples",
                self.config.name,
                x.len(),
                self.config.channels,
                self.config.frame_len
            )));
        }
        Ok(())
    }

    /// Extracted features `[n, feature_width]` for a batch of `[n, c, T]` frames.
    fn extract(&self, x: &[T], n: usize) -> Result<(Vec<T>, ExtractorRecord<T>)> {
        let cfg = &self.config;
        let (c, l) = (cfg.channels, cfg.windows());
        let windows = || segment_batch(x, n, c, cfg.frame_len, cfg.n_w);
        Ok(match &self.extractor {
            Extractor::Cnn(stack) => {
                let (y, rec) = stack.forward(x, n)?;
                (y, ExtractorRecord::Cnn(rec))
            }
            Extractor::OneLevel(cw) => {
                let (y, rec) = cw.forward(&windows()?, n, l)?;
                (y, ExtractorRecord::OneLevel(rec))
            }
            Extractor::TwoLevel(cw, l2) | Extractor::Residual(cw, l2) => {
                let (l1, rec1) = cw.forward(&windows()?, n, l)?;
                let rows = level2_rows(&l1, n, c * cw.f(), l);
                let (y2, rec2) = l2.forward_rows(&rows, n * l)?;
                let y = if matches!(self.extractor, Extractor::Residual(..)) { concat_rows(&l1, &y2, n) } else { y2 };
                (y, ExtractorRecord::Level2(rec1, rec2))
            }
            Extractor::Parallel(cw, cc) => {
                let xs = windows()?;
                let (l1, rec1) = cw.forward(&xs, n, l)?;
                let rows = cross_channel_rows(&xs, n, c, l, cfg.n_w);
                let (yp, rec2) = cc.forward_rows(&rows, n * l)?;
                (concat_rows(&l1, &yp, n), ExtractorRecord::Parallel(rec1, rec2))
            }
            Extractor::KanCnn(cw, stack) => {
                let (l1, rec1) = cw.forward(&windows()?, n, l)?;
                let (y, rec2) = stack.forward(&l1, n)?;
                (y, ExtractorRecord::KanCnn(rec1, rec2))
            }
        })
    }

    pub fn forward_train(&self, x: &[T], n: usize) -> Result<(Vec<T>, ModelRecord<T>)> {
        self.check_batch(x, n)?;
        let (features, extractor) = self.extract(x, n)?;
        let (logits, head) = self.head.forward(&features, n)?;
        Ok((logits, ModelRecord { n, extractor, head }))
    }

    /// Logits `[n, class_count]` for a batch of `[n, c, T]` frames.
    pub fn forward_classify(&self, x: &[T], n: usize) -> Result<Vec<T>> {
        self.forward_train(x, n).map(|(y, _)| y)
    }

    pub fn predict(&self, x: &[T], n: usize) -> Result<Vec<usize>> {
        let k = self.config.class_count;
        Ok(self.forward_classify(x, n)?.chunks_exact(k).map(argmax).collect())
    }

    /// Gradients of every parameter tensor, in `params()` order.
    pub fn backward(&self, rec: &ModelRecord<T>, dlogits: &[T]) -> Grads<T> {
        let mut grads = self.zero_grads();
        let ext_tensors = grads.len() - 6;
        let (g_ext, g_head) = grads.split_at_mut(ext_tensors);
        let dfeat = self.head.backward(&rec.head, dlogits, g_head);
        let n = rec.n;
        let (c, l) = (self.config.channels, self.config.windows());
        match (&self.extractor, &rec.extractor) {
            (Extractor::Cnn(stack), ExtractorRecord::Cnn(r)) => {
                stack.backward(r, &dfeat, g_ext, false);
            }
            (Extractor::OneLevel(cw), ExtractorRecord::OneLevel(r)) => cw.backward(r, &dfeat, g_ext),
            (Extractor::TwoLevel(cw, l2), ExtractorRecord::Level2(r1, r2))
            | (Extractor::Residual(cw, l2), ExtractorRecord::Level2(r1, r2)) => {
                let cf = c * cw.f();
                let residual = matches!(self.extractor, Extractor::Residual(..));
                let (mut d_l1, d_l2) =
                    if residual { split_rows(&dfeat, n, cf * l) } else { (vec![T::zero(); n * cf * l], dfeat) };
                let split = cw.tensor_count();
                let (g_cw, g_l2) = g_ext.split_at_mut(split);
                let rows_grad = l2.backward_rows(r2, &d_l2, g_l2, true).unwrap_or_default();
                for (a, b) in d_l1.iter_mut().zip(level2_rows_backward(&rows_grad, n, cf, l)) {
                    *a += b;
                }
                cw.backward(r1, &d_l1, g_cw);
            }
            (Extractor::Parallel(cw, cc), ExtractorRecord::Parallel(r1, r2)) => {
                let (d_l1, d_cc) = split_rows(&dfeat, n, c * cw.f() * l);
                let (g_cw, g_cc) = g_ext.split_at_mut(cw.tensor_count());
                cc.backward_rows(r2, &d_cc, g_cc, false);
                cw.backward(r1, &d_l1, g_cw);
            }
            (Extractor::KanCnn(cw, stack), ExtractorRecord::KanCnn(r1, r2)) => {
                let (g_cw, g_conv) = g_ext.split_at_mut(cw.tensor_count());
                let d_l1 = stack.backward(r2, &dfeat, g_conv, true).unwrap_or_default();
                cw.backward(r1, &d_l1, g_cw);
            }
            _ => unreachable!("record does not belong to this model"),
        }
        grads
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.data.iter().all(|v| v.is_finite()))
    }
}

pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

impl<T: Scalar> Parameterized<T> for Model<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        let mut v = match &self.extractor {
            Extractor::Cnn(s) => prefixed("cnn", s.params()),
            Extractor::OneLevel(cw) => prefixed("channel_wise", cw.params()),
            Extractor::TwoLevel(cw, b) | Extractor::Residual(cw, b) => {
                let mut v = prefixed("channel_wise", cw.params());
                v.extend(prefixed("level2", b.params()));
                v
            }
            Extractor::Parallel(cw, b) => {
                let mut v = prefixed("channel_wise", cw.params());
                v.extend(prefixed("cross_channel", b.params()));
                v
            }
            Extractor::KanCnn(cw, s) => {
                let mut v = prefixed("channel_wise", cw.params());
                v.extend(prefixed("cnn", s.params()));
                v
            }
        };
        v.extend(prefixed("head", self.head.params()));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = match &mut self.extractor {
            Extractor::Cnn(s) => s.params_mut(),
            Extractor::OneLevel(cw) => cw.params_mut(),
            Extractor::TwoLevel(cw, b) | Extractor::Residual(cw, b) | Extractor::Parallel(cw, b) => {
                let mut v = cw.params_mut();
                v.extend(b.params_mut());
                v
            }
            Extractor::KanCnn(cw, s) => {
                let mut v = cw.params_mut();
                v.extend(s.params_mut());
                v
            }
        };
        v.extend(self.head.params_mut());
        v
    }

    fn param_count(&self) -> usize {
        let extractor = match &self.extractor {
            Extractor::Cnn(s) => s.param_count(),
            Extractor::OneLevel(cw) => cw.param_count(),
            Extractor::TwoLevel(cw, b) | Extractor::Residual(cw, b) | Extractor::Parallel(cw, b) => {
                cw.param_count() + b.param_count()
            }
            Extractor::KanCnn(cw, s) => cw.param_count() + s.param_count(),
        };
        extractor + self.head.param_count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_input_widths() {
        let pl = ModelConfig::parallel("pl", 5, 5, 3, 80, 6);
        assert_eq!(pl.feature_width(), 160);
        let one = ModelConfig::one_level("1l", 5, 1, 80, 6);
        assert_eq!(one.feature_width(), 40);
        let cnn = ModelConfig::cnn("c", &[32, 64, 128], 3, 80, 6);
        assert_eq!(cnn.feature_width(), 8704);
        let m = Model::<f64>::build(&cnn, 0).unwrap();
        assert_eq!(m.head().in_width(), 8704);
        assert_eq!(m.conv_stack().unwrap().out_len(), 68);
    }

    #[test]
    fn build_rejects_invalid_configs() {
        let mut cfg = ModelConfig::two_level("x", 5, 5, 3, 80, 6);
        cfg.f2 = None;
        let err = Model::<f64>::build(&cfg, 0).unwrap_err().to_string();
        assert!(err.contains("f2"), "{err}");

        let mut cfg = ModelConfig::one_level("x", 5, 3, 80, 6);
        cfg.fp = Some(3);
        assert!(Model::<f64>::build(&cfg, 0).unwrap_err().to_string().contains("fp"));

        let mut cfg = ModelConfig::kan_cnn("x", 5, &[32, 64, 128], 3, 80, 6);
        cfg.n_w = 10;
        let err = Model::<f64>::build(&cfg, 0).unwrap_err().to_string();
        assert!(err.contains("windows l"), "{err}");

        let cfg = ModelConfig::one_level("x", 5, 3, 8, 6);
        assert!(Model::<f64>::build(&cfg, 0).unwrap_err().to_string().contains("n_w"));
    }

    #[test]
    fn zero_final_layer_gives_bias_logits() {
        let cfg = ModelConfig::one_level("x", 2, 2, 20, 3);
        let mut m = Model::<f64>::build(&cfg, 4).unwrap();
        let head = m.head_mut();
        head.layers[2].weight.iter_mut().for_each(|w| *w = 0.0);
        head.layers[2].bias = vec![0.5, -1.0, 2.0];
        let x: Vec<f64> = (0..2 * 40).map(|i| (i % 7) as f64 / 7.0).collect();
        let y = m.forward_classify(&x, 2).unwrap();
        assert_eq!(y, vec![0.5, -1.0, 2.0, 0.5, -1.0, 2.0]);
    }

    #[test]
    fn batch_shape_errors() {
        let cfg = ModelConfig::one_level("x", 2, 2, 20, 3);
        let m = Model::<f64>::build(&cfg, 4).unwrap();
        assert!(matches!(m.forward_classify(&[0.0; 39], 1), Err(Error::Config(_))));
    }

    #[test]
    fn config_toml_round_trip() {
        for cfg in enumerate_table1(6, 3, 80) {
            let text = cfg.to_toml().unwrap();
            assert_eq!(ModelConfig::from_toml(&text).unwrap(), cfg);
        }
    }
}
