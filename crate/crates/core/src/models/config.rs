use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kan::{FilterShape, FilterSpec};
use crate::nn::{CONV_KERNEL, MLP_HIDDEN};
use crate::spline::GridSpec;

/// Jumping-window length used unless a config overrides it.
pub const DEFAULT_NW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "1L")]
    OneLevel,
    #[serde(rename = "2L")]
    TwoLevel,
    #[serde(rename = "RL")]
    Residual,
    #[serde(rename = "PL")]
    Parallel,
    #[serde(rename = "CNN")]
    Cnn,
    #[serde(rename = "KAN-CNN")]
    KanCnn,
}

impl Variant {
    pub fn tag(self) -> &'static str {
        match self {
            Variant::OneLevel => "1L",
            Variant::TwoLevel => "2L",
            Variant::Residual => "RL",
            Variant::Parallel => "PL",
            Variant::Cnn => "CNN",
            Variant::KanCnn => "KAN-CNN",
        }
    }

    /// Pure KAN feature extractors (no convolution anywhere).
    pub fn is_kan(self) -> bool {
        matches!(self, Variant::OneLevel | Variant::TwoLevel | Variant::Residual | Variant::Parallel)
    }

    pub fn uses_kan(self) -> bool {
        self != Variant::Cnn
    }

    pub fn uses_conv(self) -> bool {
        matches!(self, Variant::Cnn | Variant::KanCnn)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "1L" => Variant::OneLevel,
            "2L" => Variant::TwoLevel,
            "RL" => Variant::Residual,
            "PL" => Variant::Parallel,
            "CNN" => Variant::Cnn,
            "KAN-CNN" => Variant::KanCnn,
            other => return Err(Error::config(format!("unknown model variant {other:?}"))),
        })
    }
}

/// Settings shared by every KAN filter in a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KanOptions {
    pub shape: FilterShape,
    pub residual: bool,
    /// One filter bank per channel instead of one bank shared by all channels.
    pub per_channel_filters: bool,
    pub grid: GridSpec,
}

impl Default for KanOptions {
    fn default() -> Self {
        KanOptions { shape: FilterShape::TwoLayer, residual: true, per_channel_filters: false, grid: GridSpec::default() }
    }
}

impl KanOptions {
    pub fn filter(&self, in_width: usize) -> FilterSpec {
        FilterSpec { in_width, shape: self.shape, grid: self.grid, residual: self.residual }
    }
}

/// Declarative description of one classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    pub variant: Variant,
    /// Input channels `c`.
    pub channels: usize,
    /// Frame length `T` in samples.
    pub frame_len: usize,
    pub class_count: usize,
    pub n_w: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f2: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fp: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conv_channels: Vec<usize>,
    #[serde(default)]
    pub kan: KanOptions,
}

impl ModelConfig {
    fn base(name: &str, variant: Variant, channels: usize, frame_len: usize, class_count: usize) -> Self {
        ModelConfig {
            name: name.to_string(),
            variant,
            channels,
            frame_len,
            class_count,
            n_w: DEFAULT_NW,
            f: None,
            f2: None,
            fp: None,
            conv_channels: Vec::new(),
            kan: KanOptions::default(),
        }
    }

    pub fn cnn(name: &str, conv: &[usize], channels: usize, frame_len: usize, class_count: usize) -> Self {
        ModelConfig { conv_channels: conv.to_vec(), ..Self::base(name, Variant::Cnn, channels, frame_len, class_count) }
    }

    pub fn one_level(name: &str, f: usize, channels: usize, frame_len: usize, class_count: usize) -> Self {
        ModelConfig { f: Some(f), ..Self::base(name, Variant::OneLevel, channels, frame_len, class_count) }
    }

    pub fn two_level(name: &str, f: usize, f2: usize, channels: usize, frame_len: usize, class_count: usize) -> Self {
        ModelConfig { f: Some(f), f2: Some(f2), ..Self::base(name, Variant::TwoLevel, channels, frame_len, class_count) }
    }

    pub fn residual(name: &str, f: usize, f2: usize, channels: usize, frame_len: usize, class_count: usize) -> Self {
        ModelConfig { f: Some(f), f2: Some(f2), ..Self::base(name, Variant::Residual, channels, frame_len, class_count) }
    }

    pub fn parallel(name: &str, f: usize, fp: usize, channels: usize, frame_len: usize, class_count: usize) -> Self {
        ModelConfig { f: Some(f), fp: Some(fp), ..Self::base(name, Variant::Parallel, channels, frame_len, class_count) }
    }

    pub fn kan_cnn(name: &str, f: usize, conv: &[usize], channels: usize, frame_len: usize, class_count: usize) -> Self {
        ModelConfig {
            f: Some(f),
            conv_channels: conv.to_vec(),
            ..Self::base(name, Variant::KanCnn, channels, frame_len, class_count)
        }
    }

    /// Windows per frame, `floor(T / n_w)`.
    pub fn windows(&self) -> usize {
        if self.n_w == 0 {
            0
        } else {
            self.frame_len / self.n_w
        }
    }

    fn need(&self, field: &str, v: Option<usize>) -> Result<usize> {
        match v {
            Some(0) => Err(Error::config(format!("{}: {field} must be positive", self.name))),
            Some(x) => Ok(x),
            None => Err(Error::config(format!("{}: variant {} requires {field}", self.name, self.variant))),
        }
    }

    fn forbid(&self, field: &str, set: bool) -> Result<()> {
        if set {
            Err(Error::config(format!("{}: {field} is not used by variant {}", self.name, self.variant)))
        } else {
            Ok(())
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("channels", self.channels), ("frame_len", self.frame_len), ("class_count", self.class_count)] {
            if v == 0 {
                return Err(Error::config(format!("{}: {field} must be positive", self.name)));
            }
        }
        let v = self.variant;
        let wants_f = v.uses_kan();
        let wants_f2 = matches!(v, Variant::TwoLevel | Variant::Residual);
        let wants_fp = v == Variant::Parallel;
        if wants_f {
            self.need("f", self.f)?;
        } else {
            self.forbid("f", self.f.is_some())?;
        }
        if wants_f2 {
            self.need("f2", self.f2)?;
        } else {
            self.forbid("f2", self.f2.is_some())?;
        }
        if wants_fp {
            self.need("fp", self.fp)?;
        } else {
            self.forbid("fp", self.fp.is_some())?;
        }
        if v.uses_conv() {
            if self.conv_channels.is_empty() {
                return Err(Error::config(format!("{}: variant {v} requires conv_channels", self.name)));
            }
            if self.conv_channels.contains(&0) {
                return Err(Error::config(format!("{}: conv_channels must be positive", self.name)));
            }
        } else {
            self.forbid("conv_channels", !self.conv_channels.is_empty())?;
        }
        if v.uses_kan() {
            if self.n_w == 0 {
                return Err(Error::config(format!("{}: n_w must be positive", self.name)));
            }
            if self.frame_len < self.n_w {
                return Err(Error::config(format!(
                    "{}: frame_len {} is shorter than window n_w {}",
                    self.name, self.frame_len, self.n_w
                )));
            }
        }
        if v.uses_conv() {
            let len = if v == Variant::Cnn { self.frame_len } else { self.windows() };
            let need = 1 + self.conv_channels.len() * (CONV_KERNEL - 1);
            if len < need {
                let axis = if v == Variant::Cnn { "frame_len" } else { "windows l" };
                return Err(Error::config(format!(
                    "{}: temporal axis {axis} = {len} is too short for {} conv layers of kernel {CONV_KERNEL} (needs >= {need})",
                    self.name,
                    self.conv_channels.len()
                )));
            }
        }
        Ok(())
    }

    /// Output width of the feature extractor, i.e. the MLP input width.
    pub fn feature_width(&self) -> usize {
        let (c, l) = (self.channels, self.windows());
        let f = self.f.unwrap_or(0);
        let conv_out = |len: usize| {
            let out_len = len.saturating_sub(self.conv_channels.len() * (CONV_KERNEL - 1));
            self.conv_channels.last().copied().unwrap_or(0) * out_len
        };
        match self.variant {
            Variant::OneLevel => c * f * l,
            Variant::TwoLevel => self.f2.unwrap_or(0) * l,
            Variant::Residual => c * f * l + self.f2.unwrap_or(0) * l,
            Variant::Parallel => c * f * l + l * self.fp.unwrap_or(0),
            Variant::Cnn => conv_out(self.frame_len),
            Variant::KanCnn => conv_out(l),
        }
    }

    /// Closed-form trainable parameter count.
    pub fn expected_param_count(&self) -> usize {
        let (c, f) = (self.channels, self.f.unwrap_or(0));
        let filter = |w: usize| self.kan.filter(w).param_count();
        let bank = if self.kan.per_channel_filters { c * f } else { f };
        let conv = |in_ch: usize| {
            let mut total = 0;
            let mut prev = in_ch;
            for &o in &self.conv_channels {
                total += o * prev * CONV_KERNEL + o;
                prev = o;
            }
            total
        };
        let extractor = match self.variant {
            Variant::Cnn => conv(c),
            Variant::OneLevel => bank * filter(self.n_w),
            Variant::TwoLevel | Variant::Residual => bank * filter(self.n_w) + self.f2.unwrap_or(0) * filter(c * f),
            Variant::Parallel => bank * filter(self.n_w) + self.fp.unwrap_or(0) * filter(c * self.n_w),
            Variant::KanCnn => bank * filter(self.n_w) + conv(c * f),
        };
        let widths = [self.feature_width(), MLP_HIDDEN[0], MLP_HIDDEN[1], self.class_count];
        let head: usize = widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        extractor + head
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("cannot serialize model config: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ModelConfig = toml::from_str(text).map_err(|e| Error::config(format!("bad model config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
