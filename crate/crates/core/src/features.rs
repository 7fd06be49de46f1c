//! Channel-wise, cross-channel and second-level KAN feature blocks.
//!
//! Batched tensors use these layouts:
//!
//! * windowed input `[N, c, l, n_w]` (a frame cropped to `l * n_w` samples)
//! * channel-wise output `[N, c, f, l]`
//! * cross-channel and level-2 output `[N, l, f']`

use rand::Rng;

use crate::error::{Error, Result};
use crate::kan::{FilterRecord, FilterSpec, KanFilter};
use crate::nn::{prefixed, ParamView, Parameterized};
use crate::scalar::Scalar;

/// One frame split into `l` non-overlapping windows of `n_w` samples per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedFrame<T> {
    pub channels: usize,
    pub windows: usize,
    pub n_w: usize,
    /// `[channels, windows, n_w]`
    pub data: Vec<T>,
}

impl<T: Scalar> WindowedFrame<T> {
    pub fn at(&self, ch: usize, w: usize, s: usize) -> T {
        self.data[(ch * self.windows + w) * self.n_w + s]
    }

    pub fn window(&self, ch: usize, w: usize) -> &[T] {
        &self.data[(ch * self.windows + w) * self.n_w..][..self.n_w]
    }
}

/// Splits a `[c, len]` frame into jumping windows of `n_w`; trailing samples
/// that do not fill a window are dropped.
pub fn segment<T: Scalar>(frame: &[T], channels: usize, n_w: usize) -> Result<WindowedFrame<T>> {
    if channels == 0 || n_w == 0 || frame.len() % channels != 0 {
        return Err(Error::config(format!(
            "cannot segment {} values into {channels} channels with window {n_w}",
            frame.len()
        )));
    }
    let len = frame.len() / channels;
    if len < n_w {
        return Err(Error::FrameTooShort { len, n_w });
    }
    let windows = len / n_w;
    let mut data = Vec::with_capacity(channels * windows * n_w);
    for ch in 0..channels {
        data.extend_from_slice(&frame[ch * len..ch * len + windows * n_w]);
    }
    Ok(WindowedFrame { channels, windows, n_w, data })
}

/// Crops a batch of `[N, c, len]` frames to `[N, c, l, n_w]`.
pub fn segment_batch<T: Scalar>(x: &[T], n: usize, channels: usize, len: usize, n_w: usize) -> Result<Vec<T>> {
    if x.len() != n * channels * len {
        return Err(Error::config(format!(
            "batch has {} values, expected {n} x {channels} x {len}",
            x.len()
        )));
    }
    if len < n_w {
        return Err(Error::FrameTooShort { len, n_w });
    }
    let keep = (len / n_w) * n_w;
    if keep == len {
        return Ok(x.to_vec());
    }
    let mut out = Vec::with_capacity(n * channels * keep);
    for row in x.chunks_exact(len) {
        out.extend_from_slice(&row[..keep]);
    }
    Ok(out)
}

fn init_filters<T: Scalar, R: Rng + ?Sized>(count: usize, spec: &FilterSpec, rng: &mut R) -> Result<Vec<KanFilter<T>>> {
    (0..count).map(|_| KanFilter::init_with(spec, rng)).collect()
}

fn filter_params<'a, T: Scalar>(filters: &'a [KanFilter<T>]) -> Vec<ParamView<'a, T>> {
    filters
        .iter()
        .enumerate()
        .flat_map(|(i, f)| prefixed(&format!("filter{i}"), f.params()))
        .collect()
}

fn filter_offsets<T: Scalar>(filters: &[KanFilter<T>]) -> Vec<usize> {
    let mut offsets = vec![0];
    for f in filters {
        offsets.push(offsets.last().copied().unwrap_or(0) + f.tensor_count());
    }
    offsets
}

/// `f` filters applied to every channel of every window.
///
/// With `per_channel` set, each channel owns its own bank of `f` filters
/// (`c * f` in total) instead of sharing one bank.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelWiseBlock<T> {
    filters: Vec<KanFilter<T>>,
    channels: usize,
    per_channel: bool,
}

#[derive(Debug, Clone)]
pub struct ChannelWiseRecord<T> {
    n: usize,
    windows: usize,
    filters: Vec<FilterRecord<T>>,
}

impl<T: Scalar> ChannelWiseBlock<T> {
    pub fn init_with<R: Rng + ?Sized>(
        spec: &FilterSpec,
        f: usize,
        channels: usize,
        per_channel: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if f == 0 || channels == 0 {
            return Err(Error::config(format!("channel-wise block needs f > 0 and c > 0, got f={f}, c={channels}")));
        }
        let count = if per_channel { channels * f } else { f };
        Ok(ChannelWiseBlock { filters: init_filters(count, spec, rng)?, channels, per_channel })
    }

    pub fn from_filters(filters: Vec<KanFilter<T>>, channels: usize, per_channel: bool) -> Result<Self> {
        if filters.is_empty() || (per_channel && filters.len() % channels != 0) {
            return Err(Error::config("channel-wise block filter count does not match channel count"));
        }
        let w = filters[0].in_width();
        if filters.iter().any(|f| f.in_width() != w) {
            return Err(Error::config("channel-wise filters must share one input width"));
        }
        Ok(ChannelWiseBlock { filters, channels, per_channel })
    }

    /// Filters per channel.
    pub fn f(&self) -> usize {
        if self.per_channel {
            self.filters.len() / self.channels
        } else {
            self.filters.len()
        }
    }

    pub fn n_w(&self) -> usize {
        self.filters[0].in_width()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn filters(&self) -> &[KanFilter<T>] {
        &self.filters
    }

    pub fn filters_mut(&mut self) -> &mut [KanFilter<T>] {
        &mut self.filters
    }

    /// `x` is `[n, c, l, n_w]`; output `[n, c, f, l]`.
    pub fn forward(&self, x: &[T], n: usize, windows: usize) -> Result<(Vec<T>, ChannelWiseRecord<T>)> {
        let (c, f, nw, l) = (self.channels, self.f(), self.n_w(), windows);
        if x.len() != n * c * l * nw {
            return Err(Error::config(format!(
                "channel-wise input has {} values, expected {n} x {c} x {l} x {nw}",
                x.len()
            )));
        }
        let mut out = vec![T::zero(); n * c * f * l];
        let mut records = Vec::with_capacity(self.filters.len());
        if self.per_channel {
            for ch in 0..c {
                let rows = gather_channel(x, n, c, l * nw, ch);
                for i in 0..f {
                    let (y, rec) = self.filters[ch * f + i].forward(&rows, n * l)?;
                    for s in 0..n {
                        for w in 0..l {
                            out[((s * c + ch) * f + i) * l + w] = y[s * l + w];
                        }
                    }
                    records.push(rec);
                }
            }
        } else {
            for (i, filter) in self.filters.iter().enumerate() {
                let (y, rec) = filter.forward(x, n * c * l)?;
                for s in 0..n {
                    for ch in 0..c {
                        for w in 0..l {
                            out[((s * c + ch) * f + i) * l + w] = y[(s * c + ch) * l + w];
                        }
                    }
                }
                records.push(rec);
            }
        }
        Ok((out, ChannelWiseRecord { n, windows, filters: records }))
    }

    /// Accumulates parameter gradients; the input gradient is not needed by any
    /// model (this block always reads raw windows) and is not computed.
    pub fn backward(&self, rec: &ChannelWiseRecord<T>, upstream: &[T], grads: &mut [Vec<T>]) {
        let (c, f, l, n) = (self.channels, self.f(), rec.windows, rec.n);
        let offsets = filter_offsets(&self.filters);
        for (idx, filter) in self.filters.iter().enumerate() {
            let slots = &mut grads[offsets[idx]..offsets[idx + 1]];
            let g = if self.per_channel {
                let (ch, i) = (idx / f, idx % f);
                let mut g = vec![T::zero(); n * l];
                for s in 0..n {
                    for w in 0..l {
                        g[s * l + w] = upstream[((s * c + ch) * f + i) * l + w];
                    }
                }
                g
            } else {
                let mut g = vec![T::zero(); n * c * l];
                for s in 0..n {
                    for ch in 0..c {
                        for w in 0..l {
                            g[(s * c + ch) * l + w] = upstream[((s * c + ch) * f + idx) * l + w];
                        }
                    }
                }
                g
            };
            filter.backward_into(&rec.filters[idx], &g, slots, None);
        }
    }

    /// Features of a single frame, shape `[c, f, l]`.
    pub fn features(&self, wf: &WindowedFrame<T>) -> Result<Vec<T>> {
        if wf.n_w != self.n_w() || wf.channels != self.channels {
            return Err(Error::config(format!(
                "channel-wise block expects {} channels of window {}, got {} of {}",
                self.channels,
                self.n_w(),
                wf.channels,
                wf.n_w
            )));
        }
        self.forward(&wf.data, 1, wf.windows).map(|(y, _)| y)
    }
}

fn gather_channel<T: Scalar>(x: &[T], n: usize, c: usize, per_channel: usize, ch: usize) -> Vec<T> {
    let mut rows = Vec::with_capacity(n * per_channel);
    for s in 0..n {
        rows.extend_from_slice(&x[(s * c + ch) * per_channel..][..per_channel]);
    }
    rows
}

impl<T: Scalar> Parameterized<T> for ChannelWiseBlock<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        filter_params(&self.filters)
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.filters.iter_mut().flat_map(|f| f.params_mut()).collect()
    }

    fn param_count(&self) -> usize {
        self.filters.iter().map(|f| f.param_count()).sum()
    }
}

/// A bank of filters that each read one whole row per window and emit one
/// value, producing `[N, l, bank]`. Used for the cross-channel block (rows are
/// raw windows of all channels) and the second level (rows are the `c * f`
/// level-1 features of a window).
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBank<T> {
    filters: Vec<KanFilter<T>>,
}

#[derive(Debug, Clone)]
pub struct WindowBankRecord<T> {
    rows: usize,
    filters: Vec<FilterRecord<T>>,
}

impl<T: Scalar> WindowBank<T> {
    pub fn init_with<R: Rng + ?Sized>(spec: &FilterSpec, count: usize, rng: &mut R) -> Result<Self> {
        if count == 0 {
            return Err(Error::config("filter bank needs at least one filter"));
        }
        Ok(WindowBank { filters: init_filters(count, spec, rng)? })
    }

    pub fn from_filters(filters: Vec<KanFilter<T>>) -> Result<Self> {
        if filters.is_empty() {
            return Err(Error::config("filter bank needs at least one filter"));
        }
        let w = filters[0].in_width();
        if filters.iter().any(|f| f.in_width() != w) {
            return Err(Error::config("filters in one bank must share one input width"));
        }
        Ok(WindowBank { filters })
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn in_width(&self) -> usize {
        self.filters[0].in_width()
    }

    pub fn filters(&self) -> &[KanFilter<T>] {
        &self.filters
    }

    pub fn filters_mut(&mut self) -> &mut [KanFilter<T>] {
        &mut self.filters
    }

    /// `rows` is `[m, in_width]`; output `[m, bank]`.
    pub fn forward_rows(&self, rows: &[T], m: usize) -> Result<(Vec<T>, WindowBankRecord<T>)> {
        let k = self.filters.len();
        let mut out = vec![T::zero(); m * k];
        let mut records = Vec::with_capacity(k);
        for (p, filter) in self.filters.iter().enumerate() {
            let (y, rec) = filter.forward(rows, m)?;
            for (r, v) in y.into_iter().enumerate() {
                out[r * k + p] = v;
            }
            records.push(rec);
        }
        Ok((out, WindowBankRecord { rows: m, filters: records }))
    }

    /// Accumulates parameter gradients; returns the `[m, in_width]` row gradient when asked.
    pub fn backward_rows(
        &self,
        rec: &WindowBankRecord<T>,
        upstream: &[T],
        grads: &mut [Vec<T>],
        want_input: bool,
    ) -> Option<Vec<T>> {
        let k = self.filters.len();
        let m = rec.rows;
        let offsets = filter_offsets(&self.filters);
        let mut total = want_input.then(|| vec![T::zero(); m * self.in_width()]);
        let mut scratch = vec![T::zero(); if want_input { m * self.in_width() } else { 0 }];
        for (p, filter) in self.filters.iter().enumerate() {
            let g: Vec<T> = (0..m).map(|r| upstream[r * k + p]).collect();
            let slots = &mut grads[offsets[p]..offsets[p + 1]];
            if let Some(total) = total.as_mut() {
                filter.backward_into(&rec.filters[p], &g, slots, Some(&mut scratch));
                for (t, s) in total.iter_mut().zip(&scratch) {
                    *t += *s;
                }
            } else {
                filter.backward_into(&rec.filters[p], &g, slots, None);
            }
        }
        total
    }
}

impl<T: Scalar> Parameterized<T> for WindowBank<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        filter_params(&self.filters)
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.filters.iter_mut().flat_map(|f| f.params_mut()).collect()
    }

    fn param_count(&self) -> usize {
        self.filters.iter().map(|f| f.param_count()).sum()
    }
}

/// Rows for the cross-channel bank: window `w` of every channel, channel-major.
/// `x` is `[n, c, l, n_w]`; result `[n * l, c * n_w]`.
pub fn cross_channel_rows<T: Scalar>(x: &[T], n: usize, c: usize, l: usize, n_w: usize) -> Vec<T> {
    let mut rows = Vec::with_capacity(x.len());
    for s in 0..n {
        for w in 0..l {
            for ch in 0..c {
                rows.extend_from_slice(&x[((s * c + ch) * l + w) * n_w..][..n_w]);
            }
        }
    }
    rows
}

/// Rows for the level-2 bank: all `c * f` features of window `w`.
/// `l1` is `[n, c, f, l]`; result `[n * l, c * f]`.
pub fn level2_rows<T: Scalar>(l1: &[T], n: usize, cf: usize, l: usize) -> Vec<T> {
    let mut rows = Vec::with_capacity(l1.len());
    for s in 0..n {
        for w in 0..l {
            for q in 0..cf {
                rows.push(l1[(s * cf + q) * l + w]);
            }
        }
    }
    rows
}

/// Inverse scatter of [`level2_rows`] for gradients.
pub fn level2_rows_backward<T: Scalar>(rows_grad: &[T], n: usize, cf: usize, l: usize) -> Vec<T> {
    let mut g = vec![T::zero(); rows_grad.len()];
    for s in 0..n {
        for w in 0..l {
            for q in 0..cf {
                g[(s * cf + q) * l + w] = rows_grad[(s * l + w) * cf + q];
            }
        }
    }
    g
}

/// Cross-channel features of one frame, shape `[l, f_p]`.
pub fn cross_channel_features<T: Scalar>(bank: &WindowBank<T>, wf: &WindowedFrame<T>) -> Result<Vec<T>> {
    let width = wf.channels * wf.n_w;
    if bank.in_width() != width {
        return Err(Error::config(format!(
            "cross-channel filters read {} values but a window spans c * n_w = {width}",
            bank.in_width()
        )));
    }
    let rows = cross_channel_rows(&wf.data, 1, wf.channels, wf.windows, wf.n_w);
    bank.forward_rows(&rows, wf.windows).map(|(y, _)| y)
}

/// Level-2 features of one frame from its `[c, f, l]` level-1 tensor, shape `[l, f_2]`.
pub fn level2_features<T: Scalar>(bank: &WindowBank<T>, l1: &[T], c: usize, f: usize, l: usize) -> Result<Vec<T>> {
    if bank.in_width() != c * f {
        return Err(Error::config(format!(
            "level-2 filters read {} values but a window carries c * f = {}",
            bank.in_width(),
            c * f
        )));
    }
    if l1.len() != c * f * l {
        return Err(Error::config(format!("level-1 tensor has {} values, expected {c} x {f} x {l}", l1.len())));
    }
    let rows = level2_rows(l1, 1, c * f, l);
    bank.forward_rows(&rows, l).map(|(y, _)| y)
}
