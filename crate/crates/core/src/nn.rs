//! Conventional layers: affine maps, 1-D valid convolutions and rectifiers.
//!
//! Tensors are flat row-major `Vec`s. Every layer has an explicit backward
//! pass that accumulates into a gradient buffer laid out like its
//! [`Parameterized::params`] list.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Gradient buffers, one per parameter tensor, in `params()` order.
pub type Grads<T> = Vec<Vec<T>>;

#[derive(Debug, Clone)]
pub struct ParamView<'a, T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [T],
}

pub trait Parameterized<T: Scalar> {
    /// Every trainable tensor, in a fixed order.
    fn params(&self) -> Vec<ParamView<'_, T>>;

    fn params_mut(&mut self) -> Vec<&mut [T]>;

    /// Number of trainable scalars, computed from the layer shapes.
    fn param_count(&self) -> usize;

    fn zero_grads(&self) -> Grads<T> {
        self.params().iter().map(|p| vec![T::zero(); p.data.len()]).collect()
    }

    fn tensor_count(&self) -> usize {
        self.params().len()
    }
}

pub(crate) fn prefixed<'a, T>(prefix: &str, views: Vec<ParamView<'a, T>>) -> Vec<ParamView<'a, T>> {
    views
        .into_iter()
        .map(|mut v| {
            v.name = format!("{prefix}.{}", v.name);
            v
        })
        .collect()
}

/// Samples processed together per weight row, so the row stays in cache.
pub(crate) const SAMPLE_BLOCK: usize = 8;

/// `y += a * x`
#[inline]
pub(crate) fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with independent partial sums, so the loop vectorizes.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail += *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

fn uniform<T: Scalar, R: Rng + ?Sized>(rng: &mut R, bound: f64, len: usize) -> Vec<T> {
    (0..len).map(|_| T::from_f64_lossy(rng.random_range(-bound..bound))).collect()
}

/// Affine map `y = W x + b` with `W` stored `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    in_width: usize,
    out_width: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Linear<T> {
    /// Uniform init with bound `1/sqrt(in_width)` for weights and biases.
    pub fn new<R: Rng + ?Sized>(in_width: usize, out_width: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_width as f64).sqrt();
        Linear {
            in_width,
            out_width,
            weight: uniform(rng, bound, in_width * out_width),
            bias: uniform(rng, bound, out_width),
        }
    }

    pub fn zeros(in_width: usize, out_width: usize) -> Self {
        Linear {
            in_width,
            out_width,
            weight: vec![T::zero(); in_width * out_width],
            bias: vec![T::zero(); out_width],
        }
    }

    pub fn in_width(&self) -> usize {
        self.in_width
    }

    pub fn out_width(&self) -> usize {
        self.out_width
    }

    pub fn forward(&self, x: &[T], n: usize) -> Result<Vec<T>> {
        if x.len() != n * self.in_width {
            return Err(Error::config(format!(
                "linear input has {} values, expected {n} x {}",
                x.len(),
                self.in_width
            )));
        }
        let (iw, ow) = (self.in_width, self.out_width);
        let mut out = vec![T::zero(); n * ow];
        for s0 in (0..n).step_by(SAMPLE_BLOCK) {
            let s1 = (s0 + SAMPLE_BLOCK).min(n);
            for (o, (w, b)) in self.weight.chunks_exact(iw.max(1)).zip(&self.bias).enumerate() {
                for s in s0..s1 {
                    out[s * ow + o] = dot(w, &x[s * iw..(s + 1) * iw]) + *b;
                }
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients into `grads` (weight, bias) and, when
    /// requested, writes the input gradient into `dx`.
    pub fn backward(&self, x: &[T], upstream: &[T], grads: &mut [Vec<T>], mut dx: Option<&mut [T]>) {
        let (gw, rest) = grads.split_first_mut().expect("weight gradient buffer");
        let gb = &mut rest[0];
        if let Some(dx) = dx.as_deref_mut() {
            dx.iter_mut().for_each(|v| *v = T::zero());
        }
        let (iw, ow) = (self.in_width, self.out_width);
        let n = upstream.len() / ow.max(1);
        for s0 in (0..n).step_by(SAMPLE_BLOCK) {
            let s1 = (s0 + SAMPLE_BLOCK).min(n);
            for o in 0..ow {
                let gw_row = &mut gw[o * iw..(o + 1) * iw];
                let w_row = &self.weight[o * iw..(o + 1) * iw];
                for s in s0..s1 {
                    let go = upstream[s * ow + o];
                    if go == T::zero() {
                        continue;
                    }
                    gb[o] += go;
                    for (a, &xi) in gw_row.iter_mut().zip(&x[s * iw..(s + 1) * iw]) {
                        *a += go * xi;
                    }
                    if let Some(dx) = dx.as_deref_mut() {
                        for (d, &w) in dx[s * iw..(s + 1) * iw].iter_mut().zip(w_row) {
                            *d += go * w;
                        }
                    }
                }
            }
        }
    }
}

impl<T: Scalar> Parameterized<T> for Linear<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        vec![
            ParamView { name: "weight".into(), shape: vec![self.out_width, self.in_width], data: &self.weight },
            ParamView { name: "bias".into(), shape: vec![self.out_width], data: &self.bias },
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn param_count(&self) -> usize {
        self.in_width * self.out_width + self.out_width
    }
}

/// Kernel width shared by every convolution in the baselines.
pub const CONV_KERNEL: usize = 5;

/// Stride-1, unpadded 1-D convolution over `[N, in_channels, len]` input.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d<T> {
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    /// `[out, in, kernel]`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Conv1d<T> {
    pub fn new<R: Rng + ?Sized>(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut R) -> Self {
        let bound = 1.0 / ((in_channels * kernel) as f64).sqrt();
        Conv1d {
            in_channels,
            out_channels,
            kernel,
            weight: uniform(rng, bound, out_channels * in_channels * kernel),
            bias: uniform(rng, bound, out_channels),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn out_len(&self, len: usize) -> Option<usize> {
        (len >= self.kernel).then(|| len - self.kernel + 1)
    }

    pub fn forward(&self, x: &[T], n: usize, len: usize) -> Result<Vec<T>> {
        let out_len = self.out_len(len).ok_or_else(|| {
            Error::config(format!("temporal length {len} is shorter than conv kernel {}", self.kernel))
        })?;
        if x.len() != n * self.in_channels * len {
            return Err(Error::config(format!(
                "conv input has {} values, expected {n} x {} x {len}",
                x.len(),
                self.in_channels
            )));
        }
        let mut out = vec![T::zero(); n * self.out_channels * out_len];
        for s in 0..n {
            let xs = &x[s * self.in_channels * len..(s + 1) * self.in_channels * len];
            for o in 0..self.out_channels {
                let acc = &mut out[(s * self.out_channels + o) * out_len..(s * self.out_channels + o + 1) * out_len];
                acc.iter_mut().for_each(|v| *v = self.bias[o]);
                for i in 0..self.in_channels {
                    let xi = &xs[i * len..(i + 1) * len];
                    let w = &self.weight[(o * self.in_channels + i) * self.kernel..][..self.kernel];
                    for (k, &wk) in w.iter().enumerate() {
                        for (a, &xv) in acc.iter_mut().zip(&xi[k..k + out_len]) {
                            *a += wk * xv;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn backward(
        &self,
        x: &[T],
        n: usize,
        len: usize,
        upstream: &[T],
        grads: &mut [Vec<T>],
        mut dx: Option<&mut [T]>,
    ) {
        let out_len = len - self.kernel + 1;
        let (gw, rest) = grads.split_first_mut().expect("weight gradient buffer");
        let gb = &mut rest[0];
        if let Some(dx) = dx.as_deref_mut() {
            dx.iter_mut().for_each(|v| *v = T::zero());
        }
        for s in 0..n {
            let xs = &x[s * self.in_channels * len..(s + 1) * self.in_channels * len];
            for o in 0..self.out_channels {
                let g = &upstream[(s * self.out_channels + o) * out_len..][..out_len];
                gb[o] += g.iter().copied().sum::<T>();
                for i in 0..self.in_channels {
                    let xi = &xs[i * len..(i + 1) * len];
                    let base = (o * self.in_channels + i) * self.kernel;
                    for k in 0..self.kernel {
                        gw[base + k] += dot(g, &xi[k..k + out_len]);
                    }
                    if let Some(dx) = dx.as_deref_mut() {
                        let dxi = &mut dx[(s * self.in_channels + i) * len..][..len];
                        for k in 0..self.kernel {
                            let wk = self.weight[base + k];
                            for (d, &gv) in dxi[k..k + out_len].iter_mut().zip(g) {
                                *d += wk * gv;
                            }
                        }
                    }
                }
            }
        }
    }
}

impl<T: Scalar> Parameterized<T> for Conv1d<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        vec![
            ParamView {
                name: "weight".into(),
                shape: vec![self.out_channels, self.in_channels, self.kernel],
                data: &self.weight,
            },
            ParamView { name: "bias".into(), shape: vec![self.out_channels], data: &self.bias },
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn param_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel + self.out_channels
    }
}

pub fn relu_in_place<T: Scalar>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

/// Masks `grad` by the rectifier's active set, read off its output.
pub fn relu_backward_in_place<T: Scalar>(activated: &[T], grad: &mut [T]) {
    for (g, a) in grad.iter_mut().zip(activated) {
        if *a <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Conv layers, each followed by a rectifier; output is `[N, channels, len]`
/// and is consumed flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvStack<T> {
    layers: Vec<Conv1d<T>>,
    in_len: usize,
}

#[derive(Debug, Clone)]
pub struct ConvStackRecord<T> {
    n: usize,
    inputs: Vec<Vec<T>>,
    outputs: Vec<Vec<T>>,
}

impl<T: Scalar> ConvStack<T> {
    pub fn new<R: Rng + ?Sized>(in_channels: usize, in_len: usize, channels: &[usize], rng: &mut R) -> Result<Self> {
        let mut layers = Vec::with_capacity(channels.len());
        let mut c = in_channels;
        let mut len = in_len;
        for (idx, &out) in channels.iter().enumerate() {
            if out == 0 {
                return Err(Error::config(format!("conv layer {} has zero output channels", idx + 1)));
            }
            let conv = Conv1d::new(c, out, CONV_KERNEL, rng);
            len = conv.out_len(len).ok_or_else(|| {
                Error::config(format!(
                    "temporal length {len} at conv layer {} is shorter than kernel {CONV_KERNEL}",
                    idx + 1
                ))
            })?;
            layers.push(conv);
            c = out;
        }
        Ok(ConvStack { layers, in_len })
    }

    pub fn layers(&self) -> &[Conv1d<T>] {
        &self.layers
    }

    pub fn out_channels(&self) -> usize {
        self.layers.last().map(|l| l.out_channels()).unwrap_or(0)
    }

    pub fn out_len(&self) -> usize {
        self.in_len - self.layers.len() * (CONV_KERNEL - 1)
    }

    pub fn out_width(&self) -> usize {
        self.out_channels() * self.out_len()
    }

    pub fn forward(&self, x: &[T], n: usize) -> Result<(Vec<T>, ConvStackRecord<T>)> {
        let mut record = ConvStackRecord { n, inputs: Vec::new(), outputs: Vec::new() };
        let mut cur = x.to_vec();
        let mut len = self.in_len;
        for conv in &self.layers {
            let mut out = conv.forward(&cur, n, len)?;
            relu_in_place(&mut out);
            len -= CONV_KERNEL - 1;
            record.inputs.push(cur);
            cur = out.clone();
            record.outputs.push(out);
        }
        Ok((cur, record))
    }

    /// Returns the input gradient when `want_input` is set.
    pub fn backward(
        &self,
        record: &ConvStackRecord<T>,
        upstream: &[T],
        grads: &mut [Vec<T>],
        want_input: bool,
    ) -> Option<Vec<T>> {
        let mut g = upstream.to_vec();
        let mut len = self.out_len();
        for (idx, conv) in self.layers.iter().enumerate().rev() {
            relu_backward_in_place(&record.outputs[idx], &mut g);
            let in_len = len + CONV_KERNEL - 1;
            let need_dx = idx > 0 || want_input;
            let mut dx = if need_dx { vec![T::zero(); record.inputs[idx].len()] } else { Vec::new() };
            conv.backward(
                &record.inputs[idx],
                record.n,
                in_len,
                &g,
                &mut grads[2 * idx..2 * idx + 2],
                need_dx.then_some(dx.as_mut_slice()),
            );
            g = dx;
            len = in_len;
        }
        want_input.then_some(g)
    }
}

impl<T: Scalar> Parameterized<T> for ConvStack<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| prefixed(&format!("conv{i}"), l.params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }
}

/// Hidden widths of the classifier head.
pub const MLP_HIDDEN: [usize; 2] = [256, 128];

/// Three affine layers `in -> 256 -> 128 -> classes` with rectifiers between.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpHead<T> {
    pub layers: [Linear<T>; 3],
}

#[derive(Debug, Clone)]
pub struct MlpRecord<T> {
    input: Vec<T>,
    hidden: [Vec<T>; 2],
}

impl<T: Scalar> MlpHead<T> {
    pub fn new<R: Rng + ?Sized>(in_width: usize, classes: usize, rng: &mut R) -> Self {
        MlpHead {
            layers: [
                Linear::new(in_width, MLP_HIDDEN[0], rng),
                Linear::new(MLP_HIDDEN[0], MLP_HIDDEN[1], rng),
                Linear::new(MLP_HIDDEN[1], classes, rng),
            ],
        }
    }

    pub fn in_width(&self) -> usize {
        self.layers[0].in_width()
    }

    pub fn classes(&self) -> usize {
        self.layers[2].out_width()
    }

    pub fn forward(&self, x: &[T], n: usize) -> Result<(Vec<T>, MlpRecord<T>)> {
        let mut h1 = self.layers[0].forward(x, n)?;
        relu_in_place(&mut h1);
        let mut h2 = self.layers[1].forward(&h1, n)?;
        relu_in_place(&mut h2);
        let logits = self.layers[2].forward(&h2, n)?;
        Ok((logits, MlpRecord { input: x.to_vec(), hidden: [h1, h2] }))
    }

    /// Accumulates into six buffers (three weight/bias pairs) and returns the input gradient.
    pub fn backward(&self, record: &MlpRecord<T>, upstream: &[T], grads: &mut [Vec<T>]) -> Vec<T> {
        let [h1, h2] = &record.hidden;
        let mut g2 = vec![T::zero(); h2.len()];
        self.layers[2].backward(h2, upstream, &mut grads[4..6], Some(&mut g2));
        relu_backward_in_place(h2, &mut g2);
        let mut g1 = vec![T::zero(); h1.len()];
        self.layers[1].backward(h1, &g2, &mut grads[2..4], Some(&mut g1));
        relu_backward_in_place(h1, &mut g1);
        let mut g0 = vec![T::zero(); record.input.len()];
        self.layers[0].backward(&record.input, &g1, &mut grads[0..2], Some(&mut g0));
        g0
    }
}

impl<T: Scalar> Parameterized<T> for MlpHead<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| prefixed(&format!("linear{i}"), l.params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }
}
