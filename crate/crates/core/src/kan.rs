//! Kolmogorov-Arnold layers and filters.
//!
//! A [`KanLayer`] connects every input to every output through its own
//! learnable univariate edge function
//!
//! ```text
//! phi(x) = base_weight * silu(x) + spline_scale * sum_k coeff_k * B_k(x)
//! ```
//!
//! and each output node is the plain sum of its incoming edges. A
//! [`KanFilter`] stacks layers into an `n_w -> 2 n_w + 1 -> 1` network by
//! default, the two-level form of the Kolmogorov-Arnold representation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{axpy, dot, prefixed, ParamView, Parameterized, SAMPLE_BLOCK};
use crate::scalar::Scalar;
use crate::spline::{GridSpec, SplineGrid};

/// `x / (1 + exp(-x))` and its derivative.
#[inline]
pub fn silu<T: Scalar>(x: T) -> (T, T) {
    let s = T::one() / (T::one() + (-x).exp());
    (x * s, s * (T::one() + x * (T::one() - s)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KanLayerSpec {
    pub in_width: usize,
    pub out_width: usize,
    pub grid: GridSpec,
    /// Keep the `base_weight * silu(x)` residual path on every edge.
    pub residual: bool,
}

impl KanLayerSpec {
    pub fn new(in_width: usize, out_width: usize) -> Self {
        KanLayerSpec { in_width, out_width, grid: GridSpec::default(), residual: true }
    }

    /// Trainable scalars per edge: the spline coefficients, the spline scale
    /// and (with the residual path) the base weight.
    pub fn params_per_edge(&self) -> usize {
        self.grid.intervals + self.grid.degree + 1 + usize::from(self.residual)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KanLayer<T> {
    in_width: usize,
    out_width: usize,
    residual: bool,
    grid: SplineGrid<T>,
    /// `[out, in, basis_len]`
    pub coeffs: Vec<T>,
    /// `[out, in]`; empty when the residual path is disabled.
    pub base_weight: Vec<T>,
    /// `[out, in]`
    pub spline_scale: Vec<T>,
}

/// Everything backward needs from one forward call.
#[derive(Debug, Clone)]
pub struct KanRecord<T> {
    n: usize,
    in_width: usize,
    /// Basis values `[n, in_width, basis_len]`, zero outside each local span.
    basis: Vec<T>,
    dbasis: Vec<T>,
    silu: Vec<T>,
    dsilu: Vec<T>,
}

impl<T> KanRecord<T> {
    pub fn batch_len(&self) -> usize {
        self.n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KanLayerGrads<T> {
    pub coeffs: Vec<T>,
    /// Empty when the residual path is disabled.
    pub base_weight: Vec<T>,
    pub spline_scale: Vec<T>,
    /// `[N, in_width]`
    pub input: Vec<T>,
}

impl<T: Scalar> KanLayer<T> {
    /// Zero-valued layer: every edge computes the zero function.
    pub fn zeros(spec: &KanLayerSpec) -> Result<Self> {
        if spec.in_width == 0 || spec.out_width == 0 {
            return Err(Error::config(format!(
                "KAN layer widths must be positive, got {} -> {}",
                spec.in_width, spec.out_width
            )));
        }
        let grid = SplineGrid::from_spec(&spec.grid)?;
        let edges = spec.in_width * spec.out_width;
        Ok(KanLayer {
            in_width: spec.in_width,
            out_width: spec.out_width,
            residual: spec.residual,
            coeffs: vec![T::zero(); edges * grid.basis_len()],
            base_weight: if spec.residual { vec![T::zero(); edges] } else { Vec::new() },
            spline_scale: vec![T::zero(); edges],
            grid,
        })
    }

    /// Coefficients ~ Normal(0, 0.1 / basis_len), base weights ~ U(-a, a) with
    /// `a = sqrt(6 / in_width)`, spline scales 1.
    pub fn init_with<R: Rng + ?Sized>(spec: &KanLayerSpec, rng: &mut R) -> Result<Self> {
        let mut layer = Self::zeros(spec)?;
        let std = 0.1 / layer.grid.basis_len() as f64;
        let normal = Normal::new(0.0, std).map_err(|e| Error::config(e.to_string()))?;
        for c in &mut layer.coeffs {
            *c = T::from_f64_lossy(normal.sample(rng));
        }
        let bound = (6.0 / spec.in_width as f64).sqrt();
        for w in &mut layer.base_weight {
            *w = T::from_f64_lossy(rng.random_range(-bound..bound));
        }
        layer.spline_scale.iter_mut().for_each(|s| *s = T::one());
        Ok(layer)
    }

    pub fn init(spec: &KanLayerSpec, seed: u64) -> Result<Self> {
        Self::init_with(spec, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn spec(&self) -> KanLayerSpec {
        KanLayerSpec {
            in_width: self.in_width,
            out_width: self.out_width,
            grid: self.grid.spec(),
            residual: self.residual,
        }
    }

    pub fn in_width(&self) -> usize {
        self.in_width
    }

    pub fn out_width(&self) -> usize {
        self.out_width
    }

    pub fn grid(&self) -> &SplineGrid<T> {
        &self.grid
    }

    pub fn residual(&self) -> bool {
        self.residual
    }

    fn order(&self) -> usize {
        self.grid.degree() + 1
    }

    /// `out[n, i] = sum_j phi_ij(x[n, j])` for a row-major `[n, in_width]` batch.
    pub fn forward(&self, x: &[T], n: usize) -> Result<(Vec<T>, KanRecord<T>)> {
        if x.len() != n * self.in_width {
            return Err(Error::config(format!(
                "KAN layer input has {} values, expected {n} x {}",
                x.len(),
                self.in_width
            )));
        }
        let q = self.order();
        let nb = self.grid.basis_len();
        let (iw, ow) = (self.in_width, self.out_width);
        let cells = n * iw;
        let mut rec = KanRecord {
            n,
            in_width: iw,
            basis: vec![T::zero(); cells * nb],
            dbasis: vec![T::zero(); cells * nb],
            silu: if self.residual { vec![T::zero(); cells] } else { Vec::new() },
            dsilu: if self.residual { vec![T::zero(); cells] } else { Vec::new() },
        };
        let (mut vals, mut ders) = (vec![T::zero(); q], vec![T::zero(); q]);
        let (mut first, mut clamped) = (0, false);
        for (cell, &v) in x.iter().enumerate() {
            self.grid.local_basis_into(v, &mut vals, &mut ders, &mut first, &mut clamped);
            rec.basis[cell * nb + first..][..q].copy_from_slice(&vals);
            rec.dbasis[cell * nb + first..][..q].copy_from_slice(&ders);
            if self.residual {
                let (a, d) = silu(v);
                rec.silu[cell] = a;
                rec.dsilu[cell] = d;
            }
        }

        // every output is a dot product of scaled coefficients with the
        // expanded basis row, plus the residual term
        let eff = self.scaled_coeffs();
        let row = iw * nb;
        let mut out = vec![T::zero(); n * ow];
        for s0 in (0..n).step_by(SAMPLE_BLOCK) {
            let s1 = (s0 + SAMPLE_BLOCK).min(n);
            for o in 0..ow {
                let c = &eff[o * row..(o + 1) * row];
                for s in s0..s1 {
                    let mut acc = dot(c, &rec.basis[s * row..(s + 1) * row]);
                    if self.residual {
                        acc += dot(&self.base_weight[o * iw..(o + 1) * iw], &rec.silu[s * iw..(s + 1) * iw]);
                    }
                    out[s * ow + o] = acc;
                }
            }
        }
        Ok((out, rec))
    }

    /// `spline_scale[o, j] * coeffs[o, j, :]`, laid out like `coeffs`.
    fn scaled_coeffs(&self) -> Vec<T> {
        let nb = self.grid.basis_len();
        let mut eff = self.coeffs.clone();
        for (chunk, &sc) in eff.chunks_exact_mut(nb).zip(&self.spline_scale) {
            chunk.iter_mut().for_each(|c| *c *= sc);
        }
        eff
    }

    /// Accumulates parameter gradients into `grads` (in `params()` order) and
    /// writes the input gradient into `dx` when given.
    pub fn backward_into(&self, rec: &KanRecord<T>, upstream: &[T], grads: &mut [Vec<T>], dx: Option<&mut [T]>) {
        let nb = self.grid.basis_len();
        let (iw, ow, n) = (self.in_width, self.out_width, rec.n);
        let row = iw * nb;
        let (g_coeffs, rest) = grads.split_first_mut().expect("coefficient gradient buffer");
        let (mut g_base, g_scale) = if self.residual {
            let (b, s) = rest.split_at_mut(1);
            (Some(&mut b[0]), &mut s[0])
        } else {
            (None, &mut rest[0])
        };
        let want_dx = dx.is_some();
        let eff = if want_dx { self.scaled_coeffs() } else { Vec::new() };
        // gradients w.r.t. the scaled coefficients, the expanded basis and the silu terms
        let mut g_eff = vec![T::zero(); ow * row];
        let mut d_basis = if want_dx { vec![T::zero(); n * row] } else { Vec::new() };
        let mut d_silu = if want_dx && self.residual { vec![T::zero(); n * iw] } else { Vec::new() };
        for s0 in (0..n).step_by(SAMPLE_BLOCK) {
            let s1 = (s0 + SAMPLE_BLOCK).min(n);
            for o in 0..ow {
                for s in s0..s1 {
                    let go = upstream[s * ow + o];
                    if go == T::zero() {
                        continue;
                    }
                    axpy(go, &rec.basis[s * row..(s + 1) * row], &mut g_eff[o * row..(o + 1) * row]);
                    if let Some(gb) = g_base.as_deref_mut() {
                        axpy(go, &rec.silu[s * iw..(s + 1) * iw], &mut gb[o * iw..(o + 1) * iw]);
                    }
                    if want_dx {
                        axpy(go, &eff[o * row..(o + 1) * row], &mut d_basis[s * row..(s + 1) * row]);
                        if self.residual {
                            axpy(go, &self.base_weight[o * iw..(o + 1) * iw], &mut d_silu[s * iw..(s + 1) * iw]);
                        }
                    }
                }
            }
        }
        for (edge, ge) in g_eff.chunks_exact(nb).enumerate() {
            let scale = self.spline_scale[edge];
            let c = &self.coeffs[edge * nb..(edge + 1) * nb];
            g_scale[edge] += dot(c, ge);
            axpy(scale, ge, &mut g_coeffs[edge * nb..(edge + 1) * nb]);
        }
        if let Some(dx) = dx {
            for (cell, d) in dx.iter_mut().enumerate() {
                *d = dot(&d_basis[cell * nb..(cell + 1) * nb], &rec.dbasis[cell * nb..(cell + 1) * nb]);
                if self.residual {
                    *d += d_silu[cell] * rec.dsilu[cell];
                }
            }
        }
    }

    pub fn backward(&self, rec: &KanRecord<T>, upstream: &[T]) -> Result<KanLayerGrads<T>> {
        if rec.in_width != self.in_width || upstream.len() != rec.n * self.out_width {
            return Err(Error::config(format!(
                "KAN backward: upstream has {} values for a record of {} rows x {} outputs",
                upstream.len(),
                rec.n,
                self.out_width
            )));
        }
        let mut grads = self.zero_grads();
        let mut input = vec![T::zero(); rec.n * self.in_width];
        self.backward_into(rec, upstream, &mut grads, Some(&mut input));
        let spline_scale = grads.pop().unwrap_or_default();
        let base_weight = if self.residual { grads.pop().unwrap_or_default() } else { Vec::new() };
        let coeffs = grads.pop().unwrap_or_default();
        Ok(KanLayerGrads { coeffs, base_weight, spline_scale, input })
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().chain(&self.base_weight).chain(&self.spline_scale).all(|v| v.is_finite())
    }
}

impl<T: Scalar> Parameterized<T> for KanLayer<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        let mut v = vec![ParamView {
            name: "coeffs".into(),
            shape: vec![self.out_width, self.in_width, self.grid.basis_len()],
            data: &self.coeffs,
        }];
        if self.residual {
            v.push(ParamView {
                name: "base_weight".into(),
                shape: vec![self.out_width, self.in_width],
                data: &self.base_weight,
            });
        }
        v.push(ParamView {
            name: "spline_scale".into(),
            shape: vec![self.out_width, self.in_width],
            data: &self.spline_scale,
        });
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut v: Vec<&mut [T]> = vec![&mut self.coeffs];
        if self.residual {
            v.push(&mut self.base_weight);
        }
        v.push(&mut self.spline_scale);
        v
    }

    fn param_count(&self) -> usize {
        self.out_width * self.in_width * self.spec().params_per_edge()
    }
}

/// Depth of a [`KanFilter`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FilterShape {
    /// `n -> 2n + 1 -> 1`
    #[default]
    TwoLayer,
    /// `n -> 1`
    SingleLayer,
}

impl FilterShape {
    pub fn widths(self, in_width: usize) -> Vec<usize> {
        match self {
            FilterShape::TwoLayer => vec![in_width, 2 * in_width + 1, 1],
            FilterShape::SingleLayer => vec![in_width, 1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub in_width: usize,
    pub shape: FilterShape,
    pub grid: GridSpec,
    pub residual: bool,
}

impl FilterSpec {
    pub fn new(in_width: usize) -> Self {
        FilterSpec { in_width, shape: FilterShape::TwoLayer, grid: GridSpec::default(), residual: true }
    }

    pub fn layer_specs(&self) -> Vec<KanLayerSpec> {
        self.shape
            .widths(self.in_width)
            .windows(2)
            .map(|w| KanLayerSpec { in_width: w[0], out_width: w[1], grid: self.grid, residual: self.residual })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_specs().iter().map(|s| s.in_width * s.out_width * s.params_per_edge()).sum()
    }
}

/// A small KAN with `in_width` inputs and a single output.
#[derive(Debug, Clone, PartialEq)]
pub struct KanFilter<T> {
    layers: Vec<KanLayer<T>>,
}

#[derive(Debug, Clone)]
pub struct FilterRecord<T> {
    layers: Vec<KanRecord<T>>,
}

impl<T: Scalar> KanFilter<T> {
    pub fn init_with<R: Rng + ?Sized>(spec: &FilterSpec, rng: &mut R) -> Result<Self> {
        let layers = spec
            .layer_specs()
            .iter()
            .map(|s| KanLayer::init_with(s, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(KanFilter { layers })
    }

    pub fn zeros(spec: &FilterSpec) -> Result<Self> {
        let layers = spec.layer_specs().iter().map(KanLayer::zeros).collect::<Result<Vec<_>>>()?;
        Ok(KanFilter { layers })
    }

    pub fn from_layers(layers: Vec<KanLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("KAN filter needs at least one layer"));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_width() != w[1].in_width() {
                return Err(Error::config(format!(
                    "KAN filter layer {i} outputs {} values but layer {} expects {}",
                    w[0].out_width(),
                    i + 1,
                    w[1].in_width()
                )));
            }
        }
        let last = layers.last().map(|l| l.out_width()).unwrap_or(0);
        if last != 1 {
            return Err(Error::config(format!("KAN filter must end in one output, got {last}")));
        }
        Ok(KanFilter { layers })
    }

    pub fn layers(&self) -> &[KanLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [KanLayer<T>] {
        &mut self.layers
    }

    pub fn in_width(&self) -> usize {
        self.layers[0].in_width()
    }

    /// Evaluates `m` rows of `in_width` inputs; returns one value per row.
    pub fn forward(&self, x: &[T], m: usize) -> Result<(Vec<T>, FilterRecord<T>)> {
        let mut records = Vec::with_capacity(self.layers.len());
        let mut cur: Option<Vec<T>> = None;
        for layer in &self.layers {
            let input = cur.as_deref().unwrap_or(x);
            let (out, rec) = layer.forward(input, m)?;
            records.push(rec);
            cur = Some(out);
        }
        Ok((cur.unwrap_or_default(), FilterRecord { layers: records }))
    }

    pub fn eval(&self, x: &[T], m: usize) -> Result<Vec<T>> {
        self.forward(x, m).map(|(y, _)| y)
    }

    /// Accumulates into `grads` (this filter's tensors only); `dx` receives the input gradient.
    pub fn backward_into(&self, rec: &FilterRecord<T>, upstream: &[T], grads: &mut [Vec<T>], dx: Option<&mut [T]>) {
        let mut offsets = Vec::with_capacity(self.layers.len() + 1);
        let mut acc = 0;
        for l in &self.layers {
            offsets.push(acc);
            acc += l.tensor_count();
        }
        offsets.push(acc);

        let mut g = upstream.to_vec();
        let mut dx = dx;
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let slots = &mut grads[offsets[idx]..offsets[idx + 1]];
            let r = &rec.layers[idx];
            if idx > 0 {
                let mut next = vec![T::zero(); r.n * layer.in_width()];
                layer.backward_into(r, &g, slots, Some(&mut next));
                g = next;
            } else {
                layer.backward_into(r, &g, slots, dx.take());
            }
        }
    }
}

impl<T: Scalar> Parameterized<T> for KanFilter<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| prefixed(&format!("layer{i}"), l.params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(i: usize, o: usize) -> KanLayerSpec {
        KanLayerSpec::new(i, o)
    }

    /// Per-edge scalar evaluation, independent of the batched path.
    /// Textbook recursion on the uniform extended knot vector of G=5, degree 3 over [0, 1].
    fn basis_oracle(k: usize, p: usize, x: f64) -> f64 {
        let t = |i: usize| (i as f64 - 3.0) * 0.2;
        if p == 0 {
            return if t(k) <= x && x < t(k + 1) { 1.0 } else { 0.0 };
        }
        (x - t(k)) / (t(k + p) - t(k)) * basis_oracle(k, p - 1, x)
            + (t(k + p + 1) - x) / (t(k + p + 1) - t(k + 1)) * basis_oracle(k + 1, p - 1, x)
    }

    fn oracle(layer: &KanLayer<f64>, x: &[f64]) -> Vec<f64> {
        (0..layer.out_width())
            .map(|o| {
                let mut acc = 0.0;
                for (j, &xj) in x.iter().enumerate() {
                    let e = o * layer.in_width() + j;
                    let spline: f64 = (0..8).map(|k| layer.coeffs[e * 8 + k] * basis_oracle(k, 3, xj)).sum();
                    acc += layer.spline_scale[e] * spline + layer.base_weight[e] * xj / (1.0 + (-xj).exp());
                }
                acc
            })
            .collect()
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let layer = KanLayer::<f64>::zeros(&spec(3, 2)).unwrap();
        let (y, _) = layer.forward(&[0.2, 0.9, -1.5], 1).unwrap();
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn unit_coefficients_reproduce_one() {
        let mut layer = KanLayer::<f64>::zeros(&spec(1, 1)).unwrap();
        layer.coeffs.iter_mut().for_each(|c| *c = 1.0);
        layer.spline_scale[0] = 1.0;
        let xs: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        let (y, _) = layer.forward(&xs, xs.len()).unwrap();
        assert!(y.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn forward_matches_scalar_oracle() {
        let layer = KanLayer::<f64>::init(&spec(2, 1), 11).unwrap();
        let (y, _) = layer.forward(&[0.3, 0.7], 1).unwrap();
        let e = oracle(&layer, &[0.3, 0.7]);
        assert!((y[0] - e[0]).abs() < 1e-10);
    }

    #[test]
    fn shape_mismatch_is_config_error() {
        let layer = KanLayer::<f64>::init(&spec(2, 1), 1).unwrap();
        assert!(matches!(layer.forward(&[0.1, 0.2, 0.3], 1), Err(Error::Config(_))));
        let (_, rec) = layer.forward(&[0.1, 0.2], 1).unwrap();
        assert!(matches!(layer.backward(&rec, &[1.0, 2.0]), Err(Error::Config(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let layer = KanLayer::<f64>::init(&spec(3, 2), 5).unwrap();
        let (_, rec) = layer.forward(&[0.1, 0.5, 0.9, 0.3, 0.2, 0.8], 2).unwrap();
        let g = layer.backward(&rec, &[0.0; 4]).unwrap();
        for v in g.coeffs.iter().chain(&g.base_weight).chain(&g.spline_scale).chain(&g.input) {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn coefficient_gradient_is_upstream_times_basis() {
        let mut layer = KanLayer::<f64>::init(&spec(1, 1), 3).unwrap();
        layer.base_weight[0] = 0.0;
        layer.spline_scale[0] = 1.0;
        let (_, rec) = layer.forward(&[0.43], 1).unwrap();
        let g = layer.backward(&rec, &[1.7]).unwrap();
        let b = layer.grid().basis_values(0.43);
        for k in 0..8 {
            assert!((g.coeffs[k] - 1.7 * b[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn clamped_inputs_get_no_spline_gradient() {
        let mut layer = KanLayer::<f64>::init(&spec(1, 1), 3).unwrap();
        layer.base_weight[0] = 0.0;
        let (_, rec) = layer.forward(&[1.4], 1).unwrap();
        let g = layer.backward(&rec, &[1.0]).unwrap();
        assert_eq!(g.input[0], 0.0);
    }

    #[test]
    fn init_is_deterministic_and_seed_dependent() {
        let a = KanLayer::<f64>::init(&spec(4, 3), 42).unwrap();
        let b = KanLayer::<f64>::init(&spec(4, 3), 42).unwrap();
        let c = KanLayer::<f64>::init(&spec(4, 3), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.coeffs, c.coeffs);
        assert!(a.spline_scale.iter().all(|s| *s == 1.0));
        let bound = (6.0f64 / 4.0).sqrt();
        assert!(a.base_weight.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn parameter_counts() {
        let l = KanLayer::<f64>::init(&spec(1, 1), 0).unwrap();
        assert_eq!(l.param_count(), 10);
        let l = KanLayer::<f64>::init(&spec(10, 21), 0).unwrap();
        assert_eq!(l.param_count(), 2100);
        assert_eq!(l.params().iter().map(|p| p.data.len()).sum::<usize>(), 2100);
        let f = KanFilter::<f64>::init_with(&FilterSpec::new(10), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(f.param_count(), 2310);
        assert_eq!(FilterSpec::new(10).param_count(), 2310);
        assert_eq!(f.params().iter().map(|p| p.data.len()).sum::<usize>(), 2310);
    }

    #[test]
    fn residual_path_can_be_disabled() {
        let mut s = spec(2, 3);
        s.residual = false;
        let l = KanLayer::<f64>::init(&s, 1).unwrap();
        assert_eq!(l.param_count(), 2 * 3 * 9);
        assert_eq!(l.params().len(), 2);
        let (_, rec) = l.forward(&[0.2, 0.4], 1).unwrap();
        let g = l.backward(&rec, &[1.0, 1.0, 1.0]).unwrap();
        assert!(g.base_weight.is_empty());
    }

    #[test]
    fn single_layer_filter_shape() {
        let mut fs = FilterSpec::new(10);
        fs.shape = FilterShape::SingleLayer;
        let f = KanFilter::<f64>::zeros(&fs).unwrap();
        assert_eq!(f.layers().len(), 1);
        assert_eq!(f.param_count(), 100);
    }

    #[test]
    fn filter_rejects_inconsistent_layers() {
        let a = KanLayer::<f64>::zeros(&spec(3, 4)).unwrap();
        let b = KanLayer::<f64>::zeros(&spec(5, 1)).unwrap();
        assert!(KanFilter::from_layers(vec![a.clone(), b]).is_err());
        assert!(KanFilter::from_layers(vec![a]).is_err());
    }
}
