//! Uniform B-spline bases.
//!
//! A [`SplineGrid`] of `intervals` cells over `[range_lo, range_hi]` carries an
//! extended knot vector: `degree` additional knots continue the uniform
//! spacing on each side, so the grid holds `intervals + degree` basis
//! functions of the requested degree. Inputs outside the range are clamped to
//! it before evaluation; at a clamped point every basis derivative is zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Grid settings used when a layer is built without explicit ones.
pub const DEFAULT_DEGREE: usize = 3;
pub const DEFAULT_INTERVALS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub degree: usize,
    pub intervals: usize,
    pub range_lo: f64,
    pub range_hi: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { degree: DEFAULT_DEGREE, intervals: DEFAULT_INTERVALS, range_lo: 0.0, range_hi: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineGrid<T> {
    degree: usize,
    intervals: usize,
    range_lo: T,
    range_hi: T,
    step: T,
    knots: Vec<T>,
}

/// The `degree + 1` possibly nonzero basis values at one input.
///
/// `values[r]` and `derivs[r]` belong to global basis index `first + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBasis<T> {
    pub first: usize,
    pub values: Vec<T>,
    pub derivs: Vec<T>,
    pub clamped: bool,
}

impl<T: Scalar> SplineGrid<T> {
    pub fn new(degree: usize, intervals: usize, range_lo: T, range_hi: T) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::config("spline grid needs at least one interval"));
        }
        if !(range_lo < range_hi) || !range_lo.is_finite() || !range_hi.is_finite() {
            return Err(Error::config(format!(
                "spline grid range must satisfy lo < hi, got [{range_lo}, {range_hi}]"
            )));
        }
        let step = (range_hi - range_lo) / T::from_usize_lossy(intervals);
        let knots = (0..intervals + 2 * degree + 1)
            .map(|m| {
                let offset = m as i64 - degree as i64;
                range_lo + step * T::from_f64_lossy(offset as f64)
            })
            .collect();
        Ok(SplineGrid { degree, intervals, range_lo, range_hi, step, knots })
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        Self::new(
            spec.degree,
            spec.intervals,
            T::from_f64_lossy(spec.range_lo),
            T::from_f64_lossy(spec.range_hi),
        )
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            degree: self.degree,
            intervals: self.intervals,
            range_lo: self.range_lo.to_f64_lossy(),
            range_hi: self.range_hi.to_f64_lossy(),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn range(&self) -> (T, T) {
        (self.range_lo, self.range_hi)
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    /// Number of basis functions, `intervals + degree`.
    pub fn basis_len(&self) -> usize {
        self.intervals + self.degree
    }

    /// Clamps `x` into the grid range; the flag reports whether it moved.
    pub fn clamp(&self, x: T) -> (T, bool) {
        if x < self.range_lo {
            (self.range_lo, true)
        } else if x > self.range_hi {
            (self.range_hi, true)
        } else {
            (x, false)
        }
    }

    /// Knot span index `i` with `knots[i] <= x < knots[i + 1]`, restricted to
    /// the cells inside the range. `x` must already be clamped.
    fn span(&self, x: T) -> usize {
        let cell = ((x - self.range_lo) / self.step).floor().to_usize().unwrap_or(0);
        self.degree + cell.min(self.intervals - 1)
    }

    /// Nonzero basis values and derivatives at `x` (triangular de Boor scheme).
    pub fn local_basis(&self, x: T) -> LocalBasis<T> {
        let mut out = LocalBasis {
            first: 0,
            values: vec![T::zero(); self.degree + 1],
            derivs: vec![T::zero(); self.degree + 1],
            clamped: false,
        };
        self.local_basis_into(x, &mut out.values, &mut out.derivs, &mut out.first, &mut out.clamped);
        out
    }

    /// Allocation-free variant of [`local_basis`](Self::local_basis). `values`
    /// and `derivs` must have length `degree + 1`.
    pub fn local_basis_into(
        &self,
        x: T,
        values: &mut [T],
        derivs: &mut [T],
        first: &mut usize,
        clamped: &mut bool,
    ) {
        let p = self.degree;
        let (x, was_clamped) = self.clamp(x);
        let span = self.span(x);
        *first = span - p;
        *clamped = was_clamped;

        // Scratch for the triangular recursion; degrees beyond 15 are not used by any layer.
        let mut left = [T::zero(); 16];
        let mut right = [T::zero(); 16];
        let mut lower = [T::zero(); 16];
        assert!(p < 16, "spline degree {p} is not supported");

        values[0] = T::one();
        for j in 1..=p {
            if j == p {
                lower[..p].copy_from_slice(&values[..p]);
            }
            left[j] = x - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - x;
            let mut saved = T::zero();
            for r in 0..j {
                let temp = values[r] / (right[r + 1] + left[j - r]);
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }

        if p == 0 || was_clamped {
            derivs.iter_mut().for_each(|d| *d = T::zero());
            return;
        }
        // d/dx B_{k,p} = p/(t_{k+p}-t_k) B_{k,p-1} - p/(t_{k+p+1}-t_{k+1}) B_{k+1,p-1}
        let pf = T::from_usize_lossy(p);
        for r in 0..=p {
            let k = *first + r;
            let mut d = T::zero();
            if r >= 1 {
                d += pf * lower[r - 1] / (self.knots[k + p] - self.knots[k]);
            }
            if r < p {
                d -= pf * lower[r] / (self.knots[k + p + 1] - self.knots[k + 1]);
            }
            derivs[r] = d;
        }
    }

    /// All `intervals + degree` basis values at `x`.
    pub fn basis_values(&self, x: T) -> Vec<T> {
        let local = self.local_basis(x);
        let mut out = vec![T::zero(); self.basis_len()];
        for (r, v) in local.values.iter().enumerate() {
            out[local.first + r] = *v;
        }
        out
    }

    /// All `intervals + degree` basis derivatives at `x`; zero outside the range.
    pub fn basis_derivatives(&self, x: T) -> Vec<T> {
        let local = self.local_basis(x);
        let mut out = vec![T::zero(); self.basis_len()];
        for (r, v) in local.derivs.iter().enumerate() {
            out[local.first + r] = *v;
        }
        out
    }
}
