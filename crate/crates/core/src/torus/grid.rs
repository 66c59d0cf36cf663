//! Tensor collocation grids and the FFTs between grid values and mode tables.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{FourierField, ModeIndexer};
use crate::error::{Error, Result};

/// Smallest `n ≥ target` whose only prime factors are 2, 3 and 5.
pub fn smooth_size(target: usize) -> usize {
    let mut n = target.max(1);
    loop {
        let mut r = n;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return n;
        }
        n += 1;
    }
}

/// Points per axis for evaluating a nonlinear flux of a bandlimit-`K` field
/// whose coefficient has bandlimit `K_a`: `M ≥ max(3K + 1, 2K + K_a + 1)`.
pub fn dealiased_size(bandlimit: i64, coefficient_bandlimit: i64) -> usize {
    let target = (3 * bandlimit + 1).max(2 * bandlimit + coefficient_bandlimit + 1).max(2 * bandlimit + 2);
    smooth_size(target as usize)
}

/// Uniform tensor grid `y_j = j / M` on `Yᵐ` with weights `1 / Mᵐ`.
#[derive(Clone)]
pub struct CollocationGrid {
    m: usize,
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CollocationGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CollocationGrid").field("m", &self.m).field("size", &self.size).finish()
    }
}

impl CollocationGrid {
    pub fn new(m: usize, size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { m, size, forward: planner.plan_fft_forward(size), inverse: planner.plan_fft_inverse(size) }
    }

    /// Grid following the dealiasing rule for a bandlimit-`K` unknown.
    pub fn for_bandlimit(m: usize, bandlimit: i64, coefficient_bandlimit: i64) -> Self {
        Self::new(m, dealiased_size(bandlimit, coefficient_bandlimit))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn node_count(&self) -> usize {
        self.size.pow(self.m as u32)
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.node_count() as f64
    }

    pub fn node(&self, mut j: usize) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        for d in (0..self.m).rev() {
            y[d] = (j % self.size) as f64 / self.size as f64;
            j /= self.size;
        }
        y
    }

    /// Apply a 1D transform along every axis of a row-major `Mᵐ` array.
    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.size;
        let total = data.len();
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for axis in 0..self.m {
            let stride = n.pow((self.m - 1 - axis) as u32);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    fft.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            let block = stride * n;
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for (t, v) in line.iter_mut().enumerate() {
                        *v = data[base + t * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (t, v) in line.iter().enumerate() {
                        data[base + t * stride] = *v;
                    }
                }
            }
        }
    }

    fn grid_offset(&self, k: &[i64]) -> usize {
        let n = self.size as i64;
        k.iter().fold(0usize, |acc, &v| acc * self.size + v.rem_euclid(n) as usize)
    }

    /// Values of every component at the grid nodes.
    pub fn to_grid(&self, field: &FourierField) -> Result<Vec<Vec<f64>>> {
        self.check(field.m(), field.bandlimit())?;
        let idx = field.indexer();
        let mut k = vec![0; self.m];
        let offsets: Vec<usize> = (0..idx.count())
            .map(|i| {
                idx.mode_into(i, &mut k);
                self.grid_offset(&k)
            })
            .collect();
        (0..field.value_dim())
            .map(|c| {
                let mut data = vec![Complex64::new(0.0, 0.0); self.node_count()];
                for (i, &o) in offsets.iter().enumerate() {
                    data[o] = field.component(c)[i];
                }
                self.transform(&mut data, &self.inverse);
                Ok(data.iter().map(|v| v.re).collect())
            })
            .collect()
    }

    /// Mode table of grid values truncated to `bandlimit` (aliased DFT
    /// coefficients, Hermitian part).
    pub fn from_grid(&self, values: &[Vec<f64>], bandlimit: i64) -> Result<FourierField> {
        self.check(self.m, bandlimit)?;
        let idx = ModeIndexer::new(self.m, bandlimit);
        let w = self.weight();
        let mut coeffs = Vec::with_capacity(idx.count() * values.len());
        let mut k = vec![0; self.m];
        for comp in values {
            if comp.len() != self.node_count() {
                return Err(Error::Dimension(format!("expected {} grid values, got {}", self.node_count(), comp.len())));
            }
            let mut data: Vec<Complex64> = comp.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            self.transform(&mut data, &self.forward);
            for i in 0..idx.count() {
                idx.mode_into(i, &mut k);
                coeffs.push(data[self.grid_offset(&k)] * w);
            }
        }
        FourierField::from_coeffs(self.m, bandlimit, values.len(), coeffs)
    }

    fn check(&self, m: usize, bandlimit: i64) -> Result<()> {
        if m != self.m {
            return Err(Error::Dimension(format!("grid on Y^{} used with a field on Y^{m}", self.m)));
        }
        if (self.size as i64) < 2 * bandlimit + 1 {
            return Err(Error::InvalidField(format!("grid of {} points cannot resolve bandlimit {bandlimit}", self.size)));
        }
        Ok(())
    }

    /// Trapezoidal mean of a scalar function over the grid.
    pub fn mean_of(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.node_count() {
            acc += f(&self.node(j));
        }
        acc * self.weight()
    }
}
