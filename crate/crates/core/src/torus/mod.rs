//! Bandlimited real fields on the torus `Yᵐ = [0, 1)ᵐ`.
//!
//! A [`FourierField`] stores the full Hermitian-symmetric coefficient table
//! `û_k`, `|k|∞ ≤ K`, for each value component. Mode tables are row-major
//! with offsets `k_d + K`, which makes `-k` sit at `count − 1 − idx`.

pub mod grid;
pub mod ops;
pub mod spectrum;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use grid::CollocationGrid;
pub use ops::{
    div_r, ergodic_average, ergodic_bound, grad_r, green_identity_residual, slice_sample,
    slice_sample_direct, torus_mean, xp_split, GreenResidual, ModeClass, XpReport,
};
pub use spectrum::{FieldSpec, SpectrumJson, TrigKind, TrigTerm};

/// Enumerates the modes `|k|∞ ≤ K` of an m-dimensional torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModeIndexer {
    m: usize,
    bandlimit: i64,
    side: usize,
    count: usize,
}

impl ModeIndexer {
    pub fn new(m: usize, bandlimit: i64) -> Self {
        let side = (2 * bandlimit + 1) as usize;
        Self { m, bandlimit, side, count: side.pow(m as u32) }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn bandlimit(&self) -> i64 {
        self.bandlimit
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Index of `k = 0`.
    pub fn zero(&self) -> usize {
        (self.count - 1) / 2
    }

    #[inline]
    pub fn neg(&self, idx: usize) -> usize {
        self.count - 1 - idx
    }

    pub fn contains(&self, k: &[i64]) -> bool {
        k.len() == self.m && k.iter().all(|v| v.abs() <= self.bandlimit)
    }

    pub fn index(&self, k: &[i64]) -> usize {
        debug_assert!(self.contains(k));
        k.iter().fold(0usize, |acc, &v| acc * self.side + (v + self.bandlimit) as usize)
    }

    pub fn mode_into(&self, mut idx: usize, out: &mut [i64]) {
        for d in (0..self.m).rev() {
            out[d] = (idx % self.side) as i64 - self.bandlimit;
            idx /= self.side;
        }
    }

    pub fn mode(&self, idx: usize) -> Vec<i64> {
        let mut k = vec![0; self.m];
        self.mode_into(idx, &mut k);
        k
    }

    pub fn modes(&self) -> impl Iterator<Item = (usize, Vec<i64>)> + '_ {
        (0..self.count).map(move |i| (i, self.mode(i)))
    }
}

/// A real-valued bandlimited field with `value_dim` components.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierField {
    idx: ModeIndexer,
    value_dim: usize,
    /// Component-major: `coeffs[c * count + idx]`.
    coeffs: Vec<Complex64>,
}

impl FourierField {
    pub fn zeros(m: usize, bandlimit: i64, value_dim: usize) -> Self {
        let idx = ModeIndexer::new(m, bandlimit);
        Self { idx, value_dim, coeffs: vec![Complex64::new(0.0, 0.0); idx.count * value_dim] }
    }

    pub fn constant(m: usize, bandlimit: i64, value: &[f64]) -> Self {
        let mut f = Self::zeros(m, bandlimit, value.len());
        let z = f.idx.zero();
        for (c, &v) in value.iter().enumerate() {
            f.coeffs[c * f.idx.count + z] = Complex64::new(v, 0.0);
        }
        f
    }

    /// Build from a raw table; the Hermitian part is kept.
    pub fn from_coeffs(m: usize, bandlimit: i64, value_dim: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        let idx = ModeIndexer::new(m, bandlimit);
        if coeffs.len() != idx.count * value_dim {
            return Err(Error::InvalidField(format!(
                "expected {} coefficients, got {}",
                idx.count * value_dim,
                coeffs.len()
            )));
        }
        let mut f = Self { idx, value_dim, coeffs };
        f.symmetrize();
        Ok(f)
    }

    /// Project onto the Hermitian-symmetric (real-valued) subspace.
    pub fn symmetrize(&mut self) {
        let count = self.idx.count;
        for c in 0..self.value_dim {
            let block = &mut self.coeffs[c * count..(c + 1) * count];
            for i in 0..=self.idx.zero() {
                let j = count - 1 - i;
                let s = (block[i] + block[j].conj()) * 0.5;
                block[i] = s;
                block[j] = s.conj();
            }
        }
    }

    pub fn indexer(&self) -> &ModeIndexer {
        &self.idx
    }

    pub fn m(&self) -> usize {
        self.idx.m
    }

    pub fn bandlimit(&self) -> i64 {
        self.idx.bandlimit
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    pub fn mode_count(&self) -> usize {
        self.idx.count
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.coeffs[c * self.idx.count..(c + 1) * self.idx.count]
    }

    pub fn coeff(&self, k: &[i64], c: usize) -> Complex64 {
        if !self.idx.contains(k) {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[c * self.idx.count + self.idx.index(k)]
    }

    /// Set `û_k` and its mirror `û_{-k} = conj(û_k)`; at `k = 0` only the
    /// real part is kept.
    pub fn set_mode(&mut self, k: &[i64], c: usize, value: Complex64) -> Result<()> {
        if !self.idx.contains(k) {
            return Err(Error::InvalidField(format!("mode {k:?} outside bandlimit {}", self.idx.bandlimit)));
        }
        if c >= self.value_dim {
            return Err(Error::Dimension(format!("component {c} of a {}-vector field", self.value_dim)));
        }
        let i = self.idx.index(k);
        let j = self.idx.neg(i);
        let base = c * self.idx.count;
        if i == j {
            self.coeffs[base + i] = Complex64::new(value.re, 0.0);
        } else {
            self.coeffs[base + i] = value;
            self.coeffs[base + j] = value.conj();
        }
        Ok(())
    }

    /// Copy into a table with a different bandlimit (zero-padding or
    /// truncation).
    pub fn with_bandlimit(&self, bandlimit: i64) -> Self {
        let mut out = Self::zeros(self.idx.m, bandlimit, self.value_dim);
        let common = bandlimit.min(self.idx.bandlimit);
        let sub = ModeIndexer::new(self.idx.m, common);
        let mut k = vec![0; self.idx.m];
        for s in 0..sub.count {
            sub.mode_into(s, &mut k);
            let (i, o) = (self.idx.index(&k), out.idx.index(&k));
            for c in 0..self.value_dim {
                out.coeffs[c * out.idx.count + o] = self.coeffs[c * self.idx.count + i];
            }
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        self.coeffs.iter_mut().for_each(|v| *v *= s);
    }

    pub fn add_assign(&mut self, other: &FourierField) -> Result<()> {
        self.check_same_shape(other)?;
        self.coeffs.iter_mut().zip(&other.coeffs).for_each(|(a, b)| *a += b);
        Ok(())
    }

    fn check_same_shape(&self, other: &FourierField) -> Result<()> {
        if self.idx != other.idx || self.value_dim != other.value_dim {
            return Err(Error::Dimension("fields differ in torus dimension, bandlimit or value dimension".into()));
        }
        Ok(())
    }

    /// `∫ u·v dy` by exact mode pairing.
    pub fn inner(&self, other: &FourierField) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a * b.conj()).re).sum())
    }

    /// L² norm on the torus.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Evaluate at a torus point by direct mode summation.
    pub fn eval(&self, y: &[f64]) -> Vec<f64> {
        let m = self.idx.m;
        let kk = self.idx.bandlimit;
        let side = self.idx.side;
        // per-axis characters e^{2πi k y_d}
        let chars: Vec<Vec<Complex64>> = y
            .iter()
            .map(|&yd| {
                let yd = yd.rem_euclid(1.0);
                (-kk..=kk).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 * yd)).collect()
            })
            .collect();
        let half: Vec<usize> = ((self.idx.zero() + 1)..self.idx.count).collect();
        let mut out = vec![0.0; self.value_dim];
        let z = self.idx.zero();
        for (c, o) in out.iter_mut().enumerate() {
            let block = self.component(c);
            let mut acc = 0.0;
            for &i in &half {
                let mut rem = i;
                let mut e = Complex64::new(1.0, 0.0);
                for d in (0..m).rev() {
                    e *= chars[d][rem % side];
                    rem /= side;
                }
                acc += (block[i] * e).re;
            }
            *o = block[z].re + 2.0 * acc;
        }
        out
    }

    /// Pointwise product of two scalar fields, exact at bandlimit
    /// `K_a + K_b`.
    pub fn product(&self, other: &FourierField) -> Result<FourierField> {
        if self.value_dim != 1 || other.value_dim != 1 || self.idx.m != other.idx.m {
            return Err(Error::Dimension("pointwise product needs two scalar fields on the same torus".into()));
        }
        let kk = self.idx.bandlimit + other.idx.bandlimit;
        let grid = CollocationGrid::new(self.idx.m, grid::smooth_size((2 * kk + 1) as usize));
        let a = grid.to_grid(&self.with_bandlimit(kk))?;
        let b = grid.to_grid(&other.with_bandlimit(kk))?;
        let prod: Vec<f64> = a[0].iter().zip(&b[0]).map(|(x, y)| x * y).collect();
        grid.from_grid(&[prod], kk)
    }
}
