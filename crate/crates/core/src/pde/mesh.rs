//! Uniform tensor meshes on `(0, L₁) × … × (0, Lₙ)`, `n ∈ {1, 2}`, with
//! P1 / Q1 elements and tensor Gauss rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 3-point Gauss rule on `[0, 1]`.
pub const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Per-axis reference rule: plain 3-point Gauss, or the same rule on each
/// of 4 equal sub-cells.
pub fn reference_rule(oversample: bool) -> Vec<(f64, f64)> {
    if !oversample {
        return GAUSS3.to_vec();
    }
    let mut out = Vec::with_capacity(12);
    for s in 0..4 {
        for (t, w) in GAUSS3 {
            out.push(((s as f64 + t) / 4.0, w / 4.0));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub extents: Vec<f64>,
    pub cells: Vec<usize>,
}

impl Mesh {
    pub fn new(extents: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        if extents.is_empty() || extents.len() > 2 || extents.len() != cells.len() {
            return Err(Error::Dimension(format!("mesh needs n ∈ {{1, 2}}, got extents {extents:?}, cells {cells:?}")));
        }
        if extents.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::Config(format!("domain extents must be positive, got {extents:?}")));
        }
        if cells.iter().any(|&c| c < 2) {
            return Err(Error::Config(format!("need at least 2 elements per axis, got {cells:?}")));
        }
        Ok(Self { extents, cells })
    }

    pub fn uniform(extents: Vec<f64>, cells_per_axis: usize) -> Result<Self> {
        let n = extents.len();
        Self::new(extents, vec![cells_per_axis; n])
    }

    pub fn n(&self) -> usize {
        self.extents.len()
    }

    pub fn h(&self, axis: usize) -> f64 {
        self.extents[axis] / self.cells[axis] as f64
    }

    pub fn node_count(&self) -> usize {
        self.cells.iter().map(|c| c + 1).product()
    }

    pub fn element_count(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn nodes_per_element(&self) -> usize {
        1 << self.n()
    }

    pub fn element_volume(&self) -> f64 {
        (0..self.n()).map(|a| self.h(a)).product()
    }

    pub fn same_domain(&self, other: &Mesh) -> bool {
        self.n() == other.n()
            && self.extents.iter().zip(&other.extents).all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0))
    }

    /// Node coordinates; nodes are numbered with axis 0 fastest.
    pub fn node_coord(&self, node: usize) -> Vec<f64> {
        let mut rem = node;
        (0..self.n())
            .map(|a| {
                let i = rem % (self.cells[a] + 1);
                rem /= self.cells[a] + 1;
                i as f64 * self.h(a)
            })
            .collect()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let mut rem = node;
        for a in 0..self.n() {
            let i = rem % (self.cells[a] + 1);
            rem /= self.cells[a] + 1;
            if i == 0 || i == self.cells[a] {
                return true;
            }
        }
        false
    }

    /// Per-axis element index of element `e`.
    pub fn element_index(&self, e: usize) -> Vec<usize> {
        let mut rem = e;
        (0..self.n())
            .map(|a| {
                let i = rem % self.cells[a];
                rem /= self.cells[a];
                i
            })
            .collect()
    }

    /// Lower-left corner of element `e`.
    pub fn element_origin(&self, e: usize) -> Vec<f64> {
        self.element_index(e).iter().enumerate().map(|(a, &i)| i as f64 * self.h(a)).collect()
    }

    /// Global node numbers of element `e`, local order `(0,0), (1,0), (0,1), (1,1)`.
    pub fn element_nodes(&self, e: usize) -> Vec<usize> {
        let idx = self.element_index(e);
        if self.n() == 1 {
            return vec![idx[0], idx[0] + 1];
        }
        let stride = self.cells[0] + 1;
        let base = idx[0] + idx[1] * stride;
        vec![base, base + 1, base + stride, base + stride + 1]
    }

    /// Element containing `x` and the local coordinates in `[0, 1]ⁿ`.
    pub fn locate(&self, x: &[f64]) -> (usize, Vec<f64>) {
        let mut e = 0;
        let mut stride = 1;
        let mut local = Vec::with_capacity(self.n());
        for a in 0..self.n() {
            let t = x[a] / self.h(a);
            let i = (t.floor().max(0.0) as usize).min(self.cells[a] - 1);
            local.push((t - i as f64).clamp(0.0, 1.0));
            e += i * stride;
            stride *= self.cells[a];
        }
        (e, local)
    }

    /// Breakpoints of axis `a`.
    pub fn breakpoints(&self, a: usize) -> Vec<f64> {
        (0..=self.cells[a]).map(|i| i as f64 * self.h(a)).collect()
    }
}

/// Shape function values at local coordinates `t`.
pub fn shape_values(t: &[f64]) -> Vec<f64> {
    if t.len() == 1 {
        return vec![1.0 - t[0], t[0]];
    }
    let (s, r) = (t[0], t[1]);
    vec![(1.0 - s) * (1.0 - r), s * (1.0 - r), (1.0 - s) * r, s * r]
}

/// Physical shape gradients at local coordinates `t`, row per node.
pub fn shape_gradients(t: &[f64], h: &[f64]) -> Vec<Vec<f64>> {
    if t.len() == 1 {
        return vec![vec![-1.0 / h[0]], vec![1.0 / h[0]]];
    }
    let (s, r) = (t[0], t[1]);
    vec![
        vec![-(1.0 - r) / h[0], -(1.0 - s) / h[1]],
        vec![(1.0 - r) / h[0], -s / h[1]],
        vec![-r / h[0], (1.0 - s) / h[1]],
        vec![r / h[0], s / h[1]],
    ]
}

/// Merge sorted breakpoint lists, dropping near-duplicates.
pub fn merge_breakpoints(lists: &[Vec<f64>]) -> Vec<f64> {
    let mut all: Vec<f64> = lists.iter().flatten().copied().collect();
    all.sort_by(f64::total_cmp);
    let scale = all.last().copied().unwrap_or(1.0).abs().max(1.0);
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for v in all {
        if out.last().is_none_or(|&l| v - l > 1e-12 * scale) {
            out.push(v);
        }
    }
    out
}
