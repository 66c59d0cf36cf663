//! Cut-and-projection matrices.
//!
//! A [`ProjectionMatrix`] `R` maps the physical space `Rⁿ` into the torus
//! lift `Rᵐ`. Columns are kept orthonormal so that `R Rᵀ` is the orthogonal
//! projector onto the physical plane. An optional exact description of the
//! column span (rational, or over a quadratic field) lets the irrationality
//! criterion `Rᵀk ≠ 0, k ∈ Zᵐ \ {0}` be decided exactly instead of sampled.

pub mod catalogue;
pub mod exact;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use exact::{format_rat, parse_rat, quad_rank, rational_kernel, primitive_integer, QuadNum, Rat};

pub use catalogue::{builtin_matrices, builtin_matrix, BUILTIN_NAMES};

/// Default radius of the numeric small-divisor scan.
pub const DEFAULT_BALL_RADIUS: i64 = 200;

/// Exact description of the column span of `R`.
///
/// The exact columns do not have to equal the (orthonormalized) numeric
/// columns: the criterion only depends on the span, so any exact spanning
/// set works.
#[derive(Clone, Debug, PartialEq)]
pub enum AlgebraicTag {
    Rational { columns: Vec<Vec<Rat>> },
    Quadratic { radicand: i64, columns: Vec<Vec<QuadNum>> },
    NumericOnly,
}

impl AlgebraicTag {
    /// Exact spanning columns lifted into Q(√d) (rational tags use b = 0).
    fn quad_columns(&self) -> Option<Vec<Vec<QuadNum>>> {
        match self {
            AlgebraicTag::Rational { columns } => Some(
                columns
                    .iter()
                    .map(|c| c.iter().map(|&a| QuadNum::rational(a, 2)).collect())
                    .collect(),
            ),
            AlgebraicTag::Quadratic { columns, .. } => Some(columns.clone()),
            AlgebraicTag::NumericOnly => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            AlgebraicTag::Rational { .. } => "rational".into(),
            AlgebraicTag::Quadratic { radicand, .. } => format!("quadratic(sqrt {radicand})"),
            AlgebraicTag::NumericOnly => "numeric-only".into(),
        }
    }
}

/// An m×n cut-and-projection matrix with orthonormal columns.
#[derive(Clone, Debug)]
pub struct ProjectionMatrix {
    m: usize,
    n: usize,
    /// Row-major m×n.
    entries: Vec<f64>,
    tag: AlgebraicTag,
}

impl ProjectionMatrix {
    /// Build from entries that are already orthonormal up to 1e-6; the
    /// columns are polished with modified Gram–Schmidt.
    pub fn new(m: usize, n: usize, entries: Vec<f64>, tag: AlgebraicTag) -> Result<Self> {
        check_shape(m, n, &entries)?;
        let dev = orthonormality_defect(m, n, &entries);
        if dev > 1e-6 {
            return Err(Error::NotOrthonormal { deviation: dev });
        }
        Self::orthonormalized(m, n, entries, tag)
    }

    /// Build from any full-rank column set; columns are orthonormalized.
    pub fn orthonormalized(m: usize, n: usize, entries: Vec<f64>, tag: AlgebraicTag) -> Result<Self> {
        check_shape(m, n, &entries)?;
        let entries = modified_gram_schmidt(m, n, &entries)?;
        let tag = if tag_spans_columns(m, n, &entries, &tag) { tag } else { AlgebraicTag::NumericOnly };
        Ok(Self { m, n, entries, tag })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tag(&self) -> &AlgebraicTag {
        &self.tag
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// `Rᵀ k` for an integer mode.
    pub fn rt_k(&self, k: &[i64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.rt_k_into(k, &mut out);
        out
    }

    #[inline]
    pub fn rt_k_into(&self, k: &[i64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &ki) in k.iter().enumerate() {
            if ki != 0 {
                let kf = ki as f64;
                for (j, o) in out.iter_mut().enumerate() {
                    *o += self.entries[i * self.n + j] * kf;
                }
            }
        }
    }

    /// `R x` for a physical point.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// The orthogonal projector `P = R Rᵀ` onto the physical plane.
    pub fn physical_projector(&self) -> DMatrix<f64> {
        let r = DMatrix::from_row_slice(self.m, self.n, &self.entries);
        let p = &r * r.transpose();
        // symmetrize exactly
        DMatrix::from_fn(self.m, self.m, |i, j| if i <= j { p[(i, j)] } else { p[(j, i)] })
    }

    /// Exact decision of `Rᵀk = 0`, when the tag allows it.
    pub fn exact_rt_k_is_zero(&self, k: &[i64]) -> Option<bool> {
        let cols = self.tag.quad_columns()?;
        let d = cols[0][0].d;
        Some(cols.iter().all(|col| {
            col.iter()
                .zip(k)
                .fold(QuadNum::from_int(0, d), |acc, (&e, &ki)| acc + e * QuadNum::from_int(ki, d))
                .is_zero()
        }))
    }

    /// Exact decision of `k ∈ range(R)`, i.e. `(I − RRᵀ)k = 0`.
    pub fn exact_k_in_plane(&self, k: &[i64]) -> Option<bool> {
        let cols = self.tag.quad_columns()?;
        let d = cols[0][0].d;
        let rows: Vec<Vec<QuadNum>> = (0..self.m)
            .map(|i| {
                let mut row: Vec<QuadNum> = cols.iter().map(|c| c[i]).collect();
                row.push(QuadNum::from_int(k[i], d));
                row
            })
            .collect();
        Some(quad_rank(&rows) == self.n)
    }

    /// Serializable spec (entries plus exact tag).
    pub fn to_spec(&self) -> MatrixSpec {
        MatrixSpec {
            builtin: None,
            m: Some(self.m),
            n: Some(self.n),
            entries: Some(self.entries.clone()),
            normalize: false,
            algebraic_tag: tag_to_spec(&self.tag),
        }
    }
}

fn check_shape(m: usize, n: usize, entries: &[f64]) -> Result<()> {
    if n < 1 || m <= n {
        return Err(Error::ProjectionShape { m, n });
    }
    if entries.len() != m * n {
        return Err(Error::Dimension(format!("expected {} entries for a {m}x{n} matrix, got {}", m * n, entries.len())));
    }
    if entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("projection entries must be finite".into()));
    }
    Ok(())
}

/// max |RᵀR − I|.
pub fn orthonormality_defect(m: usize, n: usize, entries: &[f64]) -> f64 {
    let mut dev = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let dot: f64 = (0..m).map(|i| entries[i * n + a] * entries[i * n + b]).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            dev = dev.max((dot - target).abs());
        }
    }
    dev
}

fn modified_gram_schmidt(m: usize, n: usize, entries: &[f64]) -> Result<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| entries[i * n + j]).collect()).collect();
    for j in 0..n {
        let original: f64 = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        // two passes of MGS for numerical orthogonality
        for _ in 0..2 {
            for q in 0..j {
                let dot: f64 = (0..m).map(|i| cols[q][i] * cols[j][i]).sum();
                for i in 0..m {
                    cols[j][i] -= dot * cols[q][i];
                }
            }
        }
        let norm: f64 = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        if original == 0.0 || norm <= 1e-10 * original {
            return Err(Error::RankDeficient { column: j });
        }
        cols[j].iter_mut().for_each(|v| *v /= norm);
    }
    let mut out = vec![0.0; m * n];
    for j in 0..n {
        for i in 0..m {
            out[i * n + j] = cols[j][i];
        }
    }
    Ok(out)
}

/// The tag survives orthonormalization iff its exact columns are
/// independent and span the same plane as the numeric columns.
fn tag_spans_columns(m: usize, n: usize, entries: &[f64], tag: &AlgebraicTag) -> bool {
    let Some(cols) = tag.quad_columns() else { return true };
    if cols.len() != n || cols.iter().any(|c| c.len() != m) {
        return false;
    }
    if let AlgebraicTag::Quadratic { radicand, columns } = tag {
        if !exact::is_valid_radicand(*radicand) || columns.iter().flatten().any(|q| q.d != *radicand) {
            return false;
        }
    }
    let rows: Vec<Vec<QuadNum>> = (0..m).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    if quad_rank(&rows) != n {
        return false;
    }
    // every exact column must lie in the numeric plane
    cols.iter().all(|c| {
        let v: Vec<f64> = c.iter().map(|q| q.to_f64()).collect();
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut resid = v.clone();
        for j in 0..n {
            let dot: f64 = (0..m).map(|i| entries[i * n + j] * v[i]).sum();
            for i in 0..m {
                resid[i] -= dot * entries[i * n + j];
            }
        }
        resid.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-9 * norm
    })
}

// ---------------------------------------------------------------------------
// Criterion
// ---------------------------------------------------------------------------

/// Which regime decided the criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Certificate {
    ExactPass,
    ExactFail { k: Vec<i64> },
    NumericOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusMinimum {
    pub radius: i64,
    pub min_projected_norm: f64,
    pub k: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub ball_radius: i64,
    pub min_projected_norm: f64,
    pub worst_k: Vec<i64>,
    pub certificate: Certificate,
    /// Smallest `|Rᵀk|` over the ball `|k|∞ ≤ radius` at dyadic radii.
    pub radius_profile: Vec<RadiusMinimum>,
}

/// Decide the irrationality criterion and scan the small divisors in the
/// ball `0 < |k|∞ ≤ ball_radius`.
pub fn check_criterion(r: &ProjectionMatrix, ball_radius: i64) -> CriterionReport {
    let ball_radius = ball_radius.max(1);
    let certificate = exact_certificate(r);

    let mut radius_profile = Vec::new();
    let mut s = 1;
    loop {
        let s_eff = s.min(ball_radius);
        let (val, k) = min_projected_norm(r, s_eff);
        radius_profile.push(RadiusMinimum { radius: s_eff, min_projected_norm: val, k });
        if s_eff == ball_radius {
            break;
        }
        s *= 2;
    }
    let last = radius_profile.last().expect("at least one radius");
    CriterionReport {
        ball_radius,
        min_projected_norm: last.min_projected_norm,
        worst_k: last.k.clone(),
        certificate,
        radius_profile,
    }
}

fn exact_certificate(r: &ProjectionMatrix) -> Certificate {
    let (rows, m) = match r.tag() {
        AlgebraicTag::NumericOnly => return Certificate::NumericOnly,
        AlgebraicTag::Rational { columns } => (columns.clone(), r.m),
        AlgebraicTag::Quadratic { columns, .. } => {
            // Σ k_i (a_i + b_i √d) = 0  ⇔  Σ k_i a_i = 0 and Σ k_i b_i = 0
            let mut rows = Vec::new();
            for c in columns {
                rows.push(c.iter().map(|q| q.a).collect::<Vec<Rat>>());
                rows.push(c.iter().map(|q| q.b).collect::<Vec<Rat>>());
            }
            (rows, r.m)
        }
    };
    let kernel = rational_kernel(&rows, m);
    match kernel.first() {
        None => Certificate::ExactPass,
        Some(v) => {
            let k = primitive_integer(v);
            debug_assert_eq!(r.exact_rt_k_is_zero(&k), Some(true));
            Certificate::ExactFail { k }
        }
    }
}

/// Exact minimum of `|Rᵀk|` over `0 < |k|∞ ≤ radius`.
///
/// Branch and bound: pick n rows `S` of `R` with the best-conditioned square
/// block `A`, enumerate the remaining m − n coordinates, and search only the
/// integer points `k_S` inside `|k_S − k_S*|∞ ≤ best / σ_min(A)` around the
/// continuous minimizer `k_S*`.
pub fn min_projected_norm(r: &ProjectionMatrix, radius: i64) -> (f64, Vec<i64>) {
    let (m, n) = (r.m, r.n);
    let subset = best_square_block(r);
    let rest: Vec<usize> = (0..m).filter(|i| !subset.contains(i)).collect();
    let a = DMatrix::from_fn(n, n, |i, j| r.get(subset[i], j));
    let sigma_min = a.clone().svd(false, false).singular_values.min();
    let at_inv = a.transpose().try_inverse().expect("best block is invertible");

    let mut best = f64::INFINITY;
    let mut best_k = vec![0i64; m];
    let mut k = vec![0i64; m];
    let mut rt = vec![0.0; n];
    let consider = |k: &[i64], best: &mut f64, best_k: &mut Vec<i64>, rt: &mut Vec<f64>| {
        if k.iter().all(|&v| v == 0) {
            return;
        }
        r.rt_k_into(k, rt);
        let v = rt.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cand = canonical(k);
        if v < *best || (v == *best && cand < *best_k) {
            *best = v;
            *best_k = cand;
        }
    };
    // unit vectors seed the bound
    for i in 0..m {
        k.iter_mut().for_each(|v| *v = 0);
        k[i] = 1;
        consider(&k, &mut best, &mut best_k, &mut rt);
    }

    let width = (2 * radius + 1) as usize;
    let total: usize = width.pow(rest.len() as u32);
    let mut kt = vec![0i64; rest.len()];
    let mut ks = vec![0i64; n];
    for idx in 0..total {
        let mut rem = idx;
        for v in kt.iter_mut() {
            *v = (rem % width) as i64 - radius;
            rem /= width;
        }
        // c = Bᵀ k_T
        let mut c = vec![0.0; n];
        for (t, &row) in rest.iter().enumerate() {
            for (j, cj) in c.iter_mut().enumerate() {
                *cj += r.get(row, j) * kt[t] as f64;
            }
        }
        let center: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| at_inv[(i, j)] * c[j]).sum::<f64>()).collect();
        let w = best / sigma_min + 1e-9;
        let lo: Vec<i64> = center.iter().map(|&x| ((x - w).ceil() as i64).max(-radius)).collect();
        let hi: Vec<i64> = center.iter().map(|&x| ((x + w).floor() as i64).min(radius)).collect();
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            continue;
        }
        ks.copy_from_slice(&lo);
        loop {
            for (t, &row) in rest.iter().enumerate() {
                k[row] = kt[t];
            }
            for (s, &row) in subset.iter().enumerate() {
                k[row] = ks[s];
            }
            consider(&k, &mut best, &mut best_k, &mut rt);
            // odometer over the window
            let mut d = 0;
            loop {
                if d == n {
                    break;
                }
                if ks[d] < hi[d] {
                    ks[d] += 1;
                    break;
                }
                ks[d] = lo[d];
                d += 1;
            }
            if d == n {
                break;
            }
        }
    }
    (best, best_k)
}

/// Representative of {k, −k} with the first nonzero entry positive.
fn canonical(k: &[i64]) -> Vec<i64> {
    match k.iter().find(|&&v| v != 0) {
        Some(&v) if v < 0 => k.iter().map(|x| -x).collect(),
        _ => k.to_vec(),
    }
}

fn best_square_block(r: &ProjectionMatrix) -> Vec<usize> {
    let (m, n) = (r.m, r.n);
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut combo: Vec<usize> = (0..n).collect();
    loop {
        let a = DMatrix::from_fn(n, n, |i, j| r.get(combo[i], j));
        let smin = a.svd(false, false).singular_values.min();
        if smin > best.0 {
            best = (smin, combo.clone());
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best.1;
            }
            i -= 1;
            if combo[i] < m - n + i {
                combo[i] += 1;
                for j in i + 1..n {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return best.1;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Config representation
// ---------------------------------------------------------------------------

/// One exact entry: `"p/q"` or `["a", "b"]` meaning `a + b√d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExactEntry {
    Plain(String),
    Pair([String; 2]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TagSpec {
    Rational { exact: Vec<ExactEntry> },
    Quadratic { radicand: i64, exact: Vec<ExactEntry> },
    NumericOnly,
}

/// The `[matrix]` config section.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Row-major m×n.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<f64>>,
    /// Orthonormalize arbitrary full-rank input instead of requiring
    /// near-orthonormal columns.
    #[serde(default)]
    pub normalize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebraic_tag: Option<TagSpec>,
}

impl MatrixSpec {
    pub fn build(&self) -> Result<ProjectionMatrix> {
        if let Some(name) = &self.builtin {
            return builtin_matrix(name);
        }
        let (m, n) = match (self.m, self.n) {
            (Some(m), Some(n)) => (m, n),
            _ => return Err(Error::Config("[matrix] needs either `builtin` or `m`, `n`, `entries`".into())),
        };
        let entries = self
            .entries
            .clone()
            .ok_or_else(|| Error::Config("[matrix] is missing `entries`".into()))?;
        let tag = match &self.algebraic_tag {
            None => AlgebraicTag::NumericOnly,
            Some(spec) => tag_from_spec(spec, m, n)?,
        };
        if self.normalize {
            ProjectionMatrix::orthonormalized(m, n, entries, tag)
        } else {
            ProjectionMatrix::new(m, n, entries, tag)
        }
    }
}

fn columns_from_row_major<T: Clone>(vals: Vec<T>, m: usize, n: usize) -> Result<Vec<Vec<T>>> {
    if vals.len() != m * n {
        return Err(Error::Config(format!("exact entries: expected {} values, got {}", m * n, vals.len())));
    }
    Ok((0..n).map(|j| (0..m).map(|i| vals[i * n + j].clone()).collect()).collect())
}

fn tag_from_spec(spec: &TagSpec, m: usize, n: usize) -> Result<AlgebraicTag> {
    Ok(match spec {
        TagSpec::NumericOnly => AlgebraicTag::NumericOnly,
        TagSpec::Rational { exact } => {
            let vals = exact
                .iter()
                .map(|e| match e {
                    ExactEntry::Plain(s) => parse_rat(s),
                    ExactEntry::Pair([a, b]) => {
                        let b = parse_rat(b)?;
                        if b != Rat::from_integer(0) {
                            return Err(Error::Config("rational tag entries cannot carry a radical part".into()));
                        }
                        parse_rat(a)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            AlgebraicTag::Rational { columns: columns_from_row_major(vals, m, n)? }
        }
        TagSpec::Quadratic { radicand, exact } => {
            if !exact::is_valid_radicand(*radicand) {
                return Err(Error::Config(format!("radicand {radicand} must be a non-square integer >= 2")));
            }
            let vals = exact
                .iter()
                .map(|e| match e {
                    ExactEntry::Plain(s) => Ok(QuadNum::rational(parse_rat(s)?, *radicand)),
                    ExactEntry::Pair([a, b]) => Ok(QuadNum::new(parse_rat(a)?, parse_rat(b)?, *radicand)),
                })
                .collect::<Result<Vec<_>>>()?;
            AlgebraicTag::Quadratic { radicand: *radicand, columns: columns_from_row_major(vals, m, n)? }
        }
    })
}

fn tag_to_spec(tag: &AlgebraicTag) -> Option<TagSpec> {
    let row_major = |cols: &Vec<Vec<QuadNum>>| -> Vec<ExactEntry> {
        let (m, n) = (cols[0].len(), cols.len());
        (0..m)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| ExactEntry::Pair([format_rat(&cols[j][i].a), format_rat(&cols[j][i].b)]))
            .collect()
    };
    match tag {
        AlgebraicTag::NumericOnly => Some(TagSpec::NumericOnly),
        AlgebraicTag::Rational { columns } => {
            let (m, n) = (columns[0].len(), columns.len());
            Some(TagSpec::Rational {
                exact: (0..m)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .map(|(i, j)| ExactEntry::Plain(format_rat(&columns[j][i])))
                    .collect(),
            })
        }
        AlgebraicTag::Quadratic { radicand, columns } => {
            Some(TagSpec::Quadratic { radicand: *radicand, exact: row_major(columns) })
        }
    }
}
