//! Monotone flux laws `σ(x, y, ξ) = μ(x) σ₁(a(y), ξ)`.
//!
//! The coefficient `a(y)` is a bandlimited field on the torus (scalar, or an
//! `n×n` symmetric matrix stored row-major as `n²` components) and `μ(x)` is
//! an optional positive modulation in the macroscopic variable. Every family
//! derives from a convex potential.

mod audit;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::torus::{CollocationGrid, FieldSpec, FourierField};

pub use audit::{audit_assumptions, AssumptionCheck, AuditReport, CheckMethod, Witness};

/// Regularization length used when `p < 2` and none is configured.
pub const DEFAULT_REG_EPS: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    LinearScalar,
    LinearMatrix,
    PowerLaw,
    RegularizedPowerLaw,
}

impl Family {
    pub fn is_linear(self) -> bool {
        matches!(self, Family::LinearScalar | Family::LinearMatrix)
    }
}

/// Coercivity, monotonicity and growth constants `(c, c₁, c₂)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
}

/// Config form of a flux model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reg_eps: Option<f64>,
    /// Scalar coefficient `a(y)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<FieldSpec>,
    /// Matrix coefficient, `n²` entries row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_coefficient: Option<Vec<FieldSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Expr>,
    #[serde(default)]
    pub constants: Constants,
}

impl ModelSpec {
    pub fn scalar(family: Family, p: Option<f64>, coefficient: FieldSpec) -> Self {
        Self {
            family,
            p,
            reg_eps: None,
            coefficient: Some(coefficient),
            matrix_coefficient: None,
            mu: None,
            constants: Constants::default(),
        }
    }
}

/// A validated flux law on `Ω × Yᵐ × Rⁿ`.
#[derive(Clone, Debug)]
pub struct FluxModel {
    spec: ModelSpec,
    family: Family,
    p: f64,
    q: f64,
    reg_eps: f64,
    m: usize,
    n: usize,
    coefficient: FourierField,
    mu: Option<Expr>,
    coef_lower: f64,
    coef_upper: f64,
    grid_min: f64,
    grid_max: f64,
    derived: Constants,
}

impl FluxModel {
    /// Validate `spec` for a torus `Yᵐ` and physical dimension `n`.
    pub fn new(spec: &ModelSpec, m: usize, n: usize) -> Result<Self> {
        if n == 0 || m <= n {
            return Err(Error::Dimension(format!("need m > n >= 1, got m = {m}, n = {n}")));
        }
        let mut spec = spec.clone();
        let mut family = spec.family;
        let p = match (family.is_linear(), spec.p) {
            (true, None) => 2.0,
            (true, Some(2.0)) => 2.0,
            (true, Some(p)) => return Err(Error::InvalidModel(format!("linear families force p = 2, got {p}"))),
            (false, None) => return Err(Error::InvalidModel("power-law families need an exponent p".into())),
            (false, Some(p)) if p.is_finite() && p > 1.0 => p,
            (false, Some(p)) => return Err(Error::InvalidModel(format!("p must lie in (1, ∞), got {p}"))),
        };
        spec.p = Some(p);
        let reg_eps = match family {
            Family::LinearScalar | Family::LinearMatrix => {
                if spec.reg_eps.is_some_and(|e| e != 0.0) {
                    return Err(Error::InvalidModel("reg_eps applies only to power-law families".into()));
                }
                0.0
            }
            Family::PowerLaw => match spec.reg_eps {
                None if p < 2.0 => {
                    family = Family::RegularizedPowerLaw;
                    DEFAULT_REG_EPS
                }
                None => 0.0,
                Some(e) if e > 0.0 && e.is_finite() => {
                    family = Family::RegularizedPowerLaw;
                    e
                }
                Some(0.0) => 0.0,
                Some(e) => return Err(Error::InvalidModel(format!("reg_eps must be >= 0, got {e}"))),
            },
            Family::RegularizedPowerLaw => match spec.reg_eps {
                None => DEFAULT_REG_EPS,
                Some(e) if e >= 0.0 && e.is_finite() => e,
                Some(e) => return Err(Error::InvalidModel(format!("reg_eps must be >= 0, got {e}"))),
            },
        };
        spec.family = family;
        if !family.is_linear() {
            spec.reg_eps = Some(reg_eps);
        }
        let q = p / (p - 1.0);
        if (1.0 / p + 1.0 / q - 1.0).abs() > 1e-15 {
            return Err(Error::InvalidModel(format!("dual exponent identity fails for p = {p}")));
        }
        if let Some(mu) = &spec.mu {
            if mu.arity() > n {
                return Err(Error::InvalidModel(format!("mu reads x{} but n = {n}", mu.arity())));
            }
        }

        let coefficient = match family {
            Family::LinearMatrix => {
                if spec.coefficient.is_some() {
                    return Err(Error::InvalidModel("linear-matrix takes matrix_coefficient, not coefficient".into()));
                }
                let entries = spec
                    .matrix_coefficient
                    .as_ref()
                    .ok_or_else(|| Error::InvalidModel("linear-matrix needs matrix_coefficient".into()))?;
                matrix_field(entries, m, n)?
            }
            _ => {
                if spec.matrix_coefficient.is_some() {
                    return Err(Error::InvalidModel("matrix_coefficient needs family linear-matrix".into()));
                }
                let c = spec.coefficient.as_ref().ok_or_else(|| Error::InvalidModel("missing coefficient".into()))?;
                c.build(m)?
            }
        };
        let (coef_lower, coef_upper) = analytic_bounds(&coefficient, n);
        if !(coef_lower > 0.0) {
            return Err(Error::InvalidModel(format!(
                "coefficient is not provably positive: constant part minus amplitude sum is {coef_lower:.6e}"
            )));
        }
        let (grid_min, grid_max) = grid_extremes(&coefficient, n);
        if !(grid_min > 0.0) {
            return Err(Error::InvalidModel(format!("coefficient minimum {grid_min:.6e} on the collocation grid")));
        }

        let mut model = Self {
            spec,
            family,
            p,
            q,
            reg_eps,
            m,
            n,
            coefficient,
            mu: None,
            coef_lower,
            coef_upper,
            grid_min,
            grid_max,
            derived: Constants::default(),
        };
        model.mu = model.spec.mu.clone();
        let (mu_lo, mu_hi) = model.mu_range_on_unit_box();
        if !(mu_lo > 0.0) || !mu_hi.is_finite() {
            return Err(Error::InvalidModel(format!("mu must be positive and finite on [0,1]^n, found {mu_lo:.6e}")));
        }
        model.derived = model.derive_constants(mu_lo, mu_hi);
        Ok(model)
    }

    fn derive_constants(&self, mu_lo: f64, mu_hi: f64) -> Constants {
        let lo = self.coef_lower * mu_lo;
        let hi = self.coef_upper * mu_hi;
        match self.family {
            Family::LinearScalar | Family::LinearMatrix => Constants { c: Some(lo), c1: Some(lo), c2: Some(hi) },
            Family::PowerLaw if self.p >= 2.0 => {
                Constants { c: Some(lo), c1: Some(lo * 2f64.powf(2.0 - self.p)), c2: Some(hi) }
            }
            Family::PowerLaw => Constants { c: Some(lo), c1: None, c2: Some(hi) },
            Family::RegularizedPowerLaw if self.p >= 2.0 => Constants { c: Some(lo), c1: None, c2: None },
            Family::RegularizedPowerLaw => Constants { c: None, c1: None, c2: Some(hi) },
        }
    }

    fn mu_range_on_unit_box(&self) -> (f64, f64) {
        let Some(mu) = &self.mu else { return (1.0, 1.0) };
        let steps = if self.n == 1 { 200 } else { 60 };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut x = vec![0.0; self.n];
        let total = (steps + 1usize).pow(self.n as u32);
        for j in 0..total {
            let mut r = j;
            for xd in x.iter_mut() {
                *xd = (r % (steps + 1)) as f64 / steps as f64;
                r /= steps + 1;
            }
            let v = mu.eval(&x);
            if !v.is_finite() {
                return (f64::NAN, f64::NAN);
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// The resolved config (defaults filled in).
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn reg_eps(&self) -> f64 {
        self.reg_eps
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coefficient(&self) -> &FourierField {
        &self.coefficient
    }

    /// Components per coefficient value: 1 (scalar) or `n²` (matrix).
    pub fn coefficient_dim(&self) -> usize {
        self.coefficient.value_dim()
    }

    pub fn is_linear(&self) -> bool {
        self.family.is_linear()
    }

    /// True when `a(y)` does not depend on `y`.
    pub fn has_constant_coefficient(&self) -> bool {
        let z = self.coefficient.indexer().zero();
        (0..self.coefficient.value_dim())
            .all(|c| self.coefficient.component(c).iter().enumerate().all(|(i, v)| i == z || v.norm() == 0.0))
    }

    /// Guaranteed `(lower, upper)` bounds on `a(y)` (or its eigenvalues)
    /// from the constant part and the amplitude sum.
    pub fn coefficient_bounds(&self) -> (f64, f64) {
        (self.coef_lower, self.coef_upper)
    }

    /// Extremes of `a(y)` (or of its eigenvalues) over a collocation grid.
    pub fn coefficient_grid_range(&self) -> (f64, f64) {
        (self.grid_min, self.grid_max)
    }

    /// Constants implied by the family and coefficient bounds (`None` where
    /// no global constant exists).
    pub fn derived_constants(&self) -> Constants {
        self.derived
    }

    /// Declared constants, falling back to the derived ones.
    pub fn constants(&self) -> Constants {
        let d = self.spec.constants;
        Constants { c: d.c.or(self.derived.c), c1: d.c1.or(self.derived.c1), c2: d.c2.or(self.derived.c2) }
    }

    pub fn mu(&self, x: &[f64]) -> f64 {
        self.mu.as_ref().map_or(1.0, |e| e.eval(x))
    }

    pub fn mu_expr(&self) -> Option<&Expr> {
        self.mu.as_ref()
    }

    pub fn coefficient_at(&self, y: &[f64]) -> Vec<f64> {
        self.coefficient.eval(y)
    }

    /// Coefficient values on every node of `grid`, node-major.
    pub fn coefficient_on_grid(&self, grid: &CollocationGrid) -> Result<Vec<f64>> {
        let comps = grid.to_grid(&self.coefficient.with_bandlimit(self.coefficient.bandlimit()))?;
        let dim = comps.len();
        let nodes = grid.node_count();
        let mut out = vec![0.0; nodes * dim];
        for (c, vals) in comps.iter().enumerate() {
            for (j, v) in vals.iter().enumerate() {
                out[j * dim + c] = *v;
            }
        }
        Ok(out)
    }

    /// `g(|ξ|²)` with `σ₁ = a g(|ξ|²) ξ` for the scalar-coefficient families.
    #[inline]
    pub fn secant_weight(&self, norm_sq: f64) -> f64 {
        match self.family {
            Family::LinearScalar | Family::LinearMatrix => 1.0,
            Family::PowerLaw => {
                if self.p == 2.0 {
                    1.0
                } else if norm_sq == 0.0 {
                    if self.p > 2.0 { 0.0 } else { f64::INFINITY }
                } else {
                    norm_sq.powf((self.p - 2.0) / 2.0)
                }
            }
            Family::RegularizedPowerLaw => {
                let s = self.reg_eps * self.reg_eps + norm_sq;
                if s == 0.0 {
                    if self.p > 2.0 { 0.0 } else { f64::INFINITY }
                } else {
                    s.powf((self.p - 2.0) / 2.0)
                }
            }
        }
    }

    /// `σ₁(a, ξ)` (no `μ`), written into `out`.
    pub fn flux_local(&self, coef: &[f64], xi: &[f64], out: &mut [f64]) {
        let n = self.n;
        if self.family == Family::LinearMatrix {
            for i in 0..n {
                out[i] = (0..n).map(|j| coef[i * n + j] * xi[j]).sum();
            }
            return;
        }
        let s: f64 = xi.iter().map(|v| v * v).sum();
        let w = if s == 0.0 { 0.0 } else { coef[0] * self.secant_weight(s) };
        for (o, x) in out.iter_mut().zip(xi) {
            *o = w * x;
        }
    }

    /// Potential `W₁(a, ξ)` with `∂W₁/∂ξ = σ₁`.
    pub fn potential_local(&self, coef: &[f64], xi: &[f64]) -> f64 {
        let n = self.n;
        let s: f64 = xi.iter().map(|v| v * v).sum();
        match self.family {
            Family::LinearScalar => 0.5 * coef[0] * s,
            Family::LinearMatrix => {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += xi[i] * coef[i * n + j] * xi[j];
                    }
                }
                0.5 * acc
            }
            Family::PowerLaw => coef[0] * s.powf(self.p / 2.0) / self.p,
            Family::RegularizedPowerLaw => {
                let e2 = self.reg_eps * self.reg_eps;
                coef[0] * ((e2 + s).powf(self.p / 2.0) - e2.powf(self.p / 2.0)) / self.p
            }
        }
    }

    /// Tangent `∂σ₁/∂ξ` (row-major `n×n`).
    pub fn tangent_local(&self, coef: &[f64], xi: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.n;
        if self.family == Family::LinearMatrix {
            out[..n * n].copy_from_slice(&coef[..n * n]);
            return Ok(());
        }
        let s: f64 = xi.iter().map(|v| v * v).sum();
        let (g, dg) = match self.family {
            Family::LinearScalar => (1.0, 0.0),
            Family::PowerLaw if self.p == 2.0 => (1.0, 0.0),
            Family::PowerLaw => {
                if s == 0.0 {
                    if self.p < 2.0 {
                        return Err(Error::SingularFlux { p: self.p });
                    }
                    (if self.p == 2.0 { 1.0 } else { 0.0 }, 0.0)
                } else {
                    let g = s.powf((self.p - 2.0) / 2.0);
                    (g, (self.p - 2.0) * g / s)
                }
            }
            _ => {
                let t = self.reg_eps * self.reg_eps + s;
                if t == 0.0 {
                    if self.p < 2.0 {
                        return Err(Error::SingularFlux { p: self.p });
                    }
                    (if self.p == 2.0 { 1.0 } else { 0.0 }, 0.0)
                } else {
                    let g = t.powf((self.p - 2.0) / 2.0);
                    (g, (self.p - 2.0) * g / t)
                }
            }
        };
        let a = coef[0];
        for i in 0..n {
            for j in 0..n {
                let delta = if i == j { 1.0 } else { 0.0 };
                out[i * n + j] = a * (g * delta + dg * xi[i] * xi[j]);
            }
        }
        Ok(())
    }

    fn check_args(&self, x: &[f64], y: &[f64], xi: &[f64]) -> Result<()> {
        if x.len() != self.n || xi.len() != self.n || y.len() != self.m {
            return Err(Error::Dimension(format!(
                "expected x, ξ in R^{} and y in Y^{}, got {}, {}, {}",
                self.n,
                self.m,
                x.len(),
                xi.len(),
                y.len()
            )));
        }
        Ok(())
    }

    /// `σ(x, y, ξ)`. At `ξ = 0` the continuous extension `0` is returned for
    /// every family.
    pub fn evaluate(&self, x: &[f64], y: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        self.check_args(x, y, xi)?;
        let coef = self.coefficient_at(y);
        let mut out = vec![0.0; self.n];
        self.flux_local(&coef, xi, &mut out);
        let mu = self.mu(x);
        out.iter_mut().for_each(|v| *v *= mu);
        Ok(out)
    }

    /// `W(x, y, ξ)`.
    pub fn potential(&self, x: &[f64], y: &[f64], xi: &[f64]) -> Result<f64> {
        self.check_args(x, y, xi)?;
        Ok(self.mu(x) * self.potential_local(&self.coefficient_at(y), xi))
    }

    /// `∂σ/∂ξ(x, y, ξ)`; fails at `ξ = 0` for unregularized `p < 2`.
    pub fn tangent(&self, x: &[f64], y: &[f64], xi: &[f64]) -> Result<DMatrix<f64>> {
        self.check_args(x, y, xi)?;
        let mut out = vec![0.0; self.n * self.n];
        self.tangent_local(&self.coefficient_at(y), xi, &mut out)?;
        let mu = self.mu(x);
        Ok(DMatrix::from_row_slice(self.n, self.n, &out).scale(mu))
    }
}

fn matrix_field(entries: &[FieldSpec], m: usize, n: usize) -> Result<FourierField> {
    if entries.len() != n * n {
        return Err(Error::InvalidModel(format!("matrix_coefficient needs {} entries, got {}", n * n, entries.len())));
    }
    let built: Vec<FourierField> = entries.iter().map(|e| e.build(m)).collect::<Result<_>>()?;
    let bandlimit = built.iter().map(|f| f.bandlimit()).max().unwrap_or(0);
    let built: Vec<FourierField> = built.iter().map(|f| f.with_bandlimit(bandlimit)).collect();
    for i in 0..n {
        for j in 0..i {
            if built[i * n + j] != built[j * n + i] {
                return Err(Error::InvalidModel(format!("matrix coefficient is not symmetric in entries ({i},{j})")));
            }
        }
    }
    let coeffs = built.iter().flat_map(|f| f.coeffs().iter().copied()).collect();
    FourierField::from_coeffs(m, bandlimit, n * n, coeffs)
}

/// Lower/upper bounds: `â₀ ∓ Σ_{k≠0} |â_k|` for scalars, and the extreme
/// eigenvalues of `Â₀` shifted by `Σ_{k≠0} ‖Â_k‖_F` for matrices.
fn analytic_bounds(coef: &FourierField, n: usize) -> (f64, f64) {
    let z = coef.indexer().zero();
    let count = coef.mode_count();
    if coef.value_dim() == 1 {
        let c = coef.component(0);
        let amp: f64 = c.iter().enumerate().filter(|(i, _)| *i != z).map(|(_, v)| v.norm()).sum();
        return (c[z].re - amp, c[z].re + amp);
    }
    let a0 = DMatrix::from_fn(n, n, |i, j| coef.component(i * n + j)[z].re);
    let eig = a0.symmetric_eigen().eigenvalues;
    let amp: f64 = (0..count)
        .filter(|&i| i != z)
        .map(|i| (0..n * n).map(|c| coef.component(c)[i].norm_sqr()).sum::<f64>().sqrt())
        .sum();
    (eig.min() - amp, eig.max() + amp)
}

fn grid_extremes(coef: &FourierField, n: usize) -> (f64, f64) {
    let m = coef.m();
    let budget = 1usize << 20;
    let mut size = (4 * coef.bandlimit() as usize + 8).max(16);
    while size.pow(m as u32) > budget && size > 2 * coef.bandlimit() as usize + 1 {
        size -= 1;
    }
    let grid = CollocationGrid::new(m, size);
    let vals = grid.to_grid(coef).expect("grid sized for the coefficient bandlimit");
    if coef.value_dim() == 1 {
        let v = &vals[0];
        return (v.iter().cloned().fold(f64::INFINITY, f64::min), v.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..grid.node_count() {
        let a = DMatrix::from_fn(n, n, |r, c| vals[r * n + c][j]);
        let e = a.symmetric_eigen().eigenvalues;
        lo = lo.min(e.min());
        hi = hi.max(e.max());
    }
    (lo, hi)
}

/// `a(y) = 2 + ½cos 2πy₁ + ½cos 2π(y₁ + y₂)` on `Y²`, with values in `[1, 3]`.
pub fn smooth_coefficient_2d() -> FieldSpec {
    use crate::torus::{TrigKind, TrigTerm};
    FieldSpec {
        bandlimit: None,
        terms: vec![
            TrigTerm { coefficient: 2.0, k: vec![0, 0], kind: TrigKind::Cos },
            TrigTerm { coefficient: 0.5, k: vec![1, 0], kind: TrigKind::Cos },
            TrigTerm { coefficient: 0.5, k: vec![1, 1], kind: TrigKind::Cos },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{TrigKind, TrigTerm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(family: Family, p: Option<f64>, a: FieldSpec) -> FluxModel {
        FluxModel::new(&ModelSpec::scalar(family, p, a), 2, 1).unwrap()
    }

    #[test]
    fn direct_formulas() {
        let lin = scalar(Family::LinearScalar, None, FieldSpec::constant(2.0, 2));
        assert_eq!(lin.evaluate(&[0.3], &[0.1, 0.2], &[3.0]).unwrap(), vec![6.0]);
        assert_eq!(lin.potential(&[0.3], &[0.1, 0.2], &[2.0]).unwrap(), 4.0);
        let pl = scalar(Family::PowerLaw, Some(3.0), FieldSpec::constant(1.0, 2));
        assert_eq!(pl.evaluate(&[0.3], &[0.1, 0.2], &[2.0]).unwrap(), vec![4.0]);
        assert!((pl.potential(&[0.3], &[0.1, 0.2], &[2.0]).unwrap() - 8.0 / 3.0).abs() < 1e-15);
        let one = scalar(Family::LinearScalar, None, FieldSpec::constant(1.0, 2));
        assert_eq!(one.potential(&[0.0], &[0.0, 0.0], &[2.0]).unwrap(), 2.0);
    }

    #[test]
    fn power_law_with_oscillating_coefficient() {
        let a = FieldSpec {
            bandlimit: None,
            terms: vec![
                TrigTerm { coefficient: 2.0, k: vec![0, 0], kind: TrigKind::Cos },
                TrigTerm { coefficient: 1.0, k: vec![1, 0], kind: TrigKind::Cos },
            ],
        };
        let pl = scalar(Family::PowerLaw, Some(3.0), a);
        let y = [0.0, 0.37];
        let independent = (2.0 + (2.0 * std::f64::consts::PI * y[0]).cos()) * 1.0f64.abs() * 1.0;
        let got = pl.evaluate(&[0.5], &y, &[1.0]).unwrap()[0];
        assert!((got - 3.0).abs() < 1e-14 && (got - independent).abs() < 1e-14);
    }

    #[test]
    fn p_below_two_defaults_to_regularized() {
        let m = scalar(Family::PowerLaw, Some(1.5), FieldSpec::constant(1.0, 2));
        assert_eq!(m.family(), Family::RegularizedPowerLaw);
        assert_eq!(m.reg_eps(), DEFAULT_REG_EPS);
        assert_eq!(m.spec().reg_eps, Some(DEFAULT_REG_EPS));
        assert!((1.0 / m.p() + 1.0 / m.q() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn unregularized_sub_quadratic_tangent_is_singular_at_zero() {
        let mut spec = ModelSpec::scalar(Family::PowerLaw, Some(1.5), FieldSpec::constant(1.0, 2));
        spec.reg_eps = Some(0.0);
        let m = FluxModel::new(&spec, 2, 1).unwrap();
        assert_eq!(m.family(), Family::PowerLaw);
        assert_eq!(m.evaluate(&[0.0], &[0.0, 0.0], &[0.0]).unwrap(), vec![0.0]);
        assert!(matches!(m.tangent(&[0.0], &[0.0, 0.0], &[0.0]), Err(Error::SingularFlux { .. })));
    }

    #[test]
    fn validation_errors() {
        let bad_p = ModelSpec::scalar(Family::LinearScalar, Some(3.0), FieldSpec::constant(1.0, 2));
        assert!(FluxModel::new(&bad_p, 2, 1).is_err());
        let neg = FieldSpec {
            bandlimit: None,
            terms: vec![
                TrigTerm { coefficient: 1.0, k: vec![0, 0], kind: TrigKind::Cos },
                TrigTerm { coefficient: 1.5, k: vec![1, 0], kind: TrigKind::Cos },
            ],
        };
        assert!(matches!(
            FluxModel::new(&ModelSpec::scalar(Family::LinearScalar, None, neg), 2, 1),
            Err(Error::InvalidModel(_))
        ));
        let mut with_mu = ModelSpec::scalar(Family::LinearScalar, None, FieldSpec::constant(1.0, 2));
        with_mu.mu = Some(Expr::parse("x - 0.5").unwrap());
        assert!(FluxModel::new(&with_mu, 2, 1).is_err());
        with_mu.mu = Some(Expr::parse("x2").unwrap());
        assert!(FluxModel::new(&with_mu, 2, 1).is_err());
    }

    #[test]
    fn smooth_coefficient_bounds() {
        let m = scalar(Family::LinearScalar, None, smooth_coefficient_2d());
        assert_eq!(m.coefficient_bounds(), (1.0, 3.0));
        let (lo, hi) = m.coefficient_grid_range();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
        assert_eq!(m.constants(), Constants { c: Some(1.0), c1: Some(1.0), c2: Some(3.0) });
    }

    #[test]
    fn matrix_family_is_symmetric_and_positive() {
        let e = |v: f64| FieldSpec::constant(v, 3);
        let spec = ModelSpec {
            family: Family::LinearMatrix,
            p: None,
            reg_eps: None,
            coefficient: None,
            matrix_coefficient: Some(vec![e(2.0), e(0.5), e(0.5), e(1.0)]),
            mu: None,
            constants: Constants::default(),
        };
        let m = FluxModel::new(&spec, 3, 2).unwrap();
        assert_eq!(m.evaluate(&[0.0, 0.0], &[0.1, 0.2, 0.3], &[1.0, 2.0]).unwrap(), vec![3.0, 2.5]);
        let (lo, _) = m.coefficient_bounds();
        assert!((lo - (1.5 - 0.5f64.sqrt())).abs() < 1e-12);
        let mut asym = spec.clone();
        asym.matrix_coefficient = Some(vec![e(2.0), e(0.5), e(0.4), e(1.0)]);
        assert!(FluxModel::new(&asym, 3, 2).is_err());
    }

    fn all_models() -> Vec<FluxModel> {
        let a = || {
            FieldSpec {
                bandlimit: None,
                terms: vec![
                    TrigTerm { coefficient: 2.0, k: vec![0, 0, 0], kind: TrigKind::Cos },
                    TrigTerm { coefficient: 0.5, k: vec![1, 0, -1], kind: TrigKind::Sin },
                    TrigTerm { coefficient: 0.4, k: vec![0, 1, 1], kind: TrigKind::Cos },
                ],
            }
        };
        let mut out = vec![
            FluxModel::new(&ModelSpec::scalar(Family::LinearScalar, None, a()), 3, 2).unwrap(),
            FluxModel::new(&ModelSpec::scalar(Family::PowerLaw, Some(3.0), a()), 3, 2).unwrap(),
            FluxModel::new(&ModelSpec::scalar(Family::PowerLaw, Some(1.5), a()), 3, 2).unwrap(),
            FluxModel::new(&ModelSpec::scalar(Family::RegularizedPowerLaw, Some(4.0), a()), 3, 2).unwrap(),
        ];
        let mut mu = ModelSpec::scalar(Family::PowerLaw, Some(2.5), a());
        mu.mu = Some(Expr::parse("1 + 0.5*sin(pi*x1)*x2").unwrap());
        out.push(FluxModel::new(&mu, 3, 2).unwrap());
        let s = a();
        let off = FieldSpec {
            bandlimit: None,
            terms: vec![TrigTerm { coefficient: 0.3, k: vec![1, 1, 0], kind: TrigKind::Cos }],
        };
        out.push(
            FluxModel::new(
                &ModelSpec {
                    family: Family::LinearMatrix,
                    p: None,
                    reg_eps: None,
                    coefficient: None,
                    matrix_coefficient: Some(vec![s.clone(), off.clone(), off, s]),
                    mu: None,
                    constants: Constants::default(),
                },
                3,
                2,
            )
            .unwrap(),
        );
        out
    }

    fn sample(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(lo..hi)).collect()
    }

    #[test]
    fn zero_gradient_gives_zero_flux() {
        for m in all_models() {
            assert!(m.evaluate(&[0.2, 0.7], &[0.1, 0.5, 0.9], &[0.0, 0.0]).unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn potential_gradient_matches_flux() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for m in all_models() {
            for _ in 0..100 {
                let x = sample(&mut rng, 2, 0.0, 1.0);
                let y = sample(&mut rng, 3, 0.0, 1.0);
                let xi = sample(&mut rng, 2, -2.0, 2.0);
                let s = m.evaluate(&x, &y, &xi).unwrap();
                for j in 0..2 {
                    let mut a = xi.clone();
                    let mut b = xi.clone();
                    a[j] += h;
                    b[j] -= h;
                    let fd = (m.potential(&x, &y, &a).unwrap() - m.potential(&x, &y, &b).unwrap()) / (2.0 * h);
                    assert!((fd - s[j]).abs() <= 1e-6 * (1.0 + s[j].abs()), "{:?}: {fd} vs {}", m.family(), s[j]);
                }
            }
        }
    }

    #[test]
    fn tangent_matches_flux_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = 1e-6;
        for m in all_models() {
            for _ in 0..50 {
                let x = sample(&mut rng, 2, 0.0, 1.0);
                let y = sample(&mut rng, 3, 0.0, 1.0);
                let xi = sample(&mut rng, 2, -2.0, 2.0);
                let t = m.tangent(&x, &y, &xi).unwrap();
                for j in 0..2 {
                    let mut a = xi.clone();
                    let mut b = xi.clone();
                    a[j] += h;
                    b[j] -= h;
                    let sa = m.evaluate(&x, &y, &a).unwrap();
                    let sb = m.evaluate(&x, &y, &b).unwrap();
                    for i in 0..2 {
                        let fd = (sa[i] - sb[i]) / (2.0 * h);
                        assert!((fd - t[(i, j)]).abs() <= 1e-5 * (1.0 + fd.abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn strict_monotonicity_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for m in all_models() {
            for _ in 0..500 {
                let x = sample(&mut rng, 2, 0.0, 1.0);
                let y = sample(&mut rng, 3, 0.0, 1.0);
                let a = sample(&mut rng, 2, -3.0, 3.0);
                let b = sample(&mut rng, 2, -3.0, 3.0);
                let sa = m.evaluate(&x, &y, &a).unwrap();
                let sb = m.evaluate(&x, &y, &b).unwrap();
                let q: f64 = (0..2).map(|i| (sa[i] - sb[i]) * (a[i] - b[i])).sum();
                assert!(q > 0.0, "{:?}", m.family());
            }
        }
    }

    #[test]
    fn power_law_homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for m in all_models().into_iter().filter(|m| m.family() == Family::PowerLaw) {
            for _ in 0..100 {
                let x = sample(&mut rng, 2, 0.0, 1.0);
                let y = sample(&mut rng, 3, 0.0, 1.0);
                let xi = sample(&mut rng, 2, -3.0, 3.0);
                let t = rng.random_range(0.01..100.0);
                let base = m.evaluate(&x, &y, &xi).unwrap();
                let scaled: Vec<f64> = xi.iter().map(|v| v * t).collect();
                let got = m.evaluate(&x, &y, &scaled).unwrap();
                for (g, b) in got.iter().zip(&base) {
                    let want = t.powf(m.p() - 1.0) * b;
                    assert!((g - want).abs() <= 1e-12 * want.abs().max(1e-300));
                }
            }
        }
    }
}
