//! Spectral solver for the torus cell problem
//! `−div_R σ(x, y, ξ + grad_R u₁) = 0`.
//!
//! The unknowns are the corrector coefficients `c_k`, `0 < |k|∞ ≤ K`, kept
//! in the scaled form `s_k = 2π|Rᵀk| c_k`, so that the gradient field is
//! `G = ξ + Σ i ê_k s_k e_k` with unit directions `ê_k = Rᵀk / |Rᵀk|`. In
//! these variables the Galerkin system is as well conditioned as the
//! coefficient, whatever the small divisors `|Rᵀk|`.
//!
//! Every flux law derives from a potential, so the discrete problem is the
//! minimization of the grid energy `E(s) = mean_grid W(a(y), G(y))`, whose
//! gradient is `−i ê_k·σ̂_k`. Linear laws are solved by conjugate gradients;
//! nonlinear ones by linearized descent directions with a backtracking line
//! search.

mod law;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{Family, FluxModel};
use crate::projection::ProjectionMatrix;
use crate::torus::{slice_sample, CollocationGrid, FourierField, ModeIndexer, SpectrumJson};

pub use law::HomogenizedLaw;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Default dual-residual tolerance for linear laws.
pub const LINEAR_TOL: f64 = 1e-10;
/// Default dual-residual tolerance for nonlinear laws.
pub const NONLINEAR_TOL: f64 = 1e-8;

/// Operator frozen at the current iterate of a nonlinear solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Linearization {
    /// Secant (Kačanov) coefficient `a g(|G|²)`.
    Kacanov,
    /// Full tangent `∂σ/∂ξ(G)`.
    #[default]
    Newton,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellTolerances {
    /// Dual-norm stopping tolerance; defaults by family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub linearization: Linearization,
}

fn default_max_iters() -> usize {
    400
}

impl Default for CellTolerances {
    fn default() -> Self {
        Self { residual_tol: None, max_iters: default_max_iters(), linearization: Linearization::default() }
    }
}

impl CellTolerances {
    pub fn tol_for(&self, model: &FluxModel) -> f64 {
        self.residual_tol.unwrap_or(if model.is_linear() { LINEAR_TOL } else { NONLINEAR_TOL })
    }
}

/// One cell problem: frozen macroscopic point `x` and gradient `ξ`.
#[derive(Clone, Debug)]
pub struct CellProblem {
    pub r: ProjectionMatrix,
    pub model: Arc<FluxModel>,
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub bandlimit: i64,
    pub tolerances: CellTolerances,
}

#[derive(Clone, Debug)]
pub struct CellSolution {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    /// `μ(x)`; fields and fluxes below include it.
    pub mu: f64,
    /// Scalar corrector table `c_k` (zero at `k = 0`).
    pub corrector_coeffs: FourierField,
    /// `G = ξ + grad_R u₁`.
    pub gradient_field: FourierField,
    /// `σ(x, ·, G(·))` truncated to the bandlimit.
    pub flux_field: FourierField,
    pub hom_flux: Vec<f64>,
    /// `mean W(x, y, G(y))` over the collocation grid.
    pub cell_energy: f64,
    /// `(Σ |(Rᵀk)·σ̂_k|² / (4π²|Rᵀk|²))^{1/2}`
    pub residual_norm: f64,
    /// `max_k |(Rᵀk)·σ̂_k|`
    pub max_mode_residual: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub energy_history: Vec<f64>,
}

/// JSON form of a solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub hom_flux: Vec<f64>,
    pub cell_energy: f64,
    pub residual_norm: f64,
    pub max_mode_residual: f64,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient_spectrum: Option<SpectrumJson>,
}

impl CellSolution {
    pub fn summary(&self, with_spectrum: bool) -> CellSummary {
        CellSummary {
            x: self.x.clone(),
            xi: self.xi.clone(),
            hom_flux: self.hom_flux.clone(),
            cell_energy: self.cell_energy,
            residual_norm: self.residual_norm,
            max_mode_residual: self.max_mode_residual,
            iterations: self.iterations,
            gradient_spectrum: with_spectrum.then(|| SpectrumJson::from_field(&self.gradient_field)),
        }
    }

    /// `max_{k≠0} |(Rᵀk)·σ̂_k|` recomputed from the stored flux field.
    pub fn divergence_defect(&self, r: &ProjectionMatrix) -> f64 {
        let idx = *self.flux_field.indexer();
        let n = self.flux_field.value_dim();
        let mut k = vec![0; idx.m()];
        let mut w = vec![0.0; n];
        let mut worst = 0.0f64;
        for i in 0..idx.count() {
            if i == idx.zero() {
                continue;
            }
            idx.mode_into(i, &mut k);
            r.rt_k_into(&k, &mut w);
            let d: C = (0..n).map(|j| self.flux_field.component(j)[i] * w[j]).sum();
            worst = worst.max(d.norm());
        }
        worst
    }

    /// `(G − ξ)` restricted to the slice: `grad_R u₁(x, Rx/η)` at each point.
    pub fn corrector_trace(&self, r: &ProjectionMatrix, eta: f64, x_points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut osc = self.gradient_field.clone();
        let z = osc.indexer().zero();
        let count = osc.mode_count();
        let mut raw = osc.coeffs().to_vec();
        for j in 0..osc.value_dim() {
            raw[j * count + z] = ZERO;
        }
        osc = FourierField::from_coeffs(osc.m(), osc.bandlimit(), osc.value_dim(), raw)?;
        slice_sample(&osc, r, eta, x_points)
    }
}

/// Per-node operator weights of a linearized flux.
enum Weights {
    Scalar(Vec<f64>),
    Matrix(Vec<f64>),
}

struct State {
    grad: Vec<Vec<f64>>,
    flux: FourierField,
    g: Vec<C>,
    energy: f64,
    dual: f64,
}

/// Reusable workspace for cell solves at one bandlimit.
#[derive(Clone, Debug)]
pub struct CellSolver {
    r: ProjectionMatrix,
    model: Arc<FluxModel>,
    bandlimit: i64,
    tolerances: CellTolerances,
    grid: CollocationGrid,
    idx: ModeIndexer,
    e_hat: Vec<f64>,
    wnorm: Vec<f64>,
    coef: Vec<f64>,
}

impl CellSolver {
    pub fn new(r: &ProjectionMatrix, model: Arc<FluxModel>, bandlimit: i64, tolerances: CellTolerances) -> Result<Self> {
        if r.m() != model.m() || r.n() != model.n() {
            return Err(Error::Dimension(format!(
                "R is {}×{} but the model lives on Y^{} × R^{}",
                r.m(),
                r.n(),
                model.m(),
                model.n()
            )));
        }
        if bandlimit < 1 {
            return Err(Error::Config(format!("cell bandlimit must be >= 1, got {bandlimit}")));
        }
        let (m, n) = (r.m(), r.n());
        let idx = ModeIndexer::new(m, bandlimit);
        let mut e_hat = vec![0.0; idx.count() * n];
        let mut wnorm = vec![0.0; idx.count()];
        let mut k = vec![0; m];
        let mut w = vec![0.0; n];
        for i in 0..idx.count() {
            if i == idx.zero() {
                continue;
            }
            idx.mode_into(i, &mut k);
            r.rt_k_into(&k, &mut w);
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            let exact_zero = r.exact_rt_k_is_zero(&k);
            if exact_zero == Some(true) || (exact_zero.is_none() && norm <= 1e-13) || norm == 0.0 {
                return Err(Error::CriterionFailure { k: k.clone() });
            }
            wnorm[i] = norm;
            for j in 0..n {
                e_hat[i * n + j] = w[j] / norm;
            }
        }
        let grid = CollocationGrid::for_bandlimit(m, bandlimit, model.coefficient().bandlimit());
        let coef = model.coefficient_on_grid(&grid)?;
        Ok(Self { r: r.clone(), model, bandlimit, tolerances, grid, idx, e_hat, wnorm, coef })
    }

    pub fn model(&self) -> &Arc<FluxModel> {
        &self.model
    }

    pub fn projection(&self) -> &ProjectionMatrix {
        &self.r
    }

    pub fn bandlimit(&self) -> i64 {
        self.bandlimit
    }

    pub fn tolerances(&self) -> &CellTolerances {
        &self.tolerances
    }

    pub fn grid(&self) -> &CollocationGrid {
        &self.grid
    }

    fn n(&self) -> usize {
        self.r.n()
    }

    fn gradient_grid(&self, s: &[C], xi: Option<&[f64]>) -> Vec<Vec<f64>> {
        let (n, count, z) = (self.n(), self.idx.count(), self.idx.zero());
        let mut coeffs = vec![ZERO; n * count];
        for j in 0..n {
            for i in 0..count {
                coeffs[j * count + i] = if i == z {
                    C::new(xi.map_or(0.0, |x| x[j]), 0.0)
                } else {
                    C::new(0.0, self.e_hat[i * n + j]) * s[i]
                };
            }
        }
        let f = FourierField::from_coeffs(self.idx.m(), self.bandlimit, n, coeffs).expect("table shape");
        self.grid.to_grid(&f).expect("grid resolves the bandlimit")
    }

    /// Truncated flux table and the energy gradient `−i ê_k·σ̂_k`.
    fn project(&self, flux_grid: &[Vec<f64>]) -> (FourierField, Vec<C>) {
        let (n, count, z) = (self.n(), self.idx.count(), self.idx.zero());
        let flux = self.grid.from_grid(flux_grid, self.bandlimit).expect("grid shape");
        let mut g = vec![ZERO; count];
        for (i, gi) in g.iter_mut().enumerate() {
            if i == z {
                continue;
            }
            let d: C = (0..n).map(|j| flux.component(j)[i] * self.e_hat[i * n + j]).sum();
            *gi = C::new(0.0, -1.0) * d;
        }
        (flux, g)
    }

    fn coef_at(&self, node: usize) -> &[f64] {
        let d = self.model.coefficient_dim();
        &self.coef[node * d..(node + 1) * d]
    }

    fn evaluate(&self, s: &[C], xi: &[f64]) -> State {
        let n = self.n();
        let grad = self.gradient_grid(s, Some(xi));
        let nodes = self.grid.node_count();
        let mut flux_grid = vec![vec![0.0; nodes]; n];
        let mut gv = vec![0.0; n];
        let mut sv = vec![0.0; n];
        let mut energy = 0.0;
        for node in 0..nodes {
            for j in 0..n {
                gv[j] = grad[j][node];
            }
            let a = self.coef_at(node);
            self.model.flux_local(a, &gv, &mut sv);
            energy += self.model.potential_local(a, &gv);
            for j in 0..n {
                flux_grid[j][node] = sv[j];
            }
        }
        energy *= self.grid.weight();
        let (flux, g) = self.project(&flux_grid);
        let dual = norm(&g);
        State { grad, flux, g, energy, dual }
    }

    fn apply(&self, weights: &Weights, d: &[C]) -> Vec<C> {
        let n = self.n();
        let grad = self.gradient_grid(d, None);
        let nodes = self.grid.node_count();
        let mut out = vec![vec![0.0; nodes]; n];
        match weights {
            Weights::Scalar(w) => {
                for j in 0..n {
                    for node in 0..nodes {
                        out[j][node] = w[node] * grad[j][node];
                    }
                }
            }
            Weights::Matrix(w) => {
                for node in 0..nodes {
                    let b = &w[node * n * n..(node + 1) * n * n];
                    for i in 0..n {
                        out[i][node] = (0..n).map(|j| b[i * n + j] * grad[j][node]).sum();
                    }
                }
            }
        }
        self.project(&out).1
    }

    fn linearize(&self, state: &State, how: Linearization) -> Result<Weights> {
        let n = self.n();
        let nodes = self.grid.node_count();
        if self.model.family() == Family::LinearMatrix {
            return Ok(Weights::Matrix(self.coef.clone()));
        }
        if self.model.is_linear() {
            return Ok(Weights::Scalar(self.coef.clone()));
        }
        match how {
            Linearization::Kacanov => {
                let mut w: Vec<f64> = (0..nodes)
                    .map(|node| {
                        let s: f64 = (0..n).map(|j| state.grad[j][node].powi(2)).sum();
                        self.coef_at(node)[0] * self.model.secant_weight(s)
                    })
                    .collect();
                clamp_weights(&mut w);
                Ok(Weights::Scalar(w))
            }
            Linearization::Newton => {
                let mut w = vec![0.0; nodes * n * n];
                let mut gv = vec![0.0; n];
                let mut peak = 0.0f64;
                for node in 0..nodes {
                    for j in 0..n {
                        gv[j] = state.grad[j][node];
                    }
                    let b = &mut w[node * n * n..(node + 1) * n * n];
                    if self.model.tangent_local(self.coef_at(node), &gv, b).is_err() {
                        b.iter_mut().for_each(|v| *v = f64::NAN);
                    }
                    peak = peak.max((0..n).map(|i| b[i * n + i]).fold(0.0, f64::max));
                }
                let floor = if peak > 0.0 { peak * 1e-10 } else { 1.0 };
                for node in 0..nodes {
                    let b = &mut w[node * n * n..(node + 1) * n * n];
                    if b.iter().any(|v| !v.is_finite()) {
                        b.iter_mut().for_each(|v| *v = 0.0);
                        for i in 0..n {
                            b[i * n + i] = peak.max(1.0);
                        }
                    }
                    for i in 0..n {
                        b[i * n + i] += floor;
                    }
                }
                Ok(Weights::Matrix(w))
            }
        }
    }

    /// Conjugate gradients for `H d = rhs` from `d = 0`. Calls `observe`
    /// with `(d, residual)` after every iteration; stops when the residual
    /// norm drops below `target` or `observe` returns true.
    fn cg(
        &self,
        weights: &Weights,
        rhs: &[C],
        target: f64,
        max_iters: usize,
        mut observe: impl FnMut(&[C], &[C]) -> bool,
    ) -> (Vec<C>, usize) {
        let mut d = vec![ZERO; rhs.len()];
        let mut res = rhs.to_vec();
        let mut dir = res.clone();
        let mut rr = dot(&res, &res);
        let mut iters = 0;
        while rr.sqrt() > target && iters < max_iters {
            let hp = self.apply(weights, &dir);
            let php = dot(&dir, &hp);
            if !(php > 0.0) {
                break;
            }
            let alpha = rr / php;
            axpy(alpha, &dir, &mut d);
            axpy(-alpha, &hp, &mut res);
            iters += 1;
            if observe(&d, &res) {
                break;
            }
            let rr_new = dot(&res, &res);
            let beta = rr_new / rr;
            rr = rr_new;
            for (p, r) in dir.iter_mut().zip(&res) {
                *p = r + *p * beta;
            }
        }
        (d, iters)
    }

    fn max_mode(&self, g: &[C]) -> f64 {
        g.iter().zip(&self.wnorm).map(|(gi, w)| 2.0 * PI * w * gi.norm()).fold(0.0, f64::max)
    }

    fn converged(&self, state: &State, tol: f64) -> bool {
        state.dual <= tol && self.max_mode(&state.g) <= tol
    }

    /// Solve the cell problem at `(x, ξ)`. `warm` is an initial scaled
    /// coefficient table from a nearby solve.
    pub fn solve(&self, x: &[f64], xi: &[f64], warm: Option<&[C]>) -> Result<CellSolution> {
        self.solve_scaled(x, xi, self.model.mu(x), warm)
    }

    /// As [`solve`](Self::solve) with the modulation `μ` given explicitly.
    pub fn solve_scaled(&self, x: &[f64], xi: &[f64], mu: f64, warm: Option<&[C]>) -> Result<CellSolution> {
        let n = self.n();
        if xi.len() != n || x.len() != n {
            return Err(Error::Dimension(format!("x and ξ must lie in R^{n}")));
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite macroscopic gradient".into()));
        }
        let tol = self.tolerances.tol_for(&self.model) / mu.max(1.0);
        let count = self.idx.count();
        let mut s = match warm {
            Some(w) if w.len() == count => w.to_vec(),
            _ => vec![ZERO; count],
        };
        s[self.idx.zero()] = ZERO;
        let mut residuals = Vec::new();
        let mut energies = Vec::new();
        let mut state = self.evaluate(&s, xi);
        residuals.push(state.dual);
        energies.push(state.energy);
        let mut iterations = 0;

        if self.model.is_linear() {
            if !self.converged(&state, tol) {
                let weights = self.linearize(&state, Linearization::Kacanov)?;
                let rhs: Vec<C> = state.g.iter().map(|v| -v).collect();
                let e0 = state.energy;
                let g0 = state.g.clone();
                let (d, it) = self.cg(&weights, &rhs, 0.0, self.tolerances.max_iters, |d, res| {
                    // E(s + d) = E(s) + ⟨g, d⟩ + ½⟨Hd, d⟩ with Hd = −g − res
                    let e = e0 + 0.5 * dot(&g0, d) - 0.5 * dot(d, res);
                    residuals.push(norm(res));
                    energies.push(e);
                    let worst = res.iter().zip(&self.wnorm).map(|(r, w)| 2.0 * PI * w * r.norm()).fold(0.0, f64::max);
                    norm(res) <= 0.05 * tol && worst <= 0.05 * tol
                });
                iterations = it;
                axpy(1.0, &d, &mut s);
                state = self.evaluate(&s, xi);
                *residuals.last_mut().expect("history is seeded") = state.dual;
                *energies.last_mut().expect("history is seeded") = state.energy;
            }
        } else {
            let mut bb_prev: Option<(Vec<C>, Vec<C>)> = None;
            while !self.converged(&state, tol) {
                if iterations >= self.tolerances.max_iters {
                    break;
                }
                iterations += 1;
                let weights = self.linearize(&state, self.tolerances.linearization)?;
                let rhs: Vec<C> = state.g.iter().map(|v| -v).collect();
                let inner = (1e-3 * state.dual).max(0.05 * tol).min(0.1 * state.dual);
                let (mut d, _) = self.cg(&weights, &rhs, inner, 200, |_, _| false);
                let mut slope = dot(&state.g, &d);
                if !(slope < 0.0) {
                    let alpha = bb_step(&bb_prev).unwrap_or(1.0 / self.model.coefficient_bounds().1);
                    d = state.g.iter().map(|v| -v * alpha).collect();
                    slope = dot(&state.g, &d);
                }
                let Some((t, next)) = self.line_search(&s, &d, slope, &state, xi) else {
                    let alpha = bb_step(&bb_prev).unwrap_or(1.0 / self.model.coefficient_bounds().1);
                    let d: Vec<C> = state.g.iter().map(|v| -v * alpha).collect();
                    let slope = dot(&state.g, &d);
                    match self.line_search(&s, &d, slope, &state, xi) {
                        Some((t, next)) => {
                            let step: Vec<C> = d.iter().map(|v| v * t).collect();
                            bb_prev = Some((step.clone(), sub(&next.g, &state.g)));
                            axpy(1.0, &step, &mut s);
                            state = next;
                            residuals.push(state.dual);
                            energies.push(state.energy);
                            continue;
                        }
                        None => break,
                    }
                };
                let step: Vec<C> = d.iter().map(|v| v * t).collect();
                bb_prev = Some((step.clone(), sub(&next.g, &state.g)));
                axpy(1.0, &step, &mut s);
                state = next;
                residuals.push(state.dual);
                energies.push(state.energy);
            }
        }

        if !self.converged(&state, tol) {
            return Err(Error::CellNonConvergence {
                iterations,
                last_residual: state.dual * mu,
                history: residuals.iter().map(|v| v * mu).collect(),
            });
        }
        Ok(self.assemble(x, xi, mu, &s, state, iterations, residuals, energies))
    }

    /// Backtracking on the energy; near convergence, where the energy
    /// change is below rounding, a decrease of the dual residual is
    /// accepted instead.
    fn line_search(&self, s: &[C], d: &[C], slope: f64, state: &State, xi: &[f64]) -> Option<(f64, State)> {
        let mut t = 1.0;
        let flat = slope.abs() <= 1e-13 * state.energy.abs().max(1e-300);
        for _ in 0..40 {
            let mut trial = s.to_vec();
            axpy(t, d, &mut trial);
            let next = self.evaluate(&trial, xi);
            let armijo = next.energy <= state.energy + 1e-4 * t * slope;
            let residual_drop = next.dual < (1.0 - 1e-4 * t) * state.dual;
            if (armijo && (!flat || residual_drop)) || (flat && residual_drop) {
                return Some((t, next));
            }
            t *= 0.5;
        }
        None
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        &self,
        x: &[f64],
        xi: &[f64],
        mu: f64,
        s: &[C],
        state: State,
        iterations: usize,
        residuals: Vec<f64>,
        energies: Vec<f64>,
    ) -> CellSolution {
        let (n, count, z) = (self.n(), self.idx.count(), self.idx.zero());
        let (m, k) = (self.idx.m(), self.bandlimit);
        let corr: Vec<C> =
            (0..count).map(|i| if i == z { ZERO } else { s[i] / (2.0 * PI * self.wnorm[i]) }).collect();
        let mut grad = vec![ZERO; n * count];
        for j in 0..n {
            for i in 0..count {
                grad[j * count + i] =
                    if i == z { C::new(xi[j], 0.0) } else { C::new(0.0, self.e_hat[i * n + j]) * s[i] };
            }
        }
        let max_mode = self.max_mode(&state.g) * mu;
        let mut flux = state.flux;
        flux.scale(mu);
        let hom_flux: Vec<f64> = (0..n).map(|j| flux.component(j)[z].re).collect();
        CellSolution {
            x: x.to_vec(),
            xi: xi.to_vec(),
            mu,
            corrector_coeffs: FourierField::from_coeffs(m, k, 1, corr).expect("table shape"),
            gradient_field: FourierField::from_coeffs(m, k, n, grad).expect("table shape"),
            flux_field: flux,
            hom_flux,
            cell_energy: state.energy * mu,
            residual_norm: state.dual * mu,
            max_mode_residual: max_mode,
            iterations,
            residual_history: residuals.iter().map(|v| v * mu).collect(),
            energy_history: energies.iter().map(|v| v * mu).collect(),
        }
    }

    /// Scaled coefficient table `s_k` of a solution, for warm starts.
    pub fn scaled_coefficients(&self, sol: &CellSolution) -> Vec<C> {
        let z = self.idx.zero();
        sol.corrector_coeffs
            .component(0)
            .iter()
            .enumerate()
            .map(|(i, c)| if i == z { ZERO } else { c * (2.0 * PI * self.wnorm[i]) })
            .collect()
    }

    /// `A_hom` for a linear law: columns are `σ_hom(e_j)` at `x`.
    pub fn effective_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        if !self.model.is_linear() {
            return Err(Error::InvalidModel("the effective matrix exists only for linear families".into()));
        }
        let n = self.n();
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let sol = self.solve(x, &e, None)?;
            for i in 0..n {
                a[(i, j)] = sol.hom_flux[i];
            }
        }
        Ok(a)
    }
}

fn clamp_weights(w: &mut [f64]) {
    let finite_max = w.iter().cloned().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let floor = if finite_max > 0.0 { finite_max * 1e-10 } else { 1.0 };
    let cap = if finite_max > 0.0 { finite_max } else { 1.0 };
    for v in w.iter_mut() {
        if !v.is_finite() {
            *v = cap;
        }
        *v = v.max(floor);
    }
}

fn bb_step(prev: &Option<(Vec<C>, Vec<C>)>) -> Option<f64> {
    let (ds, dg) = prev.as_ref()?;
    let num = dot(ds, ds);
    let den = dot(ds, dg);
    (den > 0.0 && num > 0.0).then(|| num / den)
}

fn dot(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

fn norm(a: &[C]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[C], y: &mut [C]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi * alpha;
    }
}

fn sub(a: &[C], b: &[C]) -> Vec<C> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Solve one cell problem.
pub fn solve_cell(problem: &CellProblem) -> Result<CellSolution> {
    let solver = CellSolver::new(&problem.r, problem.model.clone(), problem.bandlimit, problem.tolerances)?;
    solver.solve(&problem.x, &problem.xi, None)
}

/// `σ_hom(x, ξ)`, the torus mean of the cell flux.
pub fn homogenized_flux(
    r: &ProjectionMatrix,
    model: Arc<FluxModel>,
    x: &[f64],
    xi: &[f64],
    bandlimit: i64,
    tolerances: CellTolerances,
) -> Result<Vec<f64>> {
    Ok(CellSolver::new(r, model, bandlimit, tolerances)?.solve(x, xi, None)?.hom_flux)
}

#[cfg(test)]
mod tests;
