//! Finite elements for the macroscopic problems `−div σ(x, ·, ∇u) = f` on
//! `Ω ⊂ Rⁿ`, `n ∈ {1, 2}`, with homogeneous Dirichlet data: P1 in 1D, Q1
//! in 2D, damped Newton on the convex discrete energy.

pub mod linalg;
pub mod mesh;
mod norms;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::HomogenizedLaw;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::flux::FluxModel;
use crate::projection::ProjectionMatrix;

pub use linalg::System;
pub use mesh::Mesh;
pub use norms::{integrate_common, lp_error, lp_norm, lp_pointwise_and_projected, Quantity};

/// Minimum elements per oscillation length `η` for fine solves.
pub const MIN_ELEMENTS_PER_ETA: usize = 20;

const BLOCK: usize = 1 << 14;

/// Right-hand side density.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Expr(Expr),
    PerElement(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct MacroProblem {
    pub mesh: Mesh,
    pub source: Source,
    /// Newton stopping tolerance on the discrete dual norm of the residual.
    pub residual_tol: f64,
    pub max_iters: usize,
    /// Sample coefficients on 4 sub-cells per axis, 3 Gauss points each.
    pub oversample: bool,
}

impl MacroProblem {
    pub fn new(mesh: Mesh, source: Expr) -> Self {
        Self { mesh, source: Source::Expr(source), residual_tol: 1e-9, max_iters: 100, oversample: false }
    }

    fn with_mesh(&self, mesh: Mesh) -> Self {
        Self { mesh, ..self.clone() }
    }

    fn source_at(&self, e: usize, x: &[f64], mesh: &Mesh) -> f64 {
        match &self.source {
            Source::Expr(f) => f.eval(x),
            Source::PerElement(v) => {
                // per-element values live on the problem mesh; refined meshes look them up by position
                let (pe, _) = self.mesh.locate(x);
                if mesh == &self.mesh {
                    v[e]
                } else {
                    v[pe]
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Flavor {
    Homogenized,
    Fine { eta: f64 },
    Analytic,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NewtonDiagnostics {
    pub residual: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// Accepted step lengths.
    pub step_history: Vec<f64>,
    /// `∫W(∇u_h) − ∫f u_h` at each accepted iterate.
    pub energy_history: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MacroSolution {
    pub flavor: Flavor,
    pub mesh: Mesh,
    pub values: Vec<f64>,
    pub diagnostics: NewtonDiagnostics,
}

impl MacroSolution {
    /// Nodal interpolant of `f`.
    pub fn from_function(mesh: Mesh, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..mesh.node_count()).map(|i| f(&mesh.node_coord(i))).collect();
        Self { flavor: Flavor::Analytic, mesh, values, diagnostics: NewtonDiagnostics::default() }
    }

    /// Value and gradient at local coordinates `t` of element `e`.
    pub fn local(&self, e: usize, t: &[f64]) -> (f64, Vec<f64>) {
        let nodes = self.mesh.element_nodes(e);
        let h: Vec<f64> = (0..self.mesh.n()).map(|a| self.mesh.h(a)).collect();
        let vals = mesh::shape_values(t);
        let grads = mesh::shape_gradients(t, &h);
        let mut v = 0.0;
        let mut g = vec![0.0; self.mesh.n()];
        for (i, &node) in nodes.iter().enumerate() {
            let u = self.values[node];
            v += vals[i] * u;
            for a in 0..g.len() {
                g[a] += grads[i][a] * u;
            }
        }
        (v, g)
    }

    pub fn value_at(&self, x: &[f64]) -> f64 {
        let (e, t) = self.mesh.locate(x);
        self.local(e, &t).0
    }

    pub fn gradient_at(&self, x: &[f64]) -> Vec<f64> {
        let (e, t) = self.mesh.locate(x);
        self.local(e, &t).1
    }

    /// Gradient at each element centre.
    pub fn element_gradients(&self) -> Vec<Vec<f64>> {
        let c = vec![0.5; self.mesh.n()];
        (0..self.mesh.element_count()).map(|e| self.local(e, &c).1).collect()
    }

    /// `x[, y], value` rows, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(if self.mesh.n() == 1 { "x,value\n" } else { "x1,x2,value\n" });
        for (i, v) in self.values.iter().enumerate() {
            for c in self.mesh.node_coord(i) {
                let _ = write!(out, "{c:.16e},");
            }
            let _ = writeln!(out, "{v:.16e}");
        }
        out
    }

    pub fn max_nodal_error(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        (0..self.mesh.node_count())
            .map(|i| (self.values[i] - f(&self.mesh.node_coord(i))).abs())
            .fold(0.0, f64::max)
    }
}

/// Flux law at quadrature points.
trait PointLaw: Sync {
    /// Writes `σ` and (if asked) the row-major tangent, returns the
    /// potential.
    fn eval(&self, point: usize, x: &[f64], xi: &[f64], flux: &mut [f64], tangent: Option<&mut [f64]>) -> Result<f64>;
}

struct HomogenizedPoints<'a> {
    law: &'a HomogenizedLaw,
}

impl PointLaw for HomogenizedPoints<'_> {
    fn eval(&self, _: usize, x: &[f64], xi: &[f64], flux: &mut [f64], tangent: Option<&mut [f64]>) -> Result<f64> {
        let model = self.law.solver().model();
        let mu = model.mu(x);
        let s = self.law.unit_flux(xi)?;
        for (f, v) in flux.iter_mut().zip(&s) {
            *f = mu * v;
        }
        if let Some(t) = tangent {
            let n = xi.len();
            if let Some(a) = self.law.effective_matrix() {
                for i in 0..n {
                    for j in 0..n {
                        t[i * n + j] = mu * a[(i, j)];
                    }
                }
            } else {
                let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                let h = 1e-6 * norm.max(1.0);
                for j in 0..n {
                    let mut a = xi.to_vec();
                    let mut b = xi.to_vec();
                    a[j] += h;
                    b[j] -= h;
                    let sa = self.law.unit_flux(&a)?;
                    let sb = self.law.unit_flux(&b)?;
                    for i in 0..n {
                        t[i * n + j] = mu * (sa[i] - sb[i]) / (2.0 * h);
                    }
                }
            }
        }
        Ok(mu * self.law.unit_energy(xi)?)
    }
}

struct FinePoints<'a> {
    model: &'a FluxModel,
    coef: Vec<f64>,
    mu: Vec<f64>,
}

impl PointLaw for FinePoints<'_> {
    fn eval(&self, point: usize, _: &[f64], xi: &[f64], flux: &mut [f64], tangent: Option<&mut [f64]>) -> Result<f64> {
        let d = self.model.coefficient_dim();
        let a = &self.coef[point * d..(point + 1) * d];
        let mu = self.mu[point];
        self.model.flux_local(a, xi, flux);
        flux.iter_mut().for_each(|v| *v *= mu);
        if let Some(t) = tangent {
            self.model.tangent_local(a, xi, t)?;
            t.iter_mut().for_each(|v| *v *= mu);
        }
        Ok(mu * self.model.potential_local(a, xi))
    }
}

/// Reference quadrature on one element.
struct Quadrature {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    shape_vals: Vec<Vec<f64>>,
    shape_grads: Vec<Vec<Vec<f64>>>,
}

impl Quadrature {
    fn new(mesh: &Mesh, oversample: bool) -> Self {
        let rule = mesh::reference_rule(oversample);
        let h: Vec<f64> = (0..mesh.n()).map(|a| mesh.h(a)).collect();
        let vol = mesh.element_volume();
        let (points, weights): (Vec<Vec<f64>>, Vec<f64>) = if mesh.n() == 1 {
            rule.iter().map(|&(t, w)| (vec![t], w * vol)).unzip()
        } else {
            rule.iter().flat_map(|&(s, w)| rule.iter().map(move |&(r, v)| (vec![s, r], w * v * vol))).unzip()
        };
        let shape_vals = points.iter().map(|t| mesh::shape_values(t)).collect();
        let shape_grads = points.iter().map(|t| mesh::shape_gradients(t, &h)).collect();
        Self { points, weights, shape_vals, shape_grads }
    }

    fn len(&self) -> usize {
        self.weights.len()
    }

    fn position(&self, mesh: &Mesh, e: usize, q: usize) -> Vec<f64> {
        let o = mesh.element_origin(e);
        (0..mesh.n()).map(|a| o[a] + self.points[q][a] * mesh.h(a)).collect()
    }
}

struct ElementOut {
    residual: Vec<f64>,
    tangent: Vec<f64>,
    energy: f64,
}

struct Assembler<'a> {
    problem: &'a MacroProblem,
    quad: Quadrature,
    laplacian: System,
    load: Vec<f64>,
    law: &'a dyn PointLaw,
}

impl<'a> Assembler<'a> {
    fn new(problem: &'a MacroProblem, law: &'a dyn PointLaw) -> Self {
        let mesh = &problem.mesh;
        let quad = Quadrature::new(mesh, problem.oversample);
        let npe = mesh.nodes_per_element();
        let mut laplacian = System::zeros(mesh);
        let mut load = vec![0.0; mesh.node_count()];
        for e in 0..mesh.element_count() {
            let nodes = mesh.element_nodes(e);
            for q in 0..quad.len() {
                let x = quad.position(mesh, e, q);
                let f = problem.source_at(e, &x, mesh);
                let w = quad.weights[q];
                for i in 0..npe {
                    load[nodes[i]] += w * f * quad.shape_vals[q][i];
                    for j in 0..npe {
                        let g: f64 =
                            quad.shape_grads[q][i].iter().zip(&quad.shape_grads[q][j]).map(|(a, b)| a * b).sum();
                        laplacian.add(nodes[i], nodes[j], w * g);
                    }
                }
            }
        }
        for node in 0..mesh.node_count() {
            if mesh.is_boundary(node) {
                laplacian.pin(node);
                load[node] = 0.0;
            }
        }
        Self { problem, quad, laplacian, load, law }
    }

    fn element(&self, e: usize, u: &[f64], with_tangent: bool) -> Result<ElementOut> {
        let mesh = &self.problem.mesh;
        let n = mesh.n();
        let npe = mesh.nodes_per_element();
        let nodes = mesh.element_nodes(e);
        let mut out = ElementOut {
            residual: vec![0.0; npe],
            tangent: if with_tangent { vec![0.0; npe * npe] } else { Vec::new() },
            energy: 0.0,
        };
        let mut flux = vec![0.0; n];
        let mut tan = vec![0.0; n * n];
        let nq = self.quad.len();
        for q in 0..nq {
            let g = &self.quad.shape_grads[q];
            let mut xi = vec![0.0; n];
            for (i, &node) in nodes.iter().enumerate() {
                for a in 0..n {
                    xi[a] += g[i][a] * u[node];
                }
            }
            let x = self.quad.position(mesh, e, q);
            let w = self.quad.weights[q];
            let wq = self.law.eval(e * nq + q, &x, &xi, &mut flux, with_tangent.then_some(&mut tan[..]))?;
            out.energy += w * wq;
            for i in 0..npe {
                out.residual[i] += w * (0..n).map(|a| flux[a] * g[i][a]).sum::<f64>();
                if with_tangent {
                    for j in 0..npe {
                        let mut v = 0.0;
                        for a in 0..n {
                            for b in 0..n {
                                v += g[i][a] * tan[a * n + b] * g[j][b];
                            }
                        }
                        out.tangent[i * npe + j] += w * v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Residual, energy and (optionally) the tangent system.
    fn assemble(&self, u: &[f64], with_tangent: bool) -> Result<(Vec<f64>, f64, Option<System>)> {
        let mesh = &self.problem.mesh;
        let ne = mesh.element_count();
        let mut residual: Vec<f64> = self.load.iter().map(|v| -v).collect();
        let mut energy = -self.load.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
        let mut system = with_tangent.then(|| System::zeros(mesh));
        let mut start = 0;
        while start < ne {
            let end = (start + BLOCK).min(ne);
            let outs: Vec<Result<ElementOut>> =
                (start..end).into_par_iter().map(|e| self.element(e, u, with_tangent)).collect();
            for (e, out) in (start..end).zip(outs) {
                let out = out?;
                let nodes = mesh.element_nodes(e);
                let npe = nodes.len();
                energy += out.energy;
                for i in 0..npe {
                    residual[nodes[i]] += out.residual[i];
                    if let Some(s) = system.as_mut() {
                        for j in 0..npe {
                            s.add(nodes[i], nodes[j], out.tangent[i * npe + j]);
                        }
                    }
                }
            }
            start = end;
        }
        for node in 0..mesh.node_count() {
            if mesh.is_boundary(node) {
                residual[node] = 0.0;
                if let Some(s) = system.as_mut() {
                    s.pin(node);
                }
            }
        }
        Ok((residual, energy, system))
    }

    fn dual_norm(&self, r: &[f64]) -> f64 {
        let z = self.laplacian.solve(r, 1e-12);
        r.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    }

    fn newton(&self, flavor: Flavor) -> Result<MacroSolution> {
        let mesh = &self.problem.mesh;
        let mut u = self.laplacian.solve(&self.load, 1e-12);
        let mut diag = NewtonDiagnostics::default();
        let (mut res, mut energy, _) = self.assemble(&u, false)?;
        let mut dual = self.dual_norm(&res);
        diag.residual_history.push(dual);
        diag.energy_history.push(energy);
        let tol = self.problem.residual_tol;
        while dual > tol {
            if diag.iterations >= self.problem.max_iters {
                return Err(Error::NewtonStagnation {
                    iterations: diag.iterations,
                    last_residual: dual,
                    step_history: diag.step_history,
                });
            }
            diag.iterations += 1;
            let (_, _, system) = self.assemble(&u, true)?;
            let mut system = system.expect("tangent requested");
            regularize(&mut system, &self.laplacian, mesh);
            let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
            let mut d = system.solve(&rhs, 1e-12);
            let mut slope: f64 = res.iter().zip(&d).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) || d.iter().any(|v| !v.is_finite()) {
                d = self.laplacian.solve(&rhs, 1e-12);
                slope = res.iter().zip(&d).map(|(a, b)| a * b).sum();
            }
            let mut accepted = None;
            let flat = slope.abs() <= 1e-13 * energy.abs().max(1e-300);
            let mut t = 1.0;
            for _ in 0..40 {
                let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                let (r2, e2, _) = self.assemble(&trial, false)?;
                let dual2 = self.dual_norm(&r2);
                let armijo = e2 <= energy + 1e-4 * t * slope;
                let drop = dual2 < (1.0 - 1e-4 * t) * dual;
                if (armijo && (!flat || drop)) || (flat && drop) {
                    accepted = Some((trial, r2, e2, dual2));
                    break;
                }
                t *= 0.5;
            }
            let Some((trial, r2, e2, dual2)) = accepted else {
                return Err(Error::NewtonStagnation {
                    iterations: diag.iterations,
                    last_residual: dual,
                    step_history: diag.step_history,
                });
            };
            u = trial;
            res = r2;
            energy = e2;
            dual = dual2;
            diag.step_history.push(t);
            diag.residual_history.push(dual);
            diag.energy_history.push(energy);
        }
        diag.residual = dual;
        Ok(MacroSolution { flavor, mesh: mesh.clone(), values: u, diagnostics: diag })
    }
}

/// Add `τ L` with `τ = 1e-10 · max|diag|/max|diag L|` so degenerate tangents
/// (e.g. `p > 2` at vanishing gradients) stay invertible.
fn regularize(system: &mut System, laplacian: &System, mesh: &Mesh) {
    let diag_max = |s: &System| match s {
        System::Tridiagonal { diag, .. } => diag.iter().cloned().fold(0.0, f64::max),
        System::Sparse(m) => m.diagonal().iter().cloned().fold(0.0, f64::max),
    };
    let ls = diag_max(laplacian);
    let tau = 1e-10 * diag_max(system).max(f64::MIN_POSITIVE) / ls;
    match (system, laplacian) {
        (System::Tridiagonal { sub, diag, sup }, System::Tridiagonal { sub: ls, diag: ld, sup: lu }) => {
            for i in 0..diag.len() {
                if mesh.is_boundary(i) {
                    continue;
                }
                sub[i] += tau * ls[i];
                diag[i] += tau * ld[i];
                sup[i] += tau * lu[i];
            }
        }
        (System::Sparse(a), System::Sparse(l)) => {
            for r in 0..a.row_ptr.len() - 1 {
                if mesh.is_boundary(r) {
                    continue;
                }
                for i in a.row_ptr[r]..a.row_ptr[r + 1] {
                    a.vals[i] += tau * l.vals[i];
                }
            }
        }
        _ => unreachable!("system and Laplacian share the mesh"),
    }
}

/// Solve the homogenized problem with `σ_hom` from cached cell solves.
pub fn solve_homogenized(problem: &MacroProblem, law: &HomogenizedLaw) -> Result<MacroSolution> {
    if problem.mesh.n() != law.solver().model().n() {
        return Err(Error::Dimension(format!(
            "macro domain is {}-dimensional, model has n = {}",
            problem.mesh.n(),
            law.solver().model().n()
        )));
    }
    let points = HomogenizedPoints { law };
    Assembler::new(problem, &points).newton(Flavor::Homogenized)
}

/// Elements per axis for a fine solve: the smallest multiple of the problem
/// mesh with at least `refinement` elements per `η`.
pub fn fine_cells(problem: &MacroProblem, eta: f64, refinement: usize) -> Result<Vec<usize>> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Config(format!("eta must be positive, got {eta}")));
    }
    let mesh = &problem.mesh;
    let cells: Vec<usize> = (0..mesh.n())
        .map(|a| {
            let want = (refinement as f64 * mesh.extents[a] / eta).ceil() as usize;
            mesh.cells[a] * want.div_ceil(mesh.cells[a]).max(1)
        })
        .collect();
    for a in 0..mesh.n() {
        let required = (MIN_ELEMENTS_PER_ETA as f64 * mesh.extents[a] / eta).ceil() as usize;
        if cells[a] < required {
            return Err(Error::UnderResolved { required, actual: cells[a] });
        }
    }
    Ok(cells)
}

/// Solve the oscillating problem with `σ(x, Rx/η, ∇u_η)` sampled at the
/// quadrature points.
pub fn solve_fine(
    problem: &MacroProblem,
    r: &ProjectionMatrix,
    model: &FluxModel,
    eta: f64,
    refinement: usize,
) -> Result<MacroSolution> {
    if problem.mesh.n() != model.n() || r.n() != model.n() || r.m() != model.m() {
        return Err(Error::Dimension("macro domain, projection and model dimensions disagree".into()));
    }
    let cells = fine_cells(problem, eta, refinement)?;
    let fine = problem.with_mesh(Mesh::new(problem.mesh.extents.clone(), cells)?);
    let quad = Quadrature::new(&fine.mesh, fine.oversample);
    let nq = quad.len();
    let total = fine.mesh.element_count() * nq;
    let d = model.coefficient_dim();
    let sampled: Vec<(Vec<f64>, f64)> = (0..total)
        .into_par_iter()
        .map(|p| {
            let x = quad.position(&fine.mesh, p / nq, p % nq);
            let y: Vec<f64> = r.apply(&x).iter().map(|v| (v / eta).rem_euclid(1.0)).collect();
            (model.coefficient_at(&y), model.mu(&x))
        })
        .collect();
    let mut coef = Vec::with_capacity(total * d);
    let mut mu = Vec::with_capacity(total);
    for (c, m) in sampled {
        coef.extend(c);
        mu.push(m);
    }
    let points = FinePoints { model, coef, mu };
    Assembler::new(&fine, &points).newton(Flavor::Fine { eta })
}

/// Spectral-free check of the weak residual: re-assembles `∫σ(∇u)·∇φ − fφ`
/// for the fine problem and returns its dual norm.
pub fn fine_residual(
    problem: &MacroProblem,
    r: &ProjectionMatrix,
    model: &FluxModel,
    sol: &MacroSolution,
) -> Result<f64> {
    let Flavor::Fine { eta } = sol.flavor else {
        return Err(Error::Config("fine_residual needs a fine solution".into()));
    };
    let fine = problem.with_mesh(sol.mesh.clone());
    let quad = Quadrature::new(&fine.mesh, fine.oversample);
    let nq = quad.len();
    let mut coef = Vec::new();
    let mut mu = Vec::new();
    for p in 0..fine.mesh.element_count() * nq {
        let x = quad.position(&fine.mesh, p / nq, p % nq);
        let y: Vec<f64> = r.apply(&x).iter().map(|v| (v / eta).rem_euclid(1.0)).collect();
        coef.extend(model.coefficient_at(&y));
        mu.push(model.mu(&x));
    }
    let points = FinePoints { model, coef, mu };
    let asm = Assembler::new(&fine, &points);
    let (res, _, _) = asm.assemble(&sol.values, false)?;
    Ok(asm.dual_norm(&res))
}

/// Config form of the macroscopic problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroSpec {
    /// Extents `(L₁[, L₂])` of `Ω = (0, L₁) × (0, L₂)`.
    #[serde(default = "default_domain")]
    pub domain: Vec<f64>,
    /// Elements per axis.
    pub mesh_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Expr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_values: Option<Vec<f64>>,
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    #[serde(default = "default_newton_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub oversample: bool,
}

fn default_domain() -> Vec<f64> {
    vec![1.0]
}

fn default_residual_tol() -> f64 {
    1e-9
}

fn default_newton_iters() -> usize {
    100
}

impl MacroSpec {
    pub fn build(&self) -> Result<MacroProblem> {
        let mesh = Mesh::uniform(self.domain.clone(), self.mesh_size)?;
        let source = match (&self.source, &self.source_values) {
            (Some(_), Some(_)) => return Err(Error::Config("give either source or source_values, not both".into())),
            (Some(e), None) => {
                if e.arity() > mesh.n() {
                    return Err(Error::Config(format!("source reads x{} on an {}-dimensional domain", e.arity(), mesh.n())));
                }
                Source::Expr(e.clone())
            }
            (None, Some(v)) => {
                if v.len() != mesh.element_count() || v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Config(format!(
                        "source_values needs {} finite entries, got {}",
                        mesh.element_count(),
                        v.len()
                    )));
                }
                Source::PerElement(v.clone())
            }
            (None, None) => Source::Expr(Expr::constant(1.0)),
        };
        if !(self.residual_tol > 0.0) {
            return Err(Error::Config("residual_tol must be positive".into()));
        }
        Ok(MacroProblem { mesh, source, residual_tol: self.residual_tol, max_iters: self.max_iters, oversample: self.oversample })
    }
}
