//! `σ_hom(x, ξ)` on demand, with cached cell solutions.
//!
//! `μ(x)` factors out of the cell problem, so solutions are cached for
//! `μ = 1` and keyed on `ξ` alone. Linear laws are tabulated once as the
//! effective matrix; unregularized power laws are solved once per gradient
//! direction and scaled by `|ξ|^{p−1}`.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{CellSolution, CellSolver};
use crate::error::Result;
use crate::flux::Family;
use crate::torus::FourierField;

const QUANTUM: f64 = 1e-12;

enum Kind {
    Linear { matrix: DMatrix<f64>, oscillating: Vec<FourierField> },
    Homogeneous { p: f64 },
    General,
}

struct Entry {
    solution: Arc<CellSolution>,
    oscillating: FourierField,
}

pub struct HomogenizedLaw {
    solver: CellSolver,
    kind: Kind,
    cache: Mutex<BTreeMap<Vec<i64>, Arc<Entry>>>,
    solves: AtomicUsize,
}

fn oscillating_part(g: &FourierField) -> FourierField {
    let z = g.indexer().zero();
    let count = g.mode_count();
    let mut raw = g.coeffs().to_vec();
    for j in 0..g.value_dim() {
        raw[j * count + z] = Complex64::new(0.0, 0.0);
    }
    FourierField::from_coeffs(g.m(), g.bandlimit(), g.value_dim(), raw).expect("same shape")
}

fn key(v: &[f64]) -> Vec<i64> {
    v.iter().map(|x| (x / QUANTUM).round() as i64).collect()
}

impl HomogenizedLaw {
    pub fn new(solver: CellSolver) -> Result<Self> {
        let model = solver.model().clone();
        let n = model.n();
        let origin = vec![0.0; n];
        let kind = if model.is_linear() {
            let mut matrix = DMatrix::zeros(n, n);
            let mut oscillating = Vec::with_capacity(n);
            for j in 0..n {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                let sol = solver.solve_scaled(&origin, &e, 1.0, None)?;
                for i in 0..n {
                    matrix[(i, j)] = sol.hom_flux[i];
                }
                oscillating.push(oscillating_part(&sol.gradient_field));
            }
            Kind::Linear { matrix, oscillating }
        } else if model.family() == Family::PowerLaw {
            Kind::Homogeneous { p: model.p() }
        } else {
            Kind::General
        };
        let solves = if model.is_linear() { n } else { 0 };
        Ok(Self { solver, kind, cache: Mutex::new(BTreeMap::new()), solves: AtomicUsize::new(solves) })
    }

    pub fn solver(&self) -> &CellSolver {
        &self.solver
    }

    /// `A_hom` for linear laws (at `μ = 1`).
    pub fn effective_matrix(&self) -> Option<&DMatrix<f64>> {
        match &self.kind {
            Kind::Linear { matrix, .. } => Some(matrix),
            _ => None,
        }
    }

    /// Number of cell problems solved so far.
    pub fn cell_solves(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    fn entry(&self, xi: &[f64]) -> Result<Arc<Entry>> {
        let k = key(xi);
        let warm = {
            let cache = self.cache.lock().expect("cache lock");
            if let Some(e) = cache.get(&k) {
                return Ok(e.clone());
            }
            cache
                .values()
                .min_by(|a, b| {
                    let da: f64 = a.solution.xi.iter().zip(xi).map(|(p, q)| (p - q).powi(2)).sum();
                    let db: f64 = b.solution.xi.iter().zip(xi).map(|(p, q)| (p - q).powi(2)).sum();
                    da.total_cmp(&db)
                })
                .map(|e| self.solver.scaled_coefficients(&e.solution))
        };
        let origin = vec![0.0; xi.len()];
        let sol = self.solver.solve_scaled(&origin, xi, 1.0, warm.as_deref())?;
        self.solves.fetch_add(1, Ordering::Relaxed);
        let entry = Arc::new(Entry { oscillating: oscillating_part(&sol.gradient_field), solution: Arc::new(sol) });
        self.cache.lock().expect("cache lock").insert(k, entry.clone());
        Ok(entry)
    }

    /// `σ_hom` at `μ = 1`.
    pub fn unit_flux(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        match &self.kind {
            Kind::Linear { matrix, .. } => Ok((0..xi.len()).map(|i| (0..xi.len()).map(|j| matrix[(i, j)] * xi[j]).sum()).collect()),
            _ if r == 0.0 => Ok(vec![0.0; xi.len()]),
            Kind::Homogeneous { p } => {
                let dir: Vec<f64> = xi.iter().map(|v| v / r).collect();
                let e = self.entry(&dir)?;
                let s = r.powf(p - 1.0);
                Ok(e.solution.hom_flux.iter().map(|v| v * s).collect())
            }
            Kind::General => Ok(self.entry(xi)?.solution.hom_flux.clone()),
        }
    }

    /// `σ_hom(x, ξ)`.
    pub fn flux(&self, x: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        let mu = self.solver.model().mu(x);
        Ok(self.unit_flux(xi)?.into_iter().map(|v| v * mu).collect())
    }

    /// `mean W(G)` at `μ = 1`, the homogenized potential.
    pub fn unit_energy(&self, xi: &[f64]) -> Result<f64> {
        let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        match &self.kind {
            Kind::Linear { matrix, .. } => {
                let n = xi.len();
                Ok(0.5 * (0..n).map(|i| (0..n).map(|j| xi[i] * matrix[(i, j)] * xi[j]).sum::<f64>()).sum::<f64>())
            }
            _ if r == 0.0 => Ok(0.0),
            Kind::Homogeneous { p } => {
                let dir: Vec<f64> = xi.iter().map(|v| v / r).collect();
                Ok(self.entry(&dir)?.solution.cell_energy * r.powf(*p))
            }
            Kind::General => Ok(self.entry(xi)?.solution.cell_energy),
        }
    }

    /// The oscillating gradient `grad_R u₁(ξ; y) = G(y) − ξ` at a torus point.
    pub fn corrector_at(&self, xi: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let n = xi.len();
        let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        match &self.kind {
            Kind::Linear { oscillating, .. } => {
                let mut out = vec![0.0; n];
                for (j, f) in oscillating.iter().enumerate() {
                    if xi[j] == 0.0 {
                        continue;
                    }
                    for (o, v) in out.iter_mut().zip(f.eval(y)) {
                        *o += xi[j] * v;
                    }
                }
                Ok(out)
            }
            _ if r == 0.0 => Ok(vec![0.0; n]),
            Kind::Homogeneous { .. } => {
                let dir: Vec<f64> = xi.iter().map(|v| v / r).collect();
                Ok(self.entry(&dir)?.oscillating.eval(y).into_iter().map(|v| v * r).collect())
            }
            Kind::General => Ok(self.entry(xi)?.oscillating.eval(y)),
        }
    }

    /// A full cell solution at `(x, ξ)` (not cached).
    pub fn solve(&self, x: &[f64], xi: &[f64]) -> Result<CellSolution> {
        self.solves.fetch_add(1, Ordering::Relaxed);
        self.solver.solve(x, xi, None)
    }
}
