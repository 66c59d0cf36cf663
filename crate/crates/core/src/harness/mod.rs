//! Verification experiments: ergodic means, two-scale pairings and
//! `η`-sweeps of the oscillating problem against its homogenized limit.

pub mod report;

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{CellSolver, CellTolerances, HomogenizedLaw};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::flux::FluxModel;
use crate::pde::{self, integrate_common, MacroProblem, MacroSolution, Mesh, NewtonDiagnostics};
use crate::projection::ProjectionMatrix;
use crate::torus::{ergodic_average, ergodic_bound, torus_mean, FourierField, TrigKind};

/// `φ(x, y) = ψ(x) · trig(2π k·y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoScaleTestFunction {
    pub psi: Expr,
    pub k: Vec<i64>,
    #[serde(default = "default_phase")]
    pub phase: TrigKind,
}

fn default_phase() -> TrigKind {
    TrigKind::Cos
}

impl TwoScaleTestFunction {
    pub fn is_macroscopic(&self) -> bool {
        self.k.iter().all(|&c| c == 0)
    }

    /// `∫_Y trig(2π k·y) dy`.
    pub fn torus_mean(&self) -> f64 {
        match (self.is_macroscopic(), self.phase) {
            (true, TrigKind::Cos) => 1.0,
            _ => 0.0,
        }
    }

    fn check(&self, r: &ProjectionMatrix) -> Result<()> {
        if self.k.len() != r.m() {
            return Err(Error::Dimension(format!("test function mode has {} entries, m = {}", self.k.len(), r.m())));
        }
        if self.psi.arity() > r.n() {
            return Err(Error::Config(format!("psi = {} reads beyond n = {}", self.psi.source(), r.n())));
        }
        Ok(())
    }

    /// `φ(x, Rx/η)`.
    pub fn eval(&self, r: &ProjectionMatrix, eta: f64, x: &[f64]) -> f64 {
        let w = r.rt_k(&self.k);
        let phase = (w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / eta).rem_euclid(1.0);
        let trig = match self.phase {
            TrigKind::Cos => (2.0 * PI * phase).cos(),
            TrigKind::Sin => (2.0 * PI * phase).sin(),
        };
        self.psi.eval(x) * trig
    }

    /// A mesh on which Gauss quadrature resolves the oscillation of `φ`
    /// with 16 cells per wavelength.
    fn resolving_mesh(&self, domain: &Mesh, r: &ProjectionMatrix, eta: f64) -> Result<Mesh> {
        let w = r.rt_k(&self.k).iter().map(|v| v * v).sum::<f64>().sqrt();
        let cells = (0..domain.n())
            .map(|a| ((16.0 * domain.extents[a] * w / eta).ceil() as usize).max(2))
            .collect();
        Mesh::new(domain.extents.clone(), cells)
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Config(format!("eta must be positive, got {eta}")));
    }
    Ok(())
}

/// `∫_Ω u(x) φ(x, Rx/η) dx` for a finite-element function.
pub fn two_scale_pairing(
    u: &MacroSolution,
    phi: &TwoScaleTestFunction,
    r: &ProjectionMatrix,
    eta: f64,
) -> Result<f64> {
    check_eta(eta)?;
    phi.check(r)?;
    let fine = phi.resolving_mesh(&u.mesh, r, eta)?;
    integrate_common(&[&u.mesh, &fine], |x| u.value_at(x) * phi.eval(r, eta, x))
}

/// `∫_Ω u(x) φ(x, Rx/η) dx` for a function sampled pointwise; `mesh` must
/// resolve `u`.
pub fn two_scale_pairing_fn(
    mesh: &Mesh,
    u: impl Fn(&[f64]) -> f64 + Sync,
    phi: &TwoScaleTestFunction,
    r: &ProjectionMatrix,
    eta: f64,
) -> Result<f64> {
    check_eta(eta)?;
    phi.check(r)?;
    let fine = phi.resolving_mesh(mesh, r, eta)?;
    integrate_common(&[mesh, &fine], |x| u(x) * phi.eval(r, eta, x))
}

/// `|∫ u_η φ(x, Rx/η) − ∫ u ψ · [trig]|`, the distance of the pairing
/// from its two-scale limit when `u_η → u` strongly.
pub fn pairing_defect(
    fine: &MacroSolution,
    hom: &MacroSolution,
    phi: &TwoScaleTestFunction,
    r: &ProjectionMatrix,
    eta: f64,
) -> Result<f64> {
    check_eta(eta)?;
    phi.check(r)?;
    let resolving = phi.resolving_mesh(&fine.mesh, r, eta)?;
    let mean = phi.torus_mean();
    let v = integrate_common(&[&fine.mesh, &hom.mesh, &resolving], |x| {
        fine.value_at(x) * phi.eval(r, eta, x) - mean * hom.value_at(x) * phi.psi.eval(x)
    })?;
    Ok(v.abs())
}

/// `|∫ (u_η − u) ψ|`, the plain weak-convergence defect.
pub fn weak_defect(fine: &MacroSolution, hom: &MacroSolution, psi: &Expr) -> Result<f64> {
    let v = integrate_common(&[&fine.mesh, &hom.mesh], |x| (fine.value_at(x) - hom.value_at(x)) * psi.eval(x))?;
    Ok(v.abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicRow {
    pub t: f64,
    pub average: Vec<f64>,
    /// `max_c |average_c − torus_mean_c|`
    pub error: f64,
    pub bound: f64,
}

/// Ergodic averages over `(−T, T)ⁿ` against the torus mean.
pub fn ergodic_study(u: &FourierField, r: &ProjectionMatrix, times: &[f64]) -> Result<Vec<ErgodicRow>> {
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) || times[0] <= 0.0 {
        return Err(Error::Config("averaging times must be positive and increasing".into()));
    }
    let mean = torus_mean(u);
    times
        .iter()
        .map(|&t| {
            let average = ergodic_average(u, r, t)?;
            let error = average.iter().zip(&mean).map(|(a, m)| (a - m).abs()).fold(0.0, f64::max);
            let bound = ergodic_bound(u, r, t)?.into_iter().fold(0.0, f64::max);
            Ok(ErgodicRow { t, average, error, bound })
        })
        .collect()
}

/// Least-squares fit of `log error = slope · log η + intercept`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence half-width of the slope; absent below three points.
    pub half_width: Option<f64>,
    pub points: usize,
}

/// Two-sided 95% Student-t quantiles for 1..=30 degrees of freedom.
const T_975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
    2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
];

fn t_quantile(dof: usize) -> f64 {
    T_975.get(dof.wrapping_sub(1)).copied().unwrap_or(1.96)
}

/// Fit over the strictly positive errors; `None` below two points.
pub fn fit_rate(etas: &[f64], errors: &[f64]) -> Option<RateFit> {
    let pts: Vec<(f64, f64)> =
        etas.iter().zip(errors).filter(|(_, e)| **e > 0.0 && e.is_finite()).map(|(h, e)| (h.ln(), e.ln())).collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let half_width = (n >= 3).then(|| {
        let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        t_quantile(n - 2) * (sse / (nf - 2.0) / sxx).sqrt()
    });
    Some(RateFit { slope, intercept, half_width, points: n })
}

/// The `[sweep]` config section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Explicit `η` values; otherwise `eta0 · ratio^j`, `j < count`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub etas: Option<Vec<f64>>,
    #[serde(default = "default_eta0")]
    pub eta0: f64,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default = "default_count")]
    pub count: usize,
    /// Fine elements per `η` (at least 20).
    #[serde(default = "default_refinement")]
    pub refinement: usize,
    /// Exponent of the corrector error; defaults to the model's `p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_exponent: Option<f64>,
}

fn default_eta0() -> f64 {
    0.05
}

fn default_ratio() -> f64 {
    0.5
}

fn default_count() -> usize {
    6
}

fn default_refinement() -> usize {
    40
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            etas: None,
            eta0: default_eta0(),
            ratio: default_ratio(),
            count: default_count(),
            refinement: default_refinement(),
            error_exponent: None,
        }
    }
}

impl SweepSpec {
    pub fn eta_list(&self) -> Result<Vec<f64>> {
        let etas = match &self.etas {
            Some(v) => v.clone(),
            None => {
                if !(self.ratio > 0.0 && self.ratio < 1.0) || self.count == 0 {
                    return Err(Error::Config("sweep needs 0 < ratio < 1 and count ≥ 1".into()));
                }
                (0..self.count).map(|j| self.eta0 * self.ratio.powi(j as i32)).collect()
            }
        };
        if etas.is_empty() || etas.iter().any(|e| !(*e > 0.0) || !e.is_finite()) || etas.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::Config(format!("eta list must be positive and strictly decreasing, got {etas:?}")));
        }
        if self.refinement < pde::MIN_ELEMENTS_PER_ETA {
            return Err(Error::Config(format!(
                "refinement {} is below {} elements per eta",
                self.refinement,
                pde::MIN_ELEMENTS_PER_ETA
            )));
        }
        Ok(etas)
    }
}

/// Everything a sweep needs, already validated.
pub struct StudySetup {
    pub projection: ProjectionMatrix,
    pub model: Arc<FluxModel>,
    pub bandlimit: i64,
    pub cell_tolerances: CellTolerances,
    pub problem: MacroProblem,
    pub sweep: SweepSpec,
    pub test_functions: Vec<TwoScaleTestFunction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub elements: usize,
    pub iterations: usize,
    pub residual: f64,
    pub step_history: Vec<f64>,
}

impl SolveSummary {
    fn of(sol: &MacroSolution) -> Self {
        let d: &NewtonDiagnostics = &sol.diagnostics;
        Self {
            elements: sol.mesh.element_count(),
            iterations: d.iterations,
            residual: d.residual,
            step_history: d.step_history.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaRecord {
    pub eta: f64,
    /// `‖u_η − u‖_{L²}`
    pub l2_error: f64,
    /// `‖u_η − u‖_{Lᵖ}` with the sweep's error exponent.
    pub lp_error: f64,
    /// `‖Π₀(∇u_η − ∇u − grad_R u₁(x, Rx/η))‖_{Lᵖ}` with `Π₀` the mean over
    /// each cell of the common mesh.
    pub corrector_error: f64,
    /// The same without `Π₀`; carries the `O(h/η)` floor of piecewise
    /// constant gradients.
    pub corrector_error_pointwise: f64,
    /// `‖∇u_η − ∇u‖_{Lᵖ}`, which does not vanish.
    pub gradient_error: f64,
    pub pairing_defects: Vec<f64>,
    pub fine: SolveSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub l2_error: Option<RateFit>,
    pub corrector_error: Option<RateFit>,
    pub pairing_defects: Vec<Option<RateFit>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub eta_list: Vec<f64>,
    pub error_exponent: f64,
    pub homogenized: SolveSummary,
    pub cell_solves: usize,
    pub records: Vec<EtaRecord>,
    pub rates: Rates,
    /// First failure, if the sweep stopped early.
    pub failure: Option<String>,
}

impl ConvergenceReport {
    pub fn complete(&self) -> bool {
        self.failure.is_none() && self.records.len() == self.eta_list.len()
    }

    /// One row per `η`: the errors, then one column per pairing defect.
    pub fn errors_csv(&self) -> String {
        let mut out = String::from("eta,l2_error,lp_error,corrector_error,corrector_error_pointwise,gradient_error");
        let k = self.records.first().map_or(0, |r| r.pairing_defects.len());
        for j in 0..k {
            out.push_str(&format!(",pairing_{}", j + 1));
        }
        out.push('\n');
        for r in &self.records {
            let mut row =
                vec![r.eta, r.l2_error, r.lp_error, r.corrector_error, r.corrector_error_pointwise, r.gradient_error];
            row.extend(&r.pairing_defects);
            out.push_str(&row.iter().map(|v| report::format_f64(*v)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectorErrors {
    pub projected: f64,
    pub pointwise: f64,
    pub without_corrector: f64,
}

/// Distances between `∇u_η` and the corrected field
/// `∇u(x) + grad_R u₁(∇u(x); Rx/η)`, integrated on the common refinement
/// of both meshes, plus `‖∇u_η − ∇u‖_{Lᵖ}`.
pub fn corrector_errors(
    fine: &MacroSolution,
    hom: &MacroSolution,
    law: &HomogenizedLaw,
    r: &ProjectionMatrix,
    eta: f64,
    p: f64,
) -> Result<CorrectorErrors> {
    let failure = std::sync::Mutex::new(None);
    let meshes = [&fine.mesh, &hom.mesh];
    let (pointwise, projected) = pde::lp_pointwise_and_projected(&meshes, p, |x| {
        let g = fine.gradient_at(x);
        let gh = hom.gradient_at(x);
        let y: Vec<f64> = r.apply(x).iter().map(|v| (v / eta).rem_euclid(1.0)).collect();
        let corr = law.corrector_at(&gh, &y).unwrap_or_else(|e| {
            failure.lock().expect("failure lock").get_or_insert(e);
            vec![0.0; gh.len()]
        });
        (0..g.len()).map(|a| g[a] - gh[a] - corr[a]).collect()
    })?;
    if let Some(e) = failure.lock().expect("failure lock").take() {
        return Err(e);
    }
    let (without, _) = pde::lp_pointwise_and_projected(&meshes, p, |x| {
        let g = fine.gradient_at(x);
        let gh = hom.gradient_at(x);
        (0..g.len()).map(|a| g[a] - gh[a]).collect()
    })?;
    Ok(CorrectorErrors {
        projected: projected.powf(1.0 / p),
        pointwise: pointwise.powf(1.0 / p),
        without_corrector: without.powf(1.0 / p),
    })
}

/// Solve the homogenized problem once and the oscillating one for each
/// `η`, and measure the distances between them.
pub fn convergence_study(setup: &StudySetup) -> Result<ConvergenceReport> {
    let r = &setup.projection;
    let etas = setup.sweep.eta_list()?;
    for phi in &setup.test_functions {
        phi.check(r)?;
    }
    let p = setup.sweep.error_exponent.unwrap_or(setup.model.p());
    let solver = CellSolver::new(r, setup.model.clone(), setup.bandlimit, setup.cell_tolerances)?;
    let law = HomogenizedLaw::new(solver)?;
    let hom = pde::solve_homogenized(&setup.problem, &law)?;
    let outcomes: Vec<Result<EtaRecord>> = etas
        .par_iter()
        .map(|&eta| {
            let fine = pde::solve_fine(&setup.problem, r, &setup.model, eta, setup.sweep.refinement)?;
            let errs = corrector_errors(&fine, &hom, &law, r, eta, p)?;
            let pairing_defects = setup
                .test_functions
                .iter()
                .map(|phi| pairing_defect(&fine, &hom, phi, r, eta))
                .collect::<Result<Vec<_>>>()?;
            Ok(EtaRecord {
                eta,
                l2_error: pde::lp_error(&fine, &hom, 2.0, pde::Quantity::Value)?,
                lp_error: pde::lp_error(&fine, &hom, p, pde::Quantity::Value)?,
                corrector_error: errs.projected,
                corrector_error_pointwise: errs.pointwise,
                gradient_error: errs.without_corrector,
                pairing_defects,
                fine: SolveSummary::of(&fine),
            })
        })
        .collect();
    let mut records = Vec::new();
    let mut failure = None;
    for o in outcomes {
        match o {
            Ok(rec) => records.push(rec),
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
    }
    let done: Vec<f64> = records.iter().map(|r| r.eta).collect();
    let column = |f: &dyn Fn(&EtaRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let rates = Rates {
        l2_error: fit_rate(&done, &column(&|r| r.l2_error)),
        corrector_error: fit_rate(&done, &column(&|r| r.corrector_error)),
        pairing_defects: (0..setup.test_functions.len())
            .map(|j| fit_rate(&done, &column(&|r| r.pairing_defects[j])))
            .collect(),
    };
    Ok(ConvergenceReport {
        eta_list: etas,
        error_exponent: p,
        homogenized: SolveSummary::of(&hom),
        cell_solves: law.cell_solves(),
        records,
        rates,
        failure,
    })
}

#[cfg(test)]
mod tests;
