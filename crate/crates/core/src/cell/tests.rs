use super::*;
use crate::flux::{smooth_coefficient_2d, ModelSpec};
use crate::projection::builtin_matrix;
use crate::torus::{FieldSpec, TrigKind, TrigTerm};

fn a_direct(y: &[f64]) -> f64 {
    2.0 + 0.5 * (2.0 * PI * y[0]).cos() + 0.5 * (2.0 * PI * (y[0] + y[1])).cos()
}

/// Trapezoid mean over a fine tensor grid of `Y²`.
fn quadrature(f: impl Fn(f64) -> f64) -> f64 {
    let n = 400;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += f(a_direct(&[i as f64 / n as f64, j as f64 / n as f64]));
        }
    }
    acc / (n * n) as f64
}

fn fib_model(family: Family, p: Option<f64>) -> Arc<FluxModel> {
    Arc::new(FluxModel::new(&ModelSpec::scalar(family, p, smooth_coefficient_2d()), 2, 1).unwrap())
}

fn solver(model: Arc<FluxModel>, k: i64) -> CellSolver {
    CellSolver::new(&builtin_matrix("fibonacci").unwrap(), model, k, CellTolerances::default()).unwrap()
}

#[test]
fn linear_one_dimensional_harmonic_mean() {
    let s = solver(fib_model(Family::LinearScalar, None), 16);
    let sol = s.solve(&[0.5], &[1.0], None).unwrap();
    let harmonic = 1.0 / quadrature(|a| 1.0 / a);
    let rel = (sol.hom_flux[0] - harmonic).abs() / harmonic;
    assert!(rel < 1e-6, "{} vs {harmonic}: {rel:e}", sol.hom_flux[0]);
    let arithmetic = quadrature(|a| a);
    assert!(harmonic < sol.hom_flux[0] * (1.0 + 1e-9) && sol.hom_flux[0] < arithmetic);
    assert!(sol.residual_norm <= LINEAR_TOL && sol.max_mode_residual <= LINEAR_TOL);
    assert!(sol.divergence_defect(s.projection()) <= LINEAR_TOL);
    assert_eq!(crate::torus::torus_mean(&sol.gradient_field), vec![1.0]);
}

#[test]
fn cubic_power_law_closed_form() {
    let s = solver(fib_model(Family::PowerLaw, Some(3.0)), 16);
    let xi = 2.0;
    let sol = s.solve(&[0.5], &[xi], None).unwrap();
    let m = quadrature(|a| a.powf(-0.5));
    let want = xi.abs() * xi / (m * m);
    let rel = (sol.hom_flux[0] - want).abs() / want;
    assert!(rel < 1e-4, "{} vs {want}: {rel:e}", sol.hom_flux[0]);
    assert!(sol.divergence_defect(s.projection()) <= NONLINEAR_TOL);
    for w in sol.energy_history.windows(2) {
        assert!(w[1] <= w[0] + 1e-14 * w[0].abs(), "{:?}", sol.energy_history);
    }
    let twice = s.solve(&[0.5], &[2.0 * xi], None).unwrap();
    assert!((twice.hom_flux[0] - 4.0 * sol.hom_flux[0]).abs() <= 1e-8 * twice.hom_flux[0].abs());
}

#[test]
fn constant_coefficient_has_no_corrector() {
    for (family, p) in [(Family::LinearScalar, None), (Family::PowerLaw, Some(3.0)), (Family::PowerLaw, Some(1.5))] {
        let model = Arc::new(FluxModel::new(&ModelSpec::scalar(family, p, FieldSpec::constant(1.7, 2)), 2, 1).unwrap());
        let s = solver(model.clone(), 4);
        let sol = s.solve(&[0.0], &[0.8], None).unwrap();
        assert!(sol.corrector_coeffs.coeffs().iter().all(|c| c.norm() == 0.0));
        let direct = model.evaluate(&[0.0], &[0.0, 0.0], &[0.8]).unwrap();
        assert!((sol.hom_flux[0] - direct[0]).abs() < 1e-14);
        assert_eq!(sol.iterations, 0);
    }
}

#[test]
fn zero_gradient_gives_zero_flux() {
    for (family, p) in [(Family::LinearScalar, None), (Family::PowerLaw, Some(3.0)), (Family::RegularizedPowerLaw, Some(1.5))] {
        let s = solver(fib_model(family, p), 6);
        let sol = s.solve(&[0.0], &[0.0], None).unwrap();
        assert_eq!(sol.hom_flux, vec![0.0]);
    }
}

#[test]
fn criterion_failure_is_refused() {
    let r = builtin_matrix("counterexample-1-2").unwrap();
    let err = CellSolver::new(&r, fib_model(Family::LinearScalar, None), 2, CellTolerances::default()).unwrap_err();
    match err {
        Error::CriterionFailure { k } => {
            assert_eq!(r.exact_rt_k_is_zero(&k), Some(true));
        }
        other => panic!("{other}"),
    }
}

#[test]
fn corrector_trace_matches_flux_constancy() {
    let s = solver(fib_model(Family::LinearScalar, None), 16);
    let sol = s.solve(&[0.0], &[1.0], None).unwrap();
    let c = sol.hom_flux[0];
    let eta = 1.0 / 64.0;
    let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 40.0 + 0.003]).collect();
    let trace = sol.corrector_trace(s.projection(), eta, &xs).unwrap();
    let r = s.projection();
    for (x, t) in xs.iter().zip(&trace) {
        let y: Vec<f64> = r.apply(x).iter().map(|v| (v / eta).rem_euclid(1.0)).collect();
        let want = c / a_direct(&y) - 1.0;
        assert!((t[0] - want).abs() < 1e-5, "{} vs {want}", t[0]);
    }
}

#[test]
fn bandlimit_self_convergence() {
    for (family, p) in [(Family::LinearScalar, None), (Family::PowerLaw, Some(3.0))] {
        let model = fib_model(family, p);
        let a = solver(model.clone(), 16).solve(&[0.0], &[1.0], None).unwrap().hom_flux[0];
        let b = solver(model, 32).solve(&[0.0], &[1.0], None).unwrap().hom_flux[0];
        assert!((a - b).abs() / b.abs() <= 1e-4, "{family:?}: {a} vs {b}");
    }
}

#[test]
fn mu_scales_the_flux() {
    let mut spec = ModelSpec::scalar(Family::PowerLaw, Some(3.0), smooth_coefficient_2d());
    spec.mu = Some(crate::expr::Expr::parse("1 + x").unwrap());
    let model = Arc::new(FluxModel::new(&spec, 2, 1).unwrap());
    let s = solver(model, 8);
    let a = s.solve(&[0.0], &[1.0], None).unwrap();
    let b = s.solve(&[0.5], &[1.0], None).unwrap();
    assert!((b.hom_flux[0] - 1.5 * a.hom_flux[0]).abs() < 1e-8);
    assert_eq!(b.mu, 1.5);
}

fn octagonal_model(family: Family, p: Option<f64>) -> Arc<FluxModel> {
    let a = FieldSpec {
        bandlimit: None,
        terms: vec![
            TrigTerm { coefficient: 2.0, k: vec![0, 0, 0, 0], kind: TrigKind::Cos },
            TrigTerm { coefficient: 0.4, k: vec![1, 0, 0, 0], kind: TrigKind::Cos },
            TrigTerm { coefficient: 0.3, k: vec![0, 1, 0, 0], kind: TrigKind::Sin },
            TrigTerm { coefficient: 0.3, k: vec![0, 0, 1, 1], kind: TrigKind::Cos },
        ],
    };
    Arc::new(FluxModel::new(&ModelSpec::scalar(family, p, a), 4, 2).unwrap())
}

#[test]
fn two_dimensional_effective_matrix_is_spd() {
    let r = builtin_matrix("octagonal").unwrap();
    let s = CellSolver::new(&r, octagonal_model(Family::LinearScalar, None), 3, CellTolerances::default()).unwrap();
    let a = s.effective_matrix(&[0.0, 0.0]).unwrap();
    assert!((a[(0, 1)] - a[(1, 0)]).abs() < 1e-9, "{a}");
    let eig = a.clone().symmetric_eigen().eigenvalues;
    assert!(eig.min() > 0.0);
    let law = HomogenizedLaw::new(s).unwrap();
    let xi = [0.3, -1.2];
    let direct = law.solver().solve(&[0.0, 0.0], &xi, None).unwrap().hom_flux;
    let lin = law.unit_flux(&xi).unwrap();
    for (p, q) in direct.iter().zip(&lin) {
        assert!((p - q).abs() < 1e-9);
    }
}

#[test]
fn two_dimensional_nonlinear_inheritance() {
    let r = builtin_matrix("octagonal").unwrap();
    let model = octagonal_model(Family::PowerLaw, Some(3.0));
    let s = CellSolver::new(&r, model.clone(), 3, CellTolerances::default()).unwrap();
    let xis = [[1.0, 0.5], [-0.3, 0.8], [0.2, -0.1]];
    let sols: Vec<CellSolution> = xis.iter().map(|x| s.solve(&[0.0, 0.0], x, None).unwrap()).collect();
    let c = model.constants().c.unwrap();
    for (sol, xi) in sols.iter().zip(&xis) {
        assert!(sol.divergence_defect(&r) <= NONLINEAR_TOL);
        let g = s.grid().to_grid(&sol.gradient_field).unwrap();
        let mean_gp: f64 = (0..s.grid().node_count())
            .map(|j| (g[0][j].powi(2) + g[1][j].powi(2)).powf(1.5))
            .sum::<f64>()
            * s.grid().weight();
        let pairing = sol.hom_flux[0] * xi[0] + sol.hom_flux[1] * xi[1];
        let xi_p = (xi[0] * xi[0] + xi[1] * xi[1]).powf(1.5);
        assert!(pairing >= c * mean_gp && c * mean_gp >= c * xi_p * (1.0 - 1e-12));
    }
    for i in 0..3 {
        for j in 0..i {
            let d: f64 = (0..2).map(|t| (sols[i].hom_flux[t] - sols[j].hom_flux[t]) * (xis[i][t] - xis[j][t])).sum();
            assert!(d > 0.0);
        }
    }
    let half = s.solve(&[0.0, 0.0], &[0.5, 0.25], None).unwrap();
    for t in 0..2 {
        assert!((half.hom_flux[t] - 0.25 * sols[0].hom_flux[t]).abs() <= 1e-8 * sols[0].hom_flux[t].abs().max(1e-3));
    }
}

#[test]
fn newton_linearization_agrees_with_kacanov() {
    let model = fib_model(Family::PowerLaw, Some(3.0));
    let r = builtin_matrix("fibonacci").unwrap();
    let tol = CellTolerances { linearization: Linearization::Kacanov, ..CellTolerances::default() };
    let a = CellSolver::new(&r, model.clone(), 8, tol).unwrap().solve(&[0.0], &[1.0], None).unwrap();
    let b = solver(model, 8).solve(&[0.0], &[1.0], None).unwrap();
    assert!((a.hom_flux[0] - b.hom_flux[0]).abs() < 1e-8);
}

#[test]
fn regularized_sub_quadratic_solves() {
    let s = solver(fib_model(Family::PowerLaw, Some(1.5)), 8);
    let sol = s.solve(&[0.0], &[1.0], None).unwrap();
    assert!(sol.divergence_defect(s.projection()) <= NONLINEAR_TOL);
    let lower = 1.0 / quadrature(|a| a.powf(-1.0 / 0.5)).powf(0.5);
    assert!(sol.hom_flux[0] > 0.9 * lower);
}

#[test]
fn homogenized_law_caches_directions() {
    let law = HomogenizedLaw::new(solver(fib_model(Family::PowerLaw, Some(3.0)), 8)).unwrap();
    let a = law.unit_flux(&[1.0]).unwrap()[0];
    let b = law.unit_flux(&[3.0]).unwrap()[0];
    assert!((b - 9.0 * a).abs() < 1e-12 * b);
    let c = law.unit_flux(&[-2.0]).unwrap()[0];
    assert!((c + 4.0 * a).abs() < 1e-8 * a);
    assert_eq!(law.cell_solves(), 2);
}
