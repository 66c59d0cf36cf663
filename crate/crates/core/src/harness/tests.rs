use super::*;
use crate::flux::{smooth_coefficient_2d, Family, ModelSpec};
use crate::projection::builtin_matrix;
use crate::torus::{FieldSpec, TrigTerm};

fn phi(psi: &str, k: Vec<i64>, phase: TrigKind) -> TwoScaleTestFunction {
    TwoScaleTestFunction { psi: Expr::parse(psi).unwrap(), k, phase }
}

#[test]
fn macroscopic_pairing_is_plain_integral() {
    let r = builtin_matrix("fibonacci").unwrap();
    let u = MacroSolution::from_function(Mesh::uniform(vec![1.0], 50).unwrap(), |x| x[0] * (1.0 - x[0]));
    let v = two_scale_pairing(&u, &phi("x", vec![0, 0], TrigKind::Cos), &r, 0.01).unwrap();
    // ∫ I_h[x(1−x)] x dx on a uniform mesh: exact value minus the interpolation error
    let want: f64 = 1.0 / 12.0 - (1.0f64 / 50.0).powi(2) / 12.0;
    assert!((v - want).abs() < 1e-12, "{v} vs {want}");
    assert_eq!(two_scale_pairing(&u, &phi("x", vec![0, 0], TrigKind::Sin), &r, 0.01).unwrap(), 0.0);
}

#[test]
fn oscillating_square_pairs_to_half() {
    let r = builtin_matrix("fibonacci").unwrap();
    let eta = 1e-3;
    let mesh = Mesh::uniform(vec![1.0], 2).unwrap();
    let w = r.get(0, 0);
    let u = |x: &[f64]| (2.0 * PI * w * x[0] / eta).cos();
    let f = phi("1 + x", vec![1, 0], TrigKind::Cos);
    let v = two_scale_pairing_fn(&mesh, u, &f, &r, eta).unwrap();
    let limit = 0.5 * 1.5;
    assert!((v - limit).abs() / limit < 1e-2, "{v}");
    // cross term: ∫ψ cos(4π w x/η)/2 is bounded by the sinc-type estimate
    let bound = 0.5 * (2.0 * 2.0 + 1.0) / (4.0 * PI * w / eta);
    assert!((v - limit).abs() <= bound);
}

#[test]
fn mean_zero_quasiperiodic_pairing_vanishes() {
    let r = builtin_matrix("fibonacci").unwrap();
    let g = |y: &[f64]| (2.0 * PI * y[0]).cos() + 0.5 * (2.0 * PI * (y[0] + y[1])).sin();
    let f = phi("1", vec![0, 0], TrigKind::Cos);
    let mut previous = f64::INFINITY;
    for eta in [0.1, 0.01, 0.001] {
        let u = |x: &[f64]| {
            let y: Vec<f64> = r.apply(x).iter().map(|v| v / eta).collect();
            g(&y)
        };
        let v = two_scale_pairing_fn(&Mesh::uniform(vec![1.0], (64.0 / eta) as usize).unwrap(), u, &f, &r, eta)
            .unwrap()
            .abs();
        // |∫₀¹ cos(2πωx/η)| ≤ η/(π|ω|) per mode
        let w1 = r.rt_k(&[1, 0])[0].abs();
        let w2 = r.rt_k(&[1, 1])[0].abs();
        let bound = eta / (PI * w1) + 0.5 * eta / (PI * w2);
        assert!(v <= bound * (1.0 + 1e-9), "{eta}: {v} > {bound}");
        assert!(v < previous || v < 1e-12);
        previous = v;
    }
}

#[test]
fn pairing_defect_at_zero_mode_is_weak_defect() {
    let r = builtin_matrix("fibonacci").unwrap();
    let a = MacroSolution::from_function(Mesh::uniform(vec![1.0], 700).unwrap(), |x| (3.0 * x[0]).sin() * x[0]);
    let b = MacroSolution::from_function(Mesh::uniform(vec![1.0], 64).unwrap(), |x| x[0] * (1.0 - x[0]));
    let f = phi("x^2 + 1", vec![0, 0], TrigKind::Cos);
    let p = pairing_defect(&a, &b, &f, &r, 1.0 / 35.0).unwrap();
    let w = weak_defect(&a, &b, &f.psi).unwrap();
    assert!((p - w).abs() <= 1e-12, "{p} vs {w}");
}

#[test]
fn ergodic_rows() {
    let r = builtin_matrix("fibonacci").unwrap();
    let single = FieldSpec { bandlimit: None, terms: vec![TrigTerm { coefficient: 1.0, k: vec![1, 0], kind: TrigKind::Cos }] }
        .build(2)
        .unwrap();
    let times = [10.0, 100.0, 1e4];
    let rows = ergodic_study(&single, &r, &times).unwrap();
    for row in &rows {
        let z = 2.0 * PI * r.get(0, 0) * row.t;
        // (1/2T)∫_{−T}^{T} cos(2πωx) dx = sin(z)/z
        assert!((row.error - (z.sin() / z).abs()).abs() < 1e-12);
    }
    let constant = FieldSpec::constant(2.5, 2).build(2).unwrap();
    assert!(ergodic_study(&constant, &r, &times).unwrap().iter().all(|row| row.error == 0.0));
    let multi = smooth_coefficient_2d().build(2).unwrap();
    for row in ergodic_study(&multi, &r, &times).unwrap() {
        assert!(row.error <= row.bound);
    }
    assert!(ergodic_study(&multi, &r, &[10.0, 5.0]).is_err());
}

#[test]
fn rate_fit_recovers_slope() {
    let etas = [0.1, 0.05, 0.025, 0.0125];
    let errs: Vec<f64> = etas.iter().map(|e: &f64| 3.0 * e.powi(2)).collect();
    let fit = fit_rate(&etas, &errs).unwrap();
    assert!((fit.slope - 2.0).abs() < 1e-12 && (fit.intercept - 3f64.ln()).abs() < 1e-12);
    assert!(fit.half_width.unwrap() < 1e-10);
    let noisy = [1.0, 0.6, 0.2, 0.15];
    let f = fit_rate(&etas, &noisy).unwrap();
    assert!(f.half_width.unwrap() > 0.1);
    assert!(fit_rate(&etas[..1], &errs[..1]).is_none());
    assert!(fit_rate(&etas, &[0.0; 4]).is_none());
}

#[test]
fn constant_coefficient_sweep_has_no_error() {
    let r = builtin_matrix("fibonacci").unwrap();
    let model = Arc::new(FluxModel::new(&ModelSpec::scalar(Family::LinearScalar, None, FieldSpec::constant(2.0, 2)), 2, 1).unwrap());
    // the macro mesh resolves every η, so all solves share it
    let problem = MacroProblem::new(Mesh::uniform(vec![1.0], 800).unwrap(), Expr::parse("1").unwrap());
    let setup = StudySetup {
        projection: r,
        model,
        bandlimit: 4,
        cell_tolerances: CellTolerances::default(),
        problem,
        sweep: SweepSpec { count: 3, eta0: 0.1, refinement: 20, ..SweepSpec::default() },
        test_functions: vec![phi("x", vec![0, 0], TrigKind::Cos), phi("x", vec![1, 0], TrigKind::Cos)],
    };
    let rep = convergence_study(&setup).unwrap();
    assert!(rep.complete());
    for rec in &rep.records {
        assert!(rec.l2_error < 1e-9 && rec.corrector_error < 1e-8, "{rec:?}");
        assert!(rec.pairing_defects[0] < 1e-9);
    }
    assert_eq!(rep.errors_csv().lines().count(), 4);
}
