use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use quasihom::cell::{CellSolver, CellTolerances, HomogenizedLaw};
use quasihom::expr::Expr;
use quasihom::flux::{smooth_coefficient_2d, Family, FluxModel, ModelSpec};
use quasihom::harness::{ergodic_study, fit_rate};
use quasihom::pde::{solve_homogenized, MacroProblem, Mesh};
use quasihom::projection::{builtin_matrix, AlgebraicTag, ProjectionMatrix};
use quasihom::torus::{green_identity_residual, FieldSpec, FourierField, TrigKind, TrigTerm};

fn field(m: usize, bandlimit: i64, dim: usize, raw: &[(f64, f64)]) -> FourierField {
    let count = (2 * bandlimit as usize + 1).pow(m as u32) * dim;
    let coeffs = (0..count).map(|i| raw[i % raw.len()]).map(|(a, b)| Complex64::new(a, b)).collect();
    FourierField::from_coeffs(m, bandlimit, dim, coeffs).unwrap()
}

fn projection(m: usize, n: usize, entries: &[f64]) -> Option<ProjectionMatrix> {
    ProjectionMatrix::orthonormalized(m, n, entries[..m * n].to_vec(), AlgebraicTag::NumericOnly).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn green_identity_holds(
        m in 2usize..5,
        bandlimit in 1i64..4,
        entries in prop::collection::vec(-1.0f64..1.0, 8),
        raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 7..40),
        raw2 in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 5..30),
    ) {
        let n = 1 + (m - 1) / 2;
        let Some(r) = projection(m, n, &entries) else { return Ok(()); };
        let phi = field(m, bandlimit, n, &raw);
        let theta = field(m, bandlimit, 1, &raw2);
        prop_assert!(green_identity_residual(&phi, &theta, &r).unwrap().relative() <= 1e-12);
    }

    #[test]
    fn fields_are_hermitian_and_real(
        raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3..30),
        k1 in -2i64..3, k2 in -2i64..3,
        y in prop::collection::vec(0.0f64..1.0, 2),
    ) {
        let f = field(2, 2, 1, &raw);
        prop_assert_eq!(f.coeff(&[k1, k2], 0), f.coeff(&[-k1, -k2], 0).conj());
        // direct complex sum of the table has no imaginary part
        let mut acc = Complex64::new(0.0, 0.0);
        for a in -2i64..=2 {
            for b in -2i64..=2 {
                let phase = 2.0 * std::f64::consts::PI * (a as f64 * y[0] + b as f64 * y[1]);
                acc += f.coeff(&[a, b], 0) * Complex64::from_polar(1.0, phase);
            }
        }
        prop_assert!(acc.im.abs() < 1e-12);
        prop_assert!((acc.re - f.eval(&y)[0]).abs() < 1e-12);
    }

    #[test]
    fn power_law_flux_is_monotone(
        p in 1.5f64..4.0,
        y in prop::collection::vec(0.0f64..1.0, 2),
        xi1 in -10.0f64..10.0,
        xi2 in -10.0f64..10.0,
    ) {
        let family = if p < 2.0 { Family::RegularizedPowerLaw } else { Family::PowerLaw };
        let model = FluxModel::new(&ModelSpec::scalar(family, Some(p), smooth_coefficient_2d()), 2, 1).unwrap();
        let s1 = model.evaluate(&[0.5], &y, &[xi1]).unwrap()[0];
        let s2 = model.evaluate(&[0.5], &y, &[xi2]).unwrap()[0];
        prop_assert!((s1 - s2) * (xi1 - xi2) >= 0.0);
    }

    #[test]
    fn rate_fit_recovers_power_laws(slope in 0.3f64..3.0, scale in 0.01f64..100.0, count in 3usize..8) {
        let etas: Vec<f64> = (0..count).map(|j| 0.1 * 0.5f64.powi(j as i32)).collect();
        let errors: Vec<f64> = etas.iter().map(|e| scale * e.powf(slope)).collect();
        let fit = fit_rate(&etas, &errors).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        prop_assert!((fit.intercept - scale.ln()).abs() < 1e-8);
    }

    #[test]
    fn ergodic_error_respects_bound(
        c1 in -1.0f64..1.0, c2 in -1.0f64..1.0,
        k in prop::collection::vec(-3i64..4, 2),
        t in 1.0f64..1e3,
    ) {
        let r = builtin_matrix("fibonacci").unwrap();
        let mut terms = vec![TrigTerm { coefficient: c1, k: vec![1, 0], kind: TrigKind::Cos }];
        if k != [0, 0] {
            terms.push(TrigTerm { coefficient: c2, k: k.clone(), kind: TrigKind::Sin });
        }
        let u = FieldSpec { bandlimit: None, terms }.build(2).unwrap();
        for row in ergodic_study(&u, &r, &[t]).unwrap() {
            prop_assert!(row.error <= row.bound * (1.0 + 1e-12) + 1e-15);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn homogenized_flux_is_monotone_and_homogeneous(xi1 in -3.0f64..3.0, xi2 in -3.0f64..3.0) {
        let r = builtin_matrix("fibonacci").unwrap();
        let model = Arc::new(FluxModel::new(&ModelSpec::scalar(Family::PowerLaw, Some(3.0), smooth_coefficient_2d()), 2, 1).unwrap());
        let law = HomogenizedLaw::new(CellSolver::new(&r, model, 4, CellTolerances::default()).unwrap()).unwrap();
        let s1 = law.flux(&[0.5], &[xi1]).unwrap()[0];
        let s2 = law.flux(&[0.5], &[xi2]).unwrap()[0];
        prop_assert!((s1 - s2) * (xi1 - xi2) >= -1e-12);
        let doubled = law.flux(&[0.5], &[2.0 * xi1]).unwrap()[0];
        prop_assert!((doubled - 4.0 * s1).abs() <= 1e-8 * (1.0 + doubled.abs()));
    }

    #[test]
    fn constant_coefficient_parabola(a in 0.5f64..4.0, cells in 8usize..200) {
        let r = builtin_matrix("fibonacci").unwrap();
        let model = Arc::new(FluxModel::new(&ModelSpec::scalar(Family::LinearScalar, None, FieldSpec::constant(a, 2)), 2, 1).unwrap());
        let law = HomogenizedLaw::new(CellSolver::new(&r, model, 2, CellTolerances::default()).unwrap()).unwrap();
        let problem = MacroProblem::new(Mesh::uniform(vec![1.0], cells).unwrap(), Expr::parse("1").unwrap());
        let sol = solve_homogenized(&problem, &law).unwrap();
        prop_assert!(sol.max_nodal_error(|x| x[0] * (1.0 - x[0]) / (2.0 * a)) < 1e-10);
    }
}
