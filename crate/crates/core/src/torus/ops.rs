//! Projected differential operators, means and slice restrictions.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::FourierField;
use crate::error::{Error, Result};
use crate::projection::ProjectionMatrix;

fn check_torus(u: &FourierField, r: &ProjectionMatrix) -> Result<()> {
    if u.m() != r.m() {
        return Err(Error::Dimension(format!("field on Y^{} with an R of {} rows", u.m(), r.m())));
    }
    Ok(())
}

/// `grad_R u = Rᵀ∇_y u`: mode-wise `2πi (Rᵀk) û_k`.
pub fn grad_r(u: &FourierField, r: &ProjectionMatrix) -> Result<FourierField> {
    check_torus(u, r)?;
    if u.value_dim() != 1 {
        return Err(Error::Dimension("grad_R needs a scalar field".into()));
    }
    let n = r.n();
    let idx = *u.indexer();
    let count = idx.count();
    let mut out = vec![Complex64::new(0.0, 0.0); n * count];
    let mut k = vec![0; idx.m()];
    let mut rt = vec![0.0; n];
    for i in 0..count {
        idx.mode_into(i, &mut k);
        r.rt_k_into(&k, &mut rt);
        let c = u.component(0)[i];
        for j in 0..n {
            out[j * count + i] = Complex64::new(0.0, 2.0 * PI * rt[j]) * c;
        }
    }
    FourierField::from_coeffs(idx.m(), idx.bandlimit(), n, out)
}

/// `div_R v = Rᵀ∇_y · v`: mode-wise `2πi (Rᵀk)·v̂_k`.
pub fn div_r(v: &FourierField, r: &ProjectionMatrix) -> Result<FourierField> {
    check_torus(v, r)?;
    if v.value_dim() != r.n() {
        return Err(Error::Dimension(format!("div_R needs an {}-vector field, got {}", r.n(), v.value_dim())));
    }
    let idx = *v.indexer();
    let count = idx.count();
    let mut out = vec![Complex64::new(0.0, 0.0); count];
    let mut k = vec![0; idx.m()];
    let mut rt = vec![0.0; r.n()];
    for (i, o) in out.iter_mut().enumerate() {
        idx.mode_into(i, &mut k);
        r.rt_k_into(&k, &mut rt);
        let dot: Complex64 = rt.iter().enumerate().map(|(j, &w)| v.component(j)[i] * w).sum();
        *o = Complex64::new(0.0, 2.0 * PI) * dot;
    }
    FourierField::from_coeffs(idx.m(), idx.bandlimit(), 1, out)
}

/// Torus mean `[u] = û_0`, per component.
pub fn torus_mean(u: &FourierField) -> Vec<f64> {
    let z = u.indexer().zero();
    (0..u.value_dim()).map(|c| u.component(c)[z].re).collect()
}

/// `u(R x / η mod 1)` at each physical point, through torus evaluation.
pub fn slice_sample(u: &FourierField, r: &ProjectionMatrix, eta: f64, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_torus(u, r)?;
    check_eta(eta)?;
    xs.iter()
        .map(|x| {
            check_point(x, r)?;
            let y: Vec<f64> = r.apply(x).iter().map(|v| (v / eta).rem_euclid(1.0)).collect();
            Ok(u.eval(&y))
        })
        .collect()
}

/// Same restriction summed directly as `Σ û_k exp(2πi (Rᵀk)·x / η)`.
pub fn slice_sample_direct(
    u: &FourierField,
    r: &ProjectionMatrix,
    eta: f64,
    xs: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    check_torus(u, r)?;
    check_eta(eta)?;
    let idx = *u.indexer();
    let freqs: Vec<Vec<f64>> = ((idx.zero() + 1)..idx.count()).map(|i| r.rt_k(&idx.mode(i))).collect();
    xs.iter()
        .map(|x| {
            check_point(x, r)?;
            let phases: Vec<f64> = freqs
                .iter()
                .map(|w| 2.0 * PI * (w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / eta).rem_euclid(1.0))
                .collect();
            Ok((0..u.value_dim())
                .map(|c| {
                    let block = u.component(c);
                    let tail: f64 = phases
                        .iter()
                        .enumerate()
                        .map(|(t, &ph)| (block[idx.zero() + 1 + t] * Complex64::from_polar(1.0, ph)).re)
                        .sum();
                    block[idx.zero()].re + 2.0 * tail
                })
                .collect())
        })
        .collect()
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Config(format!("eta must be positive, got {eta}")));
    }
    Ok(())
}

fn check_point(x: &[f64], r: &ProjectionMatrix) -> Result<()> {
    if x.len() != r.n() {
        return Err(Error::Dimension(format!("point of dimension {} for n = {}", x.len(), r.n())));
    }
    Ok(())
}

/// `sin(z)/z` with the removable singularity filled in.
pub fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

/// `(2T)⁻ⁿ ∫_{(−T,T)ⁿ} u(Rx) dx`, integrated mode by mode:
/// each mode contributes `û_k Π_j sinc(2π (Rᵀk)_j T)`.
pub fn ergodic_average(u: &FourierField, r: &ProjectionMatrix, t: f64) -> Result<Vec<f64>> {
    check_torus(u, r)?;
    if !(t > 0.0) {
        return Err(Error::Config(format!("averaging half-width must be positive, got {t}")));
    }
    let idx = *u.indexer();
    let weights: Vec<f64> = (0..idx.count())
        .map(|i| r.rt_k(&idx.mode(i)).iter().map(|w| sinc(2.0 * PI * w * t)).product())
        .collect();
    Ok((0..u.value_dim())
        .map(|c| u.component(c).iter().zip(&weights).map(|(a, w)| a.re * w).sum())
        .collect())
}

/// Per-mode bound `Σ_{k≠0} |û_k| Π_j min(1, 1/(2π|(Rᵀk)_j| T))` on
/// `|ergodic_average − torus_mean|`.
pub fn ergodic_bound(u: &FourierField, r: &ProjectionMatrix, t: f64) -> Result<Vec<f64>> {
    check_torus(u, r)?;
    let idx = *u.indexer();
    let z = idx.zero();
    let weights: Vec<f64> = (0..idx.count())
        .map(|i| {
            if i == z {
                return 0.0;
            }
            r.rt_k(&idx.mode(i))
                .iter()
                .map(|w| {
                    let d = 2.0 * PI * w.abs() * t;
                    if d > 1.0 { 1.0 / d } else { 1.0 }
                })
                .product()
        })
        .collect();
    Ok((0..u.value_dim())
        .map(|c| u.component(c).iter().zip(&weights).map(|(a, w)| a.norm() * w).sum())
        .collect())
}

/// The two integrals of Green's identity and their sum.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GreenResidual {
    /// `∫ div_R(φ) θ`
    pub div_term: f64,
    /// `∫ φ · grad_R θ`
    pub grad_term: f64,
    /// `|div_term + grad_term|`
    pub residual: f64,
    /// Sum of the absolute values of all mode products.
    pub scale: f64,
}

impl GreenResidual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.residual
        } else {
            self.residual / self.scale
        }
    }
}

pub fn green_identity_residual(
    phi: &FourierField,
    theta: &FourierField,
    r: &ProjectionMatrix,
) -> Result<GreenResidual> {
    if phi.m() != theta.m() || phi.bandlimit() != theta.bandlimit() {
        return Err(Error::Dimension("φ and θ must share torus dimension and bandlimit".into()));
    }
    let div = div_r(phi, r)?;
    let grad = grad_r(theta, r)?;
    let div_term = div.inner(theta)?;
    let grad_term = phi.inner(&grad)?;
    let mut scale = 0.0;
    for c in 0..phi.value_dim() {
        scale += phi.component(c).iter().zip(grad.component(c)).map(|(a, b)| a.norm() * b.norm()).sum::<f64>();
    }
    Ok(GreenResidual { div_term, grad_term, residual: (div_term + grad_term).abs(), scale })
}

/// Position of a mode's gradient direction `k` relative to the physical
/// plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeClass {
    /// `k = 0`: lies in both spaces.
    Constant,
    /// `(I − RRᵀ)k = 0`: gradient inside the plane, mode in X_p.
    InPlane,
    /// `Rᵀk = 0`: gradient orthogonal to the plane, mode in X_p^⊥.
    Orthogonal,
    Neither,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct XpReport {
    pub exact: bool,
    pub constant: usize,
    pub in_plane: usize,
    pub orthogonal: usize,
    pub neither: usize,
    /// No nonzero table mode lies purely in X_p, so X_p-functions cannot be
    /// built from individual modes and the gradient field is the natural
    /// unknown of the cell problem.
    pub no_pure_xp_modes: bool,
}

/// Classify every mode of the field's table. Decided exactly when the
/// matrix carries an algebraic tag.
pub fn xp_split(u: &FourierField, r: &ProjectionMatrix) -> Result<(Vec<ModeClass>, XpReport)> {
    check_torus(u, r)?;
    let idx = *u.indexer();
    let exact = r.exact_rt_k_is_zero(&vec![0; r.m()]).is_some();
    let proj = r.physical_projector();
    let classes: Vec<ModeClass> = (0..idx.count())
        .map(|i| {
            let k = idx.mode(i);
            if k.iter().all(|&v| v == 0) {
                return ModeClass::Constant;
            }
            let (orth, in_plane) = if exact {
                (r.exact_rt_k_is_zero(&k).unwrap_or(false), r.exact_k_in_plane(&k).unwrap_or(false))
            } else {
                let norm = k.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
                let rt = r.rt_k(&k).iter().map(|v| v * v).sum::<f64>().sqrt();
                let perp = (0..r.m())
                    .map(|a| {
                        let pk: f64 = (0..r.m()).map(|b| proj[(a, b)] * k[b] as f64).sum();
                        (k[a] as f64 - pk).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt();
                (rt <= 1e-12 * norm, perp <= 1e-12 * norm)
            };
            match (orth, in_plane) {
                (true, _) => ModeClass::Orthogonal,
                (false, true) => ModeClass::InPlane,
                _ => ModeClass::Neither,
            }
        })
        .collect();
    let count = |c: ModeClass| classes.iter().filter(|&&x| x == c).count();
    let in_plane = count(ModeClass::InPlane);
    let report = XpReport {
        exact,
        constant: count(ModeClass::Constant),
        in_plane,
        orthogonal: count(ModeClass::Orthogonal),
        neither: count(ModeClass::Neither),
        no_pure_xp_modes: in_plane == 0,
    };
    Ok((classes, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{builtin_matrix, AlgebraicTag};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fib() -> ProjectionMatrix {
        builtin_matrix("fibonacci").unwrap()
    }

    fn random_field(m: usize, k: i64, dim: usize, rng: &mut ChaCha8Rng) -> FourierField {
        let idx = super::super::ModeIndexer::new(m, k);
        let coeffs = (0..idx.count() * dim)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        FourierField::from_coeffs(m, k, dim, coeffs).unwrap()
    }

    #[test]
    fn grad_of_sine_is_scaled_cosine() {
        // sin(2πy₁) = (e − e⁻)/(2i): û_(1,0) = −i/2
        let r = fib();
        let mut u = FourierField::zeros(2, 2, 1);
        u.set_mode(&[1, 0], 0, Complex64::new(0.0, -0.5)).unwrap();
        let g = grad_r(&u, &r).unwrap();
        for y in [[0.1, 0.3], [0.77, 0.5]] {
            let want = 2.0 * PI * r.get(0, 0) * (2.0 * PI * y[0]).cos();
            assert!((g.eval(&y)[0] - want).abs() < 1e-13);
        }
    }

    #[test]
    fn grad_of_constant_vanishes() {
        let u = FourierField::constant(2, 3, &[4.2]);
        let g = grad_r(&u, &fib()).unwrap();
        assert!(g.coeffs().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn grad_mode_formula_on_random_field() {
        let r = fib();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_field(2, 4, 1, &mut rng);
        let g = grad_r(&u, &r).unwrap();
        for (i, k) in u.indexer().modes() {
            let rt = r.get(0, 0) * k[0] as f64 + r.get(1, 0) * k[1] as f64;
            let want = Complex64::new(0.0, 2.0 * PI * rt) * u.component(0)[i];
            assert!((g.component(0)[i] - want).norm() < 1e-14);
        }
    }

    #[test]
    fn div_of_grad_single_mode() {
        let r = fib();
        let mut u = FourierField::zeros(2, 3, 1);
        u.set_mode(&[2, -1], 0, Complex64::new(0.3, 0.2)).unwrap();
        let lap = div_r(&grad_r(&u, &r).unwrap(), &r).unwrap();
        let rt = r.rt_k(&[2, -1])[0];
        let want = -4.0 * PI * PI * rt * rt;
        for (a, b) in lap.coeffs().iter().zip(u.coeffs()) {
            assert!((a - b * want).norm() < 1e-13);
        }
    }

    #[test]
    fn div_of_field_orthogonal_to_rtk_vanishes() {
        let r = builtin_matrix("octagonal").unwrap();
        let mut v = FourierField::zeros(4, 1, 2);
        let k = [1, 0, 1, -1];
        let rt = r.rt_k(&k);
        // v̂_k ⟂ Rᵀk
        v.set_mode(&k, 0, Complex64::new(-rt[1], 0.4 * -rt[1])).unwrap();
        v.set_mode(&k, 1, Complex64::new(rt[0], 0.4 * rt[0])).unwrap();
        let d = div_r(&v, &r).unwrap();
        assert!(d.coeffs().iter().all(|c| c.norm() < 1e-15));
        let c = FourierField::constant(4, 1, &[1.0, -2.0]);
        assert!(div_r(&c, &r).unwrap().coeffs().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn dimension_mismatches_are_errors() {
        let r = fib();
        assert!(grad_r(&FourierField::zeros(3, 1, 1), &r).is_err());
        assert!(div_r(&FourierField::zeros(2, 1, 2), &r).is_err());
    }

    #[test]
    fn means() {
        let mut u = FourierField::constant(2, 2, &[3.0]);
        u.set_mode(&[1, 0], 0, Complex64::new(0.5, 0.0)).unwrap();
        assert_eq!(torus_mean(&u), vec![3.0]);
        u.set_mode(&[0, 0], 0, Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(torus_mean(&u), vec![0.0]);
    }

    #[test]
    fn grad_has_zero_mean_for_random_fields() {
        let r = builtin_matrix("octagonal").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_field(4, 2, 1, &mut rng);
        assert!(torus_mean(&grad_r(&u, &r).unwrap()).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn slice_of_cosine_and_constant() {
        let r = fib();
        let mut u = FourierField::zeros(2, 1, 1);
        u.set_mode(&[1, 0], 0, Complex64::new(0.5, 0.0)).unwrap();
        let xs: Vec<Vec<f64>> = (0..7).map(|i| vec![0.37 * i as f64]).collect();
        let s = slice_sample(&u, &r, 1.0, &xs).unwrap();
        for (x, v) in xs.iter().zip(&s) {
            assert!((v[0] - (2.0 * PI * r.get(0, 0) * x[0]).cos()).abs() < 1e-13);
        }
        let c = FourierField::constant(2, 1, &[2.5]);
        assert!(slice_sample(&c, &r, 0.01, &xs).unwrap().iter().all(|v| v[0] == 2.5));
        assert!(slice_sample(&c, &r, 0.0, &xs).is_err());
    }

    #[test]
    fn slice_paths_agree() {
        let r = fib();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_field(2, 5, 1, &mut rng);
        let xs: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random_range(0.0..1.0)]).collect();
        let scale: f64 = u.coeffs().iter().map(|c| c.norm()).sum();
        for eta in [1.0, 0.1, 1.0 / 640.0] {
            let a = slice_sample(&u, &r, eta, &xs).unwrap();
            let b = slice_sample_direct(&u, &r, eta, &xs).unwrap();
            for (p, q) in a.iter().zip(&b) {
                assert!((p[0] - q[0]).abs() < 1e-12 * scale, "{eta}: {} vs {}", p[0], q[0]);
            }
        }
    }

    #[test]
    fn ergodic_average_of_constant_and_cosine() {
        let r = fib();
        let one = FourierField::constant(2, 1, &[1.0]);
        assert_eq!(ergodic_average(&one, &r, 7.0).unwrap(), vec![1.0]);
        let mut u = FourierField::zeros(2, 1, 1);
        u.set_mode(&[1, 0], 0, Complex64::new(0.5, 0.0)).unwrap();
        let t = 100.0;
        let w = 2.0 * PI * r.get(0, 0) * t;
        let v = ergodic_average(&u, &r, t).unwrap()[0];
        assert!((v - w.sin() / w).abs() < 1e-12);
    }

    #[test]
    fn green_identity_single_modes() {
        let r = fib();
        let k = [1, 1];
        let mut theta = FourierField::zeros(2, 1, 1);
        theta.set_mode(&k, 0, Complex64::new(0.5, 0.0)).unwrap();
        let mut phi = FourierField::zeros(2, 1, 1);
        phi.set_mode(&k, 0, Complex64::new(0.0, 0.5)).unwrap();
        let g = green_identity_residual(&phi, &theta, &r).unwrap();
        // φ = −sin(2πk·y), θ = cos(2πk·y): ∫div_R φ θ = −2π(Rᵀk)·(1/2)
        let rt = r.rt_k(&k)[0];
        assert!((g.div_term + PI * rt).abs() < 1e-14);
        assert!((g.grad_term - PI * rt).abs() < 1e-14);
        assert!(g.residual < 1e-15);
        let zero = FourierField::zeros(2, 1, 1);
        assert_eq!(green_identity_residual(&zero, &theta, &r).unwrap().residual, 0.0);
    }

    #[test]
    fn xp_split_classifications() {
        let (classes, rep) = xp_split(&FourierField::zeros(2, 3, 1), &fib()).unwrap();
        assert!(rep.exact);
        assert_eq!(rep.constant, 1);
        assert_eq!(rep.neither, classes.len() - 1);
        assert!(rep.no_pure_xp_modes);

        let axis = ProjectionMatrix::new(2, 1, vec![1.0, 0.0], AlgebraicTag::NumericOnly).unwrap();
        let u = FourierField::zeros(2, 1, 1);
        let (classes, rep) = xp_split(&u, &axis).unwrap();
        assert!(!rep.exact);
        let ix = u.indexer();
        assert_eq!(classes[ix.index(&[0, 1])], ModeClass::Orthogonal);
        assert_eq!(classes[ix.index(&[1, 0])], ModeClass::InPlane);
        assert_eq!(classes[ix.index(&[1, 1])], ModeClass::Neither);
        assert_eq!(classes[ix.zero()], ModeClass::Constant);
        assert!(!rep.no_pure_xp_modes);
    }
}
