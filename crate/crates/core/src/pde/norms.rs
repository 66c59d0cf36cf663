//! `Lᵖ` norms and errors of finite-element functions, integrated on the
//! common refinement of the meshes involved.

use super::mesh::{merge_breakpoints, GAUSS3};
use super::{MacroSolution, Mesh};
use crate::error::{Error, Result};
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Value,
    Gradient,
}

/// `∫_Ω f` with 3-point Gauss on every cell of the merged breakpoints of
/// `meshes`.
pub fn integrate_common(meshes: &[&Mesh], f: impl Fn(&[f64]) -> f64 + Sync) -> Result<f64> {
    let first = meshes.first().ok_or_else(|| Error::Config("no mesh to integrate on".into()))?;
    for m in &meshes[1..] {
        if !first.same_domain(m) {
            return Err(Error::MismatchedDomains(format!("{:?} vs {:?}", first.extents, m.extents)));
        }
    }
    let axes: Vec<Vec<f64>> = (0..first.n())
        .map(|a| merge_breakpoints(&meshes.iter().map(|m| m.breakpoints(a)).collect::<Vec<_>>()))
        .collect();
    let points_1d = |b: &[f64]| -> Vec<(f64, f64)> {
        b.windows(2)
            .flat_map(|w| GAUSS3.iter().map(move |&(t, g)| (w[0] + t * (w[1] - w[0]), g * (w[1] - w[0]))))
            .collect()
    };
    let px = points_1d(&axes[0]);
    // row sums are collected before the final sum so the result does not
    // depend on the worker count
    let rows: Vec<f64> = if first.n() == 1 {
        px.par_chunks(96).map(|c| c.iter().map(|&(x, w)| w * f(&[x])).sum::<f64>()).collect()
    } else {
        points_1d(&axes[1])
            .par_iter()
            .map(|&(y, wy)| px.iter().map(|&(x, wx)| wx * wy * f(&[x, y])).sum::<f64>())
            .collect()
    };
    Ok(rows.iter().sum())
}

/// `(∫|f|ᵖ, Σ_cells |cell mean of f|ᵖ · |cell|)` for a vector field `f`,
/// over the cells of the merged breakpoints of `meshes`. The second value
/// measures `f` after projection onto piecewise constants.
pub fn lp_pointwise_and_projected(
    meshes: &[&Mesh],
    p: f64,
    f: impl Fn(&[f64]) -> Vec<f64> + Sync,
) -> Result<(f64, f64)> {
    check_p(p)?;
    let first = meshes.first().ok_or_else(|| Error::Config("no mesh to integrate on".into()))?;
    for m in &meshes[1..] {
        if !first.same_domain(m) {
            return Err(Error::MismatchedDomains(format!("{:?} vs {:?}", first.extents, m.extents)));
        }
    }
    let axes: Vec<Vec<f64>> = (0..first.n())
        .map(|a| merge_breakpoints(&meshes.iter().map(|m| m.breakpoints(a)).collect::<Vec<_>>()))
        .collect();
    let norm_p = |v: &[f64]| power(v, p);
    let cell = |lo: &[f64], hi: &[f64]| -> (f64, f64) {
        let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
        let mut pointwise = 0.0;
        let mut mean: Vec<f64> = Vec::new();
        let mut visit = |x: &[f64], w: f64| {
            let v = f(x);
            if mean.is_empty() {
                mean = vec![0.0; v.len()];
            }
            pointwise += w * vol * norm_p(&v);
            for (m, c) in mean.iter_mut().zip(&v) {
                *m += w * c;
            }
        };
        if lo.len() == 1 {
            for &(t, w) in &GAUSS3 {
                visit(&[lo[0] + t * (hi[0] - lo[0])], w);
            }
        } else {
            for &(s, ws) in &GAUSS3 {
                for &(t, wt) in &GAUSS3 {
                    visit(&[lo[0] + t * (hi[0] - lo[0]), lo[1] + s * (hi[1] - lo[1])], ws * wt);
                }
            }
        }
        (pointwise, vol * norm_p(&mean))
    };
    let rows: Vec<(f64, f64)> = if first.n() == 1 {
        axes[0]
            .par_windows(2)
            .with_min_len(256)
            .map(|w| cell(&w[..1], &w[1..]))
            .collect()
    } else {
        axes[1]
            .par_windows(2)
            .map(|wy| {
                axes[0].windows(2).fold((0.0, 0.0), |acc, wx| {
                    let c = cell(&[wx[0], wy[0]], &[wx[1], wy[1]]);
                    (acc.0 + c.0, acc.1 + c.1)
                })
            })
            .collect()
    };
    Ok(rows.iter().fold((0.0, 0.0), |acc, c| (acc.0 + c.0, acc.1 + c.1)))
}

fn pointwise(sol: &MacroSolution, x: &[f64], q: Quantity) -> Vec<f64> {
    let (e, t) = sol.mesh.locate(x);
    let (v, g) = sol.local(e, &t);
    match q {
        Quantity::Value => vec![v],
        Quantity::Gradient => g,
    }
}

fn power(v: &[f64], p: f64) -> f64 {
    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if p == 2.0 {
        s * s
    } else {
        s.powf(p)
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Config(format!("Lp exponent must be finite and ≥ 1, got {p}")));
    }
    Ok(())
}

/// `‖u‖_{Lᵖ}` or `‖∇u‖_{Lᵖ}`.
pub fn lp_norm(sol: &MacroSolution, p: f64, q: Quantity) -> Result<f64> {
    check_p(p)?;
    Ok(integrate_common(&[&sol.mesh], |x| power(&pointwise(sol, x, q), p))?.powf(1.0 / p))
}

/// `‖a − b‖_{Lᵖ}` (or of the gradients) for solutions on possibly
/// different meshes of the same domain.
pub fn lp_error(a: &MacroSolution, b: &MacroSolution, p: f64, q: Quantity) -> Result<f64> {
    check_p(p)?;
    let total = integrate_common(&[&a.mesh, &b.mesh], |x| {
        let u = pointwise(a, x, q);
        let v = pointwise(b, x, q);
        let d: Vec<f64> = u.iter().zip(&v).map(|(s, t)| s - t).collect();
        power(&d, p)
    })?;
    Ok(total.powf(1.0 / p))
}
