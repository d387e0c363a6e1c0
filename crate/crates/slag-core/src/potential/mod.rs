//! Potentials, the two split SLAG equations and the surfaces they generate.
//!
//! In the x-picture a graph `y = ∇f(x)` is split SLAG iff
//! `Im det_D(I + τ Hess f) = 0` with `−I < Hess f < I`; in the null picture a
//! graph `v = ∇g(u)` is split SLAG iff `g` is convex with `det Hess g = 1`.

mod appc;
mod field;
mod pogorelov;
mod surface;
mod volume;

pub use appc::{appc_residual, twisted_normal_param, AppcReport};
pub use field::{BoxDomain, FieldSpec, GridData, MatrixFn, ScalarField, ValueFn, VectorFn};
pub use pogorelov::{
    pogorelov_fixture, pogorelov_surface, PogorelovRegion, PogorelovReport, PogorelovVariant,
};
pub use surface::{
    eds_report, surface_from_potential, Chart, EdsReport, ImmersedSurface, ParamGrid,
};
pub use volume::{
    simpson_weights, unit_square_bump, volume_and_calibrated_integral, volume_experiment,
    VolumeExperiment, VolumeReport, VolumeRow,
};

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Result, SlagError};
use crate::lin::{self, RMat};
use crate::planes::{im_det_i_tau, sigma_odd};

/// Per-node residuals with aggregate norms and a witness.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    /// `None` marks an excluded node.
    pub residuals: Vec<Option<f64>>,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub witness: Option<usize>,
    pub witness_point: Option<Vec<f64>>,
    pub excluded: usize,
    pub tol: f64,
    pub passed: bool,
}

impl ResidualReport {
    pub fn from_nodes(points: &[Vec<f64>], residuals: Vec<Option<f64>>, tol: f64) -> Self {
        let mut max_abs = 0.0f64;
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut witness = None;
        for (i, r) in residuals.iter().enumerate() {
            if let Some(r) = r {
                let a = r.abs();
                if witness.is_none() || a > max_abs || a.is_nan() {
                    max_abs = a;
                    witness = Some(i);
                }
                sum += a;
                count += 1;
            }
        }
        let excluded = residuals.len() - count;
        let mean_abs = if count > 0 { sum / count as f64 } else { 0.0 };
        ResidualReport {
            witness_point: witness.and_then(|i| points.get(i).cloned()),
            residuals,
            max_abs,
            mean_abs,
            witness,
            excluded,
            tol,
            passed: max_abs <= tol && count > 0,
        }
    }

    pub fn accepted(&self) -> usize {
        self.residuals.len() - self.excluded
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct XResidualReport {
    /// `½[det(I + H) − det(I − H)]`.
    pub report: ResidualReport,
    /// `Σ σ_{2k+1}(H)` from the eigenvalues.
    pub sigma_route: Vec<Option<f64>>,
    /// Largest relative gap between the two routes.
    pub route_gap: f64,
    /// `1 − max |λ(H)|`; positive inside `−I < H < I`.
    pub margin: Vec<Option<f64>>,
    pub min_margin: f64,
}

/// Residual of `Im det_D(I + τ Hess f) = 0` at the given points.
pub fn slag_residual_x(f: &ScalarField, pts: &[Vec<f64>], tol: f64) -> XResidualReport {
    let rows: Vec<Option<(f64, f64, f64)>> = pts
        .iter()
        .map(|x| {
            let h = f.hessian(x)?;
            let spec = lin::sym_eigenvalues(&h);
            let margin = 1.0 - spec.iter().fold(0.0f64, |m, l| m.max(l.abs()));
            Some((im_det_i_tau(&h), sigma_odd(&h), margin))
        })
        .collect();
    let report =
        ResidualReport::from_nodes(pts, rows.iter().map(|r| r.map(|t| t.0)).collect(), tol);
    let route_gap = rows
        .iter()
        .flatten()
        .map(|(a, b, _)| (a - b).abs() / a.abs().max(b.abs()).max(1.0))
        .fold(0.0, f64::max);
    let margin: Vec<Option<f64>> = rows.iter().map(|r| r.map(|t| t.2)).collect();
    let min_margin = margin
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    XResidualReport {
        report,
        sigma_route: rows.iter().map(|r| r.map(|t| t.1)).collect(),
        route_gap,
        margin,
        min_margin,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NullResidualReport {
    /// `det Hess g − rhs`.
    pub report: ResidualReport,
    pub convex: Vec<Option<bool>>,
    pub all_convex: bool,
}

/// Residual of `det Hess g = rhs(∇g, u)`; `rhs = 1` is the split SLAG equation.
pub fn ma_residual_null(
    g: &ScalarField,
    rhs: &(dyn Fn(&[f64], &[f64]) -> f64 + Sync),
    pts: &[Vec<f64>],
    tol: f64,
) -> NullResidualReport {
    let rows: Vec<Option<(f64, bool)>> = pts
        .iter()
        .map(|u| {
            let h = g.hessian(u)?;
            let grad = g.gradient(u)?;
            let convex = lin::min_sym_eigenvalue(&h) > 0.0;
            Some((lin::det(&h) - rhs(&grad, u), convex))
        })
        .collect();
    let convex: Vec<Option<bool>> = rows.iter().map(|r| r.map(|t| t.1)).collect();
    NullResidualReport {
        report: ResidualReport::from_nodes(pts, rows.iter().map(|r| r.map(|t| t.0)).collect(), tol),
        all_convex: convex.iter().flatten().all(|c| *c),
        convex,
    }
}

pub fn unit_rhs(_grad: &[f64], _u: &[f64]) -> f64 {
    1.0
}

/// Radial solution of `det Hess g = 1` on a planar annulus:
/// `g′(r) = √(r² + c)`, `g = ½[r√(r² + c) + c·asinh(r/√c)]`.
pub fn radial_solution(c: f64) -> Result<ScalarField> {
    if !(c > 0.0) {
        return Err(SlagError::Invalid(format!(
            "radial solution needs c > 0, got {c}"
        )));
    }
    let sc = c.sqrt();
    let field = ScalarField::from_fn(2, move |x| {
        let r = x[0].hypot(x[1]);
        0.5 * (r * (r * r + c).sqrt() + c * (r / sc).asinh())
    })
    .with_gradient(move |x| {
        let r = x[0].hypot(x[1]);
        let s = (r * r + c).sqrt() / r;
        vec![s * x[0], s * x[1]]
    })
    .with_hessian(move |x| {
        let r = x[0].hypot(x[1]);
        let w = (r * r + c).sqrt();
        let (gpp, gp_r) = (r / w, w / r);
        let n = DVector::from_vec(vec![x[0] / r, x[1] / r]);
        let nn = &n * n.transpose();
        &nn * (gpp - gp_r) + RMat::identity(2, 2) * gp_r
    })
    .with_label("radial");
    Ok(field)
}

/// The annulus `r ∈ [r0, r1]` in polar parameters `(r, φ)`.
pub fn annulus_point(r: f64, phi: f64) -> Vec<f64> {
    vec![r * phi.cos(), r * phi.sin()]
}

#[derive(Clone, Debug, Serialize)]
pub struct NullPotentialReport {
    pub x: Vec<f64>,
    /// Projection `x ↦ u = x − ∇f`.
    pub u: Vec<f64>,
    /// Projection `x ↦ v = x + ∇f`, whose differential is `I + Hess f`.
    pub v: Vec<f64>,
    /// `g(u) = ½|x|² + 2f − x·∇f − ½|∇f|²`, so that `∇_u g = v`.
    pub g_value: f64,
    /// `f + ½|x|²`, with gradient `v`.
    pub g_intermediate: f64,
    /// `max_i |∂g/∂u_i − v_i|` by central differences in `u`.
    pub gradient_check: f64,
    pub margin: f64,
}

/// Solve `x − ∇f(x) = u` by Newton's method from `x0`.
fn invert_u_projection(f: &ScalarField, u: &[f64], x0: &[f64]) -> Option<Vec<f64>> {
    let n = u.len();
    let mut x = DVector::from_column_slice(x0);
    let target = DVector::from_column_slice(u);
    for _ in 0..60 {
        let xs: Vec<f64> = x.iter().copied().collect();
        let g = DVector::from_vec(f.gradient(&xs)?);
        let r = &x - g - &target;
        if r.amax() < 1e-15 {
            break;
        }
        let j = RMat::identity(n, n) - f.hessian(&xs)?;
        let step = j.lu().solve(&r)?;
        x -= step;
    }
    Some(x.iter().copied().collect())
}

fn null_potential_value(f: &ScalarField, x: &[f64]) -> Option<f64> {
    let grad = f.gradient(x)?;
    let xx: f64 = x.iter().map(|a| a * a).sum();
    let xg: f64 = x.iter().zip(&grad).map(|(a, b)| a * b).sum();
    let gg: f64 = grad.iter().map(|a| a * a).sum();
    Some(0.5 * xx + 2.0 * f.value(x) - xg - 0.5 * gg)
}

/// The null-picture potential attached to an x-picture potential `f` at `x`.
pub fn null_potential_from_x(f: &ScalarField, x: &[f64], fd_h: f64) -> Result<NullPotentialReport> {
    let n = x.len();
    let h = f
        .hessian(x)
        .ok_or_else(|| SlagError::Invalid("Hessian unavailable at x".into()))?;
    let grad = f
        .gradient(x)
        .ok_or_else(|| SlagError::Invalid("gradient unavailable at x".into()))?;
    let margin = 1.0
        - lin::sym_eigenvalues(&h)
            .iter()
            .fold(0.0f64, |m, l| m.max(l.abs()));
    if margin <= 0.0 {
        return Err(SlagError::SpacelikeViolation(margin));
    }
    let u: Vec<f64> = x.iter().zip(&grad).map(|(a, b)| a - b).collect();
    let v: Vec<f64> = x.iter().zip(&grad).map(|(a, b)| a + b).collect();
    let g_value = null_potential_value(f, x).expect("gradient available");
    let mut gradient_check = 0.0f64;
    for i in 0..n {
        let mut up = u.clone();
        let mut um = u.clone();
        up[i] += fd_h;
        um[i] -= fd_h;
        let xp = invert_u_projection(f, &up, x).ok_or(SlagError::NotInvertible)?;
        let xm = invert_u_projection(f, &um, x).ok_or(SlagError::NotInvertible)?;
        let gp = null_potential_value(f, &xp).ok_or(SlagError::NotInvertible)?;
        let gm = null_potential_value(f, &xm).ok_or(SlagError::NotInvertible)?;
        gradient_check = gradient_check.max(((gp - gm) / (2.0 * fd_h) - v[i]).abs());
    }
    let xx: f64 = x.iter().map(|a| a * a).sum();
    Ok(NullPotentialReport {
        x: x.to_vec(),
        u,
        v,
        g_value,
        g_intermediate: f.value(x) + 0.5 * xx,
        gradient_check,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_pts(lo: f64, hi: f64, n: usize) -> Vec<Vec<f64>> {
        let h = (hi - lo) / (n - 1) as f64;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                out.push(vec![lo + h * i as f64, lo + h * j as f64]);
            }
        }
        out
    }

    #[test]
    fn x_residual_quadratic() {
        let f = ScalarField::from_expr(2, "0.5*(0.5*x1^2 - 0.5*x2^2)").unwrap();
        let r = slag_residual_x(&f, &grid_pts(-1.0, 1.0, 5), 1e-12);
        assert!(r.report.passed);
        assert!((r.min_margin - 0.5).abs() < 1e-14);
    }

    #[test]
    fn n3_residual_is_trace_plus_det() {
        let f = ScalarField::from_expr(3, "0.1*x1^3 + 0.2*x1*x2*x3 - 0.15*x2^2*x3 + 0.05*x3^3")
            .unwrap();
        let x = vec![0.3, -0.7, 0.5];
        let h = f.hessian(&x).unwrap();
        let r = slag_residual_x(&f, &[x], 0.0);
        let want = h.trace() + lin::det(&h);
        assert!((r.report.residuals[0].unwrap() - want).abs() < 1e-14);
        assert!(r.route_gap < 1e-12);
    }

    #[test]
    fn null_residual_examples() {
        let g = ScalarField::from_expr(2, "0.5*(x1^2 + x2^2)").unwrap();
        let r = ma_residual_null(&g, &unit_rhs, &grid_pts(0.0, 1.0, 4), 1e-12);
        assert!(r.report.passed && r.all_convex);

        let g = ScalarField::from_expr(2, "0.5*(3*x1^2 + x2^2)").unwrap();
        let r = ma_residual_null(&g, &unit_rhs, &grid_pts(0.0, 1.0, 4), 1e-12);
        assert!(!r.report.passed);
        assert!(r
            .report
            .residuals
            .iter()
            .all(|x| (x.unwrap() - 2.0).abs() < 1e-14));
    }

    #[test]
    fn radial_solution_properties() {
        let g = radial_solution(1.0).unwrap();
        let gr = g.gradient(&[1.0, 0.0]).unwrap();
        assert!((gr[0] - 2f64.sqrt()).abs() < 1e-15);
        let mut pts = Vec::new();
        for i in 0..50 {
            for j in 0..50 {
                let r = 0.5 + i as f64 / 49.0;
                let phi = std::f64::consts::TAU * j as f64 / 50.0;
                pts.push(annulus_point(r, phi));
            }
        }
        let rep = ma_residual_null(&g, &unit_rhs, &pts, 1e-10);
        assert!(
            rep.report.passed && rep.all_convex,
            "{}",
            rep.report.max_abs
        );

        // Oracle: det Hess = g″·g′/r for a radial function.
        for x in [[0.6f64, 0.2], [1.1, -0.9]] {
            let r: f64 = x[0].hypot(x[1]);
            let gp = (r * r + 1.0).sqrt();
            let gpp = r / gp;
            assert!((gpp * gp / r - lin::det(&g.hessian(&x).unwrap())).abs() < 1e-14);
        }

        let big = radial_solution(100.0).unwrap();
        // Large c: eigenvalues approach √c/r (angular) and r/√c (radial).
        let x = [1.0, 0.5];
        let r = 1.25f64.sqrt();
        let ev = lin::sym_eigenvalues(&big.hessian(&x).unwrap());
        assert!(
            (ev[1] - 10.0 / r).abs() < 0.1 && (ev[0] - r / 10.0).abs() < 1e-3,
            "{ev:?}"
        );
        let rep = ma_residual_null(&big, &unit_rhs, &pts, 1e-10);
        assert!(rep.report.passed);

        // The value's gradient matches the closed form.
        let fd = ScalarField::from_fn(2, move |x| g.value(x)).with_fd_step(1e-5);
        let p = [0.8, 0.3];
        let a = fd.gradient(&p).unwrap();
        let b = radial_solution(1.0).unwrap().gradient(&p).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-8 && (a[1] - b[1]).abs() < 1e-8);
        assert!(radial_solution(0.0).is_err());
    }

    #[test]
    fn null_potential_examples() {
        let zero = ScalarField::from_expr(2, "0").unwrap();
        let r = null_potential_from_x(&zero, &[0.3, -0.4], 1e-4).unwrap();
        assert_eq!(r.u, r.v);
        assert!((r.g_value - 0.125).abs() < 1e-15);

        let f = ScalarField::from_expr(2, "0.25*(x1^2 + x2^2)").unwrap();
        let x = [0.6, 0.2];
        let r = null_potential_from_x(&f, &x, 1e-4).unwrap();
        for i in 0..2 {
            assert!((r.v[i] - 3.0 * r.u[i]).abs() < 1e-15);
        }
        let uu: f64 = r.u.iter().map(|a| a * a).sum();
        assert!((r.g_value - 1.5 * uu).abs() < 1e-14);
        assert!(r.gradient_check < 1e-8);
        assert!((r.g_intermediate - (0.25 * 0.4 + 0.5 * 0.4)).abs() < 1e-15);

        let steep = ScalarField::from_expr(1, "x1^2").unwrap();
        assert!(matches!(
            null_potential_from_x(&steep, &[0.0], 1e-4),
            Err(SlagError::SpacelikeViolation(_))
        ));
    }

    #[test]
    fn null_potential_gradient_converges_second_order() {
        let f = ScalarField::from_expr(2, "0.2*x1^2 - 0.1*x2^2 + 0.15*x1^3 - 0.1*x1*x2^2").unwrap();
        let x = [0.3, 0.25];
        let errs: Vec<f64> = [0.04, 0.02, 0.01]
            .iter()
            .map(|h| null_potential_from_x(&f, &x, *h).unwrap().gradient_check)
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.0 && ratio < 5.0, "{errs:?}");
        }
    }
}
