//! Twisted normal bundles: potentials `φ(x′, x″) = x″·u(x′) + h(x′)`.

use serde::Serialize;

use crate::error::{Result, SlagError};
use crate::lin::{self, RMat};

use super::field::ScalarField;
use super::surface::{ImmersedSurface, ParamGrid};
use super::ResidualReport;

#[derive(Clone, Debug, Serialize)]
pub struct AppcReport {
    /// `Δφ + det Hess φ`.
    pub report: ResidualReport,
    /// The same quantity through the bracket decomposition.
    pub decomposition: Vec<Option<f64>>,
    pub decomposition_gap: f64,
}

/// Hessian of `φ = Σ x″_k u_k(x′) + h(x′)` at `x = (x′, x″)`.
fn phi_hessian(u: &[ScalarField], h: &ScalarField, x: &[f64]) -> Option<RMat> {
    let p = h.dim();
    let n = p + u.len();
    let (xp, xpp) = x.split_at(p);
    let mut m = RMat::zeros(n, n);
    m.view_mut((0, 0), (p, p)).copy_from(&h.hessian(xp)?);
    for (k, uk) in u.iter().enumerate() {
        let hu = uk.hessian(xp)?;
        let gu = uk.gradient(xp)?;
        m.view_mut((0, 0), (p, p))
            .zip_apply(&hu, |a, b| *a += xpp[k] * b);
        for i in 0..p {
            m[(i, p + k)] = gu[i];
            m[(p + k, i)] = gu[i];
        }
    }
    Some(m)
}

fn phi_gradient(u: &[ScalarField], h: &ScalarField, x: &[f64]) -> Option<Vec<f64>> {
    let p = h.dim();
    let (xp, xpp) = x.split_at(p);
    let mut g = h.gradient(xp)?;
    for (k, uk) in u.iter().enumerate() {
        let gu = uk.gradient(xp)?;
        for i in 0..p {
            g[i] += xpp[k] * gu[i];
        }
    }
    g.extend(u.iter().map(|uk| uk.value(xp)));
    Some(g)
}

/// `Δφ + det Hess φ` for `n = 3`, `p = 2` at points `(x₁, x₂, x₃)`, checked
/// against `x₃·L(u) + L(h)` with `L(w) = (1−u₂²)w₁₁ + 2u₁u₂w₁₂ + (1−u₁²)w₂₂`.
pub fn appc_residual(
    u: &ScalarField,
    h: &ScalarField,
    pts: &[Vec<f64>],
    tol: f64,
) -> Result<AppcReport> {
    if u.dim() != 2 || h.dim() != 2 {
        return Err(SlagError::Dimension(
            "the residual identity needs p = 2, n = 3".into(),
        ));
    }
    if let Some(p) = pts.iter().find(|p| p.len() != 3) {
        return Err(SlagError::SizeMismatch(p.len(), 3));
    }
    let us = std::slice::from_ref(u);
    let rows: Vec<Option<(f64, f64)>> = pts
        .iter()
        .map(|x| {
            let m = phi_hessian(us, h, x)?;
            let direct = m.trace() + lin::det(&m);
            let xp = &x[..2];
            let (gu, hu, hh) = (u.gradient(xp)?, u.hessian(xp)?, h.hessian(xp)?);
            let l = |w: &RMat| {
                (1.0 - gu[1] * gu[1]) * w[(0, 0)]
                    + 2.0 * gu[0] * gu[1] * w[(0, 1)]
                    + (1.0 - gu[0] * gu[0]) * w[(1, 1)]
            };
            Some((direct, x[2] * l(&hu) + l(&hh)))
        })
        .collect();
    let decomposition: Vec<Option<f64>> = rows.iter().map(|r| r.map(|t| t.1)).collect();
    let decomposition_gap = rows
        .iter()
        .flatten()
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1.0))
        .fold(0.0, f64::max);
    Ok(AppcReport {
        report: ResidualReport::from_nodes(pts, rows.iter().map(|r| r.map(|t| t.0)).collect(), tol),
        decomposition,
        decomposition_gap,
    })
}

/// The immersion `(x′, x″) ↦ (x′, x″, x″·∂u/∂x′ + ∂h/∂x′, u(x′))`, i.e. the
/// x-picture graph of `∇φ`. `u` has `n − p` components on `R^p`.
pub fn twisted_normal_param(
    u: &[ScalarField],
    h: &ScalarField,
    grid: ParamGrid,
) -> Result<ImmersedSurface> {
    let p = h.dim();
    let n = p + u.len();
    if u.iter().any(|f| f.dim() != p) {
        return Err(SlagError::Dimension(
            "every component of u must live on R^p".into(),
        ));
    }
    if grid.dim() != n {
        return Err(SlagError::SizeMismatch(grid.dim(), n));
    }
    let (u1, h1) = (u.to_vec(), h.clone());
    let (u2, h2) = (u.to_vec(), h.clone());
    let s = ImmersedSurface::new(grid, move |x| {
        let g = phi_gradient(&u1, &h1, x).unwrap_or_else(|| vec![f64::NAN; n]);
        x.iter().chain(&g).copied().collect()
    })
    .with_jacobian(move |x| {
        let m = phi_hessian(&u2, &h2, x).unwrap_or_else(|| RMat::from_element(n, n, f64::NAN));
        let mut out = RMat::zeros(2 * n, n);
        out.rows_mut(0, n).fill_with_identity();
        out.rows_mut(n, n).copy_from(&m);
        out
    });
    Ok(s)
}
