//! Pogorelov's singular example for `n = 3`, built from `φ(u₁, 𝐯) = −k|𝐯|⁴cos u₁`.
//!
//! Parameters are `(u₁, v₂, v₃)`; the surface is `v₁ = k|𝐯|⁴ sin u₁` together
//! with `𝐮 = ±4k|𝐯|² cos(u₁)·𝐯`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SlagError};
use crate::lin::RMat;

use super::surface::{eds_report, EdsReport, ImmersedSurface, ParamGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PogorelovVariant {
    /// `𝐮 = −∇_𝐯φ`: the partial Legendre transform, Lagrangian.
    Legendre,
    /// `𝐮 = +∇_𝐯φ` as printed; not Lagrangian.
    Printed,
}

impl PogorelovVariant {
    fn sign(self) -> f64 {
        match self {
            PogorelovVariant::Legendre => 1.0,
            PogorelovVariant::Printed => -1.0,
        }
    }
}

/// Sample box in `(u₁, v₂, v₃)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PogorelovRegion {
    pub u1: (f64, f64, usize),
    pub v: (f64, f64, usize),
}

impl Default for PogorelovRegion {
    /// A 40×40 grid in the 𝐯-plane over `[0.5, 1.5]²` at `u₁ = 0`.
    fn default() -> Self {
        PogorelovRegion {
            u1: (0.0, 0.0, 1),
            v: (0.5, 1.5, 40),
        }
    }
}

impl PogorelovRegion {
    pub fn grid(&self) -> Result<ParamGrid> {
        ParamGrid::new(
            vec![self.u1.0, self.v.0, self.v.0],
            vec![self.u1.1, self.v.1, self.v.1],
            vec![self.u1.2, self.v.2, self.v.2],
        )
    }
}

/// The parameterized surface in `(x, y)` coordinates with its analytic Jacobian.
pub fn pogorelov_surface(
    k: f64,
    variant: PogorelovVariant,
    grid: ParamGrid,
) -> Result<ImmersedSurface> {
    if grid.dim() != 3 {
        return Err(SlagError::SizeMismatch(grid.dim(), 3));
    }
    let s = variant.sign();
    let null_point = move |p: &[f64]| {
        let (t, v2, v3) = (p[0], p[1], p[2]);
        let r2 = v2 * v2 + v3 * v3;
        let c = s * 4.0 * k * r2 * t.cos();
        let u = [t, c * v2, c * v3];
        let v = [k * r2 * r2 * t.sin(), v2, v3];
        (u, v)
    };
    let map = move |p: &[f64]| {
        let (u, v) = null_point(p);
        let x = (0..3).map(|i| 0.5 * (u[i] + v[i]));
        let y = (0..3).map(|i| 0.5 * (v[i] - u[i]));
        x.chain(y).collect()
    };
    let jac = move |p: &[f64]| {
        let (t, vv) = (p[0], [p[1], p[2]]);
        let r2 = vv[0] * vv[0] + vv[1] * vv[1];
        let (st, ct) = t.sin_cos();
        // Rows: u₁, u₂, u₃, v₁, v₂, v₃; columns: ∂/∂u₁, ∂/∂v₂, ∂/∂v₃.
        let mut uv = RMat::zeros(6, 3);
        uv[(0, 0)] = 1.0;
        for a in 0..2 {
            uv[(1 + a, 0)] = -s * 4.0 * k * r2 * st * vv[a];
            for b in 0..2 {
                let delta = if a == b { r2 } else { 0.0 };
                uv[(1 + a, 1 + b)] = s * 4.0 * k * ct * (2.0 * vv[a] * vv[b] + delta);
            }
            uv[(3, 1 + a)] = 4.0 * k * r2 * vv[a] * st;
            uv[(4 + a, 1 + a)] = 1.0;
        }
        uv[(3, 0)] = k * r2 * r2 * ct;
        let mut out = RMat::zeros(6, 3);
        for i in 0..3 {
            for j in 0..3 {
                out[(i, j)] = 0.5 * (uv[(i, j)] + uv[(3 + i, j)]);
                out[(3 + i, j)] = 0.5 * (uv[(3 + i, j)] - uv[(i, j)]);
            }
        }
        out
    };
    Ok(ImmersedSurface::new(grid, map).with_jacobian(jac))
}

#[derive(Clone, Debug, Serialize)]
pub struct PogorelovReport {
    pub k_found: f64,
    pub variant: PogorelovVariant,
    pub region: PogorelovRegion,
    pub max_im_dz: f64,
    pub max_omega: f64,
    pub lagrangian: bool,
    pub min_margin: f64,
    /// Max `|Im dz|` against `k` on a log grid over `[1e−4, 1]`.
    pub residual_curve: Vec<(f64, f64)>,
    pub passed: bool,
    pub report: EdsReport,
}

fn max_im_dz(k: f64, variant: PogorelovVariant, grid: &ParamGrid) -> f64 {
    let s = pogorelov_surface(k, variant, grid.clone()).expect("3-d grid");
    let r = eds_report(&s, 0.0);
    if r.im_dz.accepted() == 0 {
        f64::INFINITY
    } else {
        r.im_dz.max_abs
    }
}

/// Golden-section search of `log k` minimizing the max `|Im dz|` over the region.
fn search_k(variant: PogorelovVariant, grid: &ParamGrid) -> f64 {
    let f = |lk: f64| max_im_dz(lk.exp(), variant, grid);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (1e-4f64.ln(), 0.0f64);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (0.5 * (a + b)).exp()
}

/// Build the fixture, root-finding `k` when it is not given.
pub fn pogorelov_fixture(
    k: Option<f64>,
    variant: PogorelovVariant,
    region: PogorelovRegion,
    tol: f64,
) -> Result<PogorelovReport> {
    let grid = region.grid()?;
    if let Some(k) = k {
        if !(k > 0.0) {
            return Err(SlagError::Invalid(format!("k must be positive, got {k}")));
        }
    }
    let k_found = k.unwrap_or_else(|| search_k(variant, &grid));
    let residual_curve = (0..=40)
        .map(|i| {
            let kk = 10f64.powf(-4.0 + 0.1 * i as f64);
            (kk, max_im_dz(kk, variant, &grid))
        })
        .collect();
    let report = eds_report(&pogorelov_surface(k_found, variant, grid)?, tol);
    Ok(PogorelovReport {
        k_found,
        variant,
        region,
        max_im_dz: report.im_dz.max_abs,
        max_omega: report.omega.max_abs,
        lagrangian: report.lagrangian,
        min_margin: report.min_margin,
        residual_curve,
        passed: report.im_dz.max_abs <= tol && report.lagrangian && report.spacelike,
        report,
    })
}
