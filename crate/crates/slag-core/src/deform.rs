//! First-order deformations of null-graph surfaces and the phase-gradient identity.
//!
//! A variation `ġ` of a base potential `g` moves the graph `v = ∇g` along
//! `ν = (0, ∇ġ)`. Pulled back to the base coordinates, `ν ⌟ ω` is the 1-form
//! `θ = −½dġ` and `ν ⌟ Im Φ` is the `(n−1)`-form `φ = ½ det h · ι_{h⁻¹∇ġ} du`
//! where `h = Hess g`. The star used here is the negated metric Hodge star, so
//! `φ = ⋆θ` whenever `det h = 1`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SlagError};
use crate::forms::AltForm;
use crate::lin::{self, RMat};
use crate::planes::{inner, omega_matrix, phase_pq, t_map, PlaneBasis};
use crate::potential::{ImmersedSurface, ParamGrid, ResidualReport, ScalarField};

/// A base potential, a variation and the grid they are compared on.
#[derive(Clone, Debug)]
pub struct VariationData {
    pub g: ScalarField,
    pub gdot: ScalarField,
    pub grid: ParamGrid,
}

impl VariationData {
    pub fn new(g: ScalarField, gdot: ScalarField, grid: ParamGrid) -> Result<Self> {
        if g.dim() != grid.dim() || gdot.dim() != grid.dim() {
            return Err(SlagError::SizeMismatch(g.dim().max(gdot.dim()), grid.dim()));
        }
        if grid.counts.iter().any(|&c| c < 2) {
            return Err(SlagError::Invalid(
                "every axis needs at least 2 nodes".into(),
            ));
        }
        Ok(VariationData { g, gdot, grid })
    }

    /// Square grid of `count` nodes per axis on `[lo, hi]^n`.
    pub fn on_cube(
        g: ScalarField,
        gdot: ScalarField,
        lo: f64,
        hi: f64,
        count: usize,
    ) -> Result<Self> {
        let grid = ParamGrid::cube(g.dim(), lo, hi, count)?;
        VariationData::new(g, gdot, grid)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HarmonicityReport {
    /// `tr(h⁻¹ Hess ġ)`.
    pub first_order: ResidualReport,
    /// Discrete exterior derivative of `θ`.
    pub d_theta: ResidualReport,
    /// `d⋆θ`, the weighted divergence of `h⁻¹∇ġ`.
    pub d_star_theta: ResidualReport,
    /// `φ − ⋆θ`, coefficientwise.
    pub star_relation: ResidualReport,
    /// Largest `|det h − 1|` seen on the grid.
    pub det_deviation: f64,
    pub spacing: f64,
}

impl HarmonicityReport {
    pub fn first_order_residual(&self) -> f64 {
        self.first_order.max_abs
    }
    pub fn d_theta_residual(&self) -> f64 {
        self.d_theta.max_abs
    }
    pub fn d_star_theta_residual(&self) -> f64 {
        self.d_star_theta.max_abs
    }
    pub fn star_relation_residual(&self) -> f64 {
        self.star_relation.max_abs
    }
}

/// Grid extended by `halo` nodes on every side; last axis fastest.
struct Halo<'a> {
    grid: &'a ParamGrid,
    halo: usize,
    shape: Vec<usize>,
}

impl<'a> Halo<'a> {
    fn new(grid: &'a ParamGrid, halo: usize) -> Self {
        let shape = grid.counts.iter().map(|c| c + 2 * halo).collect();
        Halo { grid, halo, shape }
    }

    fn len(&self) -> usize {
        self.shape.iter().product()
    }

    fn unflat(&self, mut k: usize) -> Vec<isize> {
        let mut idx = vec![0isize; self.shape.len()];
        for d in (0..self.shape.len()).rev() {
            idx[d] = (k % self.shape[d]) as isize - self.halo as isize;
            k /= self.shape[d];
        }
        idx
    }

    /// Flat index of grid index `idx` (may lie in the halo).
    fn flat(&self, idx: &[isize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |k, (&i, &n)| k * n + (i + self.halo as isize) as usize)
    }

    fn point(&self, idx: &[isize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(d, &i)| self.grid.lo[d] + i as f64 * self.grid.spacing(d))
            .collect()
    }

    fn shifted(idx: &[isize], moves: &[(usize, isize)]) -> Vec<isize> {
        let mut out = idx.to_vec();
        for &(d, s) in moves {
            out[d] += s;
        }
        out
    }
}

fn grid_index(grid: &ParamGrid, k: usize) -> Vec<isize> {
    grid.index(k).into_iter().map(|i| i as isize).collect()
}

/// Central-difference Hessian from samples on a halo grid.
fn fd_hessian(samples: &[f64], halo: &Halo, idx: &[isize]) -> RMat {
    let n = idx.len();
    let at = |moves: &[(usize, isize)]| samples[halo.flat(&Halo::shifted(idx, moves))];
    let mut m = RMat::zeros(n, n);
    for i in 0..n {
        let hi = halo.grid.spacing(i);
        m[(i, i)] = (at(&[(i, 1)]) - 2.0 * at(&[]) + at(&[(i, -1)])) / (hi * hi);
        for j in 0..i {
            let hj = halo.grid.spacing(j);
            let v = (at(&[(i, 1), (j, 1)]) - at(&[(i, 1), (j, -1)]) - at(&[(i, -1), (j, 1)])
                + at(&[(i, -1), (j, -1)]))
                / (4.0 * hi * hj);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// The metric Hodge star of a 1-form with the sign flipped.
pub fn star_1form(theta: &[f64], h: &RMat) -> Result<AltForm> {
    let n = theta.len();
    let hinv = lin::inverse(h).ok_or(SlagError::NotInvertible)?;
    let sharp = &hinv * nalgebra::DVector::from_column_slice(theta);
    let vol = AltForm::basis(n, &(0..n).collect::<Vec<_>>());
    Ok(vol
        .contract(sharp.as_slice())
        .scale(-lin::det(h).abs().sqrt()))
}

/// `φ = ν ⌟ Im Φ` pulled back to the base by `u ↦ (u, ∇g(u))`, with `Φ = du·e + dv·ē`.
pub fn variation_phi(grad_gdot: &[f64], h: &RMat) -> AltForm {
    let n = grad_gdot.len();
    // Im Φ = ½(dv − du); ν has no du component, so only ½ ι_ν dv survives.
    let dv = AltForm::basis(n, &(0..n).collect::<Vec<_>>());
    dv.contract(grad_gdot).pullback(h).scale(0.5)
}

/// All four deformation residuals on the grid.
pub fn variation_harmonicity(data: &VariationData, tol: f64) -> Result<HarmonicityReport> {
    let grid = &data.grid;
    let n = grid.dim();
    let halo = Halo::new(grid, 2);
    let g_samples: Vec<f64> = (0..halo.len())
        .into_par_iter()
        .map(|k| data.g.value(&halo.point(&halo.unflat(k))))
        .collect();
    let gdot_samples: Vec<f64> = (0..halo.len())
        .into_par_iter()
        .map(|k| data.gdot.value(&halo.point(&halo.unflat(k))))
        .collect();

    // Metric on the grid plus one ring, needed by the divergence stencil.
    let ring = Halo::new(grid, 1);
    let metric: Vec<RMat> = (0..ring.len())
        .into_par_iter()
        .map(|k| fd_hessian(&g_samples, &halo, &ring.unflat(k)))
        .collect();
    for (k, h) in metric.iter().enumerate() {
        if !(lin::min_sym_eigenvalue(h) > 0.0) {
            let idx = ring.unflat(k);
            let inside = idx
                .iter()
                .zip(&grid.counts)
                .all(|(&i, &c)| i >= 0 && (i as usize) < c);
            if inside {
                let flat = idx
                    .iter()
                    .zip(&grid.counts)
                    .fold(0, |a, (&i, &c)| a * c + i as usize);
                return Err(SlagError::MetricDegenerate(flat));
            }
        }
    }
    let metric_at = |idx: &[isize]| &metric[ring.flat(idx)];

    let flux = |idx: &[isize]| -> Result<Vec<f64>> {
        let h = metric_at(idx);
        let p = halo.point(idx);
        let grad = data
            .gdot
            .gradient(&p)
            .ok_or_else(|| SlagError::Invalid(format!("no gradient of the variation at {p:?}")))?;
        let hinv = lin::inverse(h).ok_or(SlagError::NotInvertible)?;
        let w = hinv * nalgebra::DVector::from_vec(grad);
        Ok((w * lin::det(h).sqrt()).as_slice().to_vec())
    };

    let rows: Vec<Result<[f64; 5]>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let idx = grid_index(grid, k);
            let p = grid.point(k);
            let h = metric_at(&idx);
            let hinv = lin::inverse(h).ok_or(SlagError::NotInvertible)?;
            let grad = data.gdot.gradient(&p).ok_or_else(|| {
                SlagError::Invalid(format!("no gradient of the variation at {p:?}"))
            })?;
            let hess = data.gdot.hessian(&p).ok_or_else(|| {
                SlagError::Invalid(format!("no Hessian of the variation at {p:?}"))
            })?;
            let first = (&hinv * hess).trace();

            let theta: Vec<f64> = grad.iter().map(|d| -0.5 * d).collect();
            let phi = variation_phi(&grad, h);
            let star = star_1form(&theta, h)?;
            let star_gap = phi.sub(&star).max_abs();

            // d⋆θ = ½ div(√det h · h⁻¹∇ġ) du.
            let mut div = 0.0;
            for d in 0..n {
                let fp = flux(&Halo::shifted(&idx, &[(d, 1)]))?;
                let fm = flux(&Halo::shifted(&idx, &[(d, -1)]))?;
                div += (fp[d] - fm[d]) / (2.0 * grid.spacing(d));
            }

            // dθ from sampled ġ: commuting central differences.
            let th = |at: &[isize], j: usize| {
                let a = gdot_samples[halo.flat(&Halo::shifted(at, &[(j, 1)]))];
                let b = gdot_samples[halo.flat(&Halo::shifted(at, &[(j, -1)]))];
                -0.5 * (a - b) / (2.0 * grid.spacing(j))
            };
            let mut curl = 0.0f64;
            for i in 0..n {
                for j in 0..i {
                    let di = (th(&Halo::shifted(&idx, &[(i, 1)]), j)
                        - th(&Halo::shifted(&idx, &[(i, -1)]), j))
                        / (2.0 * grid.spacing(i));
                    let dj = (th(&Halo::shifted(&idx, &[(j, 1)]), i)
                        - th(&Halo::shifted(&idx, &[(j, -1)]), i))
                        / (2.0 * grid.spacing(j));
                    curl = curl.max((di - dj).abs());
                }
            }
            Ok([first, curl, 0.5 * div, star_gap, (lin::det(h) - 1.0).abs()])
        })
        .collect();
    let rows: Vec<[f64; 5]> = rows.into_iter().collect::<Result<_>>()?;
    let pts = grid.points();
    let column = |c: usize| rows.iter().map(|r| Some(r[c])).collect::<Vec<_>>();
    Ok(HarmonicityReport {
        first_order: ResidualReport::from_nodes(&pts, column(0), tol),
        d_theta: ResidualReport::from_nodes(&pts, column(1), tol),
        d_star_theta: ResidualReport::from_nodes(&pts, column(2), tol),
        star_relation: ResidualReport::from_nodes(&pts, column(3), tol),
        det_deviation: rows.iter().map(|r| r[4]).fold(0.0, f64::max),
        spacing: (0..n).map(|d| grid.spacing(d)).fold(0.0, f64::max),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinementRow {
    pub spacing: f64,
    pub first_order: f64,
    pub d_theta: f64,
    pub d_star_theta: f64,
    pub star_relation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinementTable {
    pub rows: Vec<RefinementRow>,
    /// Successive ratios `coarse / fine` of the `d⋆θ` residual.
    pub d_star_ratios: Vec<f64>,
    /// Successive ratios of the star-relation residual.
    pub star_ratios: Vec<f64>,
}

/// Run the residuals on `[lo, hi]^n` for each node count.
pub fn refinement_table(
    g: &ScalarField,
    gdot: &ScalarField,
    lo: f64,
    hi: f64,
    counts: &[usize],
    tol: f64,
) -> Result<RefinementTable> {
    let mut rows = Vec::with_capacity(counts.len());
    for &c in counts {
        let data = VariationData::on_cube(g.clone(), gdot.clone(), lo, hi, c)?;
        let r = variation_harmonicity(&data, tol)?;
        rows.push(RefinementRow {
            spacing: r.spacing,
            first_order: r.first_order_residual(),
            d_theta: r.d_theta_residual(),
            d_star_theta: r.d_star_theta_residual(),
            star_relation: r.star_relation_residual(),
        });
    }
    let ratios = |f: fn(&RefinementRow) -> f64| {
        rows.windows(2)
            .map(|w| f(&w[0]) / f(&w[1]))
            .collect::<Vec<_>>()
    };
    Ok(RefinementTable {
        d_star_ratios: ratios(|r| r.d_star_theta),
        star_ratios: ratios(|r| r.star_relation),
        rows,
    })
}

pub type SecondFn = Arc<dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync>;

/// A parameterized surface with access to second derivatives.
///
/// Without an analytic second jet, `X_ij` comes from central differences of
/// the map with the grid spacing as step.
#[derive(Clone)]
pub struct SurfaceJet {
    pub surface: ImmersedSurface,
    second: Option<SecondFn>,
}

impl fmt::Debug for SurfaceJet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SurfaceJet")
            .field("surface", &self.surface)
            .field("analytic_second", &self.second.is_some())
            .finish()
    }
}

impl SurfaceJet {
    pub fn new(surface: ImmersedSurface) -> Self {
        SurfaceJet {
            surface,
            second: None,
        }
    }

    /// `X_ij` flattened row-major, each a `2n` vector.
    pub fn with_second(
        mut self,
        f: impl Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.second = Some(Arc::new(f));
        self
    }

    pub fn second(&self, p: &[f64]) -> Vec<Vec<f64>> {
        if let Some(f) = &self.second {
            return f(p);
        }
        let s = &self.surface;
        let n = s.n();
        let mut out = Vec::with_capacity(n * n);
        let at = |moves: &[(usize, f64)]| {
            let mut q = p.to_vec();
            for &(d, t) in moves {
                q[d] += t;
            }
            s.point(&q)
        };
        let c = s.point(p);
        for i in 0..n {
            for j in 0..n {
                let (hi, hj) = (s.grid.spacing(i), s.grid.spacing(j));
                let v: Vec<f64> = if i == j {
                    let (a, b) = (at(&[(i, hi)]), at(&[(i, -hi)]));
                    (0..2 * n)
                        .map(|r| (a[r] - 2.0 * c[r] + b[r]) / (hi * hi))
                        .collect()
                } else {
                    let pp = at(&[(i, hi), (j, hj)]);
                    let pm = at(&[(i, hi), (j, -hj)]);
                    let mp = at(&[(i, -hi), (j, hj)]);
                    let mm = at(&[(i, -hi), (j, -hj)]);
                    (0..2 * n)
                        .map(|r| (pp[r] - pm[r] - mp[r] + mm[r]) / (4.0 * hi * hj))
                        .collect()
                };
                out.push(v);
            }
        }
        out
    }

    /// Signed mean curvature `Σ g^{ij} (X_ij)^⊥` and the tangent frame at `p`.
    pub fn mean_curvature(&self, p: &[f64]) -> Result<(Vec<f64>, RMat)> {
        let frame = self.surface.frame(p);
        let n = self.surface.n();
        let gram = crate::planes::induced_gram(&frame);
        let ginv = lin::inverse(&gram).ok_or(SlagError::NullDirections)?;
        let second = self.second(p);
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|k| frame.column(k).iter().copied().collect())
            .collect();
        let normal = |w: &[f64]| {
            let mut out = w.to_vec();
            for k in 0..n {
                for l in 0..n {
                    let c = ginv[(k, l)] * inner(&cols[l], w);
                    for (o, x) in out.iter_mut().zip(&cols[k]) {
                        *o -= c * x;
                    }
                }
            }
            out
        };
        let mut h = vec![0.0; 2 * n];
        for i in 0..n {
            for j in 0..n {
                let nij = normal(&second[i * n + j]);
                for (a, b) in h.iter_mut().zip(&nij) {
                    *a += ginv[(i, j)] * b;
                }
            }
        }
        Ok((h, frame))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseGradientReport {
    /// `max_i |∂_iθ + ⟨T X_i, H⟩|` at interior nodes; boundary nodes are excluded.
    pub report: ResidualReport,
    pub theta: Vec<f64>,
    pub signature: (usize, usize),
    /// Largest `|⟨H, X_k⟩|`.
    pub orthogonality: f64,
    pub max_mean_curvature: f64,
    pub theta_spread: f64,
    pub constant_phase: bool,
    pub minimal: bool,
    /// `constant_phase == minimal`.
    pub cross_flag_agrees: bool,
    pub spacing: f64,
}

/// Phase, signature and largest `|ω|` at one node.
type NodePhase = (f64, (usize, usize), f64);

/// Check `dθ = −H ⌟ ω` (phase gradient against mean curvature) on a Lagrangian surface
/// whose induced metric has `q` negative directions everywhere.
pub fn phase_gradient_check(jet: &SurfaceJet, q: usize, tol: f64) -> Result<PhaseGradientReport> {
    let s = &jet.surface;
    let grid = &s.grid;
    let n = s.n();
    if q > n {
        return Err(SlagError::Invalid(format!("q = {q} exceeds n = {n}")));
    }
    let pts = grid.points();
    let phases: Vec<Result<NodePhase>> = pts
        .par_iter()
        .map(|p| {
            let frame = s.frame(p);
            let omega = lin::max_abs(&omega_matrix(&frame));
            let scale = lin::max_abs(&crate::planes::induced_gram(&frame)).max(1.0);
            if omega > 1e-6 * scale {
                return Err(SlagError::Invalid(format!(
                    "surface is not Lagrangian at {p:?} (|ω| = {omega:e})"
                )));
            }
            let r = phase_pq(&PlaneBasis::new(frame)?, 1e-12)?;
            Ok((r.theta, r.signature, omega))
        })
        .collect();
    let phases: Vec<(f64, (usize, usize), f64)> = phases.into_iter().collect::<Result<_>>()?;
    let expected = (n - q, q);
    for (_, sig, _) in &phases {
        if *sig != expected {
            return Err(SlagError::SignatureChange(expected, *sig));
        }
    }
    let theta: Vec<f64> = phases.iter().map(|t| t.0).collect();

    let rows: Vec<Result<Option<(f64, f64, f64)>>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let idx = grid.index(k);
            let interior = idx
                .iter()
                .zip(&grid.counts)
                .all(|(&i, &c)| i > 0 && i + 1 < c);
            if !interior {
                return Ok(None);
            }
            let p = &pts[k];
            let (h, frame) = jet.mean_curvature(p)?;
            let mut worst = 0.0f64;
            let mut orth = 0.0f64;
            let mut stride = 1usize;
            let mut strides = vec![0usize; n];
            for d in (0..n).rev() {
                strides[d] = stride;
                stride *= grid.counts[d];
            }
            for i in 0..n {
                let xi: Vec<f64> = frame.column(i).iter().copied().collect();
                let dtheta =
                    (theta[k + strides[i]] - theta[k - strides[i]]) / (2.0 * grid.spacing(i));
                let r = dtheta + inner(&t_map(&xi), &h);
                worst = worst.max(r.abs());
                orth = orth.max(inner(&h, &xi).abs());
            }
            let norm = h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            Ok(Some((worst, orth, norm)))
        })
        .collect();
    let rows: Vec<Option<(f64, f64, f64)>> = rows.into_iter().collect::<Result<_>>()?;
    let report =
        ResidualReport::from_nodes(&pts, rows.iter().map(|r| r.map(|t| t.0)).collect(), tol);
    let orthogonality = rows.iter().flatten().map(|t| t.1).fold(0.0, f64::max);
    let max_mean_curvature = rows.iter().flatten().map(|t| t.2).fold(0.0, f64::max);
    let hi = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = theta.iter().copied().fold(f64::INFINITY, f64::min);
    let theta_spread = hi - lo;
    let constant_phase = theta_spread <= tol;
    let minimal = max_mean_curvature <= tol;
    Ok(PhaseGradientReport {
        report,
        theta,
        signature: expected,
        orthogonality,
        max_mean_curvature,
        theta_spread,
        constant_phase,
        minimal,
        cross_flag_agrees: constant_phase == minimal,
        spacing: (0..n).map(|d| grid.spacing(d)).fold(0.0, f64::max),
    })
}

/// `(t, s) ↦ (cosh t, s, sinh t, 0)`: the unit hyperbola in the first `D`
/// factor times a space-like line in the second.
pub fn hyperbola_product(grid: ParamGrid) -> Result<SurfaceJet> {
    if grid.dim() != 2 {
        return Err(SlagError::SizeMismatch(grid.dim(), 2));
    }
    let s = ImmersedSurface::new(grid, |p| vec![p[0].cosh(), p[1], p[0].sinh(), 0.0])
        .with_jacobian(|p| {
            let mut m = RMat::zeros(4, 2);
            m[(0, 0)] = p[0].sinh();
            m[(2, 0)] = p[0].cosh();
            m[(1, 1)] = 1.0;
            m
        });
    Ok(SurfaceJet::new(s))
}

/// `(t, s) ↦ (a·t, s, t, 0)`: a time-like line (`|a| < 1`) times a space-like line.
pub fn timelike_line_product(grid: ParamGrid, a: f64) -> Result<SurfaceJet> {
    if grid.dim() != 2 {
        return Err(SlagError::SizeMismatch(grid.dim(), 2));
    }
    let s = ImmersedSurface::new(grid, move |p| vec![a * p[0], p[1], p[0], 0.0]).with_jacobian(
        move |_| {
            let mut m = RMat::zeros(4, 2);
            m[(0, 0)] = a;
            m[(2, 0)] = 1.0;
            m[(1, 1)] = 1.0;
            m
        },
    );
    Ok(SurfaceJet::new(s).with_second(|_| vec![vec![0.0; 4]; 4]))
}

/// The flat Lagrangian plane spanned by `∂_{x₁}` and `∂_{y₂}`, signature `(1, 1)`.
pub fn flat_split_plane(grid: ParamGrid) -> Result<SurfaceJet> {
    if grid.dim() != 2 {
        return Err(SlagError::SizeMismatch(grid.dim(), 2));
    }
    let s = ImmersedSurface::new(grid, |p| vec![p[0], 0.0, 0.0, p[1]]).with_jacobian(|_| {
        let mut m = RMat::zeros(4, 2);
        m[(0, 0)] = 1.0;
        m[(3, 1)] = 1.0;
        m
    });
    Ok(SurfaceJet::new(s).with_second(|_| vec![vec![0.0; 4]; 4]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::radial_solution;

    fn field(src: &str) -> ScalarField {
        ScalarField::from_expr(2, src).unwrap()
    }

    #[test]
    fn flat_metric_harmonic_variation() {
        let data = VariationData::on_cube(
            field("0.5*(x1^2 + x2^2)"),
            field("x1^2 - x2^2"),
            -1.0,
            1.0,
            21,
        )
        .unwrap();
        let r = variation_harmonicity(&data, 1e-9).unwrap();
        assert!(
            r.first_order_residual() < 1e-9,
            "{}",
            r.first_order_residual()
        );
        assert!(r.d_theta_residual() < 1e-9);
        assert!(
            r.d_star_theta_residual() < 1e-9,
            "{}",
            r.d_star_theta_residual()
        );
        assert!(
            r.star_relation_residual() < 1e-9,
            "{}",
            r.star_relation_residual()
        );
    }

    #[test]
    fn star_sign_fixed_by_flat_fixture() {
        // With h = I the direct route equals the negated standard star.
        let h = RMat::identity(2, 2);
        let grad = [0.3, -1.1];
        let theta = [-0.15, 0.55];
        let phi = variation_phi(&grad, &h);
        assert!(phi.sub(&star_1form(&theta, &h).unwrap()).max_abs() < 1e-15);
        assert!(phi.add(&star_1form(&theta, &h).unwrap()).max_abs() > 0.1);
    }

    #[test]
    fn radial_linear_variation_refines_at_second_order() {
        let g = radial_solution(1.0).unwrap();
        let gdot = field("0.7*x1 - 0.4*x2");
        let t = refinement_table(&g, &gdot, 0.5, 1.5, &[51, 101], 1e-8).unwrap();
        assert_eq!(t.rows[0].first_order, 0.0);
        assert_eq!(t.rows[1].first_order, 0.0);
        for r in [t.d_star_ratios[0], t.star_ratios[0]] {
            assert!((3.0..=5.0).contains(&r), "{t:?}");
        }
        assert!(t.rows[1].d_theta < 1e-10);
    }

    #[test]
    fn non_first_order_variation_is_rejected() {
        let g = radial_solution(1.0).unwrap();
        let data = VariationData::on_cube(g, field("x1^2 + x2^2"), 0.5, 1.5, 41).unwrap();
        let r = variation_harmonicity(&data, 1e-8).unwrap();
        // tr(h⁻¹) ≥ 2 when det h = 1.
        assert!(r.first_order_residual() >= 4.0 - 1e-3);
        assert!(r.first_order.residuals.iter().flatten().all(|v| *v > 3.9));
        assert!(r.d_star_theta_residual() > 1.0);
    }

    #[test]
    fn degenerate_metric_is_an_error() {
        let data = VariationData::on_cube(field("0.5*x1^2"), field("x1"), -1.0, 1.0, 9).unwrap();
        assert!(matches!(
            variation_harmonicity(&data, 1e-8),
            Err(SlagError::MetricDegenerate(_))
        ));
    }

    #[test]
    fn hyperbola_phase_is_the_parameter() {
        let grid = ParamGrid::new(vec![-0.6, 0.0], vec![0.6, 1.0], vec![25, 5]).unwrap();
        let jet = hyperbola_product(grid.clone()).unwrap();
        let r = phase_gradient_check(&jet, 1, 1e-6).unwrap();
        for (p, th) in grid.points().iter().zip(&r.theta) {
            assert!((th - p[0]).abs() < 1e-12, "{th} vs {}", p[0]);
        }
        assert!(!r.minimal && !r.constant_phase && r.cross_flag_agrees);
        assert!(r.orthogonality < 1e-3);
    }

    #[test]
    fn hyperbola_residual_decreases_under_refinement() {
        let res: Vec<f64> = [13, 25, 49]
            .iter()
            .map(|&c| {
                let grid = ParamGrid::new(vec![-0.6, 0.0], vec![0.6, 1.0], vec![c, 5]).unwrap();
                let jet = hyperbola_product(grid).unwrap();
                let r = phase_gradient_check(&jet, 1, 1.0).unwrap();
                r.report.max_abs
            })
            .collect();
        for w in res.windows(2) {
            assert!(w[0] / w[1] >= 1.5, "{res:?}");
        }
        assert!(res[0] <= 0.1 * 0.05, "{res:?}");
    }

    #[test]
    fn flat_fixtures_have_zero_residual() {
        let grid = ParamGrid::cube(2, -1.0, 1.0, 7).unwrap();
        for jet in [
            flat_split_plane(grid.clone()).unwrap(),
            timelike_line_product(grid.clone(), 0.3).unwrap(),
        ] {
            let r = phase_gradient_check(&jet, 1, 1e-12).unwrap();
            assert_eq!(r.report.max_abs, 0.0);
            assert!(r.constant_phase && r.minimal && r.cross_flag_agrees);
        }
    }

    #[test]
    fn signature_mismatch_is_an_error() {
        let grid = ParamGrid::cube(2, -1.0, 1.0, 5).unwrap();
        let jet = flat_split_plane(grid).unwrap();
        assert!(matches!(
            phase_gradient_check(&jet, 0, 1e-12),
            Err(SlagError::SignatureChange(_, _))
        ));
    }

    #[test]
    fn mixed_type_surface_is_an_error() {
        // (t, s) ↦ (t, s, t³/3, 0): the first direction changes type at |t| = 1.
        let grid = ParamGrid::new(vec![0.0, 0.0], vec![2.0, 1.0], vec![9, 3]).unwrap();
        let s = ImmersedSurface::new(grid, |p| vec![p[0], p[1], p[0].powi(3) / 3.0, 0.0]);
        let jet = SurfaceJet::new(s);
        let e = phase_gradient_check(&jet, 0, 1e-12).unwrap_err();
        assert!(
            matches!(
                e,
                SlagError::SignatureChange(_, _) | SlagError::NullDirections
            ),
            "{e:?}"
        );
    }
}
