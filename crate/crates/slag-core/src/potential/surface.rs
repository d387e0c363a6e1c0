//! Parameterized immersions into `R^{2n}` and their pointwise EDS reports.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SlagError};
use crate::lin::{self, RMat};
use crate::planes::{analyze_plane, euclid_orthonormal, Picture, PlaneBasis, PlaneReport};

use super::field::ScalarField;
use super::ResidualReport;

pub type MapFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type JacFn = Arc<dyn Fn(&[f64]) -> RMat + Send + Sync>;
pub type MaskFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Tensor grid over a parameter box, last axis fastest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

impl ParamGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != counts.len() {
            return Err(SlagError::Dimension(
                "grid bounds and counts disagree".into(),
            ));
        }
        if counts
            .iter()
            .zip(lo.iter().zip(&hi))
            .any(|(&c, (a, b))| c == 0 || (c == 1 && a != b))
        {
            return Err(SlagError::Invalid(
                "an axis needs 2 or more nodes unless its range is a point".into(),
            ));
        }
        Ok(ParamGrid { lo, hi, counts })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64, count: usize) -> Result<Self> {
        ParamGrid::new(vec![lo; dim], vec![hi; dim], vec![count; dim])
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, d: usize) -> f64 {
        if self.counts[d] == 1 {
            return 0.0;
        }
        (self.hi[d] - self.lo[d]) / (self.counts[d] - 1) as f64
    }

    pub fn index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            idx[d] = k % self.counts[d];
            k /= self.counts[d];
        }
        idx
    }

    pub fn point(&self, k: usize) -> Vec<f64> {
        self.index(k)
            .iter()
            .enumerate()
            .map(|(d, &i)| self.lo[d] + self.spacing(d) * i as f64)
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }
}

/// A parameterized `n`-dimensional surface in `R^{2n}`, coordinates
/// `(x_1..x_n, y_1..y_n)`.
#[derive(Clone)]
pub struct ImmersedSurface {
    pub grid: ParamGrid,
    n: usize,
    map: MapFn,
    jacobian: Option<JacFn>,
    mask: Option<MaskFn>,
    fd_step: f64,
}

impl fmt::Debug for ImmersedSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImmersedSurface")
            .field("grid", &self.grid)
            .field("n", &self.n)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl ImmersedSurface {
    pub fn new(grid: ParamGrid, map: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        let n = grid.dim();
        ImmersedSurface {
            grid,
            n,
            map: Arc::new(map),
            jacobian: None,
            mask: None,
            fd_step: 1e-5,
        }
    }

    /// Analytic Jacobian, `2n × n`.
    pub fn with_jacobian(mut self, j: impl Fn(&[f64]) -> RMat + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(j));
        self
    }

    /// Nodes where the mask is false are skipped.
    pub fn with_mask(mut self, m: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.mask = Some(Arc::new(m));
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn point(&self, p: &[f64]) -> Vec<f64> {
        (self.map)(p)
    }

    pub fn active(&self, p: &[f64]) -> bool {
        self.mask.as_ref().is_none_or(|m| m(p))
    }

    /// Tangent frame at `p`: analytic, or central differences.
    pub fn frame(&self, p: &[f64]) -> RMat {
        if let Some(j) = &self.jacobian {
            return j(p);
        }
        let h = self.fd_step;
        let mut out = RMat::zeros(2 * self.n, self.n);
        for k in 0..self.n {
            let mut a = p.to_vec();
            let mut b = p.to_vec();
            a[k] += h;
            b[k] -= h;
            let (fa, fb) = ((self.map)(&a), (self.map)(&b));
            for i in 0..2 * self.n {
                out[(i, k)] = (fa[i] - fb[i]) / (2.0 * h);
            }
        }
        out
    }

    pub fn plane_at(&self, p: &[f64]) -> PlaneBasis {
        PlaneBasis::new(self.frame(p)).expect("frame is 2n x n")
    }
}

/// Change of parameters for a graph surface: `p ↦ base point` with Jacobian.
#[derive(Clone)]
pub struct Chart {
    pub map: MapFn,
    pub jacobian: JacFn,
}

impl Chart {
    pub fn new(
        map: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&[f64]) -> RMat + Send + Sync + 'static,
    ) -> Self {
        Chart {
            map: Arc::new(map),
            jacobian: Arc::new(jacobian),
        }
    }

    /// `(r, φ) ↦ (r cos φ, r sin φ)`.
    pub fn polar() -> Self {
        Chart::new(
            |p| vec![p[0] * p[1].cos(), p[0] * p[1].sin()],
            |p| {
                let (s, c) = p[1].sin_cos();
                RMat::from_row_slice(2, 2, &[c, -p[0] * s, s, p[0] * c])
            },
        )
    }
}

/// Graph of `∇field` in the given picture over `grid`, optionally through a chart.
///
/// x-picture: `(x, ∇f(x))`. Null picture: `v = ∇g(u)`, i.e.
/// `x = (u + ∇g)/2`, `y = (∇g − u)/2`.
pub fn surface_from_potential(
    field: &ScalarField,
    picture: Picture,
    grid: ParamGrid,
    chart: Option<Chart>,
) -> Result<ImmersedSurface> {
    let n = field.dim();
    if grid.dim() != n {
        return Err(SlagError::SizeMismatch(grid.dim(), n));
    }
    let (fm, fj) = (field.clone(), field.clone());
    let (cm, cj) = (chart.clone(), chart);
    let base = move |c: &Option<Chart>, p: &[f64]| match c {
        Some(c) => (c.map)(p),
        None => p.to_vec(),
    };
    let map = move |p: &[f64]| {
        let q = base(&cm, p);
        let g = fm.gradient(&q).unwrap_or_else(|| vec![f64::NAN; n]);
        match picture {
            Picture::X => q.iter().chain(&g).copied().collect(),
            Picture::Null => {
                let x = q.iter().zip(&g).map(|(u, v)| 0.5 * (u + v));
                let y = q.iter().zip(&g).map(|(u, v)| 0.5 * (v - u));
                x.chain(y).collect()
            }
        }
    };
    let jac = move |p: &[f64]| {
        let (q, dq) = match &cj {
            Some(c) => ((c.map)(p), (c.jacobian)(p)),
            None => (p.to_vec(), RMat::identity(n, n)),
        };
        let h = fj
            .hessian(&q)
            .unwrap_or_else(|| RMat::from_element(n, n, f64::NAN));
        let hd = &h * &dq;
        let mut out = RMat::zeros(2 * n, n);
        match picture {
            Picture::X => {
                out.rows_mut(0, n).copy_from(&dq);
                out.rows_mut(n, n).copy_from(&hd);
            }
            Picture::Null => {
                out.rows_mut(0, n).copy_from(&((&dq + &hd) * 0.5));
                out.rows_mut(n, n).copy_from(&((&hd - &dq) * 0.5));
            }
        }
        out
    };
    Ok(ImmersedSurface::new(grid, map).with_jacobian(jac))
}

#[derive(Clone, Debug, Serialize)]
pub struct EdsReport {
    pub nodes: Vec<Vec<f64>>,
    /// Largest `|ω(e_i, e_j)|` on a Euclid-orthonormal frame.
    pub omega: ResidualReport,
    /// `|Im dz|` on a Gram-orthonormal frame; non-space-like nodes excluded.
    pub im_dz: ResidualReport,
    /// Smallest eigenvalue of the induced Gram matrix of the Euclid-orthonormal frame.
    pub margin: Vec<Option<f64>>,
    pub min_margin: f64,
    pub skipped: usize,
    pub rank_deficient: Vec<usize>,
    pub nonspacelike: usize,
    pub lagrangian: bool,
    pub spacelike: bool,
    pub positive: bool,
    pub slag: bool,
}

struct NodeEval {
    omega: Option<f64>,
    im_dz: Option<f64>,
    margin: Option<f64>,
    rank_deficient: bool,
    positive: Option<bool>,
}

fn eval_node(s: &ImmersedSurface, p: &[f64], tol: f64) -> NodeEval {
    let empty = NodeEval {
        omega: None,
        im_dz: None,
        margin: None,
        rank_deficient: false,
        positive: None,
    };
    if !s.active(p) {
        return empty;
    }
    let frame = s.frame(p);
    if frame.iter().any(|v| !v.is_finite()) {
        return NodeEval {
            rank_deficient: true,
            ..empty
        };
    }
    let sv = frame.clone().singular_values();
    let smax = sv.max();
    if sv.min() <= 1e-10 * smax.max(f64::MIN_POSITIVE) {
        return NodeEval {
            rank_deficient: true,
            ..empty
        };
    }
    let q = PlaneBasis::new(euclid_orthonormal(&frame)).expect("frame shape");
    let rep: PlaneReport = analyze_plane(&q, tol);
    let margin = lin::min_sym_eigenvalue(&q.gram());
    NodeEval {
        omega: Some(rep.omega_residual),
        im_dz: if margin > tol {
            rep.im_dz_residual
        } else {
            None
        },
        margin: Some(margin),
        rank_deficient: false,
        positive: rep.positive_component,
    }
}

/// Pointwise Lagrangian, space-like and `Im dz` residuals over the grid.
pub fn eds_report(s: &ImmersedSurface, tol: f64) -> EdsReport {
    let nodes = s.grid.points();
    let evals: Vec<NodeEval> = nodes.par_iter().map(|p| eval_node(s, p, tol)).collect();
    let skipped = nodes.iter().filter(|p| !s.active(p)).count();
    let rank_deficient: Vec<usize> = evals
        .iter()
        .enumerate()
        .filter(|(_, e)| e.rank_deficient)
        .map(|(i, _)| i)
        .collect();
    let margin: Vec<Option<f64>> = evals.iter().map(|e| e.margin).collect();
    let min_margin = margin
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let nonspacelike = margin.iter().flatten().filter(|m| **m <= tol).count();
    let omega = ResidualReport::from_nodes(&nodes, evals.iter().map(|e| e.omega).collect(), tol);
    let im_dz = ResidualReport::from_nodes(&nodes, evals.iter().map(|e| e.im_dz).collect(), tol);
    let lagrangian = omega.passed && rank_deficient.is_empty();
    let spacelike = nonspacelike == 0 && rank_deficient.is_empty() && min_margin.is_finite();
    let positive = evals.iter().filter_map(|e| e.positive).all(|p| p);
    EdsReport {
        slag: lagrangian && spacelike && positive && im_dz.passed,
        nodes,
        omega,
        im_dz,
        margin,
        min_margin,
        skipped,
        rank_deficient,
        nonspacelike,
        lagrangian,
        spacelike,
        positive,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{radial_solution, slag_residual_x};

    #[test]
    fn grid_ordering() {
        let g = ParamGrid::new(vec![0.0, 10.0], vec![1.0, 12.0], vec![2, 3]).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.point(1), vec![0.0, 11.0]);
        assert_eq!(g.point(3), vec![1.0, 10.0]);
        assert!(ParamGrid::new(vec![0.0], vec![1.0], vec![1]).is_err());
        assert_eq!(
            ParamGrid::new(vec![2.0], vec![2.0], vec![1])
                .unwrap()
                .point(0),
            vec![2.0]
        );
    }

    #[test]
    fn radial_surface_is_slag() {
        let g = radial_solution(1.0).unwrap();
        let grid = ParamGrid::new(
            vec![0.5, 0.0],
            vec![1.5, std::f64::consts::TAU],
            vec![21, 21],
        )
        .unwrap();
        let s = surface_from_potential(&g, Picture::Null, grid, Some(Chart::polar())).unwrap();
        let r = eds_report(&s, 1e-9);
        assert!(r.slag, "{:?} {:?}", r.omega.max_abs, r.im_dz.max_abs);
        assert!(r.im_dz.max_abs <= 1e-9);
    }

    #[test]
    fn affine_plane_potential() {
        let f = ScalarField::from_expr(2, "0.3*x1 - 0.7*x2").unwrap();
        let s = surface_from_potential(
            &f,
            Picture::X,
            ParamGrid::cube(2, -1.0, 1.0, 5).unwrap(),
            None,
        )
        .unwrap();
        let r = eds_report(&s, 1e-12);
        assert!(r.slag);
        assert_eq!(r.omega.max_abs, 0.0);
        assert_eq!(r.im_dz.max_abs, 0.0);
    }

    #[test]
    fn im_dz_tracks_x_residual() {
        // Non-SLAG potential: Im dz vanishes exactly where Σσ_odd does.
        let f = ScalarField::from_expr(2, "0.2*x1^2 + 0.1*x1*x2^2").unwrap();
        let grid = ParamGrid::cube(2, -0.5, 0.5, 9).unwrap();
        let pts = grid.points();
        let s = surface_from_potential(&f, Picture::X, grid, None).unwrap();
        let eds = eds_report(&s, 1e-12);
        let x = slag_residual_x(&f, &pts, 1e-12);
        assert!(eds.lagrangian);
        for (a, b) in eds.im_dz.residuals.iter().zip(&x.report.residuals) {
            let (a, b) = (a.unwrap(), b.unwrap());
            assert_eq!(a <= 1e-12, b.abs() <= 1e-12, "{a} {b}");
        }
        assert!(!eds.slag);
    }

    #[test]
    fn cayley_consistency_pointwise() {
        // Null graph of the transformed potential equals the x-picture graph.
        let f = ScalarField::from_expr(2, "0.15*x1^2 - 0.1*x2^2 + 0.05*x1^2*x2").unwrap();
        for x in [[0.2, 0.1], [-0.3, 0.4]] {
            let rep = crate::potential::null_potential_from_x(&f, &x, 1e-4).unwrap();
            let y = f.gradient(&x).unwrap();
            for i in 0..2 {
                assert!((0.5 * (rep.u[i] + rep.v[i]) - x[i]).abs() < 1e-12);
                assert!((0.5 * (rep.v[i] - rep.u[i]) - y[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_frames_are_flagged() {
        let grid = ParamGrid::cube(2, 0.0, 1.0, 3).unwrap();
        let s = ImmersedSurface::new(grid, |p| vec![p[0], p[0], 0.0, 0.0]);
        let r = eds_report(&s, 1e-10);
        assert_eq!(r.rank_deficient.len(), 9);
        assert!(!r.lagrangian);
    }

    #[test]
    fn finite_difference_frame_matches_analytic() {
        let g = radial_solution(1.0).unwrap();
        let grid = ParamGrid::cube(2, 0.6, 1.0, 3).unwrap();
        let s = surface_from_potential(&g, Picture::Null, grid.clone(), None).unwrap();
        let m = s.clone();
        let fd = ImmersedSurface::new(grid, move |p| m.point(p));
        for p in s.grid.points() {
            assert!((s.frame(&p) - fd.frame(&p)).amax() < 1e-8);
        }
    }
}
