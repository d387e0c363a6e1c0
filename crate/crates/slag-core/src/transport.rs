//! Optimal transport: 1-D monotone rearrangement, exact discrete assignment,
//! cost-induced symplectic data and graphs of Brenier maps as calibrated
//! submanifolds of `(U × V, ω = d_u d_v c)`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlagError};
use crate::forms::{phi_parts, std_forms};
use crate::lin::{self, RMat};
use crate::potential::{ParamGrid, ResidualReport, ScalarField};

/// A strictly positive density sampled on a uniform grid, normalized to mass 1
/// (trapezoid rule) and interpolated linearly between nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Density1D {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

impl Density1D {
    pub fn new(lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || !(hi > lo) {
            return Err(SlagError::Invalid(
                "density needs hi > lo and at least 2 nodes".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(SlagError::NonPositiveDensity(i));
        }
        let h = (hi - lo) / (values.len() - 1) as f64;
        let mut cdf = Vec::with_capacity(values.len());
        cdf.push(0.0);
        for w in values.windows(2) {
            cdf.push(cdf.last().unwrap() + 0.5 * h * (w[0] + w[1]));
        }
        let mass = *cdf.last().unwrap();
        Ok(Density1D {
            lo,
            hi,
            values: values.iter().map(|v| v / mass).collect(),
            cdf: cdf.iter().map(|c| c / mass).collect(),
        })
    }

    pub fn from_fn(lo: f64, hi: f64, nodes: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = (hi - lo) / (nodes.max(2) - 1) as f64;
        Self::new(lo, hi, (0..nodes).map(|i| f(lo + h * i as f64)).collect())
    }

    pub fn uniform(lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        Self::from_fn(lo, hi, nodes, |_| 1.0)
    }

    /// Normal density truncated to `[m − 4s, m + 4s]`.
    pub fn truncated_normal(m: f64, s: f64, nodes: usize) -> Result<Self> {
        Self::from_fn(m - 4.0 * s, m + 4.0 * s, nodes, |x| {
            (-0.5 * ((x - m) / s).powi(2)).exp()
        })
    }

    /// Restores the cumulative table after deserialization.
    pub fn rebuild(self) -> Result<Self> {
        Self::new(self.lo, self.hi, self.values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / (self.len() - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + self.h() * i as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    fn cell(&self, x: f64) -> (usize, f64) {
        let t = ((x - self.lo) / self.h()).clamp(0.0, (self.len() - 1) as f64);
        let k = (t.floor() as usize).min(self.len() - 2);
        (k, t - k as f64)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (k, t) = self.cell(x);
        (1.0 - t) * self.values[k] + t * self.values[k + 1]
    }

    pub fn cdf_nodes(&self) -> &[f64] {
        &self.cdf
    }

    /// Cubic Hermite coefficients of the cell, slopes from the pdf with the
    /// Fritsch–Carlson limiter.
    fn hermite(&self, k: usize) -> (f64, f64, f64, f64) {
        let h = self.h();
        let (c0, c1) = (self.cdf[k], self.cdf[k + 1]);
        let delta = (c1 - c0) / h;
        let (mut m0, mut m1) = (self.values[k], self.values[k + 1]);
        let (a, b) = (m0 / delta, m1 / delta);
        let s = a * a + b * b;
        if s > 9.0 {
            let t = 3.0 / s.sqrt();
            m0 *= t;
            m1 *= t;
        }
        (c0, c1, m0 * h, m1 * h)
    }

    fn hermite_eval(coef: (f64, f64, f64, f64), t: f64) -> (f64, f64) {
        let (c0, c1, d0, d1) = coef;
        let (t2, t3) = (t * t, t * t * t);
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * c0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * c1
            + (t3 - t2) * d1;
        let dv = (6.0 * t2 - 6.0 * t) * c0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * c1
            + (3.0 * t2 - 2.0 * t) * d1;
        (v, dv)
    }

    /// Monotone cubic interpolation of the cumulative distribution.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        let (k, t) = self.cell(x);
        Self::hermite_eval(self.hermite(k), t).0
    }

    /// Inverse of [`Density1D::cdf`]: Newton steps safeguarded by bisection.
    pub fn quantile(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return self.lo;
        }
        if c >= 1.0 {
            return self.hi;
        }
        let k = match self.cdf.binary_search_by(|v| v.partial_cmp(&c).unwrap()) {
            Ok(i) => return self.node(i),
            Err(i) => i - 1,
        };
        let coef = self.hermite(k);
        let (mut a, mut b) = (0.0f64, 1.0f64);
        let mut t = (c - coef.0) / (coef.1 - coef.0);
        for _ in 0..100 {
            let (v, dv) = Self::hermite_eval(coef, t);
            let r = v - c;
            if r == 0.0 {
                break;
            }
            if r < 0.0 {
                a = t;
            } else {
                b = t;
            }
            let newton = t - r / dv;
            t = if dv > 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if b - a < 1e-16 || r.abs() < 1e-17 {
                break;
            }
        }
        self.node(k) + self.h() * t
    }
}

/// Monotone map `T = F̃⁻¹∘F` on the source nodes with potential `g`, `g′ = T`.
#[derive(Clone, Debug, Serialize)]
pub struct TransportPlan1D {
    pub u: Vec<f64>,
    pub t: Vec<f64>,
    pub g: Vec<f64>,
    /// Second differences of `g` at interior nodes.
    pub g_second: Vec<Option<f64>>,
    /// `g″ − ρ/ρ̃(T)`.
    pub residual: ResidualReport,
    /// `ρ − ρ̃(T)·T′` with `T′` by central differences.
    pub pushforward: ResidualReport,
    pub monotone: bool,
    pub convex: bool,
}

pub fn ot_1d(rho: &Density1D, rho_tilde: &Density1D, tol: f64) -> TransportPlan1D {
    let u = rho.nodes();
    let n = u.len();
    let h = rho.h();
    let t: Vec<f64> = u.iter().map(|&x| rho_tilde.quantile(rho.cdf(x))).collect();
    let mut g = Vec::with_capacity(n);
    g.push(0.5 * u[0] * t[0]);
    for i in 1..n {
        g.push(g[i - 1] + 0.5 * h * (t[i - 1] + t[i]));
    }
    let interior = |i: usize| i > 0 && i + 1 < n;
    let g_second: Vec<Option<f64>> = (0..n)
        .map(|i| interior(i).then(|| (g[i + 1] - 2.0 * g[i] + g[i - 1]) / (h * h)))
        .collect();
    let pts: Vec<Vec<f64>> = u.iter().map(|x| vec![*x]).collect();
    let residual = (0..n)
        .map(|i| g_second[i].map(|s| s - rho.values[i] / rho_tilde.pdf(t[i])))
        .collect();
    let pushforward = (0..n)
        .map(|i| {
            interior(i)
                .then(|| rho.values[i] - rho_tilde.pdf(t[i]) * (t[i + 1] - t[i - 1]) / (2.0 * h))
        })
        .collect();
    TransportPlan1D {
        monotone: t.windows(2).all(|w| w[1] >= w[0]),
        convex: g_second.iter().flatten().all(|s| *s > 0.0),
        residual: ResidualReport::from_nodes(&pts, residual, tol),
        pushforward: ResidualReport::from_nodes(&pts, pushforward, tol),
        u,
        t,
        g,
        g_second,
    }
}

pub type CostFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type CrossFn = Arc<dyn Fn(&[f64], &[f64]) -> RMat + Send + Sync>;

/// A cost `c(u, v)` on `R^n × R^n`, optionally with its cross-Hessian `∂²c/∂u_i∂v_j`.
#[derive(Clone)]
pub struct CostFunction {
    pub dim: usize,
    pub label: String,
    cost: CostFn,
    cross: Option<CrossFn>,
    fd_step: f64,
}

impl std::fmt::Debug for CostFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CostFunction({}, dim {})", self.label, self.dim)
    }
}

impl CostFunction {
    pub fn new(
        dim: usize,
        label: &str,
        c: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CostFunction {
            dim,
            label: label.into(),
            cost: Arc::new(c),
            cross: None,
            fd_step: 1e-4,
        }
    }

    pub fn with_cross(
        mut self,
        f: impl Fn(&[f64], &[f64]) -> RMat + Send + Sync + 'static,
    ) -> Self {
        self.cross = Some(Arc::new(f));
        self
    }

    /// `½|u − v|²`.
    pub fn quadratic(dim: usize) -> Self {
        Self::new(dim, "quadratic", |u, v| {
            0.5 * u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .with_cross(move |_, _| -RMat::identity(dim, dim))
    }

    /// `|u − v|²`.
    pub fn squared_distance(dim: usize) -> Self {
        Self::new(dim, "squared_distance", |u, v| {
            u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .with_cross(move |_, _| RMat::identity(dim, dim) * -2.0)
    }

    /// `u·v`.
    pub fn dot(dim: usize) -> Self {
        Self::new(dim, "dot", |u, v| u.iter().zip(v).map(|(a, b)| a * b).sum())
            .with_cross(move |_, _| RMat::identity(dim, dim))
    }

    /// Expression in `x1..xn` (for `u`) and `x(n+1)..x(2n)` (for `v`).
    pub fn from_expr(dim: usize, src: &str) -> Result<Self> {
        let f = ScalarField::from_expr(2 * dim, src)?;
        Ok(Self::new(dim, src, move |u, v| {
            let w: Vec<f64> = u.iter().chain(v).copied().collect();
            f.value(&w)
        }))
    }

    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        (self.cost)(u, v)
    }

    pub fn cross_hessian(&self, u: &[f64], v: &[f64]) -> RMat {
        if let Some(c) = &self.cross {
            return c(u, v);
        }
        let h = self.fd_step;
        let n = self.dim;
        RMat::from_fn(n, n, |i, j| {
            let shifted = |si: f64, sj: f64| {
                let mut a = u.to_vec();
                let mut b = v.to_vec();
                a[i] += si * h;
                b[j] += sj * h;
                self.eval(&a, &b)
            };
            (shifted(1.0, 1.0) - shifted(1.0, -1.0) - shifted(-1.0, 1.0) + shifted(-1.0, -1.0))
                / (4.0 * h * h)
        })
    }

    /// `d_u c(u, v)` by central differences.
    pub fn grad_u(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let h = self.fd_step;
        (0..self.dim)
            .map(|i| {
                let mut a = u.to_vec();
                let mut b = u.to_vec();
                a[i] += h;
                b[i] -= h;
                (self.eval(&a, v) - self.eval(&b, v)) / (2.0 * h)
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscretePlan {
    /// `assignment[i]` is the target matched to source `i`.
    pub assignment: Vec<usize>,
    pub total_cost: f64,
    /// `c`-cyclical monotonicity over all cycles of length 2 and 3.
    pub cyclically_monotone: bool,
    /// Largest gain from rerouting along a short cycle (≤ 0 when monotone).
    pub cycle_violation: f64,
}

pub fn cost_matrix(mu: &[Vec<f64>], nu: &[Vec<f64>], cost: &CostFunction) -> Vec<Vec<f64>> {
    mu.iter()
        .map(|a| nu.iter().map(|b| cost.eval(a, b)).collect())
        .collect()
}

/// Minimum-cost perfect matching on a square matrix (Hungarian method with
/// row/column potentials, `O(n³)`).
pub fn assignment(c: &[Vec<f64>]) -> Vec<usize> {
    let n = c.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = c[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0usize; n];
    for j in 1..=n {
        out[p[j] - 1] = j - 1;
    }
    out
}

fn cycle_violation(c: &[Vec<f64>], sigma: &[usize]) -> f64 {
    let n = sigma.len();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let two = c[i][sigma[j]] + c[j][sigma[i]] - c[i][sigma[i]] - c[j][sigma[j]];
            worst = worst.max(-two);
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let three = c[i][sigma[j]] + c[j][sigma[k]] + c[k][sigma[i]]
                    - c[i][sigma[i]]
                    - c[j][sigma[j]]
                    - c[k][sigma[k]];
                worst = worst.max(-three);
            }
        }
    }
    if worst.is_finite() {
        worst
    } else {
        0.0
    }
}

/// Exact optimal matching between equal-size, equal-weight point clouds.
pub fn ot_discrete(mu: &[Vec<f64>], nu: &[Vec<f64>], cost: &CostFunction) -> Result<DiscretePlan> {
    if mu.len() != nu.len() {
        return Err(SlagError::SizeMismatch(mu.len(), nu.len()));
    }
    if mu.len() > 256 {
        return Err(SlagError::Invalid(format!(
            "at most 256 atoms, got {}",
            mu.len()
        )));
    }
    if let Some(p) = mu.iter().chain(nu).find(|p| p.len() != cost.dim) {
        return Err(SlagError::SizeMismatch(p.len(), cost.dim));
    }
    let c = cost_matrix(mu, nu, cost);
    let sigma = assignment(&c);
    let total_cost = sigma.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
    let scale = c.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
    let violation = cycle_violation(&c, &sigma);
    Ok(DiscretePlan {
        assignment: sigma,
        total_cost,
        cyclically_monotone: violation <= 1e-12 * scale,
        cycle_violation: violation,
    })
}

/// Minimum-cost permutation by exhaustive search; `n ≤ 9`.
pub fn brute_force_assignment(c: &[Vec<f64>]) -> Result<(Vec<usize>, f64)> {
    let n = c.len();
    if n > 9 {
        return Err(SlagError::Invalid(format!(
            "brute force limited to n <= 9, got {n}"
        )));
    }
    fn rec(
        c: &[Vec<f64>],
        perm: &mut Vec<usize>,
        used: &mut [bool],
        acc: f64,
        best: &mut (Vec<usize>, f64),
    ) {
        if perm.len() == c.len() {
            if acc < best.1 {
                *best = (perm.clone(), acc);
            }
            return;
        }
        let row = perm.len();
        for j in 0..c.len() {
            if !used[j] {
                used[j] = true;
                perm.push(j);
                rec(c, perm, used, acc + c[row][j], best);
                perm.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (Vec::new(), f64::INFINITY);
    rec(
        c,
        &mut Vec::with_capacity(n),
        &mut vec![false; n],
        0.0,
        &mut best,
    );
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct KahlerCostReport {
    pub cross_hessian_ok: bool,
    pub min_abs_det: f64,
    pub twist_ok: bool,
    /// Smallest distance between `d_u c(u, v)` and `d_u c(u, v′)`, `v ≠ v′`.
    pub min_twist_separation: f64,
}

/// Non-degeneracy of `ω = d_u d_v c` and the twist condition on sample pairs.
pub fn kahler_cost_check(
    cost: &CostFunction,
    us: &[Vec<f64>],
    vs: &[Vec<f64>],
    tol: f64,
) -> KahlerCostReport {
    let min_abs_det = us
        .par_iter()
        .map(|u| {
            vs.iter()
                .map(|v| lin::det(&cost.cross_hessian(u, v)).abs())
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    let min_twist_separation = us
        .par_iter()
        .map(|u| {
            let imgs: Vec<Vec<f64>> = vs.iter().map(|v| cost.grad_u(u, v)).collect();
            let mut m = f64::INFINITY;
            for a in 0..imgs.len() {
                for b in a + 1..imgs.len() {
                    if vs[a] == vs[b] {
                        continue;
                    }
                    let d = imgs[a]
                        .iter()
                        .zip(&imgs[b])
                        .map(|(x, y)| (x - y).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    m = m.min(d);
                }
            }
            m
        })
        .reduce(|| f64::INFINITY, f64::min);
    KahlerCostReport {
        cross_hessian_ok: min_abs_det > tol,
        min_abs_det,
        twist_ok: min_twist_separation > tol,
        min_twist_separation,
    }
}

pub type DensityFn<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

#[derive(Clone, Debug, Serialize)]
pub struct KmwReport {
    /// `½(ρ̃(∇g)·det Hess g − ρ)`, the coefficient of `Im Φ` on the graph.
    pub im_phi: ResidualReport,
    /// The same coefficient by pulling back `Im Φ` with the forms module (`n ≤ 2`).
    pub oracle: Vec<Option<f64>>,
    pub oracle_gap: Option<f64>,
    /// `det Hess g − ρ/ρ̃(∇g)`.
    pub ma_residual: ResidualReport,
    /// Largest coefficient of the pulled-back `ω`.
    pub omega_residual: f64,
    pub nonconvex: Vec<usize>,
    pub passed: bool,
}

/// The graph of `∇g` in `(u, v)` coordinates checked against `Φ = ρ du·e + ρ̃ dv·ē`.
pub fn kmw_check(
    g: &ScalarField,
    rho: DensityFn,
    rho_tilde: DensityFn,
    grid: &ParamGrid,
    tol: f64,
) -> Result<KmwReport> {
    let n = g.dim();
    if grid.dim() != n {
        return Err(SlagError::SizeMismatch(grid.dim(), n));
    }
    let pts = grid.points();
    let forms = (n <= 2).then(|| std_forms(n));
    struct Node {
        closed: f64,
        ma: f64,
        oracle: Option<f64>,
        omega: f64,
        convex: bool,
    }
    let nodes: Vec<Option<Node>> = pts
        .par_iter()
        .map(|u| {
            let h = g.hessian(u)?;
            let grad = g.gradient(u)?;
            let (r, rt) = (rho(u), rho_tilde(&grad));
            let d = lin::det(&h);
            // Frame of u ↦ (x, y) = ((u + ∇g)/2, (∇g − u)/2).
            let i = RMat::identity(n, n);
            let mut l = RMat::zeros(2 * n, n);
            l.rows_mut(0, n).copy_from(&((&i + &h) * 0.5));
            l.rows_mut(n, n).copy_from(&((&h - &i) * 0.5));
            let all: Vec<usize> = (0..n).collect();
            let (oracle, omega) = match &forms {
                Some(f) => {
                    let (_, im) = phi_parts(n, r, rt);
                    let om = if n >= 2 {
                        f.omega.pullback(&l).max_abs()
                    } else {
                        0.0
                    };
                    (Some(im.pullback(&l).coeff(&all)), om)
                }
                None => (None, lin::max_abs(&(&h - h.transpose()))),
            };
            Some(Node {
                closed: 0.5 * (rt * d - r),
                ma: d - r / rt,
                oracle,
                omega,
                convex: lin::min_sym_eigenvalue(&h) > 0.0,
            })
        })
        .collect();
    let im_phi = ResidualReport::from_nodes(
        &pts,
        nodes.iter().map(|x| x.as_ref().map(|x| x.closed)).collect(),
        tol,
    );
    let ma_residual = ResidualReport::from_nodes(
        &pts,
        nodes.iter().map(|x| x.as_ref().map(|x| x.ma)).collect(),
        tol,
    );
    let oracle: Vec<Option<f64>> = nodes
        .iter()
        .map(|x| x.as_ref().and_then(|x| x.oracle))
        .collect();
    let oracle_gap = (n <= 2).then(|| {
        nodes
            .iter()
            .flatten()
            .filter_map(|x| Some((x.oracle? - x.closed).abs()))
            .fold(0.0, f64::max)
    });
    let omega_residual = nodes.iter().flatten().map(|x| x.omega).fold(0.0, f64::max);
    let nonconvex: Vec<usize> = nodes
        .iter()
        .enumerate()
        .filter(|(_, x)| x.as_ref().is_some_and(|x| !x.convex))
        .map(|(i, _)| i)
        .collect();
    Ok(KmwReport {
        passed: im_phi.passed && nonconvex.is_empty() && omega_residual <= tol,
        im_phi,
        oracle,
        oracle_gap,
        ma_residual,
        omega_residual,
        nonconvex,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planes::sample_rng;
    use crate::potential::radial_solution;
    use proptest::prelude::*;
    use rand::Rng;

    fn brute_force(c: &[Vec<f64>]) -> f64 {
        fn rec(c: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == c.len() {
                *best = best.min(acc);
                return;
            }
            for j in 0..c.len() {
                if !used[j] {
                    used[j] = true;
                    rec(c, row + 1, used, acc + c[row][j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(c, 0, &mut vec![false; c.len()], 0.0, &mut best);
        best
    }

    #[test]
    fn uniform_to_wider_uniform() {
        let a = Density1D::uniform(0.0, 1.0, 65).unwrap();
        let b = Density1D::uniform(0.0, 2.0, 65).unwrap();
        let p = ot_1d(&a, &b, 1e-10);
        for (u, t) in p.u.iter().zip(&p.t) {
            assert!((t - 2.0 * u).abs() < 1e-12);
        }
        for (u, g) in p.u.iter().zip(&p.g) {
            assert!((g - u * u).abs() < 1e-12);
        }
        assert!(p.residual.passed && p.pushforward.passed && p.monotone && p.convex);
    }

    #[test]
    fn identical_densities_give_identity() {
        let a = Density1D::from_fn(-1.0, 1.0, 129, |x| 1.0 + 0.5 * x * x).unwrap();
        let p = ot_1d(&a, &a, 1e-10);
        for (i, u) in p.u.iter().enumerate() {
            assert!((p.t[i] - u).abs() < 1e-12);
            assert!((p.g[i] - 0.5 * u * u).abs() < 1e-10);
        }
    }

    #[test]
    fn normal_to_affine_normal() {
        let a = Density1D::truncated_normal(0.0, 1.0, 4097).unwrap();
        let b = Density1D::truncated_normal(1.0, 0.5, 4097).unwrap();
        let p = ot_1d(&a, &b, 1e-4);
        let err =
            p.u.iter()
                .zip(&p.t)
                .map(|(u, t)| (t - (1.0 + 0.5 * u)).abs())
                .fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
        assert!(p.monotone && p.convex);
        assert!(p.residual.max_abs < 1e-3, "{}", p.residual.max_abs);
    }

    #[test]
    fn residual_is_second_order() {
        let run = |nodes| {
            let a = Density1D::from_fn(0.0, 1.0, nodes, |x| 1.0 + x).unwrap();
            let b = Density1D::from_fn(0.0, 1.0, nodes, |x| 2.0 - x * x).unwrap();
            ot_1d(&a, &b, 0.0).pushforward.max_abs
        };
        let (e1, e2) = (run(65), run(129));
        assert!(e1 / e2 > 3.0, "{e1} {e2}");
    }

    #[test]
    fn non_positive_density_rejected() {
        assert!(matches!(
            Density1D::new(0.0, 1.0, vec![1.0, 0.0, 1.0]),
            Err(SlagError::NonPositiveDensity(1))
        ));
    }

    #[test]
    fn quantile_inverts_cdf() {
        let a = Density1D::from_fn(-2.0, 3.0, 33, |x| (x.sin() + 1.5).powi(2)).unwrap();
        for i in 0..=100 {
            let c = i as f64 / 100.0;
            assert!((a.cdf(a.quantile(c)) - c).abs() < 1e-13);
        }
    }

    #[test]
    fn discrete_examples() {
        let mu = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let nu = vec![vec![0.0, 1.0], vec![2.0, 1.0]];
        let c = CostFunction::squared_distance(2);
        let p = ot_discrete(&mu, &nu, &c).unwrap();
        assert_eq!(p.assignment, vec![0, 1]);
        assert!((p.total_cost - 3.0).abs() < 1e-15);
        let crossed = c.eval(&mu[0], &nu[1]) + c.eval(&mu[1], &nu[0]);
        assert!((crossed - 7.0).abs() < 1e-15);

        let same = ot_discrete(&mu, &mu, &c).unwrap();
        assert_eq!(same.assignment, vec![0, 1]);
        assert_eq!(same.total_cost, 0.0);
        assert!(ot_discrete(&mu, &nu[..1], &c).is_err());
    }

    #[test]
    fn one_dimensional_matching_is_sorted() {
        let c = CostFunction::quadratic(1);
        for seed in 0..30u64 {
            let mut rng = sample_rng(seed, 7);
            let n = 1 + (seed as usize % 8);
            let mu: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
            let nu: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
            let p = ot_discrete(&mu, &nu, &c).unwrap();
            let cm = cost_matrix(&mu, &nu, &c);
            assert!((p.total_cost - brute_force(&cm)).abs() < 1e-12);
            assert!(p.cyclically_monotone);
            for i in 0..n {
                for j in 0..n {
                    if mu[i][0] < mu[j][0] {
                        assert!(nu[p.assignment[i]][0] <= nu[p.assignment[j]][0]);
                    }
                }
            }
        }
    }

    #[test]
    fn discrete_converges_to_continuous_map() {
        let c = CostFunction::quadratic(1);
        let errs: Vec<f64> = [16usize, 64]
            .iter()
            .map(|&n| {
                let mu: Vec<Vec<f64>> = (0..n)
                    .map(|i| vec![(i as f64 + 0.5) / n as f64])
                    .rev()
                    .collect();
                let nu: Vec<Vec<f64>> = (0..n).map(|i| vec![2.0 * i as f64 / n as f64]).collect();
                let p = ot_discrete(&mu, &nu, &c).unwrap();
                (0..n)
                    .map(|i| (nu[p.assignment[i]][0] - 2.0 * mu[i][0]).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(
            errs[0] <= 1.0 / 16.0 + 1e-12 && errs[1] <= 1.0 / 64.0 + 1e-12,
            "{errs:?}"
        );
    }

    #[test]
    fn kahler_costs() {
        let us: Vec<Vec<f64>> = (0..4)
            .map(|i| vec![0.3 * i as f64, -0.2 * i as f64])
            .collect();
        let vs: Vec<Vec<f64>> = (0..4)
            .map(|i| vec![1.0 - 0.1 * i as f64, 0.5 * i as f64])
            .collect();
        let q = kahler_cost_check(&CostFunction::quadratic(2), &us, &vs, 1e-6);
        assert!(q.cross_hessian_ok && q.twist_ok && (q.min_abs_det - 1.0).abs() < 1e-15);
        let d = kahler_cost_check(&CostFunction::dot(2), &us, &vs, 1e-6);
        assert!(d.cross_hessian_ok && d.twist_ok);
        let sep = CostFunction::from_expr(2, "x1^2 + sin(x2) + x3^4 - x4").unwrap();
        let s = kahler_cost_check(&sep, &us, &vs, 1e-6);
        assert!(!s.cross_hessian_ok && !s.twist_ok);
        // Finite-difference cross-Hessian of the quadratic cost is −I.
        let fd = CostFunction::from_expr(2, "0.5*((x1-x3)^2 + (x2-x4)^2)").unwrap();
        let m = fd.cross_hessian(&[0.2, 0.4], &[1.0, -1.0]);
        assert!((m + RMat::identity(2, 2)).amax() < 1e-7);
    }

    #[test]
    fn kmw_examples() {
        let one = |_: &[f64]| 1.0;
        let g = radial_solution(1.0).unwrap();
        let grid = ParamGrid::cube(2, 0.5, 1.5, 11).unwrap();
        let r = kmw_check(&g, &one, &one, &grid, 1e-9).unwrap();
        assert!(r.passed, "{}", r.im_phi.max_abs);
        assert!(r.oracle_gap.unwrap() < 1e-12);
        assert!(r.ma_residual.passed);

        let g1 = ScalarField::from_expr(1, "x1^2").unwrap();
        let half = |_: &[f64]| 0.5;
        let r1 = kmw_check(
            &g1,
            &one,
            &half,
            &ParamGrid::cube(1, 0.0, 1.0, 9).unwrap(),
            1e-14,
        )
        .unwrap();
        assert!(r1.passed && r1.im_phi.max_abs == 0.0);

        let pert = g.plus_scaled(&ScalarField::from_expr(2, "x1^3").unwrap(), 0.1);
        let rp = kmw_check(&pert, &one, &one, &grid, 1e-9).unwrap();
        assert!(!rp.passed);
        for (a, b) in rp.im_phi.residuals.iter().zip(&rp.ma_residual.residuals) {
            let (a, b) = (a.unwrap(), b.unwrap());
            assert!((2.0 * a - b).abs() < 1e-12);
        }
        assert!(rp.oracle_gap.unwrap() < 1e-12);
    }

    proptest! {
        #[test]
        fn hungarian_matches_brute_force(seed in 0u64..10_000, n in 1usize..8) {
            let mut rng = sample_rng(seed, 3);
            let c: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
            let sigma = assignment(&c);
            let mut seen = vec![false; n];
            for &j in &sigma { prop_assert!(!seen[j]); seen[j] = true; }
            let total: f64 = sigma.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
            prop_assert!((total - brute_force(&c)).abs() < 1e-9);
        }

        #[test]
        fn quadratic_plans_are_cyclically_monotone(seed in 0u64..10_000, n in 2usize..12) {
            let mut rng = sample_rng(seed, 5);
            let mut cloud = || (0..n).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect::<Vec<_>>();
            let (mu, nu) = (cloud(), cloud());
            let p = ot_discrete(&mu, &nu, &CostFunction::quadratic(2)).unwrap();
            prop_assert!(p.cyclically_monotone, "{}", p.cycle_violation);
        }
    }
}
