//! Scalar potentials on box domains.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SlagError};
use crate::expr::{self, Expr};
use crate::lin::RMat;

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&[f64]) -> RMat + Send + Sync>;

/// Axis-aligned box `[lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        BoxDomain { lo, hi }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        BoxDomain::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }
}

/// Samples on a uniform tensor grid, last axis fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridData {
    pub origin: Vec<f64>,
    pub h: f64,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl GridData {
    fn flat(&self, idx: &[isize]) -> Option<usize> {
        let mut k = 0usize;
        for (&j, &n) in idx.iter().zip(&self.shape) {
            if j < 0 || j as usize >= n {
                return None;
            }
            k = k * n + j as usize;
        }
        Some(k)
    }

    /// Node index of `x`, if `x` sits on a node.
    fn node_of(&self, x: &[f64]) -> Option<Vec<isize>> {
        let mut idx = Vec::with_capacity(x.len());
        for (d, &xi) in x.iter().enumerate() {
            let t = (xi - self.origin[d]) / self.h;
            let r = t.round();
            if (t - r).abs() > 1e-6 || r < 0.0 || r as usize >= self.shape[d] {
                return None;
            }
            idx.push(r as isize);
        }
        Some(idx)
    }

    fn at(&self, idx: &[isize]) -> Option<f64> {
        self.flat(idx).map(|k| self.values[k])
    }

    fn shifted(&self, base: &[isize], moves: &[(usize, isize)]) -> Option<f64> {
        let mut idx = base.to_vec();
        for &(d, s) in moves {
            idx[d] += s;
        }
        self.at(&idx)
    }
}

#[derive(Clone)]
enum Source {
    Analytic {
        value: ValueFn,
        gradient: Option<VectorFn>,
        hessian: Option<MatrixFn>,
        label: String,
    },
    Grid(GridData),
}

/// A potential on a box, evaluated analytically or from grid samples.
///
/// Missing derivatives are filled in by second-order central differences;
/// finite-difference Hessians are symmetrized.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    domain: Option<BoxDomain>,
    fd_step: f64,
    source: Source,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.source {
            Source::Analytic { label, .. } => format!("analytic({label})"),
            Source::Grid(g) => format!("grid{:?}", g.shape),
        };
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("kind", &kind)
            .finish()
    }
}

impl ScalarField {
    pub fn from_fn(dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField {
            dim,
            domain: None,
            fd_step: 1e-4,
            source: Source::Analytic {
                value: Arc::new(f),
                gradient: None,
                hessian: None,
                label: "closure".into(),
            },
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        if let Source::Analytic { gradient, .. } = &mut self.source {
            *gradient = Some(Arc::new(g));
        }
        self
    }

    pub fn with_hessian(mut self, h: impl Fn(&[f64]) -> RMat + Send + Sync + 'static) -> Self {
        if let Source::Analytic { hessian, .. } = &mut self.source {
            *hessian = Some(Arc::new(h));
        }
        self
    }

    pub fn with_domain(mut self, domain: BoxDomain) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn with_label(mut self, s: &str) -> Self {
        if let Source::Analytic { label, .. } = &mut self.source {
            *label = s.to_string();
        }
        self
    }

    /// Analytic field from an expression, with symbolic gradient and Hessian.
    pub fn from_expr(dim: usize, src: &str) -> Result<Self> {
        let e = expr::parse(src)?;
        if e.arity() > dim {
            return Err(SlagError::Expr(format!(
                "expression uses {} variables but dim is {dim}",
                e.arity()
            )));
        }
        Ok(Self::from_parsed(dim, e, src))
    }

    pub fn from_parsed(dim: usize, e: Expr, label: &str) -> Self {
        let grad: Vec<Expr> = (0..dim).map(|i| e.diff(i)).collect();
        let hess: Vec<Vec<Expr>> = grad
            .iter()
            .map(|g| (0..dim).map(|j| g.diff(j)).collect())
            .collect();
        let grad2 = grad.clone();
        let e2 = e.clone();
        ScalarField::from_fn(dim, move |x| e2.eval(x))
            .with_gradient(move |x| grad2.iter().map(|g| g.eval(x)).collect())
            .with_hessian(move |x| {
                let m = RMat::from_fn(dim, dim, |i, j| hess[i][j].eval(x));
                (&m + m.transpose()) * 0.5
            })
            .with_label(label)
    }

    pub fn from_grid(data: GridData) -> Result<Self> {
        let expected: usize = data.shape.iter().product();
        if data.values.len() != expected || data.origin.len() != data.shape.len() || data.h <= 0.0 {
            return Err(SlagError::Invalid(format!(
                "grid has {} values for shape {:?} (h = {})",
                data.values.len(),
                data.shape,
                data.h
            )));
        }
        let dim = data.shape.len();
        let hi = data
            .origin
            .iter()
            .zip(&data.shape)
            .map(|(o, n)| o + data.h * (*n as f64 - 1.0))
            .collect();
        let domain = BoxDomain::new(data.origin.clone(), hi);
        Ok(ScalarField {
            dim,
            domain: Some(domain),
            fd_step: data.h,
            source: Source::Grid(data),
        })
    }

    /// Sample an analytic field on a grid.
    pub fn sample_grid(&self, origin: Vec<f64>, h: f64, shape: Vec<usize>) -> Result<Self> {
        let total: usize = shape.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..total {
            let x: Vec<f64> = idx
                .iter()
                .zip(&origin)
                .map(|(&i, o)| o + h * i as f64)
                .collect();
            values.push(self.value(&x));
            for d in (0..shape.len()).rev() {
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        ScalarField::from_grid(GridData {
            origin,
            h,
            shape,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Option<&BoxDomain> {
        self.domain.as_ref()
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.source, Source::Grid(_))
    }

    pub fn has_exact_hessian(&self) -> bool {
        matches!(
            self.source,
            Source::Analytic {
                hessian: Some(_),
                ..
            }
        )
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.source {
            Source::Analytic { value, .. } => value(x),
            Source::Grid(g) => g.node_of(x).and_then(|i| g.at(&i)).unwrap_or(f64::NAN),
        }
    }

    /// `None` when a grid stencil would leave the grid.
    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let n = self.dim;
        match &self.source {
            Source::Analytic {
                gradient: Some(g), ..
            } => Some(g(x)),
            Source::Analytic { value, .. } => {
                let h = self.fd_step;
                Some(
                    (0..n)
                        .map(|i| {
                            let mut a = x.to_vec();
                            let mut b = x.to_vec();
                            a[i] += h;
                            b[i] -= h;
                            (value(&a) - value(&b)) / (2.0 * h)
                        })
                        .collect(),
                )
            }
            Source::Grid(g) => {
                let base = g.node_of(x)?;
                (0..n)
                    .map(|i| {
                        let p = g.shifted(&base, &[(i, 1)])?;
                        let m = g.shifted(&base, &[(i, -1)])?;
                        Some((p - m) / (2.0 * g.h))
                    })
                    .collect()
            }
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Option<RMat> {
        let n = self.dim;
        let m = match &self.source {
            Source::Analytic {
                hessian: Some(h), ..
            } => return Some(h(x)),
            Source::Analytic {
                gradient: Some(grad),
                ..
            } => {
                let h = self.fd_step;
                let mut m = RMat::zeros(n, n);
                for j in 0..n {
                    let mut a = x.to_vec();
                    let mut b = x.to_vec();
                    a[j] += h;
                    b[j] -= h;
                    let (ga, gb) = (grad(&a), grad(&b));
                    for i in 0..n {
                        m[(i, j)] = (ga[i] - gb[i]) / (2.0 * h);
                    }
                }
                m
            }
            Source::Analytic { value, .. } => {
                let h = self.fd_step;
                let f = |moves: &[(usize, f64)]| {
                    let mut y = x.to_vec();
                    for &(d, s) in moves {
                        y[d] += s * h;
                    }
                    value(&y)
                };
                second_differences(n, h, |moves| Some(f(moves)))?
            }
            Source::Grid(g) => {
                let base = g.node_of(x)?;
                second_differences(n, g.h, |moves| {
                    let ims: Vec<(usize, isize)> =
                        moves.iter().map(|&(d, s)| (d, s as isize)).collect();
                    g.shifted(&base, &ims)
                })?
            }
        };
        Some((&m + m.transpose()) * 0.5)
    }

    /// `self + s·other` with exact derivatives when both have them.
    pub fn plus_scaled(&self, other: &ScalarField, s: f64) -> ScalarField {
        assert_eq!(self.dim, other.dim);
        let (a, b) = (self.clone(), other.clone());
        let (ga, gb) = (self.clone(), other.clone());
        let (ha, hb) = (self.clone(), other.clone());
        let exact = self.has_exact_hessian() && other.has_exact_hessian();
        let mut f = ScalarField::from_fn(self.dim, move |x| a.value(x) + s * b.value(x))
            .with_gradient(move |x| {
                let (p, q) = (ga.gradient(x).unwrap(), gb.gradient(x).unwrap());
                p.iter().zip(&q).map(|(u, v)| u + s * v).collect()
            })
            .with_label("sum");
        if exact {
            f = f.with_hessian(move |x| ha.hessian(x).unwrap() + hb.hessian(x).unwrap() * s);
        }
        f.domain = self.domain.clone();
        f
    }
}

/// Central second differences; `f` receives `(axis, ±1)` steps.
fn second_differences(
    n: usize,
    h: f64,
    f: impl Fn(&[(usize, f64)]) -> Option<f64>,
) -> Option<RMat> {
    let f0 = f(&[])?;
    let mut m = RMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = (f(&[(i, 1.0)])? - 2.0 * f0 + f(&[(i, -1.0)])?) / (h * h);
        for j in i + 1..n {
            let v = (f(&[(i, 1.0), (j, 1.0)])?
                - f(&[(i, 1.0), (j, -1.0)])?
                - f(&[(i, -1.0), (j, 1.0)])?
                + f(&[(i, -1.0), (j, -1.0)])?)
                / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Some(m)
}

/// JSON description of a potential.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Analytic {
        dim: usize,
        #[serde(rename = "box")]
        domain: Option<Vec<[f64; 2]>>,
        expr: String,
    },
    Grid {
        dim: usize,
        #[serde(rename = "box")]
        domain: Vec<[f64; 2]>,
        h: f64,
        values: Vec<f64>,
    },
    /// The radial solution of `det Hess g = 1` in the plane with parameter `c`.
    Radial {
        c: f64,
        #[serde(rename = "box", default)]
        domain: Option<Vec<[f64; 2]>>,
    },
}

impl FieldSpec {
    pub fn build(&self) -> Result<ScalarField> {
        match self {
            FieldSpec::Analytic { dim, domain, expr } => {
                let f = ScalarField::from_expr(*dim, expr)?;
                Ok(match domain {
                    Some(b) => {
                        check_box(*dim, b)?;
                        f.with_domain(box_of(b))
                    }
                    None => f,
                })
            }
            FieldSpec::Grid {
                dim,
                domain,
                h,
                values,
            } => {
                check_box(*dim, domain)?;
                let shape: Vec<usize> = domain
                    .iter()
                    .map(|[a, b]| ((b - a) / h).round() as usize + 1)
                    .collect();
                ScalarField::from_grid(GridData {
                    origin: domain.iter().map(|b| b[0]).collect(),
                    h: *h,
                    shape,
                    values: values.clone(),
                })
            }
            FieldSpec::Radial { c, domain } => {
                let f = super::radial_solution(*c)?;
                Ok(match domain {
                    Some(b) => {
                        check_box(2, b)?;
                        f.with_domain(box_of(b))
                    }
                    None => f,
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FieldSpec::Analytic { dim, .. } | FieldSpec::Grid { dim, .. } => *dim,
            FieldSpec::Radial { .. } => 2,
        }
    }

    pub fn domain(&self) -> Option<BoxDomain> {
        match self {
            FieldSpec::Analytic { domain, .. } => domain.as_ref().map(|b| box_of(b)),
            FieldSpec::Grid { domain, .. } => Some(box_of(domain)),
            FieldSpec::Radial { domain, .. } => domain.as_ref().map(|b| box_of(b)),
        }
    }
}

fn check_box(dim: usize, b: &[[f64; 2]]) -> Result<()> {
    if b.len() != dim {
        return Err(SlagError::Invalid(format!(
            "box has {} intervals, dim is {dim}",
            b.len()
        )));
    }
    if let Some(i) = b.iter().position(|[a, c]| !(a < c)) {
        return Err(SlagError::Invalid(format!("box interval {i} is empty")));
    }
    Ok(())
}

fn box_of(b: &[[f64; 2]]) -> BoxDomain {
    BoxDomain::new(
        b.iter().map(|x| x[0]).collect(),
        b.iter().map(|x| x[1]).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expr_field_derivatives() {
        let f = ScalarField::from_expr(2, "x1^3 + 2*x1*x2^2").unwrap();
        let x = [0.7, -0.4];
        let g = f.gradient(&x).unwrap();
        assert!((g[0] - (3.0 * 0.49 + 2.0 * 0.16)).abs() < 1e-14);
        let h = f.hessian(&x).unwrap();
        assert!((h[(0, 1)] - 4.0 * -0.4).abs() < 1e-14);
        assert!((h[(1, 1)] - 4.0 * 0.7).abs() < 1e-14);
    }

    #[test]
    fn fd_fallbacks_agree_with_exact() {
        let exact = ScalarField::from_expr(2, "exp(x1)*sin(x2) + x1^2*x2").unwrap();
        let e2 = exact.clone();
        let fd = ScalarField::from_fn(2, move |x| e2.value(x)).with_fd_step(1e-3);
        let x = [0.3, 0.8];
        let (he, hf) = (exact.hessian(&x).unwrap(), fd.hessian(&x).unwrap());
        assert!((he - &hf).amax() < 1e-5);
        assert_eq!(hf, hf.transpose());
    }

    #[test]
    fn grid_field_stencils() {
        let f = ScalarField::from_expr(2, "x1^2 + 3*x1*x2 - x2^2").unwrap();
        let g = f.sample_grid(vec![0.0, 0.0], 0.1, vec![11, 11]).unwrap();
        let h = g.hessian(&[0.5, 0.5]).unwrap();
        assert!(
            (h[(0, 0)] - 2.0).abs() < 1e-10
                && (h[(0, 1)] - 3.0).abs() < 1e-10
                && (h[(1, 1)] + 2.0).abs() < 1e-10
        );
        assert!(g.hessian(&[0.0, 0.5]).is_none());
        assert!(g.gradient(&[0.05, 0.5]).is_none());
        assert!((g.value(&[0.3, 0.2]) - f.value(&[0.3, 0.2])).abs() < 1e-14);
    }

    #[test]
    fn field_spec_json() {
        let spec: FieldSpec = serde_json::from_str(
            r#"{"kind":"analytic","dim":2,"box":[[0,1],[0,1]],"expr":"0.5*(x1^2+x2^2)"}"#,
        )
        .unwrap();
        let f = spec.build().unwrap();
        assert_eq!(f.hessian(&[0.2, 0.2]).unwrap(), RMat::identity(2, 2));
        let bad: FieldSpec =
            serde_json::from_str(r#"{"kind":"grid","dim":1,"box":[[0,1]],"h":0.5,"values":[1,2]}"#)
                .unwrap();
        assert!(bad.build().is_err());
    }
}
