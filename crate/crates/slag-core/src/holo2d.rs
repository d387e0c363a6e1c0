//! Dimension two: split SLAG surfaces in `D²` correspond to holomorphic curves in `C²`.
//!
//! The coordinate change is `z₁′ = x₁ − i·x₂`, `z₂′ = y₁ + i·y₂`; under it
//! `dz₁′∧dz₂′ = ω + i·Im dz` as forms on `R⁴`.

use std::sync::Arc;

use nalgebra::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlagError};
use crate::forms::{std_forms, AltForm};
use crate::lin::{self, RMat};
use crate::planes::{
    dz_of, euclid_orthonormal, graph_tests, induced_gram, omega_matrix, GraphReport, Picture,
};
use crate::potential::{ImmersedSurface, ParamGrid, ResidualReport};

pub type C64 = Complex<f64>;

/// Matrix sending `(x₁, x₂, y₁, y₂)` to `(x₁′, y₁′, x₂′, y₂′)`.
pub fn coord_map() -> RMat {
    RMat::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0, 1.0, 1.0]))
}

/// The map `z₁′ = x₁ + i·x₂`, `z₂′ = y₁ + i·y₂`, kept for comparison; it does
/// not carry `Re dz′` to `ω`.
pub fn literal_coord_map() -> RMat {
    RMat::identity(4, 4)
}

/// `(Re, Im)` of `dz₁′∧dz₂′` in the primed coordinates `(x₁′, y₁′, x₂′, y₂′)`.
pub fn primed_dz() -> (AltForm, AltForm) {
    let c = |i| AltForm::coord(4, i);
    let re = c(0).wedge(&c(2)).sub(&c(1).wedge(&c(3)));
    let im = c(0).wedge(&c(3)).add(&c(1).wedge(&c(2)));
    (re, im)
}

#[derive(Clone, Debug, Serialize)]
pub struct FormIdentityReport {
    pub map: Vec<Vec<f64>>,
    /// Largest coefficient of `Re dz′ − ω` and `Im dz′ − Im dz` after pullback.
    pub identity_residual: f64,
    pub re_residual: f64,
    pub im_residual: f64,
    /// `|P·P − I|`: the map is its own inverse.
    pub involution_residual: f64,
}

pub fn form_identity_for(map: &RMat) -> FormIdentityReport {
    let (re, im) = primed_dz();
    let f = std_forms(2);
    let re_residual = re.pullback(map).sub(&f.omega).max_abs();
    let im_residual = im.pullback(map).sub(&f.im_dz).max_abs();
    FormIdentityReport {
        map: lin::to_rows(map),
        identity_residual: re_residual.max(im_residual),
        re_residual,
        im_residual,
        involution_residual: lin::max_abs(&(map * map - RMat::identity(4, 4))),
    }
}

pub fn coord_map_and_form_identity() -> FormIdentityReport {
    form_identity_for(&coord_map())
}

#[derive(Clone, Debug, Serialize)]
pub struct PlaneCorrespondence {
    /// Graph matrix `y = A x` of the line `z₂′ = (a + ib) z₁′`.
    pub a_matrix: Vec<Vec<f64>>,
    pub slope: [f64; 2],
    pub slope_abs: f64,
    /// The 45° rule `|a + ib| < 1`.
    pub slag: bool,
    pub graph: GraphReport,
    pub agrees: bool,
}

pub fn plane_correspondence(a: f64, b: f64, tol: f64) -> PlaneCorrespondence {
    let m = RMat::from_row_slice(2, 2, &[a, b, b, -a]);
    let slope_abs = a.hypot(b);
    let graph = graph_tests(Picture::X, &m, tol);
    let slag = slope_abs < 1.0;
    PlaneCorrespondence {
        a_matrix: lin::to_rows(&m),
        slope: [a, b],
        slope_abs,
        slag,
        agrees: graph.slag == slag,
        graph,
    }
}

pub type CurveFn = Arc<dyn Fn(C64) -> (C64, C64) + Send + Sync>;

#[derive(Clone)]
pub enum CurveSource {
    /// Coefficients in increasing degree.
    Polynomial { p1: Vec<C64>, p2: Vec<C64> },
    /// Values and user-supplied ζ-derivatives.
    Callable { value: CurveFn, derivative: CurveFn },
}

/// A holomorphic pair `(z₁′(ζ), z₂′(ζ))` sampled on the disk `|ζ| ≤ radius`
/// (an `n × n` grid over the enclosing square).
#[derive(Clone)]
pub struct ComplexCurveParam {
    pub source: CurveSource,
    pub radius: f64,
    pub n: usize,
}

impl std::fmt::Debug for ComplexCurveParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.source {
            CurveSource::Polynomial { p1, p2 } => {
                format!("polynomial(deg {}, {})", p1.len(), p2.len())
            }
            CurveSource::Callable { .. } => "callable".into(),
        };
        write!(
            f,
            "ComplexCurveParam({kind}, radius {}, n {})",
            self.radius, self.n
        )
    }
}

/// JSON form of a polynomial curve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveSpec {
    pub coeffs1: Vec<[f64; 2]>,
    pub coeffs2: Vec<[f64; 2]>,
    pub grid: DiskGrid,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DiskGrid {
    pub radius: f64,
    pub n: usize,
}

impl CurveSpec {
    pub fn build(&self) -> ComplexCurveParam {
        let c = |v: &[[f64; 2]]| v.iter().map(|z| C64::new(z[0], z[1])).collect();
        ComplexCurveParam::polynomial(
            c(&self.coeffs1),
            c(&self.coeffs2),
            self.grid.radius,
            self.grid.n,
        )
    }
}

fn horner(c: &[C64], z: C64) -> C64 {
    c.iter()
        .rev()
        .fold(C64::new(0.0, 0.0), |acc, a| acc * z + a)
}

fn derivative_coeffs(c: &[C64]) -> Vec<C64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, a)| a * k as f64)
        .collect()
}

impl ComplexCurveParam {
    pub fn polynomial(p1: Vec<C64>, p2: Vec<C64>, radius: f64, n: usize) -> Self {
        ComplexCurveParam {
            source: CurveSource::Polynomial { p1, p2 },
            radius,
            n,
        }
    }

    pub fn callable(
        value: impl Fn(C64) -> (C64, C64) + Send + Sync + 'static,
        derivative: impl Fn(C64) -> (C64, C64) + Send + Sync + 'static,
        radius: f64,
        n: usize,
    ) -> Self {
        ComplexCurveParam {
            source: CurveSource::Callable {
                value: Arc::new(value),
                derivative: Arc::new(derivative),
            },
            radius,
            n,
        }
    }

    pub fn value(&self, z: C64) -> (C64, C64) {
        match &self.source {
            CurveSource::Polynomial { p1, p2 } => (horner(p1, z), horner(p2, z)),
            CurveSource::Callable { value, .. } => value(z),
        }
    }

    pub fn derivative(&self, z: C64) -> (C64, C64) {
        match &self.source {
            CurveSource::Polynomial { p1, p2 } => (
                horner(&derivative_coeffs(p1), z),
                horner(&derivative_coeffs(p2), z),
            ),
            CurveSource::Callable { derivative, .. } => derivative(z),
        }
    }

    /// Lowest derivative order `m ≥ 1` with `(p₁^{(m)}, p₂^{(m)}) ≠ 0` at `z`, and those values.
    fn leading_jet(&self, z: C64, tol: f64) -> Option<(usize, C64, C64)> {
        let CurveSource::Polynomial { p1, p2 } = &self.source else {
            return None;
        };
        let (mut a, mut b) = (derivative_coeffs(p1), derivative_coeffs(p2));
        for m in 1..=p1.len().max(p2.len()) {
            let (da, db) = (horner(&a, z), horner(&b, z));
            if da.norm() > tol || db.norm() > tol {
                return Some((m, da, db));
            }
            a = derivative_coeffs(&a);
            b = derivative_coeffs(&b);
        }
        None
    }

    /// Largest mismatch between supplied derivatives and difference quotients
    /// along `1` and `i`; zero for polynomials.
    pub fn cauchy_riemann_residual(&self) -> f64 {
        let CurveSource::Callable { value, derivative } = &self.source else {
            return 0.0;
        };
        let h = 1e-6;
        self.nodes()
            .iter()
            .map(|&z| {
                let (d1, d2) = derivative(z);
                let mut worst = 0.0f64;
                for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                    let (a1, a2) = value(z + dir * h);
                    let (b1, b2) = value(z - dir * h);
                    let q1 = (a1 - b1) / (dir * 2.0 * h);
                    let q2 = (a2 - b2) / (dir * 2.0 * h);
                    worst = worst.max((q1 - d1).norm() / d1.norm().max(1.0));
                    worst = worst.max((q2 - d2).norm() / d2.norm().max(1.0));
                }
                worst
            })
            .fold(0.0, f64::max)
    }

    pub fn grid(&self) -> ParamGrid {
        ParamGrid::cube(2, -self.radius, self.radius, self.n).expect("n >= 2")
    }

    /// Nodes `ζ = s − i·t` in grid order.
    pub fn nodes(&self) -> Vec<C64> {
        self.grid()
            .points()
            .iter()
            .map(|p| C64::new(p[0], -p[1]))
            .collect()
    }

    fn inside(&self, p: &[f64]) -> bool {
        p[0].hypot(p[1]) <= self.radius * (1.0 + 1e-12)
    }
}

/// `(x₁, x₂, y₁, y₂)` of the point with primed coordinates `(z₁′, z₂′)`.
fn to_real(z1: C64, z2: C64) -> Vec<f64> {
    vec![z1.re, -z1.im, z2.re, z2.im]
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchPoint {
    pub node: usize,
    pub zeta: [f64; 2],
    /// Order of the first non-vanishing derivative.
    pub order: usize,
    /// `|p₁^{(m)}| − |p₂^{(m)}|` for the limiting tangent.
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CurveReport {
    pub zeta: Vec<[f64; 2]>,
    pub omega: ResidualReport,
    pub im_dz: ResidualReport,
    /// The 45° margin `|∂z₁′/∂ζ| − |∂z₂′/∂ζ|`.
    pub margin: Vec<Option<f64>>,
    pub spacelike: Vec<Option<bool>>,
    pub disagreements: Vec<usize>,
    pub agreement: bool,
    pub branch_points: Vec<BranchPoint>,
    /// Largest gap between the pulled-back `ω`, `Im dz` and the parts of the pulled-back `dz′`.
    pub transport_gap: f64,
    pub cauchy_riemann: f64,
    pub passed: bool,
}

struct CurveNode {
    omega: Option<f64>,
    im_dz: Option<f64>,
    margin: Option<f64>,
    spacelike: Option<bool>,
    agrees: bool,
    branch: Option<(usize, f64)>,
    transport: f64,
}

/// Transport a holomorphic curve to `D²` and check it is an unconstrained split
/// SLAG surface obeying the 45° rule wherever it is space-like.
///
/// The surface is parameterized by `(s, t)` with `ζ = s − i·t`, which makes
/// the image positively oriented.
pub fn curve_to_surface(
    curve: &ComplexCurveParam,
    tol: f64,
) -> Result<(ImmersedSurface, CurveReport)> {
    let cr = curve.cauchy_riemann_residual();
    if cr > 1e-6 {
        return Err(SlagError::Invalid(format!(
            "curve is not holomorphic: Cauchy-Riemann residual {cr:e}"
        )));
    }
    let (cm, cj, cmask) = (curve.clone(), curve.clone(), curve.clone());
    let surface = ImmersedSurface::new(curve.grid(), move |p| {
        let (a, b) = cm.value(C64::new(p[0], -p[1]));
        to_real(a, b)
    })
    .with_jacobian(move |p| {
        let (d1, d2) = cj.derivative(C64::new(p[0], -p[1]));
        let i = C64::new(0.0, 1.0);
        let cs = to_real(d1, d2);
        let ct = to_real(-i * d1, -i * d2);
        RMat::from_fn(4, 2, |r, c| if c == 0 { cs[r] } else { ct[r] })
    })
    .with_mask(move |p| cmask.inside(p));

    let (re_p, im_p) = primed_dz();
    let map = coord_map();
    let (re_pulled, im_pulled) = (re_p.pullback(&map), im_p.pullback(&map));
    let f = std_forms(2);
    let pts = curve.grid().points();
    let nodes: Vec<CurveNode> = pts
        .par_iter()
        .map(|p| {
            let empty = CurveNode {
                omega: None,
                im_dz: None,
                margin: None,
                spacelike: None,
                agrees: true,
                branch: None,
                transport: 0.0,
            };
            if !curve.inside(p) {
                return empty;
            }
            let z = C64::new(p[0], -p[1]);
            let (d1, d2) = curve.derivative(z);
            let scale = curve
                .value(z)
                .0
                .norm()
                .max(curve.value(z).1.norm())
                .max(1.0);
            if d1.norm() <= tol * scale && d2.norm() <= tol * scale {
                let branch = curve
                    .leading_jet(z, tol * scale)
                    .map(|(m, a, b)| (m, a.norm() - b.norm()));
                return CurveNode {
                    margin: branch.map(|b| b.1),
                    spacelike: branch.map(|b| b.1 > tol),
                    agrees: true,
                    branch: Some(branch.unwrap_or((0, f64::NAN))),
                    ..empty
                };
            }
            let frame = surface.frame(p);
            let q = euclid_orthonormal(&frame);
            let transport = [
                (f.omega.pullback(&frame), re_pulled.pullback(&frame)),
                (f.im_dz.pullback(&frame), im_pulled.pullback(&frame)),
            ]
            .iter()
            .map(|(a, b)| a.sub(b).max_abs())
            .fold(0.0, f64::max);
            // The Gram matrix is (|p₁′|² − |p₂′|²)·I, so both tests share the scale |p₁′| + |p₂′|.
            let s = d1.norm() + d2.norm();
            let margin = d1.norm() - d2.norm();
            let spacelike = lin::min_sym_eigenvalue(&induced_gram(&frame)) > tol * s * s;
            CurveNode {
                omega: Some(lin::max_abs(&omega_matrix(&q))),
                im_dz: Some(dz_of(&q).im.abs()),
                margin: Some(margin),
                spacelike: Some(spacelike),
                agrees: (margin > tol * s) == spacelike,
                branch: None,
                transport,
            }
        })
        .collect();

    let omega = ResidualReport::from_nodes(&pts, nodes.iter().map(|n| n.omega).collect(), tol);
    let im_dz = ResidualReport::from_nodes(&pts, nodes.iter().map(|n| n.im_dz).collect(), tol);
    let disagreements: Vec<usize> = nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| !n.agrees)
        .map(|(i, _)| i)
        .collect();
    let branch_points: Vec<BranchPoint> = nodes
        .iter()
        .enumerate()
        .filter_map(|(i, n)| {
            n.branch.map(|(order, margin)| BranchPoint {
                node: i,
                zeta: [pts[i][0], -pts[i][1]],
                order,
                margin,
            })
        })
        .collect();
    let agreement = disagreements.is_empty();
    let report = CurveReport {
        zeta: pts.iter().map(|p| [p[0], -p[1]]).collect(),
        margin: nodes.iter().map(|n| n.margin).collect(),
        spacelike: nodes.iter().map(|n| n.spacelike).collect(),
        transport_gap: nodes.iter().map(|n| n.transport).fold(0.0, f64::max),
        passed: omega.passed && im_dz.passed && agreement,
        omega,
        im_dz,
        disagreements,
        agreement,
        branch_points,
        cauchy_riemann: cr,
    };
    Ok((surface, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn form_identity_is_exact() {
        let r = coord_map_and_form_identity();
        assert_eq!(r.identity_residual, 0.0);
        assert_eq!(r.involution_residual, 0.0);
        let lit = form_identity_for(&literal_coord_map());
        assert!(lit.re_residual > 1.0);
    }

    #[test]
    fn basis_images() {
        let m = coord_map();
        let v = m * nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        // z₁′ = x₁ − i x₂, z₂′ = y₁ + i y₂.
        assert_eq!(v.as_slice(), &[1.0, -2.0, 3.0, 4.0]);
    }

    #[test]
    fn plane_examples() {
        let p = plane_correspondence(0.3, 0.4, 1e-12);
        assert!((p.slope_abs - 0.5).abs() < 1e-15 && p.slag && p.agrees);
        let z = plane_correspondence(0.0, 0.0, 1e-12);
        assert!(z.slag && z.a_matrix == vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        let b = plane_correspondence(1.0, 0.0, 1e-12);
        assert!(!b.slag && b.agrees);
    }

    #[test]
    fn lattice_agreement() {
        for i in 0..8 {
            for j in 0..8 {
                let (a, b) = (-1.3 + 0.37 * i as f64, -1.3 + 0.37 * j as f64);
                assert!(plane_correspondence(a, b, 1e-12).agrees, "{a} {b}");
            }
        }
    }

    #[test]
    fn constant_second_coordinate() {
        let curve = ComplexCurveParam::polynomial(
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(0.7, -0.2)],
            1.0,
            21,
        );
        let (_, r) = curve_to_surface(&curve, 1e-12).unwrap();
        assert!(r.passed);
        assert_eq!(r.omega.max_abs, 0.0);
        assert_eq!(r.im_dz.max_abs, 0.0);
    }

    #[test]
    fn quarter_square_curve() {
        let curve = ComplexCurveParam::polynomial(
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(0.25, 0.0)],
            1.0,
            41,
        );
        let (s, r) = curve_to_surface(&curve, 1e-12).unwrap();
        assert!(r.passed && r.omega.max_abs <= 1e-12 && r.im_dz.max_abs <= 1e-12);
        assert!(r.spacelike.iter().flatten().all(|s| *s));
        assert!(r.transport_gap < 1e-14);
        let eds = crate::potential::eds_report(&s, 1e-12);
        assert!(eds.slag, "{} {}", eds.im_dz.max_abs, eds.positive);
    }

    #[test]
    fn square_curve_changes_signature_at_half() {
        let curve = ComplexCurveParam::polynomial(
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            1.0,
            41,
        );
        let (_, r) = curve_to_surface(&curve, 1e-12).unwrap();
        assert!(r.omega.passed && r.im_dz.passed && r.agreement);
        for (z, s) in r.zeta.iter().zip(&r.spacelike) {
            if let Some(s) = s {
                let rad = z[0].hypot(z[1]);
                if (rad - 0.5).abs() > 1e-9 {
                    assert_eq!(*s, rad < 0.5);
                }
            }
        }
    }

    #[test]
    fn branch_points_use_limiting_tangent() {
        // (ζ², ζ³/3): both derivatives vanish at 0, the limiting tangent is that of (2, 0).
        let curve = ComplexCurveParam::polynomial(
            vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0 / 3.0, 0.0)],
            0.5,
            11,
        );
        let (_, r) = curve_to_surface(&curve, 1e-12).unwrap();
        assert_eq!(r.branch_points.len(), 1);
        let b = &r.branch_points[0];
        assert_eq!(b.order, 2);
        assert!((b.margin - 2.0).abs() < 1e-15);
        assert!(r.omega.passed && r.im_dz.passed && r.agreement);
    }

    #[test]
    fn callable_curves_and_cr_rejection() {
        let good = ComplexCurveParam::callable(
            |z| (z, z.exp() * 0.2),
            |z| (c(1.0, 0.0), z.exp() * 0.2),
            0.8,
            9,
        );
        let (_, r) = curve_to_surface(&good, 1e-10).unwrap();
        assert!(r.omega.passed && r.im_dz.passed);
        let bad = ComplexCurveParam::callable(
            |z| (z, z.conj() * 0.3),
            |_| (c(1.0, 0.0), c(0.3, 0.0)),
            0.8,
            9,
        );
        assert!(curve_to_surface(&bad, 1e-10).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec: CurveSpec = serde_json::from_str(r#"{"coeffs1": [[0,0],[1,0]], "coeffs2": [[0,0],[0,0],[0.25,0]], "grid": {"radius": 1.0, "n": 11}}"#).unwrap();
        let (_, r) = curve_to_surface(&spec.build(), 1e-12).unwrap();
        assert!(r.passed);
    }
}
