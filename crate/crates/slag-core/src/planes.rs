//! Oriented real `n`-planes in `D^n ≅ R^{2n}`.
//!
//! A plane is given by `n` spanning columns with coordinates ordered
//! `x_1..x_n, y_1..y_n`. The inner product is `Σx² − Σy²`, `T` swaps the
//! `x` and `y` blocks (multiplication by `τ`), and `ω(a, b) = ⟨a, Tb⟩`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dmat::DMatrix;
use crate::dnum::{Component, DNumber};
use crate::error::{Result, SlagError};
use crate::forms::{self, MultiVector};
use crate::lin::{self, RMat};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlaneJson", into = "PlaneJson")]
pub struct PlaneBasis {
    cols: RMat,
}

#[derive(Serialize, Deserialize)]
struct PlaneJson {
    n: usize,
    columns: Vec<Vec<f64>>,
}

impl TryFrom<PlaneJson> for PlaneBasis {
    type Error = String;
    fn try_from(j: PlaneJson) -> std::result::Result<Self, String> {
        if j.columns.len() != j.n {
            return Err(format!("expected {} columns, got {}", j.n, j.columns.len()));
        }
        if let Some((k, c)) = j
            .columns
            .iter()
            .enumerate()
            .find(|(_, c)| c.len() != 2 * j.n)
        {
            return Err(format!(
                "column {k} has length {}, expected {}",
                c.len(),
                2 * j.n
            ));
        }
        Ok(PlaneBasis {
            cols: RMat::from_fn(2 * j.n, j.n, |i, k| j.columns[k][i]),
        })
    }
}

impl From<PlaneBasis> for PlaneJson {
    fn from(p: PlaneBasis) -> Self {
        PlaneJson {
            n: p.n(),
            columns: (0..p.n())
                .map(|k| p.cols.column(k).iter().copied().collect())
                .collect(),
        }
    }
}

/// Signature-`(n, n)` inner product `Σ x_i x′_i − Σ y_i y′_i`.
pub fn inner(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() / 2;
    (0..n).map(|i| a[i] * b[i] - a[n + i] * b[n + i]).sum()
}

/// The structure map `T(x, y) = (y, x)`.
pub fn t_map(v: &[f64]) -> Vec<f64> {
    let n = v.len() / 2;
    v[n..].iter().chain(&v[..n]).copied().collect()
}

/// `ω(a, b) = Σ (a_x b_y − a_y b_x)`.
pub fn omega_pair(a: &[f64], b: &[f64]) -> f64 {
    inner(a, &t_map(b))
}

fn col(m: &RMat, k: usize) -> Vec<f64> {
    m.column(k).iter().copied().collect()
}

/// Gram matrix of the columns under the signature-`(n, n)` product.
pub fn induced_gram(cols: &RMat) -> RMat {
    let k = cols.ncols();
    let vs: Vec<Vec<f64>> = (0..k).map(|j| col(cols, j)).collect();
    RMat::from_fn(k, k, |i, j| inner(&vs[i], &vs[j]))
}

/// Matrix of `ω` on the columns.
pub fn omega_matrix(cols: &RMat) -> RMat {
    let k = cols.ncols();
    let vs: Vec<Vec<f64>> = (0..k).map(|j| col(cols, j)).collect();
    RMat::from_fn(k, k, |i, j| omega_pair(&vs[i], &vs[j]))
}

/// Orthonormal columns for the Euclidean product spanning the same oriented plane.
pub fn euclid_orthonormal(cols: &RMat) -> RMat {
    let qr = cols.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Columns read as D-vectors: entry `(i, j)` is `x_i + τ y_i` of column `j`.
pub fn d_matrix_of(cols: &RMat) -> DMatrix {
    let n = cols.ncols();
    DMatrix::new(cols.rows(0, n).into_owned(), cols.rows(n, n).into_owned())
}

/// `dz` evaluated on the columns, as `det_D` of the D-matrix they form.
pub fn dz_of(cols: &RMat) -> DNumber {
    d_matrix_of(cols).det_d()
}

impl PlaneBasis {
    pub fn new(cols: RMat) -> Result<Self> {
        if cols.nrows() != 2 * cols.ncols() {
            return Err(SlagError::Dimension(format!(
                "plane basis must be 2n x n, got {} x {}",
                cols.nrows(),
                cols.ncols()
            )));
        }
        Ok(PlaneBasis { cols })
    }

    pub fn n(&self) -> usize {
        self.cols.ncols()
    }

    pub fn columns(&self) -> &RMat {
        &self.cols
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        col(&self.cols, k)
    }

    /// `R^n = {y = 0}` with its standard orientation.
    pub fn standard(n: usize) -> Self {
        PlaneBasis {
            cols: RMat::from_fn(2 * n, n, |i, j| if i == j { 1.0 } else { 0.0 }),
        }
    }

    /// Graph of `y = A x`.
    pub fn from_x_graph(a: &RMat) -> Self {
        let n = a.nrows();
        let mut cols = RMat::zeros(2 * n, n);
        cols.view_mut((0, 0), (n, n))
            .copy_from(&RMat::identity(n, n));
        cols.view_mut((n, 0), (n, n)).copy_from(a);
        PlaneBasis { cols }
    }

    /// Graph of `v = B u` in null coordinates.
    pub fn from_null_graph(b: &RMat) -> Self {
        let n = b.nrows();
        let i = RMat::identity(n, n);
        let mut cols = RMat::zeros(2 * n, n);
        cols.view_mut((0, 0), (n, n)).copy_from(&((&i + b) * 0.5));
        cols.view_mut((n, 0), (n, n)).copy_from(&((b - &i) * 0.5));
        PlaneBasis { cols }
    }

    /// Canonical space-like plane with pair angles `θ_j` (`2·angles.len() ≤ n`).
    ///
    /// Pair `j` spans `e_{2j}` and `cosh θ_j e_{2j+1} + sinh θ_j T e_{2j}`.
    pub fn canonical(n: usize, angles: &[f64]) -> Self {
        assert!(2 * angles.len() <= n);
        let mut p = PlaneBasis::standard(n);
        for (j, &t) in angles.iter().enumerate() {
            let (a, b) = (2 * j, 2 * j + 1);
            p.cols[(b, b)] = t.cosh();
            p.cols[(n + a, b)] = t.sinh();
        }
        p
    }

    /// Image under a D-linear map.
    pub fn apply(&self, u: &DMatrix) -> PlaneBasis {
        let n = self.n();
        let mut cols = RMat::zeros(2 * n, n);
        for k in 0..n {
            let c = self.column(k);
            let (x, y) = u.apply_real(&c[..n], &c[n..]);
            for i in 0..n {
                cols[(i, k)] = x[i];
                cols[(n + i, k)] = y[i];
            }
        }
        PlaneBasis { cols }
    }

    pub fn gram(&self) -> RMat {
        induced_gram(&self.cols)
    }

    pub fn x_projection(&self) -> RMat {
        self.cols.rows(0, self.n()).into_owned()
    }

    /// Basis with identity Gram matrix, same orientation: `E = V·L⁻ᵀ` with `G = L·Lᵀ`.
    pub fn orthonormalize(&self) -> Result<PlaneBasis> {
        let g = self.gram();
        let chol = nalgebra::Cholesky::new(g.clone())
            .ok_or_else(|| SlagError::NotSpacelike(lin::min_sym_eigenvalue(&g)))?;
        let lt_inv = chol
            .l()
            .transpose()
            .try_inverse()
            .ok_or(SlagError::DegeneratePlane)?;
        Ok(PlaneBasis {
            cols: &self.cols * lt_inv,
        })
    }

    pub fn dz_raw(&self) -> DNumber {
        dz_of(&self.cols)
    }

    pub fn to_multivector(&self) -> MultiVector {
        MultiVector::from_columns(&self.cols)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PlaneReport {
    pub n: usize,
    pub gram: Vec<Vec<f64>>,
    pub degenerate: bool,
    pub min_gram_eigenvalue: f64,
    pub spacelike: bool,
    pub positive_component: Option<bool>,
    pub lagrangian: bool,
    pub omega_residual: f64,
    pub dz: Option<DNumber>,
    pub dz_oracle: Option<DNumber>,
    pub dz_route_gap: Option<f64>,
    pub im_dz_residual: Option<f64>,
    pub slag: bool,
    pub slag_theta: Option<f64>,
}

/// Predicates and `dz` for a plane.
///
/// `dz` is taken on the Gram-orthonormalized basis; for `n ≤ 3` it is also
/// evaluated through the expansion oracle of the forms module.
pub fn analyze_plane(p: &PlaneBasis, tol: f64) -> PlaneReport {
    let n = p.n();
    let g = p.gram();
    let evs = lin::sym_eigenvalues(&g);
    let min_ev = evs.first().copied().unwrap_or(0.0);
    let scale = lin::max_abs(&g).max(f64::MIN_POSITIVE);
    let degenerate = evs.iter().any(|e| e.abs() <= tol * scale);
    let mut rep = PlaneReport {
        n,
        gram: lin::to_rows(&g),
        degenerate,
        min_gram_eigenvalue: min_ev,
        spacelike: false,
        positive_component: None,
        lagrangian: false,
        omega_residual: f64::NAN,
        dz: None,
        dz_oracle: None,
        dz_route_gap: None,
        im_dz_residual: None,
        slag: false,
        slag_theta: None,
    };
    if degenerate {
        return rep;
    }
    let spacelike = min_ev > tol * scale;
    rep.spacelike = spacelike;
    match p.orthonormalize() {
        Ok(e) if spacelike => {
            let s = omega_matrix(e.columns());
            rep.omega_residual = lin::max_abs(&s);
            let dz = e.dz_raw();
            rep.dz = Some(dz);
            rep.im_dz_residual = Some(dz.im.abs());
            if let Ok(oracle) = forms::eval_dz_oracle(e.columns()) {
                rep.dz_oracle = Some(oracle);
                rep.dz_route_gap = Some(oracle.abs_diff(dz));
            }
            rep.positive_component = Some(lin::det(&p.x_projection()) > 0.0);
            rep.slag_theta = dz.polar().ok().map(|(_, t)| t);
        }
        _ => {
            let q = euclid_orthonormal(p.columns());
            rep.omega_residual = lin::max_abs(&omega_matrix(&q));
        }
    }
    rep.lagrangian = rep.omega_residual <= tol;
    rep.slag = rep.spacelike
        && rep.positive_component == Some(true)
        && rep.lagrangian
        && rep.im_dz_residual.is_some_and(|r| r <= tol);
    rep
}

#[derive(Clone, Debug, Serialize)]
pub struct CanonicalData {
    pub phase: f64,
    pub angles: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub dz_value: DNumber,
}

impl CanonicalData {
    /// `|quad(dz) − Π(1 + λ²)|` and `|Re dz − cosh θ Π cosh θ_j|`.
    pub fn reconstruction_residuals(&self) -> (f64, f64) {
        let q: f64 = self.lambdas.iter().map(|l| 1.0 + l * l).product();
        let r: f64 = self.phase.cosh() * self.angles.iter().map(|t| t.cosh()).product::<f64>();
        (
            (self.dz_value.quad() - q).abs(),
            (self.dz_value.re - r).abs(),
        )
    }
}

/// Canonical pair values of `ω` restricted to a space-like positive plane.
pub fn canonical_angles(p: &PlaneBasis) -> Result<CanonicalData> {
    let e = p.orthonormalize()?;
    if lin::det(&p.x_projection()) <= 0.0 {
        return Err(SlagError::Invalid(
            "plane is not in the positive component".into(),
        ));
    }
    let n = p.n();
    let s = omega_matrix(e.columns());
    let mut sv: Vec<f64> = s.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let lambdas: Vec<f64> = (0..n / 2).map(|j| sv[2 * j]).collect();
    let angles = lambdas.iter().map(|l| l.asinh()).collect();
    let dz = e.dz_raw();
    let (_, phase) = dz
        .polar()
        .map_err(|c| SlagError::Invalid(format!("dz outside D+ ({c:?})")))?;
    Ok(CanonicalData {
        phase,
        angles,
        lambdas,
        dz_value: dz,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Picture {
    /// `y = A x`.
    X,
    /// `v = B u`.
    Null,
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphReport {
    pub picture: Picture,
    pub spacelike: bool,
    pub lagrangian: bool,
    pub slag: bool,
    /// Smallest eigenvalue of `I − AᵗA` (x) or of `A + Aᵗ` (null).
    pub spacelike_witness: f64,
    pub symmetry_residual: f64,
    /// `Im det_D(I + τA)` (x) or `det A − 1` (null).
    pub slag_witness: f64,
    /// Spectrum of the symmetric part.
    pub spectrum: Vec<f64>,
}

/// `Im det_D(I + τA) = ½[det(I + A) − det(I − A)]`.
pub fn im_det_i_tau(a: &RMat) -> f64 {
    let i = RMat::identity(a.nrows(), a.ncols());
    0.5 * (lin::det(&(&i + a)) - lin::det(&(&i - a)))
}

/// Sum of the odd elementary symmetric functions of the eigenvalues of a symmetric matrix.
pub fn sigma_odd(a: &RMat) -> f64 {
    let s = lin::elementary_symmetric(&lin::sym_eigenvalues(a));
    s.iter().skip(1).step_by(2).sum()
}

pub fn graph_tests(picture: Picture, a: &RMat, tol: f64) -> GraphReport {
    let n = a.nrows();
    let i = RMat::identity(n, n);
    let scale = lin::max_abs(a).max(1.0);
    let sym_res = lin::asym_residual(a);
    let lagrangian = sym_res <= tol * scale;
    let spectrum = lin::sym_eigenvalues(a);
    match picture {
        Picture::X => {
            let w = lin::min_sym_eigenvalue(&(&i - a.transpose() * a));
            let im = im_det_i_tau(a);
            let inside = spectrum.iter().all(|l| l.abs() < 1.0);
            GraphReport {
                picture,
                spacelike: w > tol,
                lagrangian,
                slag: lagrangian && inside && w > tol && im.abs() <= tol,
                spacelike_witness: w,
                symmetry_residual: sym_res,
                slag_witness: im,
                spectrum,
            }
        }
        Picture::Null => {
            let w = lin::min_sym_eigenvalue(&(a + a.transpose()));
            let d = lin::det(a) - 1.0;
            GraphReport {
                picture,
                spacelike: w > tol,
                lagrangian,
                slag: lagrangian && w > tol && d.abs() <= tol,
                spacelike_witness: w,
                symmetry_residual: sym_res,
                slag_witness: d,
                spectrum,
            }
        }
    }
}

/// `B = (I + A)(I − A)⁻¹`: the x-picture graph `y = Ax` as a null graph `v = Bu`.
pub fn cayley_graph(a: &RMat) -> Result<RMat> {
    let n = a.nrows();
    let i = RMat::identity(n, n);
    let inv = lin::inverse(&(&i - a)).ok_or(SlagError::NotOverNullPlane)?;
    Ok((&i + a) * inv)
}

/// `A = (B − I)(B + I)⁻¹`.
pub fn cayley_inverse(b: &RMat) -> Result<RMat> {
    let n = b.nrows();
    let i = RMat::identity(n, n);
    let inv = lin::inverse(&(b + &i)).ok_or(SlagError::NotInvertible)?;
    Ok((b - &i) * inv)
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseReport {
    pub signature: (usize, usize),
    pub theta: f64,
    pub sign: i8,
    /// `dz` on the oriented pseudo-orthonormal basis.
    pub dz: DNumber,
}

/// Phase of a Lagrangian plane of signature `(p, q)`: `±τ^q dz = e^{τθ}` on
/// an oriented pseudo-orthonormal basis.
pub fn phase_pq(p: &PlaneBasis, tol: f64) -> Result<PhaseReport> {
    let g = p.gram();
    let scale = lin::max_abs(&g).max(f64::MIN_POSITIVE);
    let eig = lin::sym(&g).symmetric_eigen();
    if eig.eigenvalues.iter().any(|l| l.abs() <= tol * scale) {
        return Err(SlagError::NullDirections);
    }
    let k = p.n();
    let mut m = RMat::zeros(k, k);
    for j in 0..k {
        let s = eig.eigenvalues[j].abs().sqrt();
        m.set_column(j, &(eig.eigenvectors.column(j) / s));
    }
    if lin::det(&m) < 0.0 {
        m.column_mut(0).neg_mut();
    }
    let e = p.columns() * m;
    let q = eig.eigenvalues.iter().filter(|l| **l < 0.0).count();
    let dz = dz_of(&e);
    let w = DNumber::TAU.powi(q as u32) * dz;
    let (sign, w) = match w.component() {
        Component::Positive => (1i8, w),
        Component::Negative => (-1i8, -w),
        c => {
            return Err(SlagError::Invalid(format!(
                "τ^q dz lies in the {c:?} component; plane is not Lagrangian"
            )))
        }
    };
    let (_, theta) = w.polar().expect("positive component");
    Ok(PhaseReport {
        signature: (k - q, q),
        theta,
        sign,
        dz,
    })
}

/// `⟨ξ, η⟩` on `Λ^n` induced by the signature-`(n, n)` product.
pub fn pairing_calibration(xi: &PlaneBasis, eta: &PlaneBasis) -> Result<f64> {
    let a = xi.orthonormalize()?;
    let b = eta.orthonormalize()?;
    for p in [xi, eta] {
        if lin::det(&p.x_projection()) <= 0.0 {
            return Err(SlagError::Invalid(
                "plane is not in the positive component".into(),
            ));
        }
    }
    let k = a.n();
    let m = RMat::from_fn(k, k, |i, j| inner(&a.column(i), &b.column(j)));
    Ok(lin::det(&m))
}

#[derive(Clone, Debug, Serialize)]
pub struct NullTerm {
    pub signs: Vec<i8>,
    pub term: MultiVector,
    /// Largest `|⟨a_i, a_j⟩|` among the factors `ε_j ± Tε_j`.
    pub null_residual: f64,
}

/// `ξ = Σ n₁^± ∧ ⋯ ∧ n_n^±` with `n_j^± = ½(ε_j ± Tε_j)`.
pub fn null_decomposition(xi: &PlaneBasis) -> Result<Vec<NullTerm>> {
    let n = xi.n();
    if n > 4 {
        return Err(SlagError::ExpansionTooLarge(n));
    }
    let e = xi.orthonormalize()?;
    let mut out = Vec::with_capacity(1 << n);
    for s in 0u32..(1 << n) {
        let signs: Vec<i8> = (0..n)
            .map(|j| if s & (1 << j) != 0 { -1 } else { 1 })
            .collect();
        let factors: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let c = e.column(j);
                let t = t_map(&c);
                c.iter()
                    .zip(&t)
                    .map(|(a, b)| a + signs[j] as f64 * b)
                    .collect()
            })
            .collect();
        let mut null_residual = 0.0f64;
        for a in &factors {
            for b in &factors {
                null_residual = null_residual.max(inner(a, b).abs());
            }
        }
        let cols = RMat::from_fn(2 * n, n, |i, j| 0.5 * factors[j][i]);
        out.push(NullTerm {
            signs,
            term: MultiVector::from_columns(&cols),
            null_residual,
        });
    }
    Ok(out)
}

/// Sampling of space-like positive planes for the Mealy experiment.
#[derive(Clone, Debug, Serialize)]
pub struct PlaneSample {
    pub plane: PlaneBasis,
    pub angles: Vec<f64>,
    pub exact_slag: bool,
}

pub(crate) fn random_gl_plus(rng: &mut ChaCha8Rng, n: usize) -> RMat {
    loop {
        let g = RMat::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = RMat::identity(n, n) + g * (0.7 / (n as f64).sqrt());
        let d = lin::det(&b);
        if d.abs() > 0.05 {
            if d < 0.0 {
                let mut b = b;
                b.row_mut(0).neg_mut();
                return b;
            }
            return b;
        }
    }
}

/// One seeded sample: canonical angles uniform in `[0, 2]` moved by a random
/// `GL⁺` unitary, or (with probability ¼) the standard plane moved by an `SL` unitary.
pub fn sample_plane(rng: &mut ChaCha8Rng, n: usize) -> PlaneSample {
    let b = random_gl_plus(rng, n);
    if rng.random::<f64>() < 0.25 {
        let b = &b / lin::det(&b).powf(1.0 / n as f64);
        let u = DMatrix::from_gl(&b).expect("invertible");
        PlaneSample {
            plane: PlaneBasis::standard(n).apply(&u),
            angles: vec![0.0; n / 2],
            exact_slag: true,
        }
    } else {
        let angles: Vec<f64> = (0..n / 2).map(|_| 2.0 * rng.random::<f64>()).collect();
        let u = DMatrix::from_gl(&b).expect("invertible");
        PlaneSample {
            plane: PlaneBasis::canonical(n, &angles).apply(&u),
            angles,
            exact_slag: false,
        }
    }
}

pub fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, Serialize)]
pub struct MealyReport {
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    pub min_re_dz: f64,
    pub equality_count: usize,
    pub slag_count: usize,
    /// Samples where `Re dz ≤ 1 + eps` and the slag predicate disagree.
    pub mismatches: usize,
    pub outside_positive_component: usize,
    pub inequality_holds: bool,
}

/// Tolerance for the slag predicate matched to `Re dz ≤ 1 + eps`.
pub fn mealy_coupled_tol(eps: f64) -> f64 {
    (2.0 * eps).sqrt()
}

pub fn sample_mealy(n: usize, count: usize, seed: u64, eps: f64) -> MealyReport {
    let tol = mealy_coupled_tol(eps);
    let rows: Vec<(f64, bool, bool, bool)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed ^ ((n as u64) << 48), i as u64);
            let s = sample_plane(&mut rng, n);
            let rep = analyze_plane(&s.plane, tol);
            let dz = rep.dz.unwrap_or(DNumber::new(f64::NAN, f64::NAN));
            let in_plus = dz.component() == Component::Positive;
            (dz.re, dz.re <= 1.0 + eps, rep.slag, in_plus)
        })
        .collect();
    let min_re_dz = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    MealyReport {
        n,
        count,
        seed,
        min_re_dz,
        equality_count: rows.iter().filter(|r| r.1).count(),
        slag_count: rows.iter().filter(|r| r.2).count(),
        mismatches: rows.iter().filter(|r| r.1 != r.2).count(),
        outside_positive_component: rows.iter().filter(|r| !r.3).count(),
        inequality_holds: min_re_dz >= 1.0 - eps,
    }
}
