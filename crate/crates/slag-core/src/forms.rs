//! Dense exterior algebra on `R^{2n}` for small `n`.
//!
//! Coefficients are stored per subset of basis indices, addressed by bitmask.
//! Coordinates on `D^n ≅ R^{2n}` are ordered `x_1..x_n, y_1..y_n`.

use serde::{Deserialize, Serialize};

use crate::dnum::DNumber;
use crate::error::{Result, SlagError};
use crate::lin::{self, RMat};

pub const MAX_DIM: usize = 12;

/// Sign of merging the sorted index sets `a` and `b` into sorted order.
fn merge_sign(a: u32, b: u32) -> f64 {
    let mut swaps = 0u32;
    let mut bits = b;
    while bits != 0 {
        let j = bits.trailing_zeros();
        swaps += (a >> (j + 1)).count_ones();
        bits &= bits - 1;
    }
    if swaps.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn indices(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask & (1 << i) != 0).collect()
}

fn mask_of(idx: &[usize]) -> u32 {
    idx.iter().fold(0, |m, &i| m | (1 << i))
}

/// Sign of the permutation that sorts `idx` (0 when an index repeats).
fn sort_sign(idx: &[usize]) -> f64 {
    let mut s = 1.0;
    for i in 0..idx.len() {
        for j in i + 1..idx.len() {
            if idx[i] == idx[j] {
                return 0.0;
            }
            if idx[i] > idx[j] {
                s = -s;
            }
        }
    }
    s
}

macro_rules! graded_common {
    ($t:ident) => {
        impl $t {
            pub fn zero(dim: usize, degree: usize) -> Self {
                assert!(dim <= MAX_DIM, "dimension {dim} too large");
                assert!(degree <= dim);
                $t {
                    dim,
                    degree,
                    coeffs: vec![0.0; 1 << dim],
                }
            }

            /// The basis element on the (not necessarily sorted) index list.
            pub fn basis(dim: usize, idx: &[usize]) -> Self {
                let mut f = Self::zero(dim, idx.len());
                f.coeffs[mask_of(idx) as usize] = sort_sign(idx);
                f
            }

            pub fn dim(&self) -> usize {
                self.dim
            }

            pub fn degree(&self) -> usize {
                self.degree
            }

            /// Coefficient on the sorted index set `idx`.
            pub fn coeff(&self, idx: &[usize]) -> f64 {
                sort_sign(idx) * self.coeffs[mask_of(idx) as usize]
            }

            pub fn set_coeff(&mut self, idx: &[usize], c: f64) {
                let s = sort_sign(idx);
                assert!(s != 0.0, "repeated index");
                self.coeffs[mask_of(idx) as usize] = s * c;
            }

            /// Nonzero entries as `(sorted indices, coefficient)`.
            pub fn entries(&self) -> Vec<(Vec<usize>, f64)> {
                self.coeffs
                    .iter()
                    .enumerate()
                    .filter(|(m, c)| **c != 0.0 && (*m as u32).count_ones() as usize == self.degree)
                    .map(|(m, c)| (indices(m as u32), *c))
                    .collect()
            }

            pub fn max_abs(&self) -> f64 {
                self.coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()))
            }

            pub fn add(&self, o: &Self) -> Self {
                assert_eq!((self.dim, self.degree), (o.dim, o.degree));
                let mut r = self.clone();
                r.coeffs
                    .iter_mut()
                    .zip(&o.coeffs)
                    .for_each(|(a, b)| *a += b);
                r
            }

            pub fn sub(&self, o: &Self) -> Self {
                self.add(&o.scale(-1.0))
            }

            pub fn scale(&self, s: f64) -> Self {
                let mut r = self.clone();
                r.coeffs.iter_mut().for_each(|a| *a *= s);
                r
            }

            pub fn wedge(&self, o: &Self) -> Self {
                assert_eq!(self.dim, o.dim);
                let mut r = Self::zero(self.dim, self.degree + o.degree);
                for (ma, &ca) in self.coeffs.iter().enumerate() {
                    if ca == 0.0 {
                        continue;
                    }
                    for (mb, &cb) in o.coeffs.iter().enumerate() {
                        if cb == 0.0 || ma & mb != 0 {
                            continue;
                        }
                        r.coeffs[ma | mb] += merge_sign(ma as u32, mb as u32) * ca * cb;
                    }
                }
                r
            }

            /// Contraction with a vector (for forms) or covector (for multivectors).
            pub fn contract(&self, v: &[f64]) -> Self {
                assert_eq!(v.len(), self.dim);
                assert!(self.degree > 0);
                let mut r = Self::zero(self.dim, self.degree - 1);
                for (m, &c) in self.coeffs.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    for (p, i) in indices(m as u32).into_iter().enumerate() {
                        let s = if p % 2 == 0 { 1.0 } else { -1.0 };
                        r.coeffs[m & !(1 << i)] += s * v[i] * c;
                    }
                }
                r
            }

            /// Plücker test: simple iff `(X ⌟ a) ∧ a = 0` for every basis `(k−1)`-element `X`.
            pub fn simplicity_residual(&self) -> f64 {
                if self.degree <= 1 || self.degree + 1 >= self.dim {
                    return 0.0;
                }
                let mut worst = 0.0f64;
                for m in 0u32..(1 << self.dim) {
                    if m.count_ones() as usize != self.degree - 1 {
                        continue;
                    }
                    let mut c = self.clone();
                    for i in indices(m) {
                        let mut e = vec![0.0; self.dim];
                        e[i] = 1.0;
                        c = c.contract(&e);
                    }
                    worst = worst.max(c.wedge(self).max_abs());
                }
                worst
            }

            pub fn is_simple(&self, tol: f64) -> bool {
                let scale = self.max_abs().max(f64::MIN_POSITIVE);
                self.simplicity_residual() <= tol * scale * scale
            }
        }
    };
}

/// Real alternating `k`-form on `R^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct AltForm {
    dim: usize,
    degree: usize,
    coeffs: Vec<f64>,
}

/// Element of `Λ^k R^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiVector {
    dim: usize,
    degree: usize,
    coeffs: Vec<f64>,
}

graded_common!(AltForm);
graded_common!(MultiVector);

#[derive(Serialize, Deserialize)]
struct GradedJson {
    degree: usize,
    dim: usize,
    entries: Vec<(Vec<usize>, f64)>,
}

macro_rules! graded_serde {
    ($t:ident) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(
                &self,
                s: S,
            ) -> std::result::Result<S::Ok, S::Error> {
                GradedJson {
                    degree: self.degree,
                    dim: self.dim,
                    entries: self.entries(),
                }
                .serialize(s)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(
                d: D,
            ) -> std::result::Result<Self, D::Error> {
                use serde::de::Error;
                let j = GradedJson::deserialize(d)?;
                if j.dim > MAX_DIM || j.degree > j.dim {
                    return Err(D::Error::custom("dim or degree out of range"));
                }
                let mut f = $t::zero(j.dim, j.degree);
                for (idx, c) in j.entries {
                    if idx.len() != j.degree
                        || idx.iter().any(|&i| i >= j.dim)
                        || sort_sign(&idx) == 0.0
                    {
                        return Err(D::Error::custom(format!("bad multi-index {idx:?}")));
                    }
                    let m = mask_of(&idx) as usize;
                    f.coeffs[m] += sort_sign(&idx) * c;
                }
                Ok(f)
            }
        }
    };
}

graded_serde!(AltForm);
graded_serde!(MultiVector);

impl AltForm {
    /// The coordinate 1-form `dx^i`.
    pub fn coord(dim: usize, i: usize) -> Self {
        AltForm::basis(dim, &[i])
    }

    pub fn from_covector(c: &[f64]) -> Self {
        let mut f = AltForm::zero(c.len(), 1);
        for (i, &a) in c.iter().enumerate() {
            f.coeffs[1 << i] = a;
        }
        f
    }

    pub fn one(dim: usize) -> Self {
        let mut f = AltForm::zero(dim, 0);
        f.coeffs[0] = 1.0;
        f
    }

    /// `k`-fold wedge power.
    pub fn power(&self, k: usize) -> Self {
        (0..k).fold(AltForm::one(self.dim), |acc, _| acc.wedge(self))
    }

    /// Value on the columns of `cols` (`dim × k`).
    pub fn eval(&self, cols: &RMat) -> f64 {
        assert_eq!(cols.nrows(), self.dim);
        assert_eq!(cols.ncols(), self.degree);
        let mut total = 0.0;
        for (m, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 || (m as u32).count_ones() as usize != self.degree {
                continue;
            }
            let rows = indices(m as u32);
            let sub = RMat::from_fn(self.degree, self.degree, |i, j| cols[(rows[i], j)]);
            total += c * lin::det(&sub);
        }
        total
    }

    /// Pairing with a multivector of the same degree.
    pub fn pair(&self, xi: &MultiVector) -> f64 {
        assert_eq!((self.dim, self.degree), (xi.dim, xi.degree));
        self.coeffs.iter().zip(&xi.coeffs).map(|(a, b)| a * b).sum()
    }

    /// Pullback along the linear map with matrix `l` (`dim × m`).
    pub fn pullback(&self, l: &RMat) -> AltForm {
        assert_eq!(l.nrows(), self.dim);
        let m = l.ncols();
        let mut r = AltForm::zero(m, self.degree);
        for mj in 0u32..(1 << m) {
            if mj.count_ones() as usize != self.degree {
                continue;
            }
            let cols = indices(mj);
            let sub = RMat::from_fn(self.dim, self.degree, |i, j| l[(i, cols[j])]);
            r.coeffs[mj as usize] = self.eval(&sub);
        }
        r
    }
}

impl MultiVector {
    pub fn from_vector(v: &[f64]) -> Self {
        let mut f = MultiVector::zero(v.len(), 1);
        for (i, &a) in v.iter().enumerate() {
            f.coeffs[1 << i] = a;
        }
        f
    }

    /// `v_1 ∧ ⋯ ∧ v_k` for the columns of `cols`.
    pub fn from_columns(cols: &RMat) -> Self {
        let dim = cols.nrows();
        let mut r = MultiVector::zero(dim, 0);
        r.coeffs[0] = 1.0;
        for j in 0..cols.ncols() {
            let v: Vec<f64> = cols.column(j).iter().copied().collect();
            r = r.wedge(&MultiVector::from_vector(&v));
        }
        r
    }
}

/// Constant-coefficient forms of `D^n`.
#[derive(Clone, Debug, Serialize)]
pub struct StdForms {
    pub n: usize,
    pub omega: AltForm,
    pub re_dz: AltForm,
    pub im_dz: AltForm,
    pub du: AltForm,
    pub dv: AltForm,
}

pub fn dx(n: usize, i: usize) -> AltForm {
    AltForm::coord(2 * n, i)
}

pub fn dy(n: usize, i: usize) -> AltForm {
    AltForm::coord(2 * n, n + i)
}

/// `du_i = dx_i − dy_i`.
pub fn du_i(n: usize, i: usize) -> AltForm {
    dx(n, i).sub(&dy(n, i))
}

/// `dv_i = dx_i + dy_i`.
pub fn dv_i(n: usize, i: usize) -> AltForm {
    dx(n, i).add(&dy(n, i))
}

/// `ω = Σ dx_i ∧ dy_i`.
pub fn omega(n: usize) -> AltForm {
    (0..n).fold(AltForm::zero(2 * n, 2), |acc, i| {
        acc.add(&dx(n, i).wedge(&dy(n, i)))
    })
}

pub fn std_forms(n: usize) -> StdForms {
    let du = (0..n).fold(AltForm::one(2 * n), |acc, i| acc.wedge(&du_i(n, i)));
    let dv = (0..n).fold(AltForm::one(2 * n), |acc, i| acc.wedge(&dv_i(n, i)));
    StdForms {
        n,
        omega: omega(n),
        re_dz: du.add(&dv).scale(0.5),
        im_dz: dv.sub(&du).scale(0.5),
        du,
        dv,
    }
}

/// `dz = Π (dx_i + τ dy_i)` expanded over the `2^n` choices of factor, each
/// term a real wedge of coordinate forms carrying `τ^{#dy}`.
pub fn dz_expansion(n: usize) -> Result<(AltForm, AltForm)> {
    if n > 3 {
        return Err(SlagError::OracleLimit(3));
    }
    let dim = 2 * n;
    let mut re = AltForm::zero(dim, n);
    let mut im = AltForm::zero(dim, n);
    for s in 0u32..(1 << n) {
        let term = (0..n).fold(AltForm::one(dim), |acc, i| {
            let f = if s & (1 << i) != 0 {
                dy(n, i)
            } else {
                dx(n, i)
            };
            acc.wedge(&f)
        });
        if s.count_ones() % 2 == 0 {
            re = re.add(&term);
        } else {
            im = im.add(&term);
        }
    }
    Ok((re, im))
}

/// Value of `dz` on the given `2n × n` columns through the expansion oracle.
pub fn eval_dz_oracle(cols: &RMat) -> Result<DNumber> {
    let n = cols.ncols();
    if cols.nrows() != 2 * n {
        return Err(SlagError::Dimension(format!(
            "expected 2n x n columns, got {} x {}",
            cols.nrows(),
            n
        )));
    }
    let (re, im) = dz_expansion(n)?;
    Ok(DNumber::new(re.eval(cols), im.eval(cols)))
}

/// `(Re Φ, Im Φ)` for `Φ = ρ·du·e + ρ̃·dv·ē` at a point.
pub fn phi_parts(n: usize, rho: f64, rho_tilde: f64) -> (AltForm, AltForm) {
    let f = std_forms(n);
    let re = f.du.scale(0.5 * rho).add(&f.dv.scale(0.5 * rho_tilde));
    let im = f.dv.scale(0.5 * rho_tilde).sub(&f.du.scale(0.5 * rho));
    (re, im)
}

#[derive(Clone, Debug, Serialize)]
pub struct RicciFlatReport {
    pub alpha_simple: bool,
    pub beta_simple: bool,
    pub simple_ok: bool,
    pub alpha_omega_residual: f64,
    pub beta_omega_residual: f64,
    pub wedge_omega_ok: bool,
    /// `c` with `α∧β = c·ω^n`.
    pub proportionality: Option<f64>,
    pub strict_ok: Option<bool>,
}

/// The constant `c` in `α∧β = c·ω^n` for the product-of-curves model at `n = 2`.
pub const RICCI_CONVENTION_N2: f64 = -0.5;

/// Checks simplicity of `α, β`, `α∧ω = β∧ω = 0` and `α∧β ∝ ω^n`.
///
/// `strict` compares `c` against the given convention constant.
pub fn ricci_flat_check(
    alpha: &AltForm,
    beta: &AltForm,
    omega: &AltForm,
    strict: Option<f64>,
    tol: f64,
) -> Result<RicciFlatReport> {
    let dim = omega.dim();
    if !dim.is_multiple_of(2) || omega.degree() != 2 {
        return Err(SlagError::Dimension(
            "omega must be a 2-form on an even-dimensional space".into(),
        ));
    }
    let n = dim / 2;
    if alpha.degree() != n || beta.degree() != n || alpha.dim() != dim || beta.dim() != dim {
        return Err(SlagError::Dimension(
            "alpha and beta must be n-forms".into(),
        ));
    }
    let top = omega.power(n);
    let top_c = top.coeffs[(1usize << dim) - 1];
    if top_c.abs() <= tol {
        return Err(SlagError::DegenerateOmega);
    }
    let alpha_simple = alpha.is_simple(tol);
    let beta_simple = beta.is_simple(tol);
    let ra = alpha.wedge(omega).max_abs();
    let rb = beta.wedge(omega).max_abs();
    let ab = alpha.wedge(beta).coeffs[(1usize << dim) - 1];
    let c = ab / top_c;
    let proportionality = (c.abs() > tol).then_some(c);
    Ok(RicciFlatReport {
        alpha_simple,
        beta_simple,
        simple_ok: alpha_simple && beta_simple,
        alpha_omega_residual: ra,
        beta_omega_residual: rb,
        wedge_omega_ok: ra <= tol && rb <= tol,
        proportionality,
        strict_ok: strict.map(|k| proportionality.is_some_and(|c| (c - k).abs() <= tol)),
    })
}

/// The `(φ, ψ)` variant, with `α = φ − ψ`, `β = φ + ψ`.
pub fn ricci_flat_check_phi_psi(
    phi: &AltForm,
    psi: &AltForm,
    omega: &AltForm,
    strict: Option<f64>,
    tol: f64,
) -> Result<RicciFlatReport> {
    ricci_flat_check(&phi.sub(psi), &phi.add(psi), omega, strict, tol)
}

/// Pointwise data of the product of two curves: `a, a′, b, b′` on `R⁴`.
///
/// Returns `(ω, α, β)` with `ω = a∧a′ + b∧b′`, `α = a∧b`, `β = a′∧b′`.
pub fn product_of_curves_data() -> (AltForm, AltForm, AltForm) {
    let (a, b, ap, bp) = (
        AltForm::coord(4, 0),
        AltForm::coord(4, 1),
        AltForm::coord(4, 2),
        AltForm::coord(4, 3),
    );
    let omega = a.wedge(&ap).add(&b.wedge(&bp));
    (omega, a.wedge(&b), ap.wedge(&bp))
}
