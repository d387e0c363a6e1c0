//! Square matrices over the double numbers.
//!
//! A matrix `A = P + τQ` is stored as its real and imaginary parts. Its null
//! decomposition is `A = e·B + ē·C` with `B = P − Q` and `C = P + Q`; the map
//! `A ↦ (B, C)` is a ring isomorphism onto pairs of real matrices.

use serde::{Deserialize, Serialize};

use crate::dnum::DNumber;
use crate::error::{Result, SlagError};
use crate::lin::{self, RMat};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DMatrixJson", into = "DMatrixJson")]
pub struct DMatrix {
    pub re: RMat,
    pub im: RMat,
}

#[derive(Serialize, Deserialize)]
struct DMatrixJson {
    n: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl TryFrom<DMatrixJson> for DMatrix {
    type Error = String;
    fn try_from(j: DMatrixJson) -> std::result::Result<Self, String> {
        let nn = j.n * j.n;
        if j.re.len() != nn || j.im.len() != nn {
            return Err(format!(
                "expected {} row-major entries in re and im, got {} and {}",
                nn,
                j.re.len(),
                j.im.len()
            ));
        }
        Ok(DMatrix {
            re: RMat::from_row_slice(j.n, j.n, &j.re),
            im: RMat::from_row_slice(j.n, j.n, &j.im),
        })
    }
}

impl From<DMatrix> for DMatrixJson {
    fn from(a: DMatrix) -> Self {
        let n = a.n();
        let rows = |m: &RMat| {
            (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| m[(i, j)])
                .collect()
        };
        DMatrixJson {
            n,
            re: rows(&a.re),
            im: rows(&a.im),
        }
    }
}

/// Result bundle of [`DMatrix::unitary_ops`].
#[derive(Clone, Debug)]
pub struct UnitaryReport {
    pub is_unitary: bool,
    pub is_special_unitary: bool,
    pub unitary_residual: f64,
}

impl DMatrix {
    pub fn new(re: RMat, im: RMat) -> Self {
        assert_eq!(re.shape(), im.shape());
        assert_eq!(re.nrows(), re.ncols(), "DMatrix must be square");
        DMatrix { re, im }
    }

    pub fn n(&self) -> usize {
        self.re.nrows()
    }

    pub fn zeros(n: usize) -> Self {
        DMatrix::new(RMat::zeros(n, n), RMat::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        DMatrix::new(RMat::identity(n, n), RMat::zeros(n, n))
    }

    pub fn real(re: RMat) -> Self {
        let n = re.nrows();
        DMatrix::new(re, RMat::zeros(n, n))
    }

    /// `e·B + ē·C`.
    pub fn from_null(b: &RMat, c: &RMat) -> Self {
        DMatrix::new((b + c) * 0.5, (c - b) * 0.5)
    }

    /// `(B, C)` with `A = e·B + ē·C`.
    pub fn null_parts(&self) -> (RMat, RMat) {
        (&self.re - &self.im, &self.re + &self.im)
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> DNumber) -> Self {
        let mut a = DMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                a.set(i, j, f(i, j));
            }
        }
        a
    }

    pub fn get(&self, i: usize, j: usize) -> DNumber {
        DNumber::new(self.re[(i, j)], self.im[(i, j)])
    }

    pub fn set(&mut self, i: usize, j: usize, z: DNumber) {
        self.re[(i, j)] = z.re;
        self.im[(i, j)] = z.im;
    }

    pub fn scale(&self, z: DNumber) -> Self {
        DMatrix::new(
            &self.re * z.re + &self.im * z.im,
            &self.im * z.re + &self.re * z.im,
        )
    }

    pub fn mul(&self, o: &DMatrix) -> DMatrix {
        DMatrix::new(
            &self.re * &o.re + &self.im * &o.im,
            &self.re * &o.im + &self.im * &o.re,
        )
    }

    pub fn add(&self, o: &DMatrix) -> DMatrix {
        DMatrix::new(&self.re + &o.re, &self.im + &o.im)
    }

    pub fn sub(&self, o: &DMatrix) -> DMatrix {
        DMatrix::new(&self.re - &o.re, &self.im - &o.im)
    }

    pub fn transpose(&self) -> DMatrix {
        DMatrix::new(self.re.transpose(), self.im.transpose())
    }

    pub fn conj(&self) -> DMatrix {
        DMatrix::new(self.re.clone(), -&self.im)
    }

    /// Conjugate transpose `A*`.
    pub fn adjoint(&self) -> DMatrix {
        DMatrix::new(self.re.transpose(), -self.im.transpose())
    }

    /// The real `2n × 2n` matrix of `A` acting on `(x, y)` with `z = x + τy`.
    pub fn realify(&self) -> RMat {
        let n = self.n();
        let mut m = RMat::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.re);
        m.view_mut((0, n), (n, n)).copy_from(&self.im);
        m.view_mut((n, 0), (n, n)).copy_from(&self.im);
        m.view_mut((n, n), (n, n)).copy_from(&self.re);
        m
    }

    /// `det_D(A) = e·det B + ē·det C`, via two real LU factorizations.
    pub fn det_d(&self) -> DNumber {
        let (b, c) = self.null_parts();
        DNumber::from_null(lin::det(&b), lin::det(&c))
    }

    /// Cofactor matrix `Ã`, so that `A·Ãᵗ = det_D(A)·I`.
    pub fn adjugate(&self) -> DMatrix {
        let (b, c) = self.null_parts();
        DMatrix::from_null(&lin::cofactor(&b), &lin::cofactor(&c))
    }

    pub fn inverse(&self) -> Result<DMatrix> {
        let (b, c) = self.null_parts();
        match (lin::inverse(&b), lin::inverse(&c)) {
            (Some(bi), Some(ci)) => Ok(DMatrix::from_null(&bi, &ci)),
            _ => Err(SlagError::DetNull),
        }
    }

    /// `e·B + ē·(Bᵗ)⁻¹`, the unitary matrix attached to a real `B ∈ GL_n`.
    pub fn from_gl(b: &RMat) -> Result<DMatrix> {
        let c = lin::inverse(&b.transpose()).ok_or(SlagError::NotInvertible)?;
        Ok(DMatrix::from_null(b, &c))
    }

    pub fn frobenius_distance(&self, o: &DMatrix) -> f64 {
        ((&self.re - &o.re).norm_squared() + (&self.im - &o.im).norm_squared()).sqrt()
    }

    /// `‖A·A* − I‖_F`.
    pub fn unitary_residual(&self) -> f64 {
        self.mul(&self.adjoint())
            .frobenius_distance(&DMatrix::identity(self.n()))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitary_residual() <= tol * self.n() as f64
    }

    pub fn is_special_unitary(&self, tol: f64) -> bool {
        self.is_unitary(tol) && self.det_d().approx_eq(DNumber::ONE, tol * self.n() as f64)
    }

    pub fn unitary_ops(&self, tol: f64) -> UnitaryReport {
        UnitaryReport {
            is_unitary: self.is_unitary(tol),
            is_special_unitary: self.is_special_unitary(tol),
            unitary_residual: self.unitary_residual(),
        }
    }

    /// Apply to a D-vector given as real blocks `(x, y)`.
    pub fn apply_real(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let xv = lin::RVec::from_column_slice(x);
        let yv = lin::RVec::from_column_slice(y);
        let nx = &self.re * &xv + &self.im * &yv;
        let ny = &self.im * &xv + &self.re * &yv;
        (nx.iter().copied().collect(), ny.iter().copied().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lin::from_rows;
    use proptest::prelude::*;

    /// Leibniz expansion over permutations, straight from the definition.
    fn det_by_permutations(a: &DMatrix) -> DNumber {
        let n = a.n();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut total = DNumber::ZERO;
        permute(&mut perm, 0, &mut |p| {
            let mut inversions = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if p[i] > p[j] {
                        inversions += 1;
                    }
                }
            }
            let term: DNumber = (0..n).map(|i| a.get(i, p[i])).product();
            total += if inversions % 2 == 0 { term } else { -term };
        });
        total
    }

    fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == p.len() {
            f(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, f);
            p.swap(k, i);
        }
    }

    fn example() -> DMatrix {
        let b = from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let c = from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        DMatrix::from_null(&b, &c)
    }

    #[test]
    fn det_example() {
        let a = example();
        let d = a.det_d();
        assert!(d.approx_eq(DNumber::new(-0.5, 1.5), 1e-14));
        assert!(d.approx_eq(det_by_permutations(&a), 1e-14));
        assert!((d.quad() + 2.0).abs() < 1e-13);
        assert!((lin::det(&a.realify()) + 2.0).abs() < 1e-12);
        assert_eq!(DMatrix::identity(3).det_d(), DNumber::ONE);
    }

    #[test]
    fn from_gl_diag() {
        let b = from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]);
        let a = DMatrix::from_gl(&b).unwrap();
        assert!(a.unitary_residual() < 1e-12);
        assert!(a.det_d().approx_eq(DNumber::new(1.25, -0.75), 1e-14));
        assert!((a.det_d().quad() - 1.0).abs() < 1e-14);
        assert!(a.is_unitary(1e-10));
        assert!(!a.is_special_unitary(1e-10));
    }

    #[test]
    fn from_gl_singular() {
        let b = from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert_eq!(DMatrix::from_gl(&b), Err(SlagError::NotInvertible));
    }

    #[test]
    fn unitary_trivia() {
        assert!(DMatrix::identity(3).is_special_unitary(1e-12));
        // τ·τ̄ = −1, so τ·I is not even unitary; det_D = τ ≠ 1 either way.
        let t = DMatrix::identity(1).scale(DNumber::TAU);
        assert!(!t.is_special_unitary(1e-12));
        assert!(!t.is_unitary(1e-12));
        assert_eq!(t.det_d(), DNumber::TAU);
    }

    #[test]
    fn adjugate_and_inverse() {
        let i = DMatrix::identity(3);
        assert_eq!(i.adjugate(), i);
        assert_eq!(i.inverse().unwrap(), i);

        let a = example();
        let prod = a.mul(&a.adjugate().transpose());
        let want = DMatrix::identity(2).scale(a.det_d());
        assert!(prod.frobenius_distance(&want) < 1e-13);
        let inv = a.inverse().unwrap();
        assert!(a.mul(&inv).frobenius_distance(&DMatrix::identity(2)) < 1e-12);

        let b = from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let singular = DMatrix::from_null(&b, &RMat::zeros(2, 2));
        assert_eq!(singular.inverse(), Err(SlagError::DetNull));
    }

    #[test]
    fn json_round_trip() {
        let a = example();
        let s = serde_json::to_string(&a).unwrap();
        let back: DMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(a, back);
        assert!(s.starts_with("{\"n\":2"));
        assert!(serde_json::from_str::<DMatrix>("{\"n\":2,\"re\":[1],\"im\":[0]}").is_err());
    }

    fn dmatrix(n: usize) -> impl Strategy<Value = DMatrix> {
        proptest::collection::vec(-2.0..2.0f64, 2 * n * n).prop_map(move |v| {
            DMatrix::new(
                RMat::from_row_slice(n, n, &v[..n * n]),
                RMat::from_row_slice(n, n, &v[n * n..]),
            )
        })
    }

    fn rel_close(a: DNumber, b: DNumber, rel: f64) -> bool {
        a.abs_diff(b) <= rel * (1.0 + a.re.abs().max(a.im.abs()))
    }

    proptest! {
        #[test]
        fn det_matches_leibniz((a, _) in (1usize..=4).prop_flat_map(|n| (dmatrix(n), Just(n)))) {
            prop_assert!(rel_close(a.det_d(), det_by_permutations(&a), 1e-10));
        }

        #[test]
        fn det_is_multiplicative((a, b) in (1usize..=6).prop_flat_map(|n| (dmatrix(n), dmatrix(n)))) {
            prop_assert!(rel_close(a.mul(&b).det_d(), a.det_d() * b.det_d(), 1e-10));
            prop_assert!(rel_close(a.transpose().det_d(), a.det_d(), 1e-10));
        }

        #[test]
        fn quad_of_det_is_real_det(a in (1usize..=4).prop_flat_map(dmatrix)) {
            let q = a.det_d().quad();
            let r = lin::det(&a.realify());
            prop_assert!((q - r).abs() <= 1e-9 * (1.0 + r.abs()));
        }

        #[test]
        fn null_parts_multiply_componentwise((a, b) in (1usize..=5).prop_flat_map(|n| (dmatrix(n), dmatrix(n)))) {
            let (ba, ca) = a.null_parts();
            let (bb, cb) = b.null_parts();
            let (bp, cp) = a.mul(&b).null_parts();
            prop_assert!((bp - ba * bb).amax() < 1e-12);
            prop_assert!((cp - ca * cb).amax() < 1e-12);
        }

        #[test]
        fn unitary_group_closure(v in proptest::collection::vec(-1.0..1.0f64, 18)) {
            let b1 = RMat::identity(3, 3) + RMat::from_row_slice(3, 3, &v[..9]) * 0.4;
            let b2 = RMat::identity(3, 3) + RMat::from_row_slice(3, 3, &v[9..]) * 0.4;
            let u1 = DMatrix::from_gl(&b1).unwrap();
            let u2 = DMatrix::from_gl(&b2).unwrap();
            prop_assert!(u1.is_unitary(1e-10));
            prop_assert!(u1.mul(&u2).is_unitary(1e-10));
            prop_assert!(u1.adjoint().is_unitary(1e-10));
            // from_gl is a homomorphism GL_n -> U_n(D)
            let composed = DMatrix::from_gl(&(&b1 * &b2)).unwrap();
            prop_assert!(composed.frobenius_distance(&u1.mul(&u2)) < 1e-10);
            // special unitary iff det B = 1
            let s = lin::det(&b1);
            if s > 0.0 {
                let sl = &b1 / s.powf(1.0 / 3.0);
                prop_assert!(DMatrix::from_gl(&sl).unwrap().is_special_unitary(1e-10));
            }
        }
    }
}
