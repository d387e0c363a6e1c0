//! Double numbers `x + τy` with `τ² = 1`.
//!
//! The idempotents are `e = ½(1 − τ)` and `ē = ½(1 + τ)`, so every element
//! splits as `z = u·e + v·ē` with null coordinates `u = x − y`, `v = x + y`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct DNumber {
    pub re: f64,
    pub im: f64,
}

/// Which piece of `D` an element lies in.
///
/// The invertible elements form four open quadrants in null coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    /// `u > 0, v > 0`: the component of 1, image of `exp`.
    Positive,
    /// `u < 0, v < 0`.
    Negative,
    /// `u < 0 < v`: contains `τ`.
    TauPositive,
    /// `v < 0 < u`: contains `−τ`.
    TauNegative,
    /// `u·v = 0`.
    Null,
}

/// Result bundle of [`DNumber::mul_inv`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MulInv {
    pub product: DNumber,
    pub conj_a: DNumber,
    pub quad_a: f64,
    pub inverse_a: Option<DNumber>,
}

impl DNumber {
    pub const ZERO: DNumber = DNumber { re: 0.0, im: 0.0 };
    pub const ONE: DNumber = DNumber { re: 1.0, im: 0.0 };
    pub const TAU: DNumber = DNumber { re: 0.0, im: 1.0 };
    /// `e = ½(1 − τ)`.
    pub const E: DNumber = DNumber { re: 0.5, im: -0.5 };
    /// `ē = ½(1 + τ)`.
    pub const E_BAR: DNumber = DNumber { re: 0.5, im: 0.5 };

    pub const fn new(re: f64, im: f64) -> Self {
        DNumber { re, im }
    }

    pub const fn real(re: f64) -> Self {
        DNumber { re, im: 0.0 }
    }

    /// Build `u·e + v·ē`.
    pub fn from_null(u: f64, v: f64) -> Self {
        DNumber {
            re: 0.5 * (u + v),
            im: 0.5 * (v - u),
        }
    }

    /// Null coordinates `(u, v) = (x − y, x + y)`.
    pub fn null(self) -> (f64, f64) {
        (self.re - self.im, self.re + self.im)
    }

    pub fn conj(self) -> Self {
        DNumber {
            re: self.re,
            im: -self.im,
        }
    }

    /// `z·z̄ = x² − y² = u·v`.
    pub fn quad(self) -> f64 {
        self.re * self.re - self.im * self.im
    }

    pub fn scale(self, s: f64) -> Self {
        DNumber {
            re: self.re * s,
            im: self.im * s,
        }
    }

    pub fn component(self) -> Component {
        let (u, v) = self.null();
        if u == 0.0 || v == 0.0 {
            Component::Null
        } else if u > 0.0 && v > 0.0 {
            Component::Positive
        } else if u < 0.0 && v < 0.0 {
            Component::Negative
        } else if v > 0.0 {
            Component::TauPositive
        } else {
            Component::TauNegative
        }
    }

    /// `None` when `z` is null.
    pub fn inverse(self) -> Option<Self> {
        let q = self.quad();
        if q == 0.0 || !q.is_finite() {
            return None;
        }
        Some(self.conj().scale(1.0 / q))
    }

    pub fn mul_inv(self, b: DNumber) -> MulInv {
        MulInv {
            product: self * b,
            conj_a: self.conj(),
            quad_a: self.quad(),
            inverse_a: self.inverse(),
        }
    }

    /// `eˣ(cosh y + τ sinh y)`.
    pub fn exp(self) -> Self {
        let ex = self.re.exp();
        DNumber {
            re: ex * self.im.cosh(),
            im: ex * self.im.sinh(),
        }
    }

    /// Logarithm on `D⁺`; elsewhere returns the component of `z`.
    pub fn log(self) -> Result<Self, Component> {
        match self.component() {
            Component::Positive => {
                let (u, v) = self.null();
                Ok(DNumber::from_null(u.ln(), v.ln()))
            }
            c => Err(c),
        }
    }

    /// `(ρ, θ)` with `z = ρ·exp(τθ)`, defined on `D⁺`.
    pub fn polar(self) -> Result<(f64, f64), Component> {
        match self.component() {
            Component::Positive => {
                let (u, v) = self.null();
                Ok(((u * v).sqrt(), 0.5 * (v / u).ln()))
            }
            c => Err(c),
        }
    }

    pub fn from_polar(rho: f64, theta: f64) -> Self {
        DNumber::new(0.0, theta).exp().scale(rho)
    }

    pub fn abs_diff(self, other: DNumber) -> f64 {
        (self.re - other.re).abs().max((self.im - other.im).abs())
    }

    pub fn approx_eq(self, other: DNumber, tol: f64) -> bool {
        self.abs_diff(other) <= tol
    }

    pub fn powi(self, k: u32) -> Self {
        let (u, v) = self.null();
        DNumber::from_null(u.powi(k as i32), v.powi(k as i32))
    }
}

impl From<[f64; 2]> for DNumber {
    fn from(a: [f64; 2]) -> Self {
        DNumber::new(a[0], a[1])
    }
}

impl From<DNumber> for [f64; 2] {
    fn from(z: DNumber) -> Self {
        [z.re, z.im]
    }
}

impl From<f64> for DNumber {
    fn from(x: f64) -> Self {
        DNumber::real(x)
    }
}

impl fmt::Display for DNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im < 0.0 {
            write!(f, "{} - {}τ", self.re, -self.im)
        } else {
            write!(f, "{} + {}τ", self.re, self.im)
        }
    }
}

impl Add for DNumber {
    type Output = DNumber;
    fn add(self, o: DNumber) -> DNumber {
        DNumber::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for DNumber {
    type Output = DNumber;
    fn sub(self, o: DNumber) -> DNumber {
        DNumber::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for DNumber {
    type Output = DNumber;
    fn mul(self, o: DNumber) -> DNumber {
        DNumber::new(
            self.re * o.re + self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

impl Mul<f64> for DNumber {
    type Output = DNumber;
    fn mul(self, s: f64) -> DNumber {
        self.scale(s)
    }
}

impl Neg for DNumber {
    type Output = DNumber;
    fn neg(self) -> DNumber {
        DNumber::new(-self.re, -self.im)
    }
}

impl AddAssign for DNumber {
    fn add_assign(&mut self, o: DNumber) {
        self.re += o.re;
        self.im += o.im;
    }
}

impl SubAssign for DNumber {
    fn sub_assign(&mut self, o: DNumber) {
        self.re -= o.re;
        self.im -= o.im;
    }
}

impl MulAssign for DNumber {
    fn mul_assign(&mut self, o: DNumber) {
        *self = *self * o;
    }
}

impl std::iter::Sum for DNumber {
    fn sum<I: Iterator<Item = DNumber>>(iter: I) -> Self {
        iter.fold(DNumber::ZERO, |a, b| a + b)
    }
}

impl std::iter::Product for DNumber {
    fn product<I: Iterator<Item = DNumber>>(iter: I) -> Self {
        iter.fold(DNumber::ONE, |a, b| a * b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(re: f64, im: f64) -> DNumber {
        DNumber::new(re, im)
    }

    #[test]
    fn product_quad_inverse() {
        assert_eq!(d(2.0, 1.0) * d(3.0, 2.0), d(8.0, 7.0));
        assert_eq!(d(2.0, 1.0).quad(), 3.0);
        let inv = d(2.0, 1.0).inverse().unwrap();
        assert!(inv.approx_eq(d(2.0 / 3.0, -1.0 / 3.0), 1e-15));
        assert!((d(2.0, 1.0) * inv).approx_eq(DNumber::ONE, 1e-15));
        assert!(d(1.0, 1.0).inverse().is_none());
        let r = d(1.0, 1.0).mul_inv(d(3.0, 0.0));
        assert_eq!(r.quad_a, 0.0);
        assert!(r.inverse_a.is_none());
    }

    #[test]
    fn tau_squares_to_one() {
        assert_eq!(DNumber::TAU * DNumber::TAU, DNumber::ONE);
    }

    #[test]
    fn idempotents() {
        let (e, eb) = (DNumber::E, DNumber::E_BAR);
        assert_eq!(e * e, e);
        assert_eq!(eb * eb, eb);
        assert_eq!(e * eb, DNumber::ZERO);
        assert_eq!(DNumber::TAU * e, -e);
        assert_eq!(e + eb, DNumber::ONE);
    }

    #[test]
    fn exp_log_polar_examples() {
        let z = DNumber::TAU.exp();
        assert!(z.approx_eq(d(1f64.cosh(), 1f64.sinh()), 1e-15));
        assert!((z.re - 1.5431).abs() < 1e-4 && (z.im - 1.1752).abs() < 1e-4);
        assert_eq!(DNumber::ZERO.exp(), DNumber::ONE);
        assert_eq!(DNumber::ONE.log().unwrap(), DNumber::ZERO);
        assert_eq!(DNumber::ONE.polar().unwrap(), (1.0, 0.0));

        let (rho, theta) = d(8.0, 7.0).polar().unwrap();
        assert!((rho - 15f64.sqrt()).abs() < 1e-14);
        assert!((theta - 0.5 * 15f64.ln()).abs() < 1e-14);
        assert!((rho - 3.8730).abs() < 1e-4 && (theta - 1.3540).abs() < 1e-4);
        // Independent reconstruction with cosh/sinh rather than null coordinates.
        let back = d(rho * theta.cosh(), rho * theta.sinh());
        assert!(back.approx_eq(d(8.0, 7.0), 1e-12));
    }

    #[test]
    fn exp_null_form() {
        let z = d(0.3, -1.1);
        let (u, v) = z.null();
        let via_null =
            DNumber::E * DNumber::real(u.exp()) + DNumber::E_BAR * DNumber::real(v.exp());
        assert!(z.exp().approx_eq(via_null, 1e-14));
    }

    #[test]
    fn log_outside_positive_component() {
        assert_eq!(DNumber::TAU.log(), Err(Component::TauPositive));
        assert_eq!((-DNumber::TAU).polar(), Err(Component::TauNegative));
        assert_eq!(d(-2.0, 0.5).log(), Err(Component::Negative));
        assert_eq!(d(1.0, 1.0).polar(), Err(Component::Null));
    }

    #[test]
    fn null_coordinates() {
        assert_eq!(d(3.0, 1.0).null(), (2.0, 4.0));
        assert_eq!(DNumber::ONE.null(), (1.0, 1.0));
        assert_eq!(DNumber::TAU.null(), (-1.0, 1.0));
        assert_eq!(d(8.0, 7.0).null(), (1.0, 15.0));
        assert_eq!(DNumber::from_null(2.0, 4.0), d(3.0, 1.0));
    }

    #[test]
    fn json_shape() {
        let s = serde_json::to_string(&d(1.5, -2.0)).unwrap();
        assert_eq!(s, "[1.5,-2.0]");
        let z: DNumber = serde_json::from_str("[8, 7]").unwrap();
        assert_eq!(z, d(8.0, 7.0));
    }

    fn any_d() -> impl Strategy<Value = DNumber> {
        (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| d(a, b))
    }

    proptest! {
        #[test]
        fn quad_is_multiplicative(a in any_d(), b in any_d()) {
            let lhs = (a * b).quad();
            let rhs = a.quad() * b.quad();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn ring_axioms(a in any_d(), b in any_d(), c in any_d()) {
            prop_assert!((a * b).approx_eq(b * a, 1e-14));
            prop_assert!(((a * b) * c).approx_eq(a * (b * c), 1e-12));
            prop_assert!((a * (b + c)).approx_eq(a * b + a * c, 1e-12));
        }

        #[test]
        fn exp_is_a_homomorphism(a in any_d(), b in any_d()) {
            let lhs = (a + b).exp();
            let rhs = a.exp() * b.exp();
            prop_assert!(lhs.abs_diff(rhs) <= 1e-12 * (1.0 + lhs.re.abs()));
        }

        #[test]
        fn log_inverts_exp(a in any_d()) {
            let back = a.exp().log().unwrap();
            prop_assert!(back.approx_eq(a, 1e-12));
        }

        #[test]
        fn null_coordinates_multiply_componentwise(a in any_d(), b in any_d()) {
            let (ua, va) = a.null();
            let (ub, vb) = b.null();
            let (u, v) = (a * b).null();
            prop_assert!((u - ua * ub).abs() <= 1e-12 && (v - va * vb).abs() <= 1e-12);
        }

        #[test]
        fn null_round_trip(a in any_d()) {
            let (u, v) = a.null();
            prop_assert!(DNumber::from_null(u, v).approx_eq(a, 1e-15));
        }
    }
}
