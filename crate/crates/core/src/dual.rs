//! Forward-mode dual numbers over a generic real scalar.
//!
//! `Dual<T>` carries a value and one infinitesimal part. Nesting gives higher
//! derivatives: `Dual<Dual<f64>>` yields mixed second partials, and one more
//! level yields the third derivatives needed to linearize the geodesic spray.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Scalar arithmetic shared by `f64` and all dual-number nestings.
pub trait Real:
    Copy
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    fn cst(x: f64) -> Self;
    /// Plain value with all infinitesimal parts dropped.
    fn value(&self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powi(self, n: i32) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }
    fn one() -> Self {
        Self::cst(1.0)
    }
}

impl Real for f64 {
    #[inline]
    fn cst(x: f64) -> Self {
        x
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// A number `re + eps·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Real> Dual<T> {
    #[inline]
    pub fn new(re: T, eps: T) -> Self {
        Dual { re, eps }
    }

    /// Independent variable seeded with unit derivative.
    #[inline]
    pub fn var(re: T) -> Self {
        Dual { re, eps: T::one() }
    }

    #[inline]
    pub fn constant(re: T) -> Self {
        Dual { re, eps: T::zero() }
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Dual { re: self.re + o.re, eps: self.eps + o.eps }
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Dual { re: self.re - o.re, eps: self.eps - o.eps }
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Dual { re: self.re * o.re, eps: self.re * o.eps + self.eps * o.re }
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = T::one() / o.re;
        let q = self.re * inv;
        Dual { re: q, eps: (self.eps - q * o.eps) * inv }
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual { re: -self.re, eps: -self.eps }
    }
}

impl<T: Real> AddAssign for Dual<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> SubAssign for Dual<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> MulAssign for Dual<T> {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Real> Real for Dual<T> {
    #[inline]
    fn cst(x: f64) -> Self {
        Dual { re: T::cst(x), eps: T::zero() }
    }
    #[inline]
    fn value(&self) -> f64 {
        self.re.value()
    }
    #[inline]
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        Dual { re: r, eps: self.eps / (T::cst(2.0) * r) }
    }
    #[inline]
    fn sin(self) -> Self {
        Dual { re: self.re.sin(), eps: self.eps * self.re.cos() }
    }
    #[inline]
    fn cos(self) -> Self {
        Dual { re: self.re.cos(), eps: -(self.eps * self.re.sin()) }
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual { re: e, eps: self.eps * e }
    }
    #[inline]
    fn ln(self) -> Self {
        Dual { re: self.re.ln(), eps: self.eps / self.re }
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::one(),
            1 => self,
            _ => {
                let p = self.re.powi(n - 1);
                Dual { re: p * self.re, eps: self.eps * T::cst(n as f64) * p }
            }
        }
    }
}

/// First derivative of a scalar function of one variable.
pub fn derivative<F>(f: F, x: f64) -> f64
where
    F: Fn(Dual<f64>) -> Dual<f64>,
{
    f(Dual::var(x)).eps
}

/// Gradient of `f` at `x`, one forward sweep per coordinate.
pub fn gradient<F>(f: F, x: &[f64]) -> Vec<f64>
where
    F: Fn(&[Dual<f64>]) -> Dual<f64>,
{
    let mut buf: Vec<Dual<f64>> = x.iter().map(|&xi| Dual::constant(xi)).collect();
    (0..x.len())
        .map(|k| {
            buf[k].eps = 1.0;
            let d = f(&buf).eps;
            buf[k].eps = 0.0;
            d
        })
        .collect()
}
