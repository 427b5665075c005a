//! Scalar abstraction shared by every grid operator.
//!
//! The operators in [`crate::manifold`] and [`crate::spectral`] are generic over
//! [`Scalar`] so the same code path evaluates both plain `f64` fields and
//! [`Jet`]-valued fields. A `Jet<K>` carries the truncated Taylor series of a
//! quantity in a deformation parameter ε, which is how exact ε-derivatives of an
//! assembled operator `H_{g+εh}` are obtained without symbolic work.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + PartialEq
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
    fn from_f64(x: f64) -> Self;
    /// Multiplication by a plain real number.
    fn scale(self, a: f64) -> Self;
    /// The ε⁰ coefficient (the value itself for `f64`).
    fn value(self) -> f64;
    fn sqrt(self) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn recip(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn scale(self, a: f64) -> Self {
        self * a
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn recip(self) -> Self {
        1.0 / self
    }
}

/// Truncated power series `c[0] + c[1] ε + … + c[K-1] ε^{K-1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<const K: usize> {
    pub c: [f64; K],
}

/// Jets carrying up to the third ε-derivative.
pub type Jet4 = Jet<4>;

impl<const K: usize> Jet<K> {
    pub fn constant(x: f64) -> Self {
        let mut c = [0.0; K];
        c[0] = x;
        Self { c }
    }

    /// `x + dx·ε`.
    pub fn linear(x: f64, dx: f64) -> Self {
        let mut c = [0.0; K];
        c[0] = x;
        if K > 1 {
            c[1] = dx;
        }
        Self { c }
    }

    /// k-th ε-derivative at ε = 0.
    pub fn derivative(&self, k: usize) -> f64 {
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        self.c[k] * fact
    }
}

impl<const K: usize> Add for Jet<K> {
    type Output = Self;
    #[inline]
    fn add(mut self, o: Self) -> Self {
        for k in 0..K {
            self.c[k] += o.c[k];
        }
        self
    }
}

impl<const K: usize> Sub for Jet<K> {
    type Output = Self;
    #[inline]
    fn sub(mut self, o: Self) -> Self {
        for k in 0..K {
            self.c[k] -= o.c[k];
        }
        self
    }
}

impl<const K: usize> Neg for Jet<K> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        for k in 0..K {
            self.c[k] = -self.c[k];
        }
        self
    }
}

impl<const K: usize> Mul for Jet<K> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut c = [0.0; K];
        for i in 0..K {
            if self.c[i] == 0.0 {
                continue;
            }
            for j in 0..K - i {
                c[i + j] += self.c[i] * o.c[j];
            }
        }
        Self { c }
    }
}

impl<const K: usize> Div for Jet<K> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<const K: usize> AddAssign for Jet<K> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<const K: usize> SubAssign for Jet<K> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<const K: usize> MulAssign for Jet<K> {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<const K: usize> Scalar for Jet<K> {
    fn from_f64(x: f64) -> Self {
        Self::constant(x)
    }

    #[inline]
    fn scale(mut self, a: f64) -> Self {
        for k in 0..K {
            self.c[k] *= a;
        }
        self
    }

    #[inline]
    fn value(self) -> f64 {
        self.c[0]
    }

    fn recip(self) -> Self {
        let a = self.c;
        let mut b = [0.0; K];
        b[0] = 1.0 / a[0];
        for k in 1..K {
            let mut s = 0.0;
            for j in 1..=k {
                s += a[j] * b[k - j];
            }
            b[k] = -s * b[0];
        }
        Self { c: b }
    }

    fn sqrt(self) -> Self {
        let a = self.c;
        let mut s = [0.0; K];
        s[0] = a[0].sqrt();
        for k in 1..K {
            let mut acc = a[k];
            for j in 1..k {
                acc -= s[j] * s[k - j];
            }
            s[k] = acc / (2.0 * s[0]);
        }
        Self { c: s }
    }

    fn exp(self) -> Self {
        let a = self.c;
        let mut e = [0.0; K];
        e[0] = a[0].exp();
        for k in 1..K {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * a[j] * e[k - j];
            }
            e[k] = acc / k as f64;
        }
        Self { c: e }
    }

    fn ln(self) -> Self {
        let a = self.c;
        let mut l = [0.0; K];
        l[0] = a[0].ln();
        for k in 1..K {
            let mut acc = 0.0;
            for j in 1..k {
                acc += j as f64 * l[j] * a[k - j];
            }
            l[k] = (a[k] - acc / k as f64) / a[0];
        }
        Self { c: l }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series<F: Fn(Jet4) -> Jet4, G: Fn(f64) -> f64>(f: F, g: G, x: f64, dx: f64) {
        let j = f(Jet4::linear(x, dx));
        // Compare against a high-order centered stencil of the scalar map.
        let e = 1e-3;
        let p = |t: f64| g(x + t * dx);
        let d1 = (p(e) - p(-e)) / (2.0 * e);
        let d2 = (p(e) - 2.0 * p(0.0) + p(-e)) / (e * e);
        let d3 = (p(2.0 * e) - 2.0 * p(e) + 2.0 * p(-e) - p(-2.0 * e)) / (2.0 * e * e * e);
        assert!((j.derivative(0) - p(0.0)).abs() < 1e-14);
        assert!(
            (j.derivative(1) - d1).abs() < 1e-5,
            "{} {}",
            j.derivative(1),
            d1
        );
        assert!(
            (j.derivative(2) - d2).abs() < 1e-4,
            "{} {}",
            j.derivative(2),
            d2
        );
        assert!(
            (j.derivative(3) - d3).abs() < 1e-2,
            "{} {}",
            j.derivative(3),
            d3
        );
    }

    #[test]
    fn elementary_functions_match_finite_differences() {
        series(|x| x.sqrt(), f64::sqrt, 1.7, 0.4);
        series(|x| x.exp(), f64::exp, 0.3, -0.8);
        series(|x| x.ln(), f64::ln, 2.2, 0.9);
        series(|x| x.recip(), |x| 1.0 / x, 1.3, 0.5);
        series(|x| x * x * x, |x| x * x * x, -0.7, 1.1);
    }

    #[test]
    fn polynomial_jets_are_exact() {
        let x = Jet4::linear(2.0, 1.0);
        let p = x * x * x;
        assert_eq!(p.c, [8.0, 12.0, 6.0, 1.0]);
        assert_eq!((p / x).c, (x * x).c);
    }
}
