//! Second-order forward-mode automatic differentiation.
//!
//! [`Jet`] carries a value, its gradient and its Hessian with respect to `N`
//! seeded inputs. The dynamics are written once against [`Real`] and evaluated
//! with `f64` for simulation and with `Jet` for the optimizer's derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar operations needed by the equations of motion.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn cst(v: f64) -> Self;
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    /// `self·|self|`, smooth to first order through zero.
    fn signed_square(self) -> Self;
}

impl Real for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn signed_square(self) -> Self {
        self * self.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const N: usize> {
    pub v: f64,
    pub g: [f64; N],
    /// Symmetric; both triangles are kept.
    pub h: [[f64; N]; N],
}

impl<const N: usize> Jet<N> {
    pub fn constant(v: f64) -> Self {
        Self {
            v,
            g: [0.0; N],
            h: [[0.0; N]; N],
        }
    }

    /// Input variable number `i`.
    pub fn variable(v: f64, i: usize) -> Self {
        let mut j = Self::constant(v);
        j.g[i] = 1.0;
        j
    }

    /// Applies a scalar function given f(v), f'(v), f''(v).
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut out = Self::constant(f0);
        for i in 0..N {
            out.g[i] = f1 * self.g[i];
        }
        for i in 0..N {
            let gi = self.g[i];
            for k in 0..N {
                out.h[i][k] = f1 * self.h[i][k] + f2 * gi * self.g[k];
            }
        }
        out
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self.v += o.v;
        for i in 0..N {
            self.g[i] += o.g[i];
            for k in 0..N {
                self.h[i][k] += o.h[i][k];
            }
        }
        self
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = Self::constant(self.v * o.v);
        for i in 0..N {
            out.g[i] = self.v * o.g[i] + o.v * self.g[i];
        }
        for i in 0..N {
            let (a, b) = (self.g[i], o.g[i]);
            for k in 0..N {
                out.h[i][k] = self.v * o.h[i][k] + o.v * self.h[i][k] + a * o.g[k] + b * self.g[k];
            }
        }
        out
    }
}

impl<const N: usize> Div for Jet<N> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<const N: usize> Add<f64> for Jet<N> {
    type Output = Self;
    fn add(mut self, c: f64) -> Self {
        self.v += c;
        self
    }
}

impl<const N: usize> Mul<f64> for Jet<N> {
    type Output = Self;
    fn mul(mut self, c: f64) -> Self {
        self.v *= c;
        for i in 0..N {
            self.g[i] *= c;
            for k in 0..N {
                self.h[i][k] *= c;
            }
        }
        self
    }
}

impl<const N: usize> Real for Jet<N> {
    fn cst(v: f64) -> Self {
        Self::constant(v)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    fn signed_square(self) -> Self {
        let a = self.v.abs();
        let sign = if self.v < 0.0 { -1.0 } else { 1.0 };
        self.chain(self.v * a, 2.0 * a, 2.0 * sign)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f<T: Real>(x: T, y: T) -> T {
        (x * y).sin() + (x * x).exp() * y.cos() / (y + 3.0) + x.signed_square() * y
    }

    #[test]
    fn matches_finite_differences() {
        let (x0, y0) = (0.3, -0.7);
        let j = f(Jet::<2>::variable(x0, 0), Jet::<2>::variable(y0, 1));
        assert!((j.v - f(x0, y0)).abs() < 1e-14);
        let h = 1e-5;
        let gx = (f(x0 + h, y0) - f(x0 - h, y0)) / (2.0 * h);
        let gy = (f(x0, y0 + h) - f(x0, y0 - h)) / (2.0 * h);
        assert!((j.g[0] - gx).abs() < 1e-8);
        assert!((j.g[1] - gy).abs() < 1e-8);
        let hh = 1e-4;
        let fxx = (f(x0 + hh, y0) - 2.0 * f(x0, y0) + f(x0 - hh, y0)) / (hh * hh);
        let fxy = (f(x0 + hh, y0 + hh) - f(x0 + hh, y0 - hh) - f(x0 - hh, y0 + hh)
            + f(x0 - hh, y0 - hh))
            / (4.0 * hh * hh);
        assert!((j.h[0][0] - fxx).abs() < 1e-5, "{} {}", j.h[0][0], fxx);
        assert!((j.h[0][1] - fxy).abs() < 1e-5);
        assert_eq!(j.h[0][1], j.h[1][0]);
    }
}
