//! Truncated Taylor series ("jets") in time.
//!
//! A [`Jet`] stores `c_k = x^(k)(t0) / k!` for `k = 0..ORDER`. Arithmetic on
//! jets propagates derivatives exactly, which lets trajectory generators
//! produce position through snap without hand-written chain rules.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Number of stored coefficients (value plus four derivatives).
pub const ORDER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet(pub [f64; ORDER]);

const FACT: [f64; ORDER] = [1.0, 1.0, 2.0, 6.0, 24.0];

impl Jet {
    pub fn constant(c: f64) -> Self {
        let mut j = [0.0; ORDER];
        j[0] = c;
        Jet(j)
    }

    /// The independent variable evaluated at `t`.
    pub fn variable(t: f64) -> Self {
        let mut j = [0.0; ORDER];
        j[0] = t;
        j[1] = 1.0;
        Jet(j)
    }

    /// Jet from derivatives `[x, x', x'', ...]`.
    pub fn from_derivatives(d: [f64; ORDER]) -> Self {
        let mut j = [0.0; ORDER];
        for k in 0..ORDER {
            j[k] = d[k] / FACT[k];
        }
        Jet(j)
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// `k`-th time derivative.
    pub fn derivative(&self, k: usize) -> f64 {
        self.0[k] * FACT[k]
    }

    pub fn derivatives(&self) -> [f64; ORDER] {
        std::array::from_fn(|k| self.derivative(k))
    }

    /// Jet of the time derivative. The highest coefficient is lost.
    pub fn diff(&self) -> Self {
        let mut j = [0.0; ORDER];
        for k in 1..ORDER {
            j[k - 1] = k as f64 * self.0[k];
        }
        Jet(j)
    }

    /// Antiderivative with constant term `c0`; inverse of [`Jet::diff`].
    pub fn integrate(&self, c0: f64) -> Self {
        let mut j = [0.0; ORDER];
        j[0] = c0;
        for k in 1..ORDER {
            j[k] = self.0[k - 1] / k as f64;
        }
        Jet(j)
    }

    pub fn scale(&self, s: f64) -> Self {
        Jet(self.0.map(|c| c * s))
    }

    pub fn sin_cos(&self) -> (Self, Self) {
        let mut s = [0.0; ORDER];
        let mut c = [0.0; ORDER];
        (s[0], c[0]) = self.0[0].sin_cos();
        for k in 1..ORDER {
            let (mut sk, mut ck) = (0.0, 0.0);
            for j in 1..=k {
                let ju = j as f64 * self.0[j];
                sk += ju * c[k - j];
                ck -= ju * s[k - j];
            }
            s[k] = sk / k as f64;
            c[k] = ck / k as f64;
        }
        (Jet(s), Jet(c))
    }

    pub fn sin(&self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Self {
        self.sin_cos().1
    }

    /// Square root; the value must be positive.
    pub fn sqrt(&self) -> Self {
        let mut r = [0.0; ORDER];
        r[0] = self.0[0].sqrt();
        for k in 1..ORDER {
            let mut acc = self.0[k];
            for j in 1..k {
                acc -= r[j] * r[k - j];
            }
            r[k] = acc / (2.0 * r[0]);
        }
        Jet(r)
    }

    /// Four-quadrant angle of the point `(x, self)`, continued from the value
    /// `atan2(self, x)`.
    pub fn atan2(&self, x: &Jet) -> Self {
        let y = self;
        let rate = (*x * y.diff() - *y * x.diff()) / (*x * *x + *y * *y);
        rate.integrate(y.value().atan2(x.value()))
    }

    /// Polynomial `Σ a_k t^k` evaluated on this jet (Horner).
    pub fn poly(&self, coeffs: &[f64]) -> Self {
        let mut acc = Jet::constant(0.0);
        for &a in coeffs.iter().rev() {
            acc = acc * *self + Jet::constant(a);
        }
        acc
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] + rhs.0[k]))
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] - rhs.0[k]))
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut p = [0.0; ORDER];
        for k in 0..ORDER {
            for j in 0..=k {
                p[k] += self.0[j] * rhs.0[k - j];
            }
        }
        Jet(p)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut j = self;
        j.0[0] += rhs;
        j
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        let mut q = [0.0; ORDER];
        for k in 0..ORDER {
            let mut acc = self.0[k];
            for j in 1..=k {
                acc -= rhs.0[j] * q[k - j];
            }
            q[k] = acc / rhs.0[0];
        }
        Jet(q)
    }
}
