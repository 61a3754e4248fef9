//! Hyper-dual numbers a + a₁ε₁ + a₂ε₂ + a₁₂ε₁ε₂ with ε₁² = ε₂² = 0.
//!
//! Seeding ε₁ along coordinate k and ε₂ along coordinate l makes the ε₁ε₂
//! part of f(x) equal to ∂²f/∂x_k∂x_l exactly (no truncation error), while the
//! ε₁ part carries ∂f/∂x_k.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic needed by the expression evaluator. Implemented for plain
/// `f64` (value only) and [`HyperDual`] (value plus exact first and second
/// derivatives along two seeded directions).
pub trait Real:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn constant(x: f64) -> Self;
    /// Real part.
    fn re(&self) -> f64;
    /// Whether any derivative part is nonzero.
    fn carries_derivative(&self) -> bool;
    /// Every component finite.
    fn is_finite(&self) -> bool;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, k: i32) -> Self;
}

impl Real for f64 {
    fn constant(x: f64) -> Self {
        x
    }

    fn re(&self) -> f64 {
        *self
    }

    fn carries_derivative(&self) -> bool {
        false
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
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

    fn ln(self) -> Self {
        f64::ln(self)
    }

    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }

    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HyperDual {
    pub re: f64,
    pub e1: f64,
    pub e2: f64,
    pub e12: f64,
}

impl HyperDual {
    pub const fn new(re: f64, e1: f64, e2: f64, e12: f64) -> Self {
        Self { re, e1, e2, e12 }
    }

    /// Coordinate variable with optional ε₁/ε₂ seeds.
    pub fn variable(re: f64, seed1: bool, seed2: bool) -> Self {
        Self::new(re, f64::from(u8::from(seed1)), f64::from(u8::from(seed2)), 0.0)
    }

    /// Applies a scalar function given g(a), g'(a), g''(a).
    #[inline]
    fn chain(self, g: f64, dg: f64, d2g: f64) -> Self {
        Self {
            re: g,
            e1: dg * self.e1,
            e2: dg * self.e2,
            e12: dg * self.e12 + d2g * self.e1 * self.e2,
        }
    }
}

impl Add for HyperDual {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.e1 + o.e1, self.e2 + o.e2, self.e12 + o.e12)
    }
}

impl Sub for HyperDual {
    type Output = Self;

    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.e1 - o.e1, self.e2 - o.e2, self.e12 - o.e12)
    }
}

impl Mul for HyperDual {
    type Output = Self;

    fn mul(self, o: Self) -> Self {
        Self::new(
            self.re * o.re,
            self.re * o.e1 + self.e1 * o.re,
            self.re * o.e2 + self.e2 * o.re,
            self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        )
    }
}

impl Div for HyperDual {
    type Output = Self;

    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.re;
        self * o.chain(inv, -inv * inv, 2.0 * inv * inv * inv)
    }
}

impl Neg for HyperDual {
    type Output = Self;

    fn neg(self) -> Self {
        Self::new(-self.re, -self.e1, -self.e2, -self.e12)
    }
}

impl Real for HyperDual {
    fn constant(x: f64) -> Self {
        Self::new(x, 0.0, 0.0, 0.0)
    }

    fn re(&self) -> f64 {
        self.re
    }

    fn carries_derivative(&self) -> bool {
        self.e1 != 0.0 || self.e2 != 0.0 || self.e12 != 0.0
    }

    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.e1.is_finite() && self.e2.is_finite() && self.e12.is_finite()
    }

    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(s, c, -s)
    }

    fn cos(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(c, -s, -c)
    }

    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e, e)
    }

    fn ln(self) -> Self {
        let inv = 1.0 / self.re;
        self.chain(self.re.ln(), inv, -inv * inv)
    }

    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.re))
    }

    fn powi(self, k: i32) -> Self {
        let x = self.re;
        let kf = f64::from(k);
        // Written so that 0^k with k ∈ {0, 1} yields no 0·∞ terms.
        match k {
            0 => Self::constant(1.0),
            1 => self,
            _ => {
                let xm2 = x.powi(k - 2);
                self.chain(xm2 * x * x, kf * xm2 * x, kf * (kf - 1.0) * xm2)
            }
        }
    }
}
