//! First- and second-order forward-mode numbers.
//!
//! `Dual` carries one derivative direction, `Hyper` carries two directions
//! plus their mixed second derivative, which is enough to assemble exact
//! gradients and Hessians of compiled expressions one seed at a time.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic interface shared by `f64`, [`Dual`] and [`Hyper`] so the
/// expression interpreter can run at any derivative order.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(x: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, e: Self) -> Self;
}

impl Scalar for f64 {
    fn constant(x: f64) -> Self {
        x
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
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, e: Self) -> Self {
        f64::powf(self, e)
    }
}

/// `re + eps * d` with `d^2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    pub fn variable(x: f64) -> Self {
        Dual { re: x, eps: 1.0 }
    }

    /// Chain rule for a univariate function with value `f` and slope `df`.
    fn lift(self, f: f64, df: f64) -> Self {
        Dual {
            re: f,
            eps: df * self.eps,
        }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            re: self.re + o.re,
            eps: self.eps + o.eps,
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            re: self.re - o.re,
            eps: self.eps - o.eps,
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            re: self.re * o.re,
            eps: self.re * o.eps + self.eps * o.re,
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual {
            re: self.re / o.re,
            eps: (self.eps * o.re - self.re * o.eps) / (o.re * o.re),
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            re: -self.re,
            eps: -self.eps,
        }
    }
}

impl Scalar for Dual {
    fn constant(x: f64) -> Self {
        Dual { re: x, eps: 0.0 }
    }
    fn sin(self) -> Self {
        self.lift(self.re.sin(), self.re.cos())
    }
    fn cos(self) -> Self {
        self.lift(self.re.cos(), -self.re.sin())
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.lift(e, e)
    }
    fn ln(self) -> Self {
        self.lift(self.re.ln(), 1.0 / self.re)
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.lift(s, 0.5 / s)
    }
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        self.lift(t, 1.0 - t * t)
    }
    fn abs(self) -> Self {
        self.lift(self.re.abs(), sign(self.re))
    }
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Dual::constant(1.0),
            1 => self,
            _ => self.lift(self.re.powi(n), f64::from(n) * self.re.powi(n - 1)),
        }
    }
    fn powf(self, e: Self) -> Self {
        // x^y = exp(y ln x); the base is domain-guarded positive upstream.
        (e * self.ln()).exp()
    }
}

/// `re + d1*e1 + d2*e2 + d12*e1*e2` with `e1^2 = e2^2 = 0`.
///
/// Seeding `d1` on variable i and `d2` on variable j makes `d12` the exact
/// second partial with respect to (i, j).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub re: f64,
    pub d1: f64,
    pub d2: f64,
    pub d12: f64,
}

impl Hyper {
    pub fn seed(x: f64, d1: f64, d2: f64) -> Self {
        Hyper {
            re: x,
            d1,
            d2,
            d12: 0.0,
        }
    }

    /// Chain rule for a univariate function with derivatives `df`, `ddf`.
    fn lift(self, f: f64, df: f64, ddf: f64) -> Self {
        Hyper {
            re: f,
            d1: df * self.d1,
            d2: df * self.d2,
            d12: df * self.d12 + ddf * self.d1 * self.d2,
        }
    }
}

impl Add for Hyper {
    type Output = Hyper;
    fn add(self, o: Hyper) -> Hyper {
        Hyper {
            re: self.re + o.re,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
            d12: self.d12 + o.d12,
        }
    }
}

impl Sub for Hyper {
    type Output = Hyper;
    fn sub(self, o: Hyper) -> Hyper {
        Hyper {
            re: self.re - o.re,
            d1: self.d1 - o.d1,
            d2: self.d2 - o.d2,
            d12: self.d12 - o.d12,
        }
    }
}

impl Mul for Hyper {
    type Output = Hyper;
    fn mul(self, o: Hyper) -> Hyper {
        Hyper {
            re: self.re * o.re,
            d1: self.re * o.d1 + self.d1 * o.re,
            d2: self.re * o.d2 + self.d2 * o.re,
            d12: self.re * o.d12 + self.d12 * o.re + self.d1 * o.d2 + self.d2 * o.d1,
        }
    }
}

impl Div for Hyper {
    type Output = Hyper;
    fn div(self, o: Hyper) -> Hyper {
        let r = o.re;
        self * o.lift(1.0 / r, -1.0 / (r * r), 2.0 / (r * r * r))
    }
}

impl Neg for Hyper {
    type Output = Hyper;
    fn neg(self) -> Hyper {
        Hyper {
            re: -self.re,
            d1: -self.d1,
            d2: -self.d2,
            d12: -self.d12,
        }
    }
}

impl Scalar for Hyper {
    fn constant(x: f64) -> Self {
        Hyper {
            re: x,
            d1: 0.0,
            d2: 0.0,
            d12: 0.0,
        }
    }
    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.lift(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.lift(c, -s, -c)
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.lift(e, e, e)
    }
    fn ln(self) -> Self {
        let x = self.re;
        self.lift(x.ln(), 1.0 / x, -1.0 / (x * x))
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.lift(s, 0.5 / s, -0.25 / (s * s * s))
    }
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        let sech2 = 1.0 - t * t;
        self.lift(t, sech2, -2.0 * t * sech2)
    }
    fn abs(self) -> Self {
        self.lift(self.re.abs(), sign(self.re), 0.0)
    }
    fn powi(self, n: i32) -> Self {
        match n {
            0 => Hyper::constant(1.0),
            1 => self,
            _ => {
                let nf = f64::from(n);
                self.lift(
                    self.re.powi(n),
                    nf * self.re.powi(n - 1),
                    nf * (nf - 1.0) * self.re.powi(n - 2),
                )
            }
        }
    }
    fn powf(self, e: Self) -> Self {
        (e * self.ln()).exp()
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
