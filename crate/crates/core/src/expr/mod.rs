//! A small expression language over named real coordinates.
//!
//! Expressions are parsed once against a declared variable list and then
//! evaluated at any derivative order through [`dual`] numbers. Arguments of
//! `sqrt` and `ln`, and bases of non-integer powers, become domain guards
//! that must stay strictly positive at every evaluation point.

mod dual;
mod field;
mod parse;

pub use dual::{Dual, Hyper, Scalar};
pub use field::ScalarField;
pub use parse::parse;

use crate::error::{CoreError, Result};

/// Intrinsic univariate functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Tanh,
    Abs,
}

impl Func {
    pub const ALL: [(&'static str, Func); 7] = [
        ("sin", Func::Sin),
        ("cos", Func::Cos),
        ("exp", Func::Exp),
        ("ln", Func::Ln),
        ("sqrt", Func::Sqrt),
        ("tanh", Func::Tanh),
        ("abs", Func::Abs),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
        }
    }

    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Tanh => x.tanh(),
            Func::Abs => x.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Abstract syntax tree over numeric literals, variables (indices into the
/// declared variable list) and arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn num(x: f64) -> Expr {
        Expr::Num(x)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    /// Exponent value when this node is a constant with integer value, in
    /// which case `^` evaluates through `powi` and needs no domain guard.
    fn as_int_exponent(&self) -> Option<i32> {
        match self {
            Expr::Num(c) if c.fract() == 0.0 && c.abs() <= f64::from(i32::MAX) => Some(*c as i32),
            _ => None,
        }
    }

    /// Evaluate at a point of any scalar type (plain, dual or hyper-dual).
    pub fn eval<T: Scalar>(&self, point: &[T]) -> T {
        match self {
            Expr::Num(c) => T::constant(*c),
            Expr::Var(i) => point[*i],
            Expr::Neg(a) => -a.eval(point),
            Expr::Bin(op, a, b) => {
                let x = a.eval(point);
                match op {
                    BinOp::Add => x + b.eval(point),
                    BinOp::Sub => x - b.eval(point),
                    BinOp::Mul => x * b.eval(point),
                    BinOp::Div => x / b.eval(point),
                    BinOp::Pow => match b.as_int_exponent() {
                        Some(n) => x.powi(n),
                        None => x.powf(b.eval(point)),
                    },
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(point)),
        }
    }

    /// Highest variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Bin(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, None) => x,
                (None, y) => y,
            },
        }
    }

    pub fn uses_var(&self, v: usize) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(i) => *i == v,
            Expr::Neg(a) | Expr::Call(_, a) => a.uses_var(v),
            Expr::Bin(_, a, b) => a.uses_var(v) || b.uses_var(v),
        }
    }

    /// Replace every variable node by `f(index)`.
    pub fn substitute(&self, f: &impl Fn(usize) -> Expr) -> Expr {
        match self {
            Expr::Num(c) => Expr::Num(*c),
            Expr::Var(i) => f(*i),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(f))),
            Expr::Bin(op, a, b) => {
                Expr::Bin(*op, Box::new(a.substitute(f)), Box::new(b.substitute(f)))
            }
            Expr::Call(g, a) => Expr::Call(*g, Box::new(a.substitute(f))),
        }
    }

    /// Fold constant subtrees. This is the only simplification applied to
    /// parsed expressions; results that are not finite are left unfolded so
    /// the guard machinery still sees the original operation.
    pub fn fold(&self) -> Expr {
        match self {
            Expr::Num(c) => Expr::Num(*c),
            Expr::Var(i) => Expr::Var(*i),
            Expr::Neg(a) => match a.fold() {
                Expr::Num(c) => Expr::Num(-c),
                a => Expr::Neg(Box::new(a)),
            },
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.fold(), b.fold());
                if let (Expr::Num(_), Expr::Num(_)) = (&a, &b) {
                    let v = Expr::Bin(*op, Box::new(a.clone()), Box::new(b.clone())).eval::<f64>(&[]);
                    if v.is_finite() {
                        return Expr::Num(v);
                    }
                }
                Expr::Bin(*op, Box::new(a), Box::new(b))
            }
            Expr::Call(f, a) => {
                let a = a.fold();
                if let Expr::Num(x) = a {
                    let v = f.apply(x);
                    if v.is_finite() {
                        return Expr::Num(v);
                    }
                }
                Expr::Call(*f, Box::new(a))
            }
        }
    }

    /// Symbolic partial derivative with respect to variable `v`.
    ///
    /// Built with pruning constructors (`x + 0 -> x`, `0 * x -> 0`, ...) so
    /// that iterated total derivatives stay compact.
    pub fn diff(&self, v: usize) -> Expr {
        match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(i) => Expr::Num(if *i == v { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(v)),
            Expr::Bin(BinOp::Add, a, b) => add(a.diff(v), b.diff(v)),
            Expr::Bin(BinOp::Sub, a, b) => sub(a.diff(v), b.diff(v)),
            Expr::Bin(BinOp::Mul, a, b) => add(
                mul(a.diff(v), (**b).clone()),
                mul((**a).clone(), b.diff(v)),
            ),
            Expr::Bin(BinOp::Div, a, b) => div(
                sub(
                    mul(a.diff(v), (**b).clone()),
                    mul((**a).clone(), b.diff(v)),
                ),
                pow((**b).clone(), Expr::Num(2.0)),
            ),
            Expr::Bin(BinOp::Pow, a, b) => match b.as_int_exponent() {
                Some(0) => Expr::Num(0.0),
                Some(n) => mul(
                    mul(
                        Expr::Num(f64::from(n)),
                        pow((**a).clone(), Expr::Num(f64::from(n - 1))),
                    ),
                    a.diff(v),
                ),
                None => {
                    // d(a^b) = a^b (b' ln a + b a'/a)
                    let body = add(
                        mul(b.diff(v), Expr::Call(Func::Ln, a.clone())),
                        div(mul((**b).clone(), a.diff(v)), (**a).clone()),
                    );
                    mul(self.clone(), body)
                }
            },
            Expr::Call(f, a) => {
                let da = a.diff(v);
                let outer = match f {
                    Func::Sin => Expr::Call(Func::Cos, a.clone()),
                    Func::Cos => neg(Expr::Call(Func::Sin, a.clone())),
                    Func::Exp => Expr::Call(Func::Exp, a.clone()),
                    Func::Ln => div(Expr::Num(1.0), (**a).clone()),
                    Func::Sqrt => div(Expr::Num(0.5), Expr::Call(Func::Sqrt, a.clone())),
                    Func::Tanh => sub(
                        Expr::Num(1.0),
                        pow(Expr::Call(Func::Tanh, a.clone()), Expr::Num(2.0)),
                    ),
                    Func::Abs => div((**a).clone(), Expr::Call(Func::Abs, a.clone())),
                };
                mul(outer, da)
            }
        }
    }

    /// Collect the guards implied by this expression: arguments of `sqrt`
    /// and `ln`, and bases of `^` with non-integer exponents, all of which
    /// must stay strictly positive. Order follows a left-to-right walk.
    pub fn collect_guards(&self, out: &mut Vec<Expr>) {
        match self {
            Expr::Num(_) | Expr::Var(_) => {}
            Expr::Neg(a) => a.collect_guards(out),
            Expr::Bin(op, a, b) => {
                a.collect_guards(out);
                b.collect_guards(out);
                if *op == BinOp::Pow && b.as_int_exponent().is_none() {
                    out.push((**a).clone());
                }
            }
            Expr::Call(f, a) => {
                a.collect_guards(out);
                if matches!(f, Func::Ln | Func::Sqrt) {
                    out.push((**a).clone());
                }
            }
        }
    }

    /// Render with the minimum parentheses that reparse to the same tree.
    pub fn to_text(&self, vars: &[String]) -> String {
        let mut s = String::new();
        self.write(vars, &mut s);
        s
    }

    // Grammar levels, loosest first: sum(0), term(1), pow(2), unary(3), atom(4).
    fn level(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 0,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 1,
            Expr::Bin(BinOp::Pow, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(c) if *c < 0.0 => 3,
            _ => 4,
        }
    }

    fn write(&self, vars: &[String], out: &mut String) {
        fn arg(e: &Expr, min: u8, vars: &[String], out: &mut String) {
            if e.level() < min {
                out.push('(');
                e.write(vars, out);
                out.push(')');
            } else {
                e.write(vars, out);
            }
        }
        match self {
            Expr::Num(c) => out.push_str(&format!("{c}")),
            Expr::Var(i) => out.push_str(&vars[*i]),
            Expr::Neg(a) => {
                out.push('-');
                arg(a, 3, vars, out);
            }
            Expr::Bin(op, a, b) => match op {
                BinOp::Add | BinOp::Sub => {
                    arg(a, 0, vars, out);
                    out.push_str(if *op == BinOp::Add { " + " } else { " - " });
                    arg(b, 1, vars, out);
                }
                BinOp::Mul | BinOp::Div => {
                    arg(a, 1, vars, out);
                    out.push(if *op == BinOp::Mul { '*' } else { '/' });
                    arg(b, 2, vars, out);
                }
                BinOp::Pow => {
                    arg(a, 3, vars, out);
                    out.push('^');
                    arg(b, 2, vars, out);
                }
            },
            Expr::Call(f, a) => {
                out.push_str(f.name());
                out.push('(');
                a.write(vars, out);
                out.push(')');
            }
        }
    }
}

// Pruning constructors used by symbolic differentiation. They fold the
// trivial identities that would otherwise make iterated derivatives blow up.

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Num(c) if *c == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Num(c) if *c == 1.0)
}

pub fn add(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        return b;
    }
    if is_zero(&b) {
        return a;
    }
    if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
        return Expr::Num(x + y);
    }
    Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    if is_zero(&b) {
        return a;
    }
    if is_zero(&a) {
        return neg(b);
    }
    if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
        return Expr::Num(x - y);
    }
    Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b))
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        return Expr::Num(0.0);
    }
    if is_one(&a) {
        return b;
    }
    if is_one(&b) {
        return a;
    }
    if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
        return Expr::Num(x * y);
    }
    Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))
}

pub fn div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        return Expr::Num(0.0);
    }
    if is_one(&b) {
        return a;
    }
    Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(c) => Expr::Num(-c),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    if let Expr::Num(c) = b {
        if c == 1.0 {
            return a;
        }
        if c == 0.0 {
            return Expr::Num(1.0);
        }
        return Expr::Bin(BinOp::Pow, Box::new(a), Box::new(Expr::Num(c)));
    }
    Expr::Bin(BinOp::Pow, Box::new(a), Box::new(b))
}

/// Build the names `{prefix}1 ... {prefix}n`.
pub fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Look up a variable name, for callers assembling charts by hand.
pub fn var_index(vars: &[String], name: &str) -> Result<usize> {
    vars.iter()
        .position(|v| v == name)
        .ok_or_else(|| CoreError::UnknownIdentifier {
            name: name.to_string(),
            offset: 0,
        })
}
