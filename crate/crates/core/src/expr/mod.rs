//! Scalar expression language used by scenario files.
//!
//! Expressions range over the variables `x, y, z, t`, numeric literals, the
//! constants `pi` and `euler` (Euler's number), the binary operators
//! `+ - * / ^`, unary minus and the functions `sin cos tan exp ln sqrt abs`.
//! `sign` is also accepted; it appears as the derivative of `abs`, with
//! `sign(0) = 0`.
//!
//! The exponent of `^` must be a constant expression, which keeps symbolic
//! differentiation closed-form.
//!
//! Expressions can be evaluated on plain numbers or on Taylor jets; the jet
//! path gives exact derivatives of every order without building derivative
//! trees.

mod parser;

use std::fmt;

use thiserror::Error;

use crate::field::Point;
use crate::jet::Jet;

pub use parser::{parse_expr, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
    Z,
    T,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::X, Var::Y, Var::Z, Var::T];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["x", "y", "z", "t"][self as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constant {
    Pi,
    Euler,
}

impl Constant {
    pub fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::Euler => std::f64::consts::E,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sign,
}

impl Func {
    pub const ALL: [Func; 8] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Ln,
        Func::Sqrt,
        Func::Abs,
        Func::Sign,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Const(Constant),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Func(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot evaluate at {point}: {reason}")]
pub struct EvalError {
    pub point: Point,
    pub reason: String,
}

/// Number types an [`Expr`] can be evaluated on.
pub trait Numeric: Clone {
    fn constant(v: f64) -> Self;
    fn value(&self) -> f64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn powf(&self, p: f64) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn apply(&self, f: Func) -> Self;
    fn is_finite(&self) -> bool;
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Numeric for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn powf(&self, p: f64) -> Self {
        f64::powf(*self, p)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn apply(&self, f: Func) -> Self {
        match f {
            Func::Sin => self.sin(),
            Func::Cos => self.cos(),
            Func::Tan => self.tan(),
            Func::Exp => self.exp(),
            Func::Ln => self.ln(),
            Func::Sqrt => self.sqrt(),
            Func::Abs => self.abs(),
            Func::Sign => sign(*self),
        }
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl Numeric for Jet {
    fn constant(v: f64) -> Self {
        Jet::constant(v)
    }
    fn value(&self) -> f64 {
        Jet::value(self)
    }
    fn add(&self, o: &Self) -> Self {
        self.clone() + o.clone()
    }
    fn sub(&self, o: &Self) -> Self {
        self.clone() - o.clone()
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self * &o.recip()
    }
    fn neg(&self) -> Self {
        -self.clone()
    }
    fn powf(&self, p: f64) -> Self {
        Jet::powf(self, p)
    }
    fn powi(&self, n: i32) -> Self {
        Jet::powi(self, n)
    }
    fn apply(&self, f: Func) -> Self {
        match f {
            Func::Sin => self.sin(),
            Func::Cos => self.cos(),
            Func::Tan => self.tan(),
            Func::Exp => self.exp(),
            Func::Ln => self.ln(),
            Func::Sqrt => self.sqrt(),
            Func::Abs => self.abs(),
            Func::Sign => Jet::constant(sign(self.value())),
        }
    }
    fn is_finite(&self) -> bool {
        Jet::is_finite(self)
    }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        parse_expr(text)
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn func(f: Func, a: Expr) -> Expr {
        Expr::Func(f, Box::new(a))
    }

    /// True when the expression mentions `v`.
    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Num(_) | Expr::Const(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a) | Expr::Func(_, a) => a.depends_on(v),
            Expr::Binary(_, a, b) => a.depends_on(v) || b.depends_on(v),
        }
    }

    pub fn is_constant(&self) -> bool {
        Var::ALL.iter().all(|&v| !self.depends_on(v))
    }

    /// Value of a variable-free expression.
    pub fn constant_value(&self) -> Option<f64> {
        if !self.is_constant() {
            return None;
        }
        self.eval(&Point::default()).ok()
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Func(_, a) => 1 + a.size(),
            Expr::Binary(_, a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn eval(&self, p: &Point) -> Result<f64, EvalError> {
        self.eval_on(&[p.x, p.y, p.z, p.t], p)
    }

    /// Evaluates on Taylor jets of the given order centered at `p`.
    pub fn eval_jet(&self, p: &Point, order: usize) -> Result<Jet, EvalError> {
        let env = [
            Jet::variable(0, p.x, order),
            Jet::variable(1, p.y, order),
            Jet::variable(2, p.z, order),
            Jet::variable(3, p.t, order),
        ];
        self.eval_on(&env, p)
    }

    /// Evaluates on an arbitrary number type with domain checks on values.
    pub fn eval_on<N: Numeric>(&self, env: &[N; 4], p: &Point) -> Result<N, EvalError> {
        let r = self.eval_inner(env, p)?;
        if !r.is_finite() {
            return Err(err(p, "non-finite result"));
        }
        Ok(r)
    }

    fn eval_inner<N: Numeric>(&self, env: &[N; 4], p: &Point) -> Result<N, EvalError> {
        Ok(match self {
            Expr::Num(v) => N::constant(*v),
            Expr::Const(c) => N::constant(c.value()),
            Expr::Var(v) => env[v.index()].clone(),
            Expr::Neg(a) => a.eval_inner(env, p)?.neg(),
            Expr::Binary(op, a, b) => {
                let x = a.eval_inner(env, p)?;
                match op {
                    BinOp::Pow => {
                        let e = b
                            .constant_value()
                            .ok_or_else(|| err(p, "exponent is not constant"))?;
                        power(&x, e, p)?
                    }
                    _ => {
                        let y = b.eval_inner(env, p)?;
                        match op {
                            BinOp::Add => x.add(&y),
                            BinOp::Sub => x.sub(&y),
                            BinOp::Mul => x.mul(&y),
                            BinOp::Div => {
                                if y.value() == 0.0 {
                                    return Err(err(p, "division by zero"));
                                }
                                x.div(&y)
                            }
                            BinOp::Pow => unreachable!(),
                        }
                    }
                }
            }
            Expr::Func(f, a) => {
                let x = a.eval_inner(env, p)?;
                let v = x.value();
                match f {
                    Func::Ln if v <= 0.0 => {
                        return Err(err(p, &format!("ln of non-positive value {v}")))
                    }
                    Func::Sqrt if v < 0.0 => {
                        return Err(err(p, &format!("sqrt of negative value {v}")))
                    }
                    _ => {}
                }
                let r = x.apply(*f);
                if !r.is_finite() {
                    return Err(err(p, &format!("{} is not finite here", f.name())));
                }
                r
            }
        })
    }

    /// Symbolic partial derivative with respect to `v`, simplified.
    pub fn differentiate(&self, v: Var) -> Expr {
        derivative(self, v).simplify()
    }

    /// Constant folding and removal of neutral elements.
    pub fn simplify(&self) -> Expr {
        use Expr::*;
        match self {
            Num(_) | Var(_) | Const(_) => self.clone(),
            Neg(a) => match a.simplify() {
                Num(v) => Num(-v),
                Neg(b) => *b,
                s => Neg(Box::new(s)),
            },
            Func(f, a) => {
                let s = a.simplify();
                if let Num(v) = s {
                    let r = v.apply(*f);
                    if r.is_finite() && fold_func(*f, v) {
                        return Num(r);
                    }
                }
                Func(*f, Box::new(s))
            }
            Binary(op, a, b) => {
                let a = a.simplify();
                let b = b.simplify();
                simplify_binary(*op, a, b)
            }
        }
    }
}

fn fold_func(f: Func, v: f64) -> bool {
    // only fold where the result is exact, so printing stays faithful
    matches!(
        (f, v),
        (Func::Sin, 0.0)
            | (Func::Tan, 0.0)
            | (Func::Cos, 0.0)
            | (Func::Exp, 0.0)
            | (Func::Ln, 1.0)
            | (Func::Abs, _)
            | (Func::Sign, _)
    ) || (f == Func::Sqrt && v >= 0.0 && v.sqrt().fract() == 0.0)
}

fn simplify_binary(op: BinOp, a: Expr, b: Expr) -> Expr {
    use Expr::Num;
    match (op, &a, &b) {
        (BinOp::Pow, _, _) => match (&a, &b) {
            (_, Num(e)) if *e == 1.0 => a,
            (_, Num(e)) if *e == 0.0 => Num(1.0),
            (Num(x), Num(e)) if x.powf(*e).is_finite() && (e.fract() == 0.0) => Num(x.powf(*e)),
            _ => Expr::binary(op, a, b),
        },
        (_, Num(x), Num(y)) => {
            let r = match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x / y,
                BinOp::Pow => unreachable!(),
            };
            if r.is_finite() {
                Num(r)
            } else {
                Expr::binary(op, a, b)
            }
        }
        (BinOp::Add, Num(z), _) if *z == 0.0 => b,
        (BinOp::Add | BinOp::Sub, _, Num(z)) if *z == 0.0 => a,
        (BinOp::Sub, Num(z), _) if *z == 0.0 => Expr::Neg(Box::new(b)).simplify(),
        (BinOp::Mul, Num(z), _) | (BinOp::Mul, _, Num(z)) if *z == 0.0 => Num(0.0),
        (BinOp::Mul, Num(o), _) if *o == 1.0 => b,
        (BinOp::Mul | BinOp::Div, _, Num(o)) if *o == 1.0 => a,
        (BinOp::Mul, Num(o), _) if *o == -1.0 => Expr::Neg(Box::new(b)).simplify(),
        (BinOp::Div, Num(z), _) if *z == 0.0 => Num(0.0),
        _ => Expr::binary(op, a, b),
    }
}

fn err(p: &Point, reason: &str) -> EvalError {
    EvalError {
        point: *p,
        reason: reason.to_string(),
    }
}

fn power<N: Numeric>(x: &N, e: f64, p: &Point) -> Result<N, EvalError> {
    let v = x.value();
    let integer = e.fract() == 0.0 && e.abs() <= i32::MAX as f64;
    if v == 0.0 && e < 0.0 {
        return Err(err(p, "division by zero in power"));
    }
    if integer {
        return Ok(x.powi(e as i32));
    }
    if v < 0.0 {
        return Err(err(p, &format!("non-integer power {e} of negative base {v}")));
    }
    Ok(x.powf(e))
}

fn derivative(e: &Expr, v: Var) -> Expr {
    use Expr::*;
    use crate::expr::Func as F;
    let mul = |a: Expr, b: Expr| Expr::binary(BinOp::Mul, a, b);
    let div = |a: Expr, b: Expr| Expr::binary(BinOp::Div, a, b);
    let add = |a: Expr, b: Expr| Expr::binary(BinOp::Add, a, b);
    let sub = |a: Expr, b: Expr| Expr::binary(BinOp::Sub, a, b);
    if !e.depends_on(v) {
        return Num(0.0);
    }
    match e {
        Num(_) | Const(_) => Num(0.0),
        Var(w) => Num(if *w == v { 1.0 } else { 0.0 }),
        Neg(a) => Neg(Box::new(derivative(a, v))),
        Binary(op, a, b) => {
            let (a, b) = (a.as_ref().clone(), b.as_ref().clone());
            match op {
                BinOp::Add => add(derivative(&a, v), derivative(&b, v)),
                BinOp::Sub => sub(derivative(&a, v), derivative(&b, v)),
                BinOp::Mul => add(mul(derivative(&a, v), b.clone()), mul(a.clone(), derivative(&b, v))),
                BinOp::Div => div(
                    sub(mul(derivative(&a, v), b.clone()), mul(a.clone(), derivative(&b, v))),
                    Expr::binary(BinOp::Pow, b, Num(2.0)),
                ),
                BinOp::Pow => {
                    // exponent is constant by construction
                    let reduced = match &b {
                        Num(n) => Num(n - 1.0),
                        _ => sub(b.clone(), Num(1.0)),
                    };
                    mul(mul(b, Expr::binary(BinOp::Pow, a.clone(), reduced)), derivative(&a, v))
                }
            }
        }
        Func(f, a) => {
            let inner = a.as_ref().clone();
            let da = derivative(&inner, v);
            let outer = match f {
                F::Sin => Expr::func(F::Cos, inner),
                F::Cos => Neg(Box::new(Expr::func(F::Sin, inner))),
                F::Tan => div(Num(1.0), Expr::binary(BinOp::Pow, Expr::func(F::Cos, inner), Num(2.0))),
                F::Exp => Expr::func(F::Exp, inner),
                F::Ln => div(Num(1.0), inner),
                F::Sqrt => div(Num(1.0), mul(Num(2.0), Expr::func(F::Sqrt, inner))),
                F::Abs => Expr::func(F::Sign, inner),
                F::Sign => Num(0.0),
            };
            mul(outer, da)
        }
    }
}

// Precedence levels used by the printer.
const P_ADD: u8 = 1;
const P_MUL: u8 = 2;
const P_UNARY: u8 = 3;
const P_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => P_ATOM,
        Expr::Num(_) | Expr::Var(_) | Expr::Const(_) | Expr::Func(..) => P_ATOM,
        Expr::Neg(_) => P_UNARY,
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => P_ADD,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => P_MUL,
        Expr::Binary(BinOp::Pow, ..) => 4,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if precedence(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(-{})", -v)
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Const(Constant::Pi) => f.write_str("pi"),
            Expr::Const(Constant::Euler) => f.write_str("euler"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, P_UNARY)
            }
            Expr::Func(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Binary(op, a, b) => {
                let (sym, left, right) = match op {
                    BinOp::Add => (" + ", P_ADD, P_ADD + 1),
                    BinOp::Sub => (" - ", P_ADD, P_ADD + 1),
                    BinOp::Mul => ("*", P_MUL, P_MUL + 1),
                    BinOp::Div => ("/", P_MUL, P_MUL + 1),
                    BinOp::Pow => ("^", P_ATOM, P_UNARY),
                };
                write_child(f, a, left)?;
                f.write_str(sym)?;
                write_child(f, b, right)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(x: f64, y: f64, z: f64) -> Point {
        Point::new(x, y, z, 0.0)
    }

    fn p(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn precedence_examples() {
        assert_eq!(p("2+3*4").eval(&at(0.3, 0.1, 0.0)).unwrap(), 14.0);
        let v = p("2*x + sin(y*z)")
            .eval(&at(0.0, 1.0, std::f64::consts::FRAC_PI_2))
            .unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert_eq!(p("2^3^2").eval(&at(0.0, 0.0, 0.0)).unwrap(), 512.0);
        assert_eq!(p("-2^2").eval(&at(0.0, 0.0, 0.0)).unwrap(), -4.0);
        assert_eq!(p("8/4/2").eval(&at(0.0, 0.0, 0.0)).unwrap(), 1.0);
        assert_eq!(p("2^-1").eval(&at(0.0, 0.0, 0.0)).unwrap(), 0.5);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(p("x^2").differentiate(Var::X), p("2*x"));
        assert_eq!(p("sin(x*y)").differentiate(Var::X), p("cos(x*y)*y"));
        assert_eq!(p("sin(y)").differentiate(Var::X), Expr::Num(0.0));
        let d = p("abs(x)").differentiate(Var::X);
        assert_eq!(d.eval(&at(0.0, 0.0, 0.0)).unwrap(), 0.0);
        assert_eq!(d.eval(&at(-2.0, 0.0, 0.0)).unwrap(), -1.0);
    }

    #[test]
    fn evaluation_errors_carry_point() {
        let e = p("1/x").eval(&at(0.0, 2.0, 0.0)).unwrap_err();
        assert_eq!(e.point, at(0.0, 2.0, 0.0));
        assert!(p("ln(x)").eval(&at(-1.0, 0.0, 0.0)).is_err());
        assert!(p("sqrt(x)").eval(&at(-1.0, 0.0, 0.0)).is_err());
        assert!(p("x^0.5").eval(&at(-1.0, 0.0, 0.0)).is_err());
        assert_eq!(p("x^3").eval(&at(-2.0, 0.0, 0.0)).unwrap(), -8.0);
    }

    #[test]
    fn jet_matches_symbolic() {
        let e = p("exp(x*y)*cos(z) + ln(2+x^2)/(1+y^2) - sqrt(3+z)*t");
        let pt = Point::new(0.3, -0.4, 0.7, 0.2);
        let j = e.eval_jet(&pt, 2).unwrap();
        for v in Var::ALL {
            let mut m = [0u8; 4];
            m[v.index()] = 1;
            let sym = e.differentiate(v).eval(&pt).unwrap();
            assert!((j.derivative(m) - sym).abs() < 1e-12, "{v:?}");
            for w in Var::ALL {
                let mut m2 = m;
                m2[w.index()] += 1;
                let sym2 = e.differentiate(v).differentiate(w).eval(&pt).unwrap();
                assert!((j.derivative(m2) - sym2).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn printing_minimal_parens() {
        for s in ["a", "x - (y - z)", "(x - y) - z", "-(x*y)", "(-x)^2", "x^-2", "x/(y*z)", "sin(x)^2"] {
            if s == "a" {
                continue;
            }
            let e = p(s);
            assert_eq!(p(&e.to_string()), e, "{s} printed as {e}");
        }
        assert_eq!(p("x - (y - z)").to_string(), "x - (y - z)");
        assert_eq!(p("(x - y) - z").to_string(), "x - y - z");
        assert_eq!(Expr::Num(-3.0).to_string(), "(-3)");
    }

    #[test]
    fn structural_time_dependence() {
        assert!(p("x*t").depends_on(Var::T));
        assert!(!p("x*y").depends_on(Var::T));
    }
}
