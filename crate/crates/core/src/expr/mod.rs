//! Scalar expressions on a coordinate chart.
//!
//! An expression is an immutable tree shared through `Arc`, so cloning is cheap and
//! expressions can be evaluated from many threads at once. Trees produced by [`parse`]
//! keep the user's structure; trees produced by the arithmetic operators and by
//! [`ScalarExpr::differentiate`] fold constants and drop neutral elements.

mod diff;
mod display;
mod parse;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

pub use display::Displayed;
pub use parse::{parse, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<UnaryOp> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "abs" => UnaryOp::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug)]
pub enum Node {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, ScalarExpr),
    Binary(BinaryOp, ScalarExpr, ScalarExpr),
    /// Power with a constant real exponent.
    Pow(ScalarExpr, f64),
}

#[derive(Clone)]
pub struct ScalarExpr(Arc<Node>);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("log of non-positive value {0}")]
    LogDomain(f64),
    #[error("sqrt of negative value {0}")]
    SqrtDomain(f64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("power {base}^{exponent} is not real")]
    PowDomain { base: f64, exponent: f64 },
    #[error("non-finite intermediate value")]
    NonFinite,
    #[error("coordinate {index} missing from a point of dimension {dim}")]
    MissingCoordinate { index: usize, dim: usize },
}

fn finite(v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite)
    }
}

impl ScalarExpr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn from_node(node: Node) -> Self {
        ScalarExpr(Arc::new(node))
    }

    pub fn constant(c: f64) -> Self {
        Self::from_node(Node::Const(c))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn var(index: usize) -> Self {
        Self::from_node(Node::Var(index))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub fn ptr_eq(&self, other: &ScalarExpr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// Unsimplified node builders, used by the parser.
    pub(crate) fn raw_unary(op: UnaryOp, a: ScalarExpr) -> Self {
        Self::from_node(Node::Unary(op, a))
    }

    pub(crate) fn raw_binary(op: BinaryOp, a: ScalarExpr, b: ScalarExpr) -> Self {
        Self::from_node(Node::Binary(op, a, b))
    }

    pub(crate) fn raw_pow(a: ScalarExpr, e: f64) -> Self {
        Self::from_node(Node::Pow(a, e))
    }

    pub fn unary(op: UnaryOp, a: ScalarExpr) -> Self {
        if let Some(c) = a.as_const() {
            if let Ok(v) = eval_unary(op, c) {
                return Self::constant(v);
            }
        }
        if op == UnaryOp::Neg {
            if let Node::Unary(UnaryOp::Neg, inner) = a.node() {
                return inner.clone();
            }
        }
        Self::raw_unary(op, a)
    }

    pub fn binary(op: BinaryOp, a: ScalarExpr, b: ScalarExpr) -> Self {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            if let Ok(v) = eval_binary(op, x, y) {
                return Self::constant(v);
            }
        }
        match op {
            BinaryOp::Add => {
                if a.is_zero() {
                    return b;
                }
                if b.is_zero() {
                    return a;
                }
                if let Node::Unary(UnaryOp::Neg, nb) = b.node() {
                    return Self::binary(BinaryOp::Sub, a, nb.clone());
                }
            }
            BinaryOp::Sub => {
                if b.is_zero() {
                    return a;
                }
                if a.is_zero() {
                    return Self::unary(UnaryOp::Neg, b);
                }
                if let Node::Unary(UnaryOp::Neg, nb) = b.node() {
                    return Self::binary(BinaryOp::Add, a, nb.clone());
                }
            }
            BinaryOp::Mul => {
                if a.is_zero() || b.is_zero() {
                    return Self::zero();
                }
                if a.is_one() {
                    return b;
                }
                if b.is_one() {
                    return a;
                }
                if a.as_const() == Some(-1.0) {
                    return Self::unary(UnaryOp::Neg, b);
                }
                if b.as_const() == Some(-1.0) {
                    return Self::unary(UnaryOp::Neg, a);
                }
            }
            BinaryOp::Div => {
                if a.is_zero() {
                    return Self::zero();
                }
                if b.is_one() {
                    return a;
                }
            }
        }
        Self::raw_binary(op, a, b)
    }

    pub fn powf(&self, e: f64) -> Self {
        if e == 1.0 {
            return self.clone();
        }
        if e == 0.0 {
            return Self::one();
        }
        if let Some(c) = self.as_const() {
            if let Ok(v) = eval_pow(c, e) {
                return Self::constant(v);
            }
        }
        Self::raw_pow(self.clone(), e)
    }

    pub fn sin(&self) -> Self {
        Self::unary(UnaryOp::Sin, self.clone())
    }

    pub fn cos(&self) -> Self {
        Self::unary(UnaryOp::Cos, self.clone())
    }

    pub fn exp(&self) -> Self {
        Self::unary(UnaryOp::Exp, self.clone())
    }

    pub fn ln(&self) -> Self {
        Self::unary(UnaryOp::Log, self.clone())
    }

    pub fn sqrt(&self) -> Self {
        Self::unary(UnaryOp::Sqrt, self.clone())
    }

    pub fn abs(&self) -> Self {
        Self::unary(UnaryOp::Abs, self.clone())
    }

    pub fn square(&self) -> Self {
        self * self
    }

    pub fn recip(&self) -> Self {
        Self::one() / self
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        match self.node() {
            Node::Const(c) => Ok(*c),
            Node::Var(i) => x.get(*i).copied().ok_or(EvalError::MissingCoordinate {
                index: *i,
                dim: x.len(),
            }),
            Node::Unary(op, a) => eval_unary(*op, a.eval(x)?),
            Node::Binary(op, a, b) => eval_binary(*op, a.eval(x)?, b.eval(x)?),
            Node::Pow(a, e) => eval_pow(a.eval(x)?, *e),
        }
    }

    /// Indices of the coordinates the expression mentions.
    pub fn vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<usize>) {
        match self.node() {
            Node::Const(_) => {}
            Node::Var(i) => {
                out.insert(*i);
            }
            Node::Unary(_, a) | Node::Pow(a, _) => a.collect_vars(out),
            Node::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn depends_on(&self, index: usize) -> bool {
        match self.node() {
            Node::Const(_) => false,
            Node::Var(i) => *i == index,
            Node::Unary(_, a) | Node::Pow(a, _) => a.depends_on(index),
            Node::Binary(_, a, b) => a.depends_on(index) || b.depends_on(index),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.vars().is_empty()
    }

    /// Replaces every coordinate `i` by `subs[i]`.
    pub fn compose(&self, subs: &[ScalarExpr]) -> ScalarExpr {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(i) => subs.get(*i).cloned().unwrap_or_else(|| self.clone()),
            Node::Unary(op, a) => Self::raw_unary(*op, a.compose(subs)),
            Node::Binary(op, a, b) => Self::raw_binary(*op, a.compose(subs), b.compose(subs)),
            Node::Pow(a, e) => Self::raw_pow(a.compose(subs), *e),
        }
    }

    /// Renames coordinate `i` to `map[i]`.
    pub fn remap(&self, map: &[usize]) -> ScalarExpr {
        let subs: Vec<ScalarExpr> = map.iter().map(|&j| ScalarExpr::var(j)).collect();
        self.compose(&subs)
    }

    pub fn node_count(&self) -> usize {
        match self.node() {
            Node::Const(_) | Node::Var(_) => 1,
            Node::Unary(_, a) | Node::Pow(a, _) => 1 + a.node_count(),
            Node::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }
}

pub(crate) fn eval_unary(op: UnaryOp, a: f64) -> Result<f64, EvalError> {
    let v = match op {
        UnaryOp::Neg => -a,
        UnaryOp::Sin => a.sin(),
        UnaryOp::Cos => a.cos(),
        UnaryOp::Exp => a.exp(),
        UnaryOp::Log => {
            if a <= 0.0 {
                return Err(EvalError::LogDomain(a));
            }
            a.ln()
        }
        UnaryOp::Sqrt => {
            if a < 0.0 {
                return Err(EvalError::SqrtDomain(a));
            }
            a.sqrt()
        }
        UnaryOp::Abs => a.abs(),
    };
    finite(v)
}

pub(crate) fn eval_binary(op: BinaryOp, a: f64, b: f64) -> Result<f64, EvalError> {
    let v = match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            a / b
        }
    };
    finite(v)
}

pub(crate) fn eval_pow(base: f64, e: f64) -> Result<f64, EvalError> {
    if base == 0.0 && e < 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    if base < 0.0 && e.fract() != 0.0 {
        return Err(EvalError::PowDomain { base, exponent: e });
    }
    let v = if e == 2.0 {
        base * base
    } else if e.fract() == 0.0 && e.abs() <= 64.0 {
        base.powi(e as i32)
    } else {
        base.powf(e)
    };
    finite(v)
}

impl fmt::Debug for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarExpr({})", self)
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        display::write_expr(f, self, None)
    }
}

impl From<f64> for ScalarExpr {
    fn from(c: f64) -> Self {
        ScalarExpr::constant(c)
    }
}

macro_rules! binop_impls {
    ($tr:ident, $method:ident, $op:expr) => {
        impl $tr<ScalarExpr> for ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: ScalarExpr) -> ScalarExpr {
                ScalarExpr::binary($op, self, rhs)
            }
        }
        impl $tr<&ScalarExpr> for ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: &ScalarExpr) -> ScalarExpr {
                ScalarExpr::binary($op, self, rhs.clone())
            }
        }
        impl $tr<ScalarExpr> for &ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: ScalarExpr) -> ScalarExpr {
                ScalarExpr::binary($op, self.clone(), rhs)
            }
        }
        impl $tr<&ScalarExpr> for &ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: &ScalarExpr) -> ScalarExpr {
                ScalarExpr::binary($op, self.clone(), rhs.clone())
            }
        }
        impl $tr<f64> for ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: f64) -> ScalarExpr {
                ScalarExpr::binary($op, self, ScalarExpr::constant(rhs))
            }
        }
        impl $tr<f64> for &ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: f64) -> ScalarExpr {
                ScalarExpr::binary($op, self.clone(), ScalarExpr::constant(rhs))
            }
        }
        impl $tr<ScalarExpr> for f64 {
            type Output = ScalarExpr;
            fn $method(self, rhs: ScalarExpr) -> ScalarExpr {
                ScalarExpr::binary($op, ScalarExpr::constant(self), rhs)
            }
        }
        impl $tr<&ScalarExpr> for f64 {
            type Output = ScalarExpr;
            fn $method(self, rhs: &ScalarExpr) -> ScalarExpr {
                ScalarExpr::binary($op, ScalarExpr::constant(self), rhs.clone())
            }
        }
    };
}

binop_impls!(Add, add, BinaryOp::Add);
binop_impls!(Sub, sub, BinaryOp::Sub);
binop_impls!(Mul, mul, BinaryOp::Mul);
binop_impls!(Div, div, BinaryOp::Div);

impl Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        ScalarExpr::unary(UnaryOp::Neg, self)
    }
}

impl Neg for &ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        ScalarExpr::unary(UnaryOp::Neg, self.clone())
    }
}
