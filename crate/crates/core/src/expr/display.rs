use std::fmt;

use super::{BinaryOp, Node, ScalarExpr, UnaryOp};

/// Expression paired with coordinate names for printing.
pub struct Displayed<'a> {
    expr: &'a ScalarExpr,
    names: &'a [&'a str],
}

impl ScalarExpr {
    /// Prints in the parser's syntax, so `parse(e.display(c), c)` reproduces `e`.
    pub fn display<'a>(&'a self, names: &'a [&'a str]) -> Displayed<'a> {
        Displayed { expr: self, names }
    }

    pub fn to_source(&self, names: &[&str]) -> String {
        self.display(names).to_string()
    }
}

impl fmt::Display for Displayed<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self.expr, Some(self.names))
    }
}

const ADD: u8 = 1;
const MUL: u8 = 2;
const NEG: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

fn prec(e: &ScalarExpr) -> u8 {
    match e.node() {
        Node::Const(_) | Node::Var(_) => ATOM,
        Node::Unary(UnaryOp::Neg, _) => NEG,
        Node::Unary(..) => ATOM,
        Node::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => ADD,
        Node::Binary(..) => MUL,
        Node::Pow(..) => POW,
    }
}

fn child(f: &mut fmt::Formatter<'_>, e: &ScalarExpr, min: u8, names: Option<&[&str]>) -> fmt::Result {
    if prec(e) < min {
        f.write_str("(")?;
        write_expr(f, e, names)?;
        f.write_str(")")
    } else {
        write_expr(f, e, names)
    }
}

fn number(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c < 0.0 || (c == 0.0 && c.is_sign_negative()) {
        write!(f, "(-{:?})", -c)
    } else {
        write!(f, "{:?}", c)
    }
}

pub(crate) fn write_expr(f: &mut fmt::Formatter<'_>, e: &ScalarExpr, names: Option<&[&str]>) -> fmt::Result {
    match e.node() {
        Node::Const(c) => number(f, *c),
        Node::Var(i) => match names.and_then(|n| n.get(*i)) {
            Some(name) => f.write_str(name),
            None => write!(f, "x{i}"),
        },
        Node::Unary(UnaryOp::Neg, a) => {
            f.write_str("-")?;
            child(f, a, POW, names)
        }
        Node::Unary(op, a) => {
            write!(f, "{}(", op.name())?;
            write_expr(f, a, names)?;
            f.write_str(")")
        }
        Node::Binary(op, a, b) => {
            let (sym, p) = match op {
                BinaryOp::Add => (" + ", ADD),
                BinaryOp::Sub => (" - ", ADD),
                BinaryOp::Mul => ("*", MUL),
                BinaryOp::Div => ("/", MUL),
            };
            child(f, a, p, names)?;
            f.write_str(sym)?;
            child(f, b, p + 1, names)
        }
        Node::Pow(a, x) => {
            child(f, a, ATOM, names)?;
            f.write_str("^")?;
            number(f, *x)
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    #[test]
    fn prints_minimal_parens() {
        let c = ["x", "y"];
        let round = |s: &str| parse(s, &c).unwrap().to_source(&c);
        assert_eq!(round("x - (y - 1)"), "x - (y - 1.0)");
        assert_eq!(round("(x - y) - 1"), "x - y - 1.0");
        assert_eq!(round("-x^2"), "-x^2.0");
        assert_eq!(round("(-x)^2"), "(-x)^2.0");
        assert_eq!(round("x^(-2)"), "x^(-2.0)");
        assert_eq!(round("-(x*y)"), "-(x*y)");
        assert_eq!(round("x/(y*2)"), "x/(y*2.0)");
        assert_eq!(round("sin(x + y)*3"), "sin(x + y)*3.0");
    }

    #[test]
    fn negative_constants_reparse() {
        let e = crate::expr::ScalarExpr::constant(-3.0) * crate::expr::ScalarExpr::var(0);
        let s = e.to_source(&["x"]);
        assert_eq!(s, "(-3.0)*x");
        assert_eq!(parse(&s, &["x"]).unwrap().eval(&[2.0]).unwrap(), -6.0);
    }
}
