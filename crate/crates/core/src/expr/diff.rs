use super::{BinaryOp, Node, ScalarExpr, UnaryOp};

impl ScalarExpr {
    /// Exact partial derivative with respect to coordinate `coord`.
    ///
    /// `abs(f)` differentiates to `f' * f / abs(f)`, which is a division-by-zero domain
    /// error exactly where `f = 0`.
    pub fn differentiate(&self, coord: usize) -> ScalarExpr {
        match self.node() {
            Node::Const(_) => ScalarExpr::zero(),
            Node::Var(i) => {
                if *i == coord {
                    ScalarExpr::one()
                } else {
                    ScalarExpr::zero()
                }
            }
            Node::Unary(op, f) => {
                let df = f.differentiate(coord);
                if df.is_zero() {
                    return ScalarExpr::zero();
                }
                match op {
                    UnaryOp::Neg => -df,
                    UnaryOp::Sin => f.cos() * df,
                    UnaryOp::Cos => -(f.sin() * df),
                    UnaryOp::Exp => self * df,
                    UnaryOp::Log => df / f,
                    UnaryOp::Sqrt => df / (2.0 * self),
                    UnaryOp::Abs => df * f / self,
                }
            }
            Node::Binary(op, f, g) => {
                let df = f.differentiate(coord);
                let dg = g.differentiate(coord);
                match op {
                    BinaryOp::Add => df + dg,
                    BinaryOp::Sub => df - dg,
                    BinaryOp::Mul => df * g + f * dg,
                    BinaryOp::Div => {
                        if dg.is_zero() {
                            df / g
                        } else {
                            (df * g - f * dg) / g.square()
                        }
                    }
                }
            }
            Node::Pow(f, e) => {
                let df = f.differentiate(coord);
                if df.is_zero() {
                    return ScalarExpr::zero();
                }
                *e * f.powf(*e - 1.0) * df
            }
        }
    }

    /// Gradient as one expression per coordinate.
    pub fn gradient(&self, dim: usize) -> Vec<ScalarExpr> {
        (0..dim).map(|k| self.differentiate(k)).collect()
    }

    /// Central finite difference, used as an independent check of [`differentiate`].
    ///
    /// [`differentiate`]: ScalarExpr::differentiate
    pub fn finite_difference(
        &self,
        x: &[f64],
        coord: usize,
        step: f64,
    ) -> Result<f64, super::EvalError> {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[coord] += step;
        xm[coord] -= step;
        Ok((self.eval(&xp)? - self.eval(&xm)?) / (2.0 * step))
    }
}
