use nalgebra::DVector;

use crate::expr::{EvalError, ScalarExpr};

/// Vector field given by its coordinate components.
#[derive(Debug, Clone)]
pub struct VectorField(pub Vec<ScalarExpr>);

impl VectorField {
    pub fn new(components: Vec<ScalarExpr>) -> Self {
        VectorField(components)
    }

    /// The coordinate field `∂_k` on an `n`-dimensional chart.
    pub fn coordinate(n: usize, k: usize) -> Self {
        VectorField(
            (0..n)
                .map(|j| if j == k { ScalarExpr::one() } else { ScalarExpr::zero() })
                .collect(),
        )
    }

    pub fn zero(n: usize) -> Self {
        VectorField(vec![ScalarExpr::zero(); n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[ScalarExpr] {
        &self.0
    }

    pub fn eval(&self, q: &[f64]) -> Result<DVector<f64>, EvalError> {
        let mut v = DVector::zeros(self.0.len());
        for (k, c) in self.0.iter().enumerate() {
            v[k] = c.eval(q)?;
        }
        Ok(v)
    }

    /// Derivative of `f` along the field.
    pub fn apply(&self, f: &ScalarExpr) -> ScalarExpr {
        self.0
            .iter()
            .enumerate()
            .fold(ScalarExpr::zero(), |acc, (j, c)| acc + c * f.differentiate(j))
    }

    pub fn scaled(&self, f: &ScalarExpr) -> Self {
        VectorField(self.0.iter().map(|c| f * c).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(ScalarExpr::is_zero)
    }
}

/// `[X, Y]^k = Σ_j (X_j ∂_j Y_k − Y_j ∂_j X_k)`, exact.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> VectorField {
    assert_eq!(x.dim(), y.dim(), "fields on different charts");
    VectorField((0..x.dim()).map(|k| x.apply(&y.0[k]) - y.apply(&x.0[k])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn field(src: &[&str], coords: &[&str]) -> VectorField {
        VectorField(src.iter().map(|s| parse(s, coords).unwrap()).collect())
    }

    #[test]
    fn coordinate_fields_commute() {
        let b = lie_bracket(&VectorField::coordinate(2, 0), &VectorField::coordinate(2, 1));
        assert!(b.is_zero());
    }

    #[test]
    fn heisenberg_bracket_is_vertical() {
        let c = ["x", "y", "z"];
        let x1 = field(&["1", "0", "-y/2"], &c);
        let x2 = field(&["0", "1", "x/2"], &c);
        let b = lie_bracket(&x1, &x2);
        for q in [[0.0, 0.0, 0.0], [1.0, -2.0, 3.0], [0.3, 0.7, -0.1]] {
            let v = b.eval(&q).unwrap();
            assert_eq!(v.as_slice(), &[0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn bracket_with_linear_field() {
        let c = ["x", "y"];
        let b = lie_bracket(&field(&["1", "0"], &c), &field(&["0", "x"], &c));
        assert_eq!(b.eval(&[0.4, 2.0]).unwrap().as_slice(), &[0.0, 1.0]);
    }
}
