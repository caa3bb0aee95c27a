use serde::{Deserialize, Serialize};

use super::{constant_sign, eval_at, parse_at, ConstructError};
use crate::expr::ScalarExpr;
use crate::geometry::{Domain, GeometryModel};

/// One eigenvalue block: its metric `g_s` on the block coordinates and its `β_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeviCivitaBlock {
    /// Gram matrix of `g_s`; its size is the block size `|I_s|`.
    pub metric: Vec<Vec<String>>,
    pub beta: String,
}

/// Data of a Levi-Civita pair. Blocks occupy consecutive coordinates in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeviCivitaSpec {
    /// Coordinate names, `x1..xn` when absent.
    pub coords: Option<Vec<String>>,
    pub blocks: Vec<LeviCivitaBlock>,
    /// Defaults to the cube `[-1, 1]^n`.
    pub domain: Option<Domain>,
    /// Point where the `β_s` must be pairwise distinct; the domain centre when absent.
    pub base_point: Option<Vec<f64>>,
}

impl Default for LeviCivitaSpec {
    fn default() -> Self {
        LeviCivitaSpec {
            coords: None,
            blocks: vec![
                LeviCivitaBlock {
                    metric: vec![vec!["1".into()]],
                    beta: "1 + x1/10".into(),
                },
                LeviCivitaBlock {
                    metric: vec![vec!["1".into()]],
                    beta: "2 + x2/10".into(),
                },
            ],
            domain: None,
            base_point: None,
        }
    }
}

/// A constructed Levi-Civita pair together with the functions it was built from, all
/// expressed in the model coordinates.
#[derive(Debug, Clone)]
pub struct LeviCivitaPair {
    pub model: GeometryModel,
    pub betas: Vec<ScalarExpr>,
    /// `λ_s = β_s Π_l β_l`, the eigenvalue of the transition operator on block `s`.
    pub lambdas: Vec<ScalarExpr>,
    pub gammas: Vec<ScalarExpr>,
    /// Coordinate indices of each block.
    pub blocks: Vec<Vec<usize>>,
}

impl LeviCivitaPair {
    /// `λ_s` at `q`, one entry per coordinate in block order.
    pub fn eigenvalues_at(&self, q: &[f64]) -> Result<Vec<f64>, ConstructError> {
        let mut out = Vec::new();
        for (s, block) in self.blocks.iter().enumerate() {
            let v = eval_at(&self.lambdas[s], q, "lambda")?;
            out.extend(std::iter::repeat_n(v, block.len()));
        }
        Ok(out)
    }

    pub fn betas_at(&self, q: &[f64]) -> Result<Vec<f64>, ConstructError> {
        self.betas.iter().map(|b| eval_at(b, q, "beta")).collect()
    }
}

fn checkpoints(domain: &Domain) -> Vec<Vec<f64>> {
    let mut pts = domain.grid();
    pts.push(domain.center());
    pts
}

pub fn levi_civita_pair(spec: &LeviCivitaSpec) -> Result<LeviCivitaPair, ConstructError> {
    if spec.blocks.len() < 2 {
        return Err(ConstructError::Hypothesis("at least two blocks are needed".into()));
    }
    let n: usize = spec.blocks.iter().map(|b| b.metric.len()).sum();
    let coords: Vec<String> = match &spec.coords {
        Some(c) if c.len() != n => {
            return Err(super::params_err(
                "coords",
                format!("blocks cover {n} coordinates, {} names given", c.len()),
            ))
        }
        Some(c) => c.clone(),
        None => (1..=n).map(|i| format!("x{i}")).collect(),
    };
    let names: Vec<&str> = coords.iter().map(String::as_str).collect();
    let domain = spec.domain.clone().unwrap_or_else(|| Domain::cube(n, 1.0));
    domain.validate(n)?;

    let mut blocks = Vec::new();
    let mut metrics = Vec::new();
    let mut betas = Vec::new();
    let mut start = 0;
    for (s, b) in spec.blocks.iter().enumerate() {
        let size = b.metric.len();
        if size == 0 {
            return Err(super::params_err(format!("blocks[{s}].metric"), "empty block"));
        }
        let idx: Vec<usize> = (start..start + size).collect();
        start += size;
        let outside = |e: &ScalarExpr| e.vars().into_iter().find(|v| !idx.contains(v));
        let mut g = Vec::new();
        for (a, row) in b.metric.iter().enumerate() {
            if row.len() != size {
                return Err(super::params_err(
                    format!("blocks[{s}].metric[{a}]"),
                    format!("expected {size} entries, found {}", row.len()),
                ));
            }
            let mut r = Vec::new();
            for (c, src) in row.iter().enumerate() {
                let path = format!("blocks[{s}].metric[{a}][{c}]");
                let e = parse_at(src, &names, &path)?;
                if let Some(v) = outside(&e) {
                    return Err(super::params_err(path, format!("depends on `{}` outside the block", names[v])));
                }
                r.push(e);
            }
            g.push(r);
        }
        let path = format!("blocks[{s}].beta");
        let beta = parse_at(&b.beta, &names, &path)?;
        if let Some(v) = outside(&beta) {
            return Err(super::params_err(path, format!("depends on `{}` outside the block", names[v])));
        }
        if size > 1 && !beta.is_constant() {
            return Err(ConstructError::Hypothesis(format!(
                "beta of block {s} must be constant since the block has {size} coordinates"
            )));
        }
        blocks.push(idx);
        metrics.push(g);
        betas.push(beta);
    }

    let points = checkpoints(&domain);
    for (s, beta) in betas.iter().enumerate() {
        for p in &points {
            if !(eval_at(beta, p, "beta")? > 0.0) {
                return Err(ConstructError::Hypothesis(format!("beta of block {s} is not positive at {p:?}")));
            }
        }
    }
    let q0 = spec.base_point.clone().unwrap_or_else(|| domain.center());
    let b0: Vec<f64> = betas.iter().map(|b| eval_at(b, &q0, "beta")).collect::<Result<_, _>>()?;
    for s in 0..b0.len() {
        for l in s + 1..b0.len() {
            if (b0[s] - b0[l]).abs() <= 1e-12 * b0[s].abs().max(b0[l].abs()) {
                return Err(ConstructError::Hypothesis(format!(
                    "beta of blocks {s} and {l} coincide at the base point {q0:?}"
                )));
            }
        }
    }

    let nb = betas.len();
    let product = betas.iter().skip(1).fold(betas[0].clone(), |acc, b| acc * b);
    let mut gammas = Vec::with_capacity(nb);
    let mut lambdas = Vec::with_capacity(nb);
    for s in 0..nb {
        // |1/β_l − 1/β_s| with the sign fixed once over the domain
        let mut gamma: Option<ScalarExpr> = None;
        for l in (0..nb).filter(|&l| l != s) {
            let d = betas[l].recip() - betas[s].recip();
            let sign = constant_sign(&d, &points, &format!("1/beta_{} - 1/beta_{}", l + 1, s + 1))?;
            let factor = if sign > 0.0 { d } else { -d };
            gamma = Some(match gamma {
                None => factor,
                Some(g) => g * factor,
            });
        }
        gammas.push(gamma.expect("at least two blocks"));
        lambdas.push(&betas[s] * &product);
    }

    let zero = ScalarExpr::zero();
    let mut g1 = vec![vec![zero.clone(); n]; n];
    let mut g2 = vec![vec![zero; n]; n];
    for (s, idx) in blocks.iter().enumerate() {
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                let e = &gammas[s] * &metrics[s][a][b];
                g2[i][j] = &lambdas[s] * &e;
                g1[i][j] = e;
            }
        }
    }
    let model = GeometryModel::with_coordinate_frame(coords, g1, g2, domain)?;
    model.validate()?;
    Ok(LeviCivitaPair {
        model,
        betas,
        lambdas,
        gammas,
        blocks,
    })
}

pub fn build_levi_civita(spec: &LeviCivitaSpec) -> Result<GeometryModel, ConstructError> {
    Ok(levi_civita_pair(spec)?.model)
}

/// `β_s` from the distinct eigenvalues `λ_s` of the transition operator:
/// `β_s = λ_s^{N/(N+1)} Π_{l≠s} λ_l^{-1/(N+1)}`.
pub fn recover_betas(lambdas: &[f64]) -> Vec<f64> {
    let n = lambdas.len() as f64;
    let log_prod: f64 = lambdas.iter().map(|l| l.ln()).sum();
    lambdas
        .iter()
        .map(|l| (l.ln() - log_prod / (n + 1.0)).exp())
        .collect()
}

/// Surface pair in Dini coordinates `(x1, x2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiniSpec {
    /// `β1(x1)`.
    pub beta1: String,
    /// `β2(x2)`.
    pub beta2: String,
    pub domain: Option<Domain>,
}

impl Default for DiniSpec {
    fn default() -> Self {
        DiniSpec {
            beta1: "1 + x1/10".into(),
            beta2: "2 + x2/10".into(),
            domain: None,
        }
    }
}

/// `G1 = (1/β1 − 1/β2)(dx1² + dx2²)`, `G2 = β1β2(1/β1 − 1/β2)(β1 dx1² + β2 dx2²)`,
/// with `β1 < β2` on the whole domain.
pub fn build_dini(spec: &DiniSpec) -> Result<GeometryModel, ConstructError> {
    let names = ["x1", "x2"];
    let b1 = parse_at(&spec.beta1, &names, "beta1")?;
    let b2 = parse_at(&spec.beta2, &names, "beta2")?;
    if b1.depends_on(1) {
        return Err(super::params_err("beta1", "must depend on x1 only"));
    }
    if b2.depends_on(0) {
        return Err(super::params_err("beta2", "must depend on x2 only"));
    }
    let domain = spec.domain.clone().unwrap_or_else(|| Domain::cube(2, 1.0));
    domain.validate(2)?;
    for p in checkpoints(&domain) {
        let (v1, v2) = (eval_at(&b1, &p, "beta1")?, eval_at(&b2, &p, "beta2")?);
        if !(v1 > 0.0) {
            return Err(ConstructError::Hypothesis(format!("beta1 is not positive at {p:?}")));
        }
        if !(v1 < v2) {
            return Err(ConstructError::Hypothesis(format!("beta1 < beta2 fails at {p:?}")));
        }
    }
    let f = b1.recip() - b2.recip();
    let k = &b1 * &b2 * &f;
    let zero = ScalarExpr::zero();
    let g1 = vec![vec![f.clone(), zero.clone()], vec![zero.clone(), f]];
    let g2 = vec![vec![&k * &b1, zero.clone()], vec![zero, &k * &b2]];
    let model = GeometryModel::with_coordinate_frame(names.iter().map(|s| s.to_string()).collect(), g1, g2, domain)?;
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Metric;
    use crate::pair::transition_operator;

    fn block(metric: &[&[&str]], beta: &str) -> LeviCivitaBlock {
        LeviCivitaBlock {
            metric: metric.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
            beta: beta.into(),
        }
    }

    #[test]
    fn constant_two_block_pair() {
        let spec = LeviCivitaSpec {
            blocks: vec![block(&[&["1"]], "1"), block(&[&["1"]], "2")],
            ..Default::default()
        };
        let m = build_levi_civita(&spec).unwrap();
        let q = [0.3, -0.4];
        let g1 = m.gram_matrix(Metric::First, &q).unwrap();
        let g2 = m.gram_matrix(Metric::Second, &q).unwrap();
        assert_eq!(g1, nalgebra::DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]));
        assert_eq!(g2, nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]));
        let s = transition_operator(&m, &q).unwrap();
        assert!((s.eigenvalues[0] - 2.0).abs() < 1e-14 && (s.eigenvalues[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn hypotheses_are_enforced() {
        let equal = LeviCivitaSpec {
            blocks: vec![block(&[&["1"]], "2"), block(&[&["1"]], "2")],
            ..Default::default()
        };
        assert!(matches!(build_levi_civita(&equal), Err(ConstructError::Hypothesis(_))));
        let varying = LeviCivitaSpec {
            blocks: vec![block(&[&["1", "0"], &["0", "1"]], "1 + x1/10"), block(&[&["1"]], "3")],
            ..Default::default()
        };
        assert!(matches!(build_levi_civita(&varying), Err(ConstructError::Hypothesis(_))));
        let leaking = LeviCivitaSpec {
            blocks: vec![block(&[&["1 + x2^2"]], "1"), block(&[&["1"]], "3")],
            ..Default::default()
        };
        assert!(matches!(build_levi_civita(&leaking), Err(ConstructError::Params { .. })));
        let crossing = LeviCivitaSpec {
            blocks: vec![block(&[&["1"]], "2 + x1"), block(&[&["1"]], "2.5")],
            ..Default::default()
        };
        assert!(build_levi_civita(&crossing).is_err());
    }

    #[test]
    fn dini_agrees_with_levi_civita() {
        let dini = build_dini(&DiniSpec::default()).unwrap();
        let lc = build_levi_civita(&LeviCivitaSpec::default()).unwrap();
        for q in dini.domain().probe_points(5) {
            for metric in [Metric::First, Metric::Second] {
                let a = dini.gram_matrix(metric, &q).unwrap();
                let b = lc.gram_matrix(metric, &q).unwrap();
                assert!((a - b).abs().max() < 1e-12);
            }
        }
        let bad = DiniSpec {
            beta1: "2".into(),
            beta2: "2 + x2".into(),
            domain: None,
        };
        assert!(build_dini(&bad).is_err());
    }

    #[test]
    fn three_dimensional_pair_recovers_beta() {
        let spec = LeviCivitaSpec {
            blocks: vec![block(&[&["1 + x2^2/4", "0"], &["0", "1"]], "1.5"), block(&[&["2"]], "3 + x3/5")],
            ..Default::default()
        };
        let pair = levi_civita_pair(&spec).unwrap();
        for q in [[0.2, -0.3, 0.5], [-0.9, 0.1, -0.7]] {
            let s = transition_operator(&pair.model, &q).unwrap();
            let want = pair.eigenvalues_at(&q).unwrap();
            for (a, b) in s.eigenvalues.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10 * b);
            }
            let distinct: Vec<f64> = s.clusters.iter().map(|c| s.eigenvalues[c[0]]).collect();
            let beta = recover_betas(&distinct);
            let want = pair.betas_at(&q).unwrap();
            for (a, b) in beta.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10 * b);
            }
        }
    }
}
