use serde::Serialize;
use serde_json::Value;

use crate::geometry::{classify_distribution, DistributionKind, GeometryModel};
use crate::pair::{
    first_divisibility, regularity_probe_with_tol, relations_cor, second_divisibility, transition_operator_with_tol,
    AdaptedFrame, FirstDivisibility, PairError, RegularityReport, RelationsReport, SecondDivisibility,
    TransitionSpectrum,
};

pub const SCHEMA: &str = "geoequiv-report/1";

/// Envelope shared by every command's machine-readable output.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub config: Value,
    pub result: Value,
}

impl Report {
    pub fn new(command: &str, config: Value, result: Value) -> Self {
        Report {
            schema: SCHEMA,
            command: command.to_string(),
            config,
            result,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }

    /// `key: value` lines; arrays of objects are summarised by their length.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} ({})\n", self.command, self.schema);
        flatten("", &self.result, &mut out);
        out
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Array(items) if items.iter().any(|x| x.is_object()) => {
            out.push_str(&format!("{prefix}: [{} entries]\n", items.len()));
        }
        other => out.push_str(&format!("{prefix}: {other}\n")),
    }
}

#[derive(Debug, Serialize)]
pub struct Analysis {
    pub q: Vec<f64>,
    pub dim: usize,
    pub rank: usize,
    pub distribution: DistributionKind,
    pub spectrum: TransitionSpectrum,
    pub regularity: RegularityReport,
    /// `α_i²` in the adapted frame, absent when the frame cannot be built here.
    pub alpha2: Option<Vec<f64>>,
    pub first_divisibility: Option<FirstDivisibility>,
    pub second_divisibility: Option<SecondDivisibility>,
    pub relations: Option<RelationsReport>,
    pub relations_max: Option<f64>,
    pub notes: Vec<String>,
}

pub fn analyze(
    model: &GeometryModel,
    q: &[f64],
    radius: f64,
    tol: f64,
    cluster_tol: f64,
) -> Result<Analysis, PairError> {
    if q.len() != model.dim() {
        return Err(PairError::Argument(format!(
            "--at needs {} coordinates, found {}",
            model.dim(),
            q.len()
        )));
    }
    let spectrum = transition_operator_with_tol(model, q, cluster_tol)?;
    let regularity = regularity_probe_with_tol(model, q, radius, cluster_tol)?;
    let distribution = classify_distribution(model)?.kind;
    let mut a = Analysis {
        q: q.to_vec(),
        dim: model.dim(),
        rank: model.rank(),
        distribution,
        spectrum,
        regularity,
        alpha2: None,
        first_divisibility: None,
        second_divisibility: None,
        relations: None,
        relations_max: None,
        notes: Vec::new(),
    };
    let pt = match AdaptedFrame::with_tol(model, q, cluster_tol).and_then(|f| f.at(q)) {
        Ok(pt) => pt,
        Err(e) => {
            a.notes.push(format!("adapted frame unavailable: {e}"));
            return Ok(a);
        }
    };
    a.alpha2 = Some(pt.alpha2.to_vec());
    let rel = relations_cor(&pt);
    a.relations_max = Some(rel.max_residual());
    a.relations = Some(rel);
    a.first_divisibility = Some(first_divisibility(model, &pt, tol)?);
    if model.corank() == 1 {
        a.second_divisibility = Some(second_divisibility(&pt, tol)?);
    }
    Ok(a)
}

#[derive(Debug, Serialize)]
pub struct PointCheck {
    pub q: Vec<f64>,
    pub first_holds: Option<bool>,
    pub first_residual: Option<f64>,
    pub second_holds: Option<bool>,
    pub relations_max: Option<f64>,
    pub skipped: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct RelationsSummary {
    pub distribution: DistributionKind,
    pub points: usize,
    pub evaluated: usize,
    pub skipped: usize,
    pub first_holds: usize,
    pub second_holds: Option<usize>,
    pub max_first_residual: f64,
    pub max_relations_residual: f64,
    pub records: Vec<PointCheck>,
}

pub fn check_relations(
    model: &GeometryModel,
    points: &[Vec<f64>],
    tol: f64,
    distribution: DistributionKind,
) -> Result<RelationsSummary, PairError> {
    let corank1 = model.corank() == 1;
    let mut s = RelationsSummary {
        distribution,
        points: points.len(),
        evaluated: 0,
        skipped: 0,
        first_holds: 0,
        second_holds: corank1.then_some(0),
        max_first_residual: 0.0,
        max_relations_residual: 0.0,
        records: Vec::with_capacity(points.len()),
    };
    for q in points {
        if q.len() != model.dim() {
            return Err(PairError::Argument(format!(
                "point needs {} coordinates, found {}",
                model.dim(),
                q.len()
            )));
        }
        let mut rec = PointCheck {
            q: q.clone(),
            first_holds: None,
            first_residual: None,
            second_holds: None,
            relations_max: None,
            skipped: None,
        };
        let pt = match AdaptedFrame::new(model, q).and_then(|f| f.at(q)) {
            Ok(pt) => pt,
            Err(PairError::Model(e)) => return Err(PairError::Model(e)),
            Err(e) => {
                rec.skipped = Some(e.to_string());
                s.skipped += 1;
                s.records.push(rec);
                continue;
            }
        };
        s.evaluated += 1;
        let rel = relations_cor(&pt).max_residual();
        s.max_relations_residual = s.max_relations_residual.max(rel);
        rec.relations_max = Some(rel);
        let first = first_divisibility(model, &pt, tol)?;
        s.max_first_residual = s.max_first_residual.max(first.residual);
        if first.holds {
            s.first_holds += 1;
        }
        rec.first_holds = Some(first.holds);
        rec.first_residual = Some(first.residual);
        if corank1 {
            let second = second_divisibility(&pt, tol)?;
            if second.holds {
                *s.second_holds.as_mut().expect("corank 1") += 1;
            }
            rec.second_holds = Some(second.holds);
        }
        s.records.push(rec);
    }
    Ok(s)
}
