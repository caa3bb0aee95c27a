use std::io::Write;

use serde::Serialize;

use super::CovectorPoint;
use crate::geometry::Metric;

/// Samples of an integrated extremal at the accepted integrator steps.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub samples: Vec<CovectorPoint>,
    pub h_values: Vec<f64>,
    pub metric: Metric,
    /// Set when the run stopped at the domain boundary before reaching the requested time.
    pub clipped: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> &CovectorPoint {
        self.samples.last().expect("a trajectory holds its initial point")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("a trajectory holds its initial time")
    }

    pub fn positions(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.iter().map(|s| s.q.as_slice())
    }

    /// Largest `|h(λ_t) − h(λ_0)|`.
    pub fn energy_drift(&self) -> f64 {
        let h0 = self.h_values[0];
        self.h_values.iter().fold(0.0, |a, h| a.max((h - h0).abs()))
    }

    /// CSV with columns `t, q_1..q_n, p_1..p_n, h`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let n = self.samples.first().map_or(0, CovectorPoint::dim);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("q_{i}")));
        header.extend((1..=n).map(|i| format!("p_{i}")));
        header.push("h".into());
        w.write_record(&header)?;
        for ((t, s), h) in self.times.iter().zip(&self.samples).zip(&self.h_values) {
            let mut row = Vec::with_capacity(2 * n + 2);
            row.push(format!("{t:e}"));
            row.extend(s.q.iter().map(|x| format!("{x:e}")));
            row.extend(s.p.iter().map(|x| format!("{x:e}")));
            row.push(format!("{h:e}"));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is ascii")
    }
}
