use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Annular restriction in the first two coordinates, centred at their origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub r_min: f64,
    pub r_max: f64,
}

/// Coordinate box, optionally intersected with an annulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annulus: Option<Annulus>,
}

const PROBE_GRID_CAP: usize = 625;
const PROBE_RANDOM: usize = 50;

impl Domain {
    pub fn boxed(min: Vec<f64>, max: Vec<f64>) -> Self {
        Domain {
            min,
            max,
            annulus: None,
        }
    }

    pub fn cube(n: usize, half_width: f64) -> Self {
        Domain::boxed(vec![-half_width; n], vec![half_width; n])
    }

    /// Square `[-r_max, r_max]^2` cut down to the annulus `r_min <= r <= r_max`.
    pub fn annulus(r_min: f64, r_max: f64) -> Self {
        Domain {
            min: vec![-r_max; 2],
            max: vec![r_max; 2],
            annulus: Some(Annulus { r_min, r_max }),
        }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn validate(&self, n: usize) -> Result<(), ModelError> {
        if self.min.len() != n {
            return Err(ModelError::invalid(
                "domain.min",
                format!("expected {n} entries, found {}", self.min.len()),
            ));
        }
        if self.max.len() != n {
            return Err(ModelError::invalid(
                "domain.max",
                format!("expected {n} entries, found {}", self.max.len()),
            ));
        }
        for k in 0..n {
            if !(self.min[k].is_finite() && self.max[k].is_finite() && self.min[k] < self.max[k]) {
                return Err(ModelError::invalid(
                    format!("domain.max[{k}]"),
                    format!("need finite min < max, found [{}, {}]", self.min[k], self.max[k]),
                ));
            }
        }
        if let Some(a) = self.annulus {
            if n < 2 {
                return Err(ModelError::invalid("domain.annulus", "needs at least two coordinates"));
            }
            if !(a.r_min > 0.0 && a.r_min < a.r_max && a.r_max.is_finite()) {
                return Err(ModelError::invalid(
                    "domain.annulus",
                    format!("need 0 < r_min < r_max, found [{}, {}]", a.r_min, a.r_max),
                ));
            }
            if self.sample_with(&mut ChaCha8Rng::seed_from_u64(0), 1.0).is_none() {
                return Err(ModelError::invalid("domain.annulus", "does not meet the coordinate box"));
            }
        }
        Ok(())
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        if q.len() != self.dim() {
            return false;
        }
        let in_box = q
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi);
        in_box
            && self.annulus.is_none_or(|a| {
                let r = q[0].hypot(q[1]);
                r >= a.r_min && r <= a.r_max
            })
    }

    /// A representative interior point.
    pub fn center(&self) -> Vec<f64> {
        let mut c: Vec<f64> = self.min.iter().zip(&self.max).map(|(a, b)| 0.5 * (a + b)).collect();
        if let Some(a) = self.annulus {
            if !self.contains(&c) {
                c[0] = 0.5 * (a.r_min + a.r_max);
                c[1] = 0.0;
            }
        }
        c
    }

    /// Smallest half-width of the box, a length scale for the chart.
    pub fn scale(&self) -> f64 {
        let w = self
            .min
            .iter()
            .zip(&self.max)
            .map(|(a, b)| 0.5 * (b - a))
            .fold(f64::INFINITY, f64::min);
        match self.annulus {
            Some(a) => w.min(0.5 * (a.r_max - a.r_min)),
            None => w,
        }
    }

    /// Regular grid with at most 625 points, filtered to the domain.
    pub fn grid(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut per_axis = 5usize;
        while per_axis > 2 && per_axis.pow(n as u32) > PROBE_GRID_CAP {
            per_axis -= 1;
        }
        let total = per_axis.pow(n as u32);
        let mut out = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let q: Vec<f64> = (0..n)
                .map(|k| {
                    let t = (rem % per_axis) as f64 / (per_axis - 1) as f64;
                    rem /= per_axis;
                    self.min[k] + t * (self.max[k] - self.min[k])
                })
                .collect();
            if self.contains(&q) {
                out.push(q);
            }
        }
        out
    }

    /// Probe set: the regular grid plus 50 seeded uniform points.
    pub fn probe_points(&self, seed: u64) -> Vec<Vec<f64>> {
        let mut pts = self.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..PROBE_RANDOM {
            if let Some(q) = self.sample(&mut rng) {
                pts.push(q);
            }
        }
        pts
    }

    /// Uniform sample of the domain by rejection.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Option<Vec<f64>> {
        self.sample_with(rng, 1.0)
    }

    /// Uniform sample of the inner half: the box shrunk by half about its centre, and for
    /// annuli the central half of the radial band.
    pub fn sample_inner<R: Rng>(&self, rng: &mut R) -> Option<Vec<f64>> {
        self.sample_with(rng, 0.5)
    }

    fn sample_with<R: Rng>(&self, rng: &mut R, fraction: f64) -> Option<Vec<f64>> {
        let n = self.dim();
        let (lo, hi): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|k| {
                let c = 0.5 * (self.min[k] + self.max[k]);
                let h = 0.5 * fraction * (self.max[k] - self.min[k]);
                (c - h, c + h)
            })
            .unzip();
        let band = self.annulus.map(|a| {
            let c = 0.5 * (a.r_min + a.r_max);
            let h = 0.5 * fraction * (a.r_max - a.r_min);
            (c - h, c + h)
        });
        for _ in 0..10_000 {
            let mut q: Vec<f64> = (0..n).map(|k| rng.random_range(lo[k]..=hi[k])).collect();
            if let Some((r0, r1)) = band {
                let r = (r0 * r0 + rng.random::<f64>() * (r1 * r1 - r0 * r0)).sqrt();
                let th = rng.random_range(0.0..std::f64::consts::TAU);
                q[0] = r * th.cos();
                q[1] = r * th.sin();
                if !self.contains(&q) {
                    continue;
                }
            }
            return Some(q);
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(Domain::cube(2, 1.0).grid().len(), 25);
        assert_eq!(Domain::cube(4, 1.0).grid().len(), 625);
        assert_eq!(Domain::cube(5, 1.0).grid().len(), 243);
        assert_eq!(Domain::cube(3, 1.0).probe_points(0).len(), 175);
    }

    #[test]
    fn annulus_samples_stay_in_band() {
        let d = Domain::annulus(0.1, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let q = d.sample_inner(&mut rng).unwrap();
            let r = q[0].hypot(q[1]);
            assert!((0.175..=0.325).contains(&r));
        }
        assert!(d.contains(&d.center()));
        assert!(d.grid().iter().all(|q| d.contains(q)));
    }

    #[test]
    fn validation_paths() {
        let d = Domain::boxed(vec![0.0, 1.0], vec![1.0, 0.5]);
        match d.validate(2) {
            Err(ModelError::Invalid { path, .. }) => assert_eq!(path, "domain.max[1]"),
            other => panic!("{other:?}"),
        }
        assert!(Domain::cube(3, 1.0).validate(2).is_err());
    }
}
