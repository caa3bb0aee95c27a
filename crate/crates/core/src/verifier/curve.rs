//! Distances from points to an integrated curve.

use nalgebra::DVector;

/// Piecewise cubic Hermite curve through trajectory samples with their velocities.
pub struct HermiteCurve {
    times: Vec<f64>,
    points: Vec<DVector<f64>>,
    velocities: Vec<DVector<f64>>,
}

/// Segments refined exactly per query, chosen by chord distance.
const CANDIDATES: usize = 4;

impl HermiteCurve {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>, velocities: Vec<Vec<f64>>) -> Self {
        HermiteCurve {
            times,
            points: points.into_iter().map(DVector::from_vec).collect(),
            velocities: velocities.into_iter().map(DVector::from_vec).collect(),
        }
    }

    fn segment(&self, k: usize) -> [DVector<f64>; 4] {
        let dt = self.times[k + 1] - self.times[k];
        let (p0, p1) = (&self.points[k], &self.points[k + 1]);
        let (m0, m1) = (&self.velocities[k] * dt, &self.velocities[k + 1] * dt);
        // power basis c0 + c1 s + c2 s² + c3 s³
        let c2 = (p1 - p0) * 3.0 - &m0 * 2.0 - &m1;
        let c3 = (p0 - p1) * 2.0 + &m0 + &m1;
        [p0.clone(), m0, c2, c3]
    }

    fn segment_distance(&self, k: usize, x: &DVector<f64>) -> f64 {
        let [c0, c1, c2, c3] = self.segment(k);
        let at = |s: f64| &c0 + &c1 * s + &c2 * (s * s) + &c3 * (s * s * s);
        let d1 = |s: f64| &c1 + &c2 * (2.0 * s) + &c3 * (3.0 * s * s);
        let d2 = |s: f64| &c2 * 2.0 + &c3 * (6.0 * s);
        let f = |s: f64| (at(s) - x).norm_squared();
        let mut best = (0.0, f(0.0));
        for i in 1..=16 {
            let s = i as f64 / 16.0;
            let v = f(s);
            if v < best.1 {
                best = (s, v);
            }
        }
        let mut s = best.0;
        for _ in 0..30 {
            let r = at(s) - x;
            let g = r.dot(&d1(s));
            let h = d1(s).norm_squared() + r.dot(&d2(s));
            if !(h > 0.0) {
                break;
            }
            let next = (s - g / h).clamp(0.0, 1.0);
            if (next - s).abs() < 1e-15 {
                s = next;
                break;
            }
            s = next;
        }
        f(s).min(best.1).sqrt()
    }

    /// Euclidean chart distance from `x` to the curve.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        if self.points.len() == 1 {
            return (&self.points[0] - &x).norm();
        }
        let mut chord: Vec<(f64, usize)> = (0..self.points.len() - 1)
            .map(|k| (segment_point_distance(&self.points[k], &self.points[k + 1], &x), k))
            .collect();
        chord.sort_by(|a, b| a.0.total_cmp(&b.0));
        chord
            .iter()
            .take(CANDIDATES)
            .map(|&(_, k)| self.segment_distance(k, &x))
            .fold(f64::INFINITY, f64::min)
    }
}

fn segment_point_distance(a: &DVector<f64>, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = if len2 > 0.0 { ((x - a).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a + d * t - x).norm()
}

/// Largest distance of the points from the segment joining the first and last one.
pub fn chord_deviation<'a>(points: impl IntoIterator<Item = &'a [f64]>) -> f64 {
    let pts: Vec<DVector<f64>> = points.into_iter().map(DVector::from_column_slice).collect();
    let (Some(a), Some(b)) = (pts.first(), pts.last()) else {
        return 0.0;
    };
    pts.iter().map(|x| segment_point_distance(a, b, x)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_distance_is_accurate() {
        // unit circle sampled every 0.1 rad; Hermite error is O(h⁴)
        let ts: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
        let pts = ts.iter().map(|t| vec![t.cos(), t.sin()]).collect();
        let vel = ts.iter().map(|t| vec![-t.sin(), t.cos()]).collect();
        let c = HermiteCurve::new(ts, pts, vel);
        for th in [0.05f64, 0.77, 1.33] {
            let x = [th.cos(), th.sin()];
            assert!(c.distance(&x) < 1e-6, "{}", c.distance(&x));
            let y = [1.1 * th.cos(), 1.1 * th.sin()];
            assert!((c.distance(&y) - 0.1).abs() < 1e-6);
        }
    }

    #[test]
    fn chord() {
        let pts = [vec![0.0, 0.0], vec![0.5, 0.1], vec![1.0, 0.0]];
        assert!((chord_deviation(pts.iter().map(|p| p.as_slice())) - 0.1).abs() < 1e-15);
    }
}
