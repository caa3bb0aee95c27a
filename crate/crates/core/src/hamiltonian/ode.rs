//! Dormand–Prince 5(4) with error-per-unit-step control.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Local error bound per unit of integration time.
    pub tol: f64,
    /// Largest step, in units of the flow parameter.
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            tol: 1e-10,
            max_step: 1e-2,
            min_step: 1e-13,
            max_steps: 2_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tol(tol: f64) -> Self {
        IntegratorConfig {
            tol,
            ..Default::default()
        }
    }
}

pub(crate) struct OdeSolution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub clipped: bool,
}

pub(crate) enum OdeFailure<E> {
    Rhs(E),
    Underflow { t: f64, last: Option<E> },
    Budget,
}

const A: [&[f64]; 7] = [
    &[],
    &[0.2],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates the autonomous system `y' = rhs(y)` from `t = 0` to `t_end` (either sign).
/// Stops early, keeping the last sample inside, when `inside` rejects an accepted state.
pub(crate) fn dopri5<E, F, I>(
    mut rhs: F,
    inside: I,
    y0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<OdeSolution, OdeFailure<E>>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<(), E>,
    I: Fn(&[f64]) -> bool,
{
    let dim = y0.len();
    let dir = if t_end < 0.0 { -1.0 } else { 1.0 };
    let span = t_end.abs();
    let mut out = OdeSolution {
        t: vec![0.0],
        y: vec![y0.to_vec()],
        clipped: false,
    };
    if span == 0.0 {
        return Ok(out);
    }
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    rhs(y0, &mut k[0]).map_err(OdeFailure::Rhs)?;
    let mut y = y0.to_vec();
    let mut t = 0.0f64;
    let mut h = cfg.max_step.min(span).min(1e-3);
    let mut stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut last_err: Option<E> = None;
    let mut steps = 0usize;
    while t < span {
        steps += 1;
        if steps > cfg.max_steps {
            return Err(OdeFailure::Budget);
        }
        if h < cfg.min_step {
            return Err(OdeFailure::Underflow {
                t: dir * t,
                last: last_err,
            });
        }
        let last_step = t + h >= span;
        if last_step {
            h = span - t;
        }
        let hs = dir * h;
        let mut failed = false;
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, a) in A[s].iter().enumerate() {
                    acc += a * k[j][i];
                }
                stage[i] = y[i] + hs * acc;
            }
            if let Err(e) = rhs(&stage, &mut k[s]) {
                last_err = Some(e);
                failed = true;
                break;
            }
        }
        if failed {
            h *= 0.25;
            continue;
        }
        y_new.copy_from_slice(&stage);
        let mut err: f64 = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for (j, ej) in E.iter().enumerate() {
                e += ej * k[j][i];
            }
            let scale = y[i].abs().max(y_new[i].abs()).max(1.0);
            err = err.max((hs * e).abs() / scale);
        }
        if !err.is_finite() {
            h *= 0.25;
            continue;
        }
        let bound = cfg.tol * h;
        if err <= bound {
            if !inside(&y_new) {
                out.clipped = true;
                return Ok(out);
            }
            t = if last_step { span } else { t + h };
            y.copy_from_slice(&y_new);
            let k7 = k[6].clone();
            k[0].copy_from_slice(&k7);
            out.t.push(dir * t);
            out.y.push(y.clone());
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * (bound / err).powf(0.25)).clamp(0.2, 5.0)
            };
            h = (h * factor).min(cfg.max_step);
        } else {
            let factor = (0.9 * (bound / err).powf(0.25)).clamp(0.1, 0.9);
            h *= factor;
        }
    }
    Ok(out)
}
