//! Dormand–Prince 5(4) with embedded error control.
//!
//! Only accepted steps are recorded. An optional hook runs after every
//! accepted step and may move the state (manifold or fiber projection).

use serde::{Deserialize, Serialize};

use crate::vecops::{norm, Vector};

/// Adaptive step controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepControls {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// A step size below this (while more than this remains) is an underflow.
    pub min_step: f64,
    pub initial_step: Option<f64>,
    pub max_step: Option<f64>,
}

impl Default for StepControls {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_steps: 100_000,
            min_step: 1e-14,
            initial_step: None,
            max_step: None,
        }
    }
}

/// How an integration ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Stop<E> {
    Completed,
    StepUnderflow,
    MaxSteps,
    /// The right-hand side or the step hook failed.
    Failed(E),
}

#[derive(Debug, Clone)]
pub struct Path<E> {
    pub times: Vec<f64>,
    pub points: Vec<Vector>,
    pub stop: Stop<E>,
    pub rejected: usize,
    pub evaluations: usize,
}

impl<E> Path<E> {
    pub fn last_point(&self) -> &[f64] {
        self.points
            .last()
            .expect("path always holds the initial point")
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th-order weights minus embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

fn combine(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vector {
    let mut out = y.to_vec();
    for (c, k) in terms {
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += h * c * v;
        }
    }
    out
}

/// Integrates `x' = rhs(t, x)` over `t_span` without a step hook.
pub fn integrate_field<E, F>(
    rhs: F,
    x0: &[f64],
    t_span: (f64, f64),
    controls: &StepControls,
) -> Path<E>
where
    F: FnMut(f64, &[f64]) -> Result<Vector, E>,
{
    integrate_with_hook(rhs, x0, t_span, controls, |_, _| Ok(false))
}

/// Integrates `x' = rhs(t, x)`; after each accepted step `hook(t, &mut x)`
/// may correct the state and must report whether it changed it.
pub fn integrate_with_hook<E, F, H>(
    mut rhs: F,
    x0: &[f64],
    (t0, t1): (f64, f64),
    controls: &StepControls,
    mut hook: H,
) -> Path<E>
where
    F: FnMut(f64, &[f64]) -> Result<Vector, E>,
    H: FnMut(f64, &mut Vector) -> Result<bool, E>,
{
    let mut path = Path {
        times: vec![t0],
        points: vec![x0.to_vec()],
        stop: Stop::Completed,
        rejected: 0,
        evaluations: 0,
    };
    let span = t1 - t0;
    if span == 0.0 {
        return path;
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = x0.to_vec();
    let mut eval = |t: f64, y: &[f64], count: &mut usize| {
        *count += 1;
        rhs(t, y)
    };

    let mut k1 = match eval(t, &y, &mut path.evaluations) {
        Ok(k) => k,
        Err(e) => {
            path.stop = Stop::Failed(e);
            return path;
        }
    };

    let scale = |a: &[f64], b: &[f64]| controls.atol + controls.rtol * norm(a).max(norm(b));
    let max_step = controls.max_step.unwrap_or(span.abs());
    let mut h = match controls.initial_step {
        Some(h0) => h0.abs(),
        None => {
            let d0 = norm(&y) / scale(&y, &y);
            let d1 = norm(&k1) / scale(&y, &y);
            if d0 < 1e-5 || d1 < 1e-5 {
                1e-6 * span.abs()
            } else {
                0.01 * d0 / d1
            }
        }
    }
    .min(max_step)
    .min(span.abs());

    let mut accepted = 0usize;
    let mut last_rejected = false;
    loop {
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        if accepted >= controls.max_steps {
            path.stop = Stop::MaxSteps;
            break;
        }
        let final_step = h >= remaining;
        if final_step {
            h = remaining;
        } else if h < controls.min_step {
            path.stop = Stop::StepUnderflow;
            break;
        }
        let hs = h * dir;

        macro_rules! stage {
            ($tc:expr, $terms:expr) => {
                match eval(
                    t + $tc * hs,
                    &combine(&y, hs, $terms),
                    &mut path.evaluations,
                ) {
                    Ok(k) => k,
                    Err(e) => {
                        path.stop = Stop::Failed(e);
                        return path;
                    }
                }
            };
        }
        let k2 = stage!(C2, &[(A21, &k1)]);
        let k3 = stage!(C3, &[(A31, &k1), (A32, &k2)]);
        let k4 = stage!(C4, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        let k5 = stage!(C5, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        let k6 = stage!(
            1.0,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]
        );
        let y_new = combine(
            &y,
            hs,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = stage!(
            1.0,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]
        );

        let err_vec = combine(
            &vec![0.0; y.len()],
            hs,
            &[
                (E1, &k1),
                (E3, &k3),
                (E4, &k4),
                (E5, &k5),
                (E6, &k6),
                (E7, &k7),
            ],
        );
        let err = norm(&err_vec) / scale(&y, &y_new);
        if !err.is_finite() {
            path.rejected += 1;
            h *= FAC_MIN;
            last_rejected = true;
            continue;
        }

        if err <= 1.0 {
            t = if final_step { t1 } else { t + hs };
            y = y_new;
            accepted += 1;
            let moved = match hook(t, &mut y) {
                Ok(m) => m,
                Err(e) => {
                    path.times.push(t);
                    path.points.push(y);
                    path.stop = Stop::Failed(e);
                    return path;
                }
            };
            path.times.push(t);
            path.points.push(y.clone());
            if moved {
                k1 = match eval(t, &y, &mut path.evaluations) {
                    Ok(k) => k,
                    Err(e) => {
                        if t == t1 {
                            break;
                        }
                        path.stop = Stop::Failed(e);
                        return path;
                    }
                };
            } else {
                k1 = k7;
            }
            let mut fac = if err == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };
            if last_rejected {
                fac = fac.min(1.0);
            }
            last_rejected = false;
            if !final_step {
                h = (h * fac).min(max_step);
            }
        } else {
            path.rejected += 1;
            h *= (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0);
            last_rejected = true;
        }
    }
    path
}
