//! Local searches on spheres and on sphere ∩ level-set intersections.

use rayon::prelude::*;

use super::VANISHING;
use crate::expr::{Dual, ExprError, Expression, Scalar};
use crate::geometry::scaled_residual_raw;
use crate::vecops::{axpy, dot, norm, norm2, reject, scale, Vector};

/// Floor inside logarithmic objectives.
const LOG_FLOOR: f64 = 1e-300;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

/// What the sweep minimizes and records.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Target<'a> {
    /// `ln ‖∇f‖²` on spheres; records `‖x‖·‖∇f(x)‖`.
    Malgrange { f: &'a Expression },
    /// `ln ‖∇_g f‖²` on `{g = level} ∩ sphere`; records `‖x‖·‖∇_g f(x)‖`.
    Fiber {
        f: &'a Expression,
        g: &'a Expression,
        level: f64,
    },
    /// Scaled Milnor residual on `{g = 0} ∩ sphere`; records that residual.
    Milnor {
        f: &'a Expression,
        g: &'a Expression,
    },
}

impl<'a> Target<'a> {
    pub(crate) fn f(&self) -> &'a Expression {
        match *self {
            Target::Malgrange { f } | Target::Fiber { f, .. } | Target::Milnor { f, .. } => f,
        }
    }

    pub(crate) fn constraint(&self) -> Option<(&'a Expression, f64)> {
        match *self {
            Target::Malgrange { .. } => None,
            Target::Fiber { g, level, .. } => Some((g, level)),
            Target::Milnor { g, .. } => Some((g, 0.0)),
        }
    }

    fn objective<T: Scalar>(&self, x: &[T]) -> Result<T, ExprError> {
        match *self {
            Target::Malgrange { f } => {
                let (_, gf) = f.value_and_grad_generic(x)?;
                Ok((norm2(&gf) + T::from_f64(LOG_FLOOR)).ln())
            }
            Target::Fiber { f, g, .. } => {
                let (_, gf) = f.value_and_grad_generic(x)?;
                let (_, gg) = g.value_and_grad_generic(x)?;
                Ok((norm2(&reject(&gf, &gg)) + T::from_f64(LOG_FLOOR)).ln())
            }
            Target::Milnor { f, g } => {
                let (_, gf) = f.value_and_grad_generic(x)?;
                let (_, gg) = g.value_and_grad_generic(x)?;
                Ok((scaled_residual_raw(&gf, &gg, x) + T::from_f64(LOG_FLOOR)).ln())
            }
        }
    }

    /// The recorded quantity whose decay (or smallness) witnesses a value,
    /// and whether it is zero up to rounding.
    pub(crate) fn quantity(&self, x: &[f64]) -> Result<(f64, bool), ExprError> {
        let r = norm(x);
        match *self {
            Target::Malgrange { f } => {
                let q = r * norm(&f.grad(x)?);
                Ok((q, q == 0.0))
            }
            Target::Fiber { f, g, .. } => {
                let gf = f.grad(x)?;
                let gg = g.grad(x)?;
                let t = norm(&reject(&gf, &gg));
                Ok((r * t, t <= VANISHING * norm(&gf)))
            }
            Target::Milnor { f, g } => {
                let gf = f.grad(x)?;
                let gg = g.grad(x)?;
                let t = norm(&reject(&gf, &gg));
                let q = scaled_residual_raw(&gf, &gg, x).clamp(0.0, 1.0);
                Ok((q, t <= VANISHING * norm(&gf)))
            }
        }
    }

    fn value(&self, x: &[f64], evals: &mut u64) -> Result<f64, ExprError> {
        *evals += 1;
        self.objective(x)
    }

    fn value_and_gradient(&self, x: &[f64], evals: &mut u64) -> Result<(f64, Vector), ExprError> {
        *evals += x.len() as u64;
        let mut seeded: Vec<Dual<f64>> = x.iter().map(|&v| Dual::constant(v)).collect();
        let mut value = 0.0;
        let mut grad = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            seeded[i].eps = 1.0;
            let out = self.objective(&seeded)?;
            seeded[i].eps = 0.0;
            value = out.re;
            grad.push(out.eps);
        }
        Ok((value, grad))
    }
}

/// Gauss–Newton onto `{g = level, ‖x‖ = r}` with the minimum-norm step of
/// the 2×2 normal equations. `None` when the system is singular (`x ∥ ∇g`),
/// an evaluation fails, or the tolerance is not reached.
pub(crate) fn project_to_intersection(
    g: &Expression,
    level: f64,
    r: f64,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Option<Vector> {
    let residuals = |x: &[f64]| -> Option<(f64, Vector)> {
        let (gv, gg) = g.value_and_grad(x).ok()?;
        let f0 = gv - level;
        let f1 = (norm2(x) - r * r) / (2.0 * r);
        let size = f0.abs().max(f1.abs() / r.max(1.0));
        let a = norm2(&gg);
        let b = dot(&gg, x) / r;
        let c = norm2(x) / (r * r);
        let det = a * c - b * b;
        if !(det > 1e-14 * a * c) || !size.is_finite() {
            return None;
        }
        let y0 = (c * f0 - b * f1) / det;
        let y1 = (a * f1 - b * f0) / det;
        let next = x
            .iter()
            .zip(&gg)
            .map(|(xi, gi)| xi - (y0 * gi + y1 * xi / r))
            .collect();
        Some((size, next))
    };
    let mut x = x0.to_vec();
    for _ in 0..max_iter {
        let (size, next) = residuals(&x)?;
        if size <= tol {
            // one polishing step, kept only if it helps
            if let Some((after, _)) = residuals(&next) {
                if after < size {
                    x = next;
                }
            }
            return Some(x);
        }
        x = next;
    }
    None
}

pub(crate) const PROJECTION_TOL: f64 = 1e-10;
pub(crate) const PROJECTION_ITERS: usize = 50;

fn retract(target: &Target, x: &[f64], r: f64) -> Option<Vector> {
    match target.constraint() {
        None => {
            let n = norm(x);
            (n > 0.0 && n.is_finite()).then(|| scale(r / n, x))
        }
        Some((g, level)) => {
            project_to_intersection(g, level, r, x, PROJECTION_TOL, PROJECTION_ITERS)
        }
    }
}

/// Component of `v` tangent to the sphere through `x` and, when there is a
/// constraint, to its level set.
fn tangent(target: &Target, x: &[f64], v: &[f64]) -> Option<Vector> {
    let on_sphere = reject(v, x);
    match target.constraint() {
        None => Some(on_sphere),
        Some((g, _)) => {
            let gg = g.grad(x).ok()?;
            let normal = reject(&gg, x);
            if norm2(&normal) <= 1e-28 * norm2(&gg) {
                return None;
            }
            Some(reject(&on_sphere, &normal))
        }
    }
}

/// Outcome of one local search.
#[derive(Debug, Clone)]
pub(crate) enum Probe {
    Found(Found),
    /// An evaluation failed (domain guard) before a point was found.
    Skipped,
    /// No point of the constraint set near the seed.
    ProjectionFailed,
}

#[derive(Debug, Clone)]
pub(crate) struct Found {
    pub x: Vector,
    pub f: f64,
    pub quantity: f64,
    pub vanishing: bool,
    pub objective: f64,
}

/// Projected gradient descent with Armijo backtracking, retracting onto the
/// sphere of radius `r` (intersected with the constraint, if any).
pub(crate) fn descend(
    target: &Target,
    start: &[f64],
    r: f64,
    iters: usize,
    evals: &mut u64,
) -> Probe {
    let Some(mut x) = retract(target, start, r) else {
        return Probe::ProjectionFailed;
    };
    let Ok((mut v, mut grad)) = target.value_and_gradient(&x, evals) else {
        return Probe::Skipped;
    };
    if !v.is_finite() {
        return Probe::Skipped;
    }
    let mut step: Option<f64> = None;
    for _ in 0..iters {
        let Some(d) = tangent(target, &x, &grad) else {
            break;
        };
        let dd = norm2(&d);
        if !(dd > 1e-24 * norm2(&grad)) || !dd.is_finite() {
            break;
        }
        let mut s = step.unwrap_or(0.1 * r / dd.sqrt());
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            if let Some(trial) = retract(target, &axpy(&x, -s, &d), r) {
                if let Ok(vt) = target.value(&trial, evals) {
                    if vt <= v - ARMIJO * s * dd {
                        accepted = Some((trial, vt));
                        break;
                    }
                }
            }
            s *= 0.5;
        }
        let Some((trial, vt)) = accepted else { break };
        let gain = v - vt;
        match target.value_and_gradient(&trial, evals) {
            Ok((nv, ng)) if nv.is_finite() => {
                x = trial;
                v = nv;
                grad = ng;
            }
            _ => break,
        }
        step = Some(2.0 * s);
        if gain <= 1e-13 * (1.0 + v.abs()) {
            break;
        }
    }
    let (Ok(f), Ok((quantity, vanishing))) = (target.f().eval(&x), target.quantity(&x)) else {
        return Probe::Skipped;
    };
    if !f.is_finite() || !quantity.is_finite() {
        return Probe::Skipped;
    }
    Probe::Found(Found {
        x,
        f,
        quantity,
        vanishing,
        objective: v,
    })
}

/// Results of one radius of a sweep, in seed order.
pub(crate) struct Shell {
    pub radius: f64,
    pub probes: Vec<Probe>,
    pub evaluations: u64,
}

/// Runs one local search per seed direction on the sphere of radius `r`.
/// Parallel over seeds; output order is the seed order.
pub(crate) fn shell(target: &Target, seeds: &[Vector], r: f64, iters: usize) -> Shell {
    let results: Vec<(Probe, u64)> = seeds
        .par_iter()
        .map(|d| {
            let mut evals = 0;
            let probe = descend(target, &scale(r, d), r, iters, &mut evals);
            (probe, evals)
        })
        .collect();
    let evaluations = results.iter().map(|(_, e)| e).sum();
    Shell {
        radius: r,
        probes: results.into_iter().map(|(p, _)| p).collect(),
        evaluations,
    }
}
