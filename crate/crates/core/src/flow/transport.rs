use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::integrator::{integrate_with_hook, Path, StepControls, Stop};
use crate::expr::ExprError;
use crate::geometry::{field_u, residual_at, v_with_gradients, GeometryError, ProblemPair};
use crate::interval::Interval;
use crate::vecops::{all_finite, axpy, distance, dot, norm, norm2, reject, Vector};

/// Projection onto `M` aims for this `|g|`...
const G_PROJECTION_TOL: f64 = 1e-12;
/// ...and fails above this one.
const G_ADHERENCE: f64 = 1e-10;
const CORRECTION_ITERS: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("start point has dimension {got}, problem has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("start point is off M: |g(x)| = {g_value:e} exceeds {tol:e}")]
    StartOffManifold { g_value: f64, tol: f64 },
    #[error("{leg} leg of the round trip ended with {termination:?}")]
    LegFailed {
        leg: &'static str,
        termination: Termination,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Ambient,
    Manifold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// `f` left the window `U`, the point left every bounded region, or a
    /// coordinate stopped being finite.
    EscapedWindow,
    /// The normalized field is undefined at the start or along the path.
    DegenerateField,
    /// Manifold mode reached the Milnor set (including the `V` set).
    EnteredMilnorSet,
    /// Manifold mode could not restore `g = 0`.
    ProjectionFailed,
    StepUnderflow,
    MaxSteps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransportOptions {
    /// Required accuracy of `f` at the endpoint.
    pub tol: f64,
    /// `initial_step` and `max_step` are fractions of the leg; `min_step`
    /// is in units of `f` for legs longer than 1 and a fraction of shorter ones.
    pub controls: StepControls,
    /// Pull each accepted point back onto the fiber `f = μ + (λ−μ)t` with
    /// Newton steps along the flow field.
    pub fiber_correction: bool,
    /// The window `U`; the flow stops if `f` leaves it.
    pub window: Interval,
    pub escape_radius: f64,
    /// Milnor residual at or below which manifold mode treats a point as
    /// lying on the Milnor set.
    pub milnor_threshold: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            controls: StepControls {
                max_step: Some(0.02),
                ..StepControls::default()
            },
            fiber_correction: true,
            window: Interval::REAL_LINE,
            escape_radius: 1e12,
            milnor_threshold: 1e-12,
        }
    }
}

/// Accepted steps of one transport.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<Vector>,
    pub f_values: Vec<f64>,
    pub g_values: Vec<f64>,
    pub norms: Vec<f64>,
    /// `|f(x_k) − ((λ−μ)t_k + μ)|` at every recorded point.
    pub affine_residuals: Vec<f64>,
    /// Largest affine residual before fiber correction; measures the raw
    /// integration error.
    pub max_uncorrected_residual: f64,
    pub termination: Termination,
    pub detail: Option<String>,
    pub target_lambda: f64,
    pub start_mu: f64,
}

impl Trajectory {
    /// Largest affine residual relative to `max(1, |μ|, |λ|)`.
    pub fn scaled_affine_residual(&self) -> f64 {
        let scale = 1f64.max(self.start_mu.abs()).max(self.target_lambda.abs());
        self.affine_residuals.iter().fold(0.0f64, |m, r| m.max(*r)) / scale
    }

    /// `(t, x_1..x_n, f, g, norm)` rows.
    pub fn rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.times.len()).map(move |k| {
            let mut row = Vec::with_capacity(self.points[k].len() + 4);
            row.push(self.times[k]);
            row.extend_from_slice(&self.points[k]);
            row.extend([self.f_values[k], self.g_values[k], self.norms[k]]);
            row
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportResult {
    pub mode: Mode,
    pub start: Vector,
    pub endpoint: Vector,
    pub trajectory: Trajectory,
    /// `|f(endpoint) − λ|`
    pub f_error: f64,
    /// `|g(endpoint)|`, manifold mode only.
    pub g_error: Option<f64>,
    /// Largest `|‖x(t)‖ − ‖x(0)‖|` along the path, manifold mode only.
    pub norm_drift: Option<f64>,
    pub tol: f64,
    /// Completed with every invariant inside its tolerance.
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrip {
    /// `‖x_back − x‖`
    pub error: f64,
    pub forward: TransportResult,
    pub backward: TransportResult,
}

/// Why a step of the flow could not proceed.
#[derive(Debug, Clone)]
enum Fault {
    Degenerate(String),
    Milnor(String),
    Projection(String),
    Escaped(String),
}

impl Fault {
    fn split(self) -> (Termination, String) {
        match self {
            Fault::Degenerate(s) => (Termination::DegenerateField, s),
            Fault::Milnor(s) => (Termination::EnteredMilnorSet, s),
            Fault::Projection(s) => (Termination::ProjectionFailed, s),
            Fault::Escaped(s) => (Termination::EscapedWindow, s),
        }
    }
}

fn check_dim(p: &ProblemPair, x: &[f64]) -> Result<(), FlowError> {
    if x.len() != p.dim() {
        return Err(FlowError::DimensionMismatch {
            expected: p.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

fn check_bounds(x: &[f64], opts: &TransportOptions) -> Result<(), Fault> {
    if !all_finite(x) {
        return Err(Fault::Escaped("non-finite coordinate".into()));
    }
    if norm(x) > opts.escape_radius {
        return Err(Fault::Escaped(format!(
            "|x| exceeded {:e}",
            opts.escape_radius
        )));
    }
    Ok(())
}

/// Runs one leg in the remaining distance `r = |λ − f|`, from `|λ − μ|` down
/// to 0, so that `f = λ − sign(λ−μ)·r` along the exact flow. Unlike `t`, `r`
/// keeps full precision near the endpoint even when `|μ| ≫ |λ|`. The
/// field must satisfy `⟨∇f, n⟩ = 1`; the hook gets the target `f`.
fn run_leg<N, H>(
    x: &[f64],
    mu: f64,
    lambda: f64,
    opts: &TransportOptions,
    mut field: N,
    mut hook: H,
) -> Path<Fault>
where
    N: FnMut(&[f64]) -> Result<Vector, Fault>,
    H: FnMut(f64, &mut Vector) -> Result<bool, Fault>,
{
    let span = (lambda - mu).abs();
    let sign = (lambda - mu).signum();
    let leg = |h: Option<f64>| h.map(|h| h * span);
    let controls = StepControls {
        initial_step: leg(opts.controls.initial_step),
        max_step: leg(opts.controls.max_step),
        min_step: opts.controls.min_step * span.min(1.0),
        ..opts.controls
    };
    integrate_with_hook(
        |_, y| Ok(field(y)?.iter().map(|c| -sign * c).collect()),
        x,
        (span, 0.0),
        &controls,
        |r, y| hook(lambda - sign * r, y),
    )
}

fn f_at(p: &ProblemPair, x: &[f64]) -> Result<f64, Fault> {
    p.f.eval(x).map_err(|e| Fault::Degenerate(e.to_string()))
}

/// Newton steps `y ← y − (f(y) − target)·n(y)` along a field with
/// `⟨∇f, n⟩ = 1`; keeps only improving steps.
fn correct_fiber<N>(
    p: &ProblemPair,
    y: &mut Vector,
    target: f64,
    mut field: N,
) -> Result<bool, Fault>
where
    N: FnMut(&[f64]) -> Result<Vector, Fault>,
{
    let mut defect = f_at(p, y)? - target;
    let mut moved = false;
    for _ in 0..CORRECTION_ITERS {
        if defect == 0.0 {
            break;
        }
        let n = field(y)?;
        let candidate = axpy(y, -defect, &n);
        let next = match p.f.eval(&candidate) {
            Ok(v) => v - target,
            Err(_) => break,
        };
        if !(next.abs() < defect.abs()) {
            break;
        }
        *y = candidate;
        defect = next;
        moved = true;
    }
    Ok(moved)
}

/// Newton steps along `∇g` back to `g = 0`.
fn project_to_manifold(p: &ProblemPair, y: &mut Vector) -> Result<bool, Fault> {
    let fault = |e: GeometryError| Fault::Projection(e.to_string());
    let mut moved = false;
    for _ in 0..20 {
        let (gv, gg) = p.g.value_and_grad(y).map_err(|e| fault(e.into()))?;
        if gv.abs() <= G_PROJECTION_TOL {
            return Ok(moved);
        }
        let nn = norm2(&gg);
        if !(nn > 0.0) {
            return Err(fault(GeometryError::DegenerateGradient { norm: nn.sqrt() }));
        }
        let candidate = axpy(y, -gv / nn, &gg);
        let next = p.g.eval(&candidate).map_err(|e| fault(e.into()))?;
        if !(next.abs() < gv.abs()) {
            break;
        }
        *y = candidate;
        moved = true;
    }
    let gv = p.g.eval(y).map_err(|e| fault(e.into()))?;
    if gv.abs() <= G_ADHERENCE {
        Ok(moved)
    } else {
        Err(fault(GeometryError::OffManifold { g_value: gv }))
    }
}

/// `v/⟨v,∇f_M⟩`, guarded against the Milnor set.
fn manifold_unit_field(p: &ProblemPair, x: &[f64]) -> Result<Vector, Fault> {
    let (v, gf, gg) = v_with_gradients(p, x).map_err(|e| match e {
        GeometryError::MilnorDegenerate { .. } => Fault::Milnor(e.to_string()),
        other => Fault::Degenerate(other.to_string()),
    })?;
    let grad_m = reject(&gf, &gg);
    let pairing = dot(&v, &grad_m);
    if !(pairing.abs() >= p.thresholds.pairing_rel * norm(&v) * norm(&grad_m)) || pairing == 0.0 {
        return Err(Fault::Milnor(format!("<v, grad f_M> = {pairing:e}")));
    }
    Ok(v.iter().map(|c| c / pairing).collect())
}

fn ambient_unit_field(p: &ProblemPair, x: &[f64], radius: f64) -> Result<Vector, Fault> {
    field_u(p, x, radius).map_err(|e| Fault::Degenerate(e.to_string()))
}

struct Finish<'a> {
    p: &'a ProblemPair,
    mode: Mode,
    start: &'a [f64],
    mu: f64,
    lambda: f64,
    opts: &'a TransportOptions,
}

impl Finish<'_> {
    fn build(
        &self,
        times: Vec<f64>,
        targets: Vec<f64>,
        points: Vec<Vector>,
        termination: Termination,
        detail: Option<String>,
        max_uncorrected: f64,
    ) -> TransportResult {
        let eval = |e: &crate::Expression, x: &[f64]| e.eval(x).unwrap_or(f64::NAN);
        let f_values: Vec<f64> = points.iter().map(|x| eval(&self.p.f, x)).collect();
        let g_values: Vec<f64> = points.iter().map(|x| eval(&self.p.g, x)).collect();
        let norms: Vec<f64> = points.iter().map(|x| norm(x)).collect();
        let affine_residuals: Vec<f64> = targets
            .iter()
            .zip(&f_values)
            .map(|(target, fv)| (fv - target).abs())
            .collect();
        let endpoint = points
            .last()
            .cloned()
            .unwrap_or_else(|| self.start.to_vec());
        let f_error = (f_values.last().copied().unwrap_or(self.mu) - self.lambda).abs();
        let (g_error, norm_drift) = match self.mode {
            Mode::Ambient => (None, None),
            Mode::Manifold => {
                let r0 = norm(self.start);
                let drift = norms.iter().fold(0.0f64, |m, r| m.max((r - r0).abs()));
                (g_values.last().map(|g| g.abs()), Some(drift))
            }
        };
        let trajectory = Trajectory {
            times,
            points,
            f_values,
            g_values,
            norms,
            affine_residuals,
            max_uncorrected_residual: max_uncorrected,
            termination,
            detail,
            target_lambda: self.lambda,
            start_mu: self.mu,
        };
        let tol = self.opts.tol;
        let mut success = termination == Termination::Completed
            && f_error <= tol
            && trajectory.scaled_affine_residual() <= 10.0 * tol;
        if self.mode == Mode::Manifold {
            let g_ok = trajectory.g_values.iter().all(|g| g.abs() <= G_ADHERENCE);
            success = success && g_ok && norm_drift.is_some_and(|d| d <= 10.0 * tol);
        }
        TransportResult {
            mode: self.mode,
            start: self.start.to_vec(),
            endpoint,
            trajectory,
            f_error,
            g_error,
            norm_drift,
            tol,
            success,
        }
    }

    /// Converts a path over the remaining distance `r` back to `t`.
    fn finish_path(&self, path: Path<Fault>, max_uncorrected: f64) -> TransportResult {
        let (termination, detail) = match path.stop {
            Stop::Completed => (Termination::Completed, None),
            Stop::StepUnderflow => (Termination::StepUnderflow, None),
            Stop::MaxSteps => (Termination::MaxSteps, None),
            Stop::Failed(f) => {
                let (t, d) = f.split();
                (t, Some(d))
            }
        };
        let span = (self.lambda - self.mu).abs();
        let sign = (self.lambda - self.mu).signum();
        let times = path.times.iter().map(|r| 1.0 - r / span).collect();
        let targets = path.times.iter().map(|r| self.lambda - sign * r).collect();
        self.build(
            times,
            targets,
            path.points,
            termination,
            detail,
            max_uncorrected,
        )
    }

    fn stationary(&self) -> TransportResult {
        let x = self.start.to_vec();
        let targets = vec![self.mu, self.lambda];
        self.build(
            vec![0.0, 1.0],
            targets,
            vec![x.clone(), x],
            Termination::Completed,
            None,
            0.0,
        )
    }

    fn refused(&self, termination: Termination, detail: String) -> TransportResult {
        self.build(
            vec![0.0],
            vec![self.mu],
            vec![self.start.to_vec()],
            termination,
            Some(detail),
            0.0,
        )
    }
}

/// Integrates `x' = (λ − μ)·u(x)` over `t ∈ [0, 1]` with `μ = f(x₀)`, so that
/// `f(x(t)) = μ + (λ − μ)t` and the endpoint lies on `f⁻¹(λ)`.
pub fn transport_ambient(
    p: &ProblemPair,
    x: &[f64],
    lambda: f64,
    radius: f64,
    opts: &TransportOptions,
) -> Result<TransportResult, FlowError> {
    check_dim(p, x)?;
    let mu = p.f.eval(x)?;
    let finish = Finish {
        p,
        mode: Mode::Ambient,
        start: x,
        mu,
        lambda,
        opts,
    };
    if lambda == mu {
        return Ok(finish.stationary());
    }
    if let Err(fault) = ambient_unit_field(p, x, radius) {
        let (t, d) = fault.split();
        return Ok(finish.refused(t, d));
    }
    let mut max_uncorrected = 0.0f64;
    let path = run_leg(
        x,
        mu,
        lambda,
        opts,
        |y| ambient_unit_field(p, y, radius),
        |target, y| {
            check_bounds(y, opts)?;
            max_uncorrected = max_uncorrected.max((f_at(p, y)? - target).abs());
            let moved = opts.fiber_correction
                && correct_fiber(p, y, target, |z| ambient_unit_field(p, z, radius))?;
            let fv = f_at(p, y)?;
            if !opts.window.contains(fv) {
                return Err(Fault::Escaped(format!(
                    "f = {fv} left the window {}",
                    opts.window
                )));
            }
            Ok(moved)
        },
    );
    Ok(finish.finish_path(path, max_uncorrected))
}

/// Integrates `x' = (λ − μ)·v(x)/⟨v(x), ∇f_M(x)⟩` on `M = g⁻¹(0)`; the flow
/// keeps `‖x‖` fixed and moves `f` affinely from `μ` to `λ`. After each step
/// the point is projected back onto `M` along `∇g`.
pub fn transport_on_manifold(
    p: &ProblemPair,
    x: &[f64],
    lambda: f64,
    opts: &TransportOptions,
) -> Result<TransportResult, FlowError> {
    check_dim(p, x)?;
    let g0 = p.g.eval(x)?;
    if !(g0.abs() <= opts.tol) {
        return Err(FlowError::StartOffManifold {
            g_value: g0,
            tol: opts.tol,
        });
    }
    let mu = p.f.eval(x)?;
    let finish = Finish {
        p,
        mode: Mode::Manifold,
        start: x,
        mu,
        lambda,
        opts,
    };
    if lambda == mu {
        return Ok(finish.stationary());
    }
    let (gf, gg) = (p.f.grad(x)?, p.g.grad(x)?);
    let residual = residual_at(&gf, &gg, x, &p.thresholds);
    if residual.in_v_set || residual.value <= opts.milnor_threshold {
        let detail = if residual.in_v_set {
            "start lies on the V set (x parallel to grad g)".to_string()
        } else {
            format!(
                "start lies on the Milnor set: residual {:e}",
                residual.value
            )
        };
        return Ok(finish.refused(Termination::DegenerateField, detail));
    }
    if let Err(fault) = manifold_unit_field(p, x) {
        let (_, d) = fault.split();
        return Ok(finish.refused(Termination::DegenerateField, d));
    }
    let mut max_uncorrected = 0.0f64;
    let path = run_leg(
        x,
        mu,
        lambda,
        opts,
        |y| manifold_unit_field(p, y),
        |target, y| {
            check_bounds(y, opts)?;
            let mut moved = project_to_manifold(p, y)?;
            max_uncorrected = max_uncorrected.max((f_at(p, y)? - target).abs());
            if opts.fiber_correction && correct_fiber(p, y, target, |z| manifold_unit_field(p, z))?
            {
                project_to_manifold(p, y)?;
                moved = true;
            }
            let fv = f_at(p, y)?;
            if !opts.window.contains(fv) {
                return Err(Fault::Escaped(format!(
                    "f = {fv} left the window {}",
                    opts.window
                )));
            }
            let (gf, gg) = match (p.f.grad(y), p.g.grad(y)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => return Err(Fault::Degenerate(e.to_string())),
            };
            let r = residual_at(&gf, &gg, y, &p.thresholds);
            if r.in_v_set || r.value <= opts.milnor_threshold {
                return Err(Fault::Milnor(format!(
                    "residual {:e} at f = {target}",
                    r.value
                )));
            }
            Ok(moved)
        },
    );
    Ok(finish.finish_path(path, max_uncorrected))
}

/// Transports `x` to `f⁻¹(λ)` and back to `f⁻¹(f(x))` along the reversed
/// flow; reports how far the return point lands from `x`. Each leg must run
/// to completion; whether it met the fiber tolerances is left to the caller,
/// since the return leg to a huge `μ` cannot hit `f = μ` to an absolute `tol`.
pub fn round_trip(
    p: &ProblemPair,
    x: &[f64],
    lambda: f64,
    mode: Mode,
    radius: f64,
    opts: &TransportOptions,
) -> Result<RoundTrip, FlowError> {
    let mu = p.f.eval(x)?;
    let run = |start: &[f64], target: f64| match mode {
        Mode::Ambient => transport_ambient(p, start, target, radius, opts),
        Mode::Manifold => transport_on_manifold(p, start, target, opts),
    };
    let forward = run(x, lambda)?;
    if forward.trajectory.termination != Termination::Completed {
        return Err(FlowError::LegFailed {
            leg: "forward",
            termination: forward.trajectory.termination,
        });
    }
    let backward = run(&forward.endpoint, mu)?;
    if backward.trajectory.termination != Termination::Completed {
        return Err(FlowError::LegFailed {
            leg: "backward",
            termination: backward.trajectory.termination,
        });
    }
    Ok(RoundTrip {
        error: distance(&backward.endpoint, x),
        forward,
        backward,
    })
}
