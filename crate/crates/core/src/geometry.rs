//! Projected gradients, the blended trivialization fields and the Milnor-set
//! residual for a pair `(f, g)` of functions on `R^n`.
//!
//! `g` plays two roles: its level sets foliate the ambient space (the
//! tangential gradient `∇_g f` lives on the leaf through `x`), and its zero
//! set `M = g⁻¹(0)` is the hypersurface carrying the manifold field `v`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{ExprError, Expression, Scalar};
use crate::vecops::{axpy, dot, norm, norm2, reject, Vector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("f has arity {f}, g has arity {g}; both must agree and be at least 2")]
    Arity { f: usize, g: usize },
    #[error("projection axis has zero length")]
    ZeroAxis,
    #[error("degenerate gradient of g: |grad g| = {norm:e}")]
    DegenerateGradient { norm: f64 },
    #[error("degenerate pairing <w, grad f> = {pairing:e}")]
    DegeneratePairing { pairing: f64 },
    #[error("x is parallel to grad g (Milnor-degenerate), denominator {denominator:e}")]
    MilnorDegenerate { denominator: f64 },
    #[error("point is off the hypersurface: g(x) = {g_value:e}")]
    OffManifold { g_value: f64 },
    #[error("vectors have mismatched dimensions {0} and {1}")]
    DimensionMismatch(usize, usize),
}

/// Scale-aware degeneracy thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// `‖∇g‖ < grad_g_rel` counts as a vanishing gradient of `g`. The
    /// projection along `∇g` is invariant under rescaling `∇g`, so the
    /// bound is absolute rather than tied to `‖∇f‖`.
    pub grad_g_rel: f64,
    /// Denominator of `v` below `v_denominator_rel·‖x‖²‖∇g‖²` is degenerate.
    pub v_denominator_rel: f64,
    /// `|⟨w,∇f⟩| < pairing_rel·‖w‖‖∇f‖` is a degenerate pairing.
    pub pairing_rel: f64,
    /// Largest `|g(x)|` still accepted as "on M".
    pub on_manifold: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            grad_g_rel: 1e-12,
            v_denominator_rel: 1e-12,
            pairing_rel: 1e-12,
            on_manifold: 1e-8,
        }
    }
}

/// The function under study together with its auxiliary function.
#[derive(Debug, Clone)]
pub struct ProblemPair {
    pub f: Expression,
    pub g: Expression,
    pub thresholds: Thresholds,
}

impl ProblemPair {
    pub fn new(f: Expression, g: Expression) -> Result<Self, GeometryError> {
        if f.arity() != g.arity() || f.arity() < 2 {
            return Err(GeometryError::Arity {
                f: f.arity(),
                g: g.arity(),
            });
        }
        Ok(Self {
            f,
            g,
            thresholds: Thresholds::default(),
        })
    }

    pub fn parse(f: &str, g: &str, n: usize) -> Result<Self, GeometryError> {
        Self::new(Expression::parse(f, n)?, Expression::parse(g, n)?)
    }

    pub fn with_thresholds(mut self, thresholds: Thresholds) -> Self {
        self.thresholds = thresholds;
        self
    }

    pub fn dim(&self) -> usize {
        self.f.arity()
    }

    fn gradients(&self, x: &[f64]) -> Result<(Vector, Vector), GeometryError> {
        Ok((self.f.grad(x)?, self.g.grad(x)?))
    }

    fn check_grad_g(&self, gg: &[f64]) -> Result<(), GeometryError> {
        let ng = norm(gg);
        if !(ng >= self.thresholds.grad_g_rel) {
            return Err(GeometryError::DegenerateGradient { norm: ng });
        }
        Ok(())
    }

    fn check_on_manifold(&self, x: &[f64]) -> Result<f64, GeometryError> {
        let gv = self.g.eval(x)?;
        if !(gv.abs() <= self.thresholds.on_manifold) {
            return Err(GeometryError::OffManifold { g_value: gv });
        }
        Ok(gv)
    }
}

/// `w − (⟨w,a⟩/‖a‖²)·a`, the component of `w` orthogonal to `a`.
pub fn project_orthogonal(w: &[f64], a: &[f64]) -> Result<Vector, GeometryError> {
    if w.len() != a.len() {
        return Err(GeometryError::DimensionMismatch(w.len(), a.len()));
    }
    let aa = norm2(a);
    if !(aa > 0.0) || !aa.is_finite() {
        return Err(GeometryError::ZeroAxis);
    }
    Ok(reject(w, a))
}

/// `∇_g f(x)`: the projection of `∇f(x)` onto the tangent space of the level
/// set of `g` through `x`.
pub fn tangential_gradient(p: &ProblemPair, x: &[f64]) -> Result<Vector, GeometryError> {
    let (gf, gg) = p.gradients(x)?;
    p.check_grad_g(&gg)?;
    Ok(reject(&gf, &gg))
}

fn mollifier(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`, strictly between otherwise.
fn smooth_step(t: f64) -> f64 {
    let a = mollifier(t);
    let b = mollifier(1.0 - t);
    a / (a + b)
}

/// Bump pair `(α, β)` with `α = 1` on `‖x‖ ≤ R`, `α = 0` on `‖x‖ ≥ R + 1`,
/// and `β = 1 − α`. The transition is a C^∞ function of `‖x‖²`.
pub fn bump_pair(x: &[f64], radius: f64) -> (f64, f64) {
    let r2 = norm2(x);
    let inner = radius * radius;
    let outer = (radius + 1.0) * (radius + 1.0);
    if r2 <= inner {
        return (1.0, 0.0);
    }
    if r2 >= outer {
        return (0.0, 1.0);
    }
    let beta = smooth_step((r2 - inner) / (outer - inner));
    (1.0 - beta, beta)
}

/// `w = α·∇f + β·∇_g f`.
pub fn field_w(p: &ProblemPair, x: &[f64], radius: f64) -> Result<Vector, GeometryError> {
    let gf = p.f.grad(x)?;
    blended(p, x, radius, &gf)
}

fn blended(p: &ProblemPair, x: &[f64], radius: f64, gf: &[f64]) -> Result<Vector, GeometryError> {
    let (alpha, beta) = bump_pair(x, radius);
    if beta == 0.0 {
        return Ok(gf.to_vec());
    }
    let gg = p.g.grad(x)?;
    p.check_grad_g(&gg)?;
    let tangential = reject(gf, &gg);
    Ok(gf
        .iter()
        .zip(&tangential)
        .map(|(a, t)| alpha * a + beta * t)
        .collect())
}

/// `u = w/⟨w,∇f⟩`, normalized so that `⟨∇f,u⟩ = 1`.
pub fn field_u(p: &ProblemPair, x: &[f64], radius: f64) -> Result<Vector, GeometryError> {
    let gf = p.f.grad(x)?;
    let w = blended(p, x, radius, &gf)?;
    let pairing = dot(&w, &gf);
    if !(pairing.abs() > p.thresholds.pairing_rel * norm(&w) * norm(&gf)) || pairing == 0.0 {
        return Err(GeometryError::DegeneratePairing { pairing });
    }
    Ok(w.iter().map(|c| c / pairing).collect())
}

/// Closed-form manifold field `v`, tangent to both `M` and the sphere
/// through `x`.
pub fn field_v(p: &ProblemPair, x: &[f64]) -> Result<Vector, GeometryError> {
    p.check_on_manifold(x)?;
    Ok(v_with_gradients(p, x)?.0)
}

/// Closed-form `v` at any `x` off `V`, without the on-manifold check; the
/// result is tangent to the level set of `g` and to the sphere through `x`.
/// Returns `(v, ∇f, ∇g)`.
pub(crate) fn v_with_gradients(
    p: &ProblemPair,
    x: &[f64],
) -> Result<(Vector, Vector, Vector), GeometryError> {
    let (gf, gg) = p.gradients(x)?;
    p.check_grad_g(&gg)?;
    let a = dot(&gg, x);
    let b = dot(&gg, &gf);
    let c = norm2(&gg);
    let d = dot(x, &gf);
    let xx = norm2(x);
    let den = xx * c - a * a;
    if !(den >= p.thresholds.v_denominator_rel * xx * c) || den == 0.0 {
        return Err(GeometryError::MilnorDegenerate { denominator: den });
    }
    let along_x = (a * b - c * d) / den;
    let along_g = (a * d - xx * b) / den;
    let v = gf
        .iter()
        .zip(x)
        .zip(&gg)
        .map(|((f, xi), g)| f + along_x * xi + along_g * g)
        .collect();
    Ok((v, gf, gg))
}

fn check_v_domain(p: &ProblemPair, x: &[f64]) -> Result<(Vector, Vector), GeometryError> {
    p.check_on_manifold(x)?;
    let (gf, gg) = p.gradients(x)?;
    p.check_grad_g(&gg)?;
    let c = norm2(&gg);
    let xx = norm2(x);
    let a = dot(&gg, x);
    let den = xx * c - a * a;
    if !(den >= p.thresholds.v_denominator_rel * xx * c) || den == 0.0 {
        return Err(GeometryError::MilnorDegenerate { denominator: den });
    }
    Ok((gf, gg))
}

/// `v` via two projections: `∇f_M` made orthogonal to `π_M(x)`, the
/// tangential part of the position vector.
pub fn field_v_by_projection(p: &ProblemPair, x: &[f64]) -> Result<Vector, GeometryError> {
    let (gf, gg) = check_v_domain(p, x)?;
    let grad_m = reject(&gf, &gg);
    let pos_m = reject(x, &gg);
    Ok(reject(&grad_m, &pos_m))
}

/// `v` via the sphere: the sphere-tangential part of `∇f` made orthogonal to
/// the sphere-tangential part of `∇g`.
pub fn field_v_by_sphere_projection(p: &ProblemPair, x: &[f64]) -> Result<Vector, GeometryError> {
    let (gf, gg) = check_v_domain(p, x)?;
    let f_sphere = reject(&gf, x);
    let g_sphere = reject(&gg, x);
    Ok(reject(&f_sphere, &g_sphere))
}

/// Normalized Milnor residual at a point of `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MilnorResidual {
    /// In `[0, 1]`; zero exactly on the Milnor set.
    pub value: f64,
    /// `x` is parallel to `∇g(x)`: the manifold field is undefined here.
    pub in_v_set: bool,
}

/// `(‖∇f_M‖²‖π_M(x)‖² − ⟨∇f_M,π_M(x)⟩²) / (‖∇f_M‖²‖π_M(x)‖² + ε)`.
pub fn milnor_residual(p: &ProblemPair, x: &[f64]) -> Result<MilnorResidual, GeometryError> {
    p.check_on_manifold(x)?;
    let (gf, gg) = p.gradients(x)?;
    p.check_grad_g(&gg)?;
    Ok(residual_at(&gf, &gg, x, &p.thresholds))
}

pub(crate) fn residual_at(gf: &[f64], gg: &[f64], x: &[f64], t: &Thresholds) -> MilnorResidual {
    let pos_m = reject(x, gg);
    if !(norm2(&pos_m) >= t.v_denominator_rel * norm2(x)) || norm2(x) == 0.0 {
        return MilnorResidual {
            value: 0.0,
            in_v_set: true,
        };
    }
    MilnorResidual {
        value: residual_raw(gf, gg, x).clamp(0.0, 1.0),
        in_v_set: false,
    }
}

/// Unguarded residual over any scalar type; used by the scanners to
/// differentiate the residual along the sphere.
pub(crate) fn residual_raw<T: Scalar>(gf: &[T], gg: &[T], x: &[T]) -> T {
    let grad_m = reject(gf, gg);
    let pos_m = reject(x, gg);
    let aa = norm2(&grad_m);
    let bb = norm2(&pos_m);
    let cross = reject(&grad_m, &pos_m);
    norm2(&cross) * bb / (aa * bb + T::from_f64(f64::EPSILON))
}

/// Milnor residual scaled by `‖∇f‖²‖π_{M*}(x)‖²` instead of
/// `‖∇f_M‖²‖π_{M*}(x)‖²`. Same zero set off `V` and never larger than the
/// normalized residual, but continuous at critical points of `f_M`, where the
/// normalized one jumps from about 1 to 0. The scanners minimize this one.
pub fn scaled_milnor_residual(p: &ProblemPair, x: &[f64]) -> Result<f64, GeometryError> {
    p.check_on_manifold(x)?;
    let (gf, gg) = p.gradients(x)?;
    p.check_grad_g(&gg)?;
    Ok(scaled_residual_raw(&gf, &gg, x).clamp(0.0, 1.0))
}

pub(crate) fn scaled_residual_raw<T: Scalar>(gf: &[T], gg: &[T], x: &[T]) -> T {
    let grad_m = reject(gf, gg);
    let pos_m = reject(x, gg);
    let bb = norm2(&pos_m);
    let cross = reject(&grad_m, &pos_m);
    norm2(&cross) * bb / (norm2(gf) * bb + T::from_f64(f64::MIN_POSITIVE))
}

pub(crate) fn tangential_raw<T: Scalar>(gf: &[T], gg: &[T]) -> Vec<T> {
    reject(gf, gg)
}

/// Everything the scanners and reports need at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub x: Vector,
    pub f_value: f64,
    pub g_value: f64,
    pub grad_f: Vector,
    pub grad_g: Vector,
    /// `∇_g f(x)`; zero when the sample is degenerate.
    pub tangential: Vector,
    /// `‖x‖·‖∇f(x)‖`
    pub malgrange: f64,
    /// `‖x‖·‖∇_g f(x)‖`
    pub fiber_malgrange: f64,
    /// Residual with respect to the level set of `g` through `x`.
    pub milnor_residual: f64,
    pub in_v_set: bool,
    pub degenerate: Option<String>,
}

impl FieldSample {
    pub fn at(p: &ProblemPair, x: &[f64]) -> Result<Self, GeometryError> {
        let (f_value, gf) = p.f.value_and_grad(x)?;
        let (g_value, gg) = p.g.value_and_grad(x)?;
        let r = norm(x);
        let mut degenerate = None;
        let tangential = match p.check_grad_g(&gg) {
            Ok(()) => tangential_raw(&gf, &gg),
            Err(e) => {
                degenerate = Some(e.to_string());
                vec![0.0; x.len()]
            }
        };
        let residual = if degenerate.is_none() {
            residual_at(&gf, &gg, x, &p.thresholds)
        } else {
            MilnorResidual {
                value: 0.0,
                in_v_set: false,
            }
        };
        let sample = Self {
            x: x.to_vec(),
            f_value,
            g_value,
            malgrange: r * norm(&gf),
            fiber_malgrange: r * norm(&tangential),
            grad_f: gf,
            grad_g: gg,
            tangential,
            milnor_residual: residual.value,
            in_v_set: residual.in_v_set,
            degenerate,
        };
        let finite = [
            sample.f_value,
            sample.g_value,
            sample.malgrange,
            sample.fiber_malgrange,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite && sample.degenerate.is_none() {
            return Ok(Self {
                degenerate: Some("non-finite quantity".into()),
                ..sample
            });
        }
        Ok(sample)
    }
}

/// Moves `x` along `∇g` until `|g(x) − level| ≤ tol`.
pub fn project_to_level(
    g: &Expression,
    x: &[f64],
    level: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vector, GeometryError> {
    let mut y = x.to_vec();
    for _ in 0..max_iter {
        let (gv, gg) = g.value_and_grad(&y)?;
        let defect = gv - level;
        if defect.abs() <= tol {
            return Ok(y);
        }
        let nn = norm2(&gg);
        if !(nn > 0.0) {
            return Err(GeometryError::DegenerateGradient { norm: nn.sqrt() });
        }
        y = axpy(&y, -defect / nn, &gg);
    }
    let gv = g.eval(&y)?;
    if (gv - level).abs() <= tol {
        Ok(y)
    } else {
        Err(GeometryError::OffManifold { g_value: gv })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn ellipse_cylinder() -> ProblemPair {
        ProblemPair::parse("y", "0.5*x^2 + y^2 - 0.5", 3).unwrap()
    }

    /// Point on `½x² + y² = ½` with parameter `θ` and height `z`.
    fn on_cylinder(theta: f64, z: f64) -> Vector {
        vec![theta.cos(), theta.sin() / 2f64.sqrt(), z]
    }

    #[test]
    fn projection_examples() {
        assert_eq!(
            project_orthogonal(&[1.0, 1.0], &[0.0, 1.0]).unwrap(),
            vec![1.0, 0.0]
        );
        assert_eq!(
            project_orthogonal(&[3.0, 4.0], &[3.0, 4.0]).unwrap(),
            vec![0.0, 0.0]
        );
        assert!(close(
            &project_orthogonal(&[1.0, 0.0, 0.0], &[1.0, 1.0, 0.0]).unwrap(),
            &[0.5, -0.5, 0.0],
            1e-15
        ));
        assert_eq!(
            project_orthogonal(&[1.0, 0.0], &[0.0, 0.0]),
            Err(GeometryError::ZeroAxis)
        );
    }

    #[test]
    fn tangential_gradient_ex1() {
        let p = ProblemPair::parse("x - x^3*y^2", "y", 2).unwrap();
        for x in [-3.0, -0.5, 0.0, 2.0, 11.0] {
            assert_eq!(tangential_gradient(&p, &[x, 0.0]).unwrap(), vec![1.0, 0.0]);
        }
        let (n, eps) = (2.0, 1.0);
        let pt = [n * eps / 2.0, 2.0 / (3f64.sqrt() * n * eps)];
        let t = tangential_gradient(&p, &pt).unwrap();
        assert!(norm(&t) <= 1e-12, "{t:?}");
    }

    #[test]
    fn tangential_gradient_exa2new() {
        let p = ProblemPair::parse("y/(1+x^2)", "x", 2).unwrap();
        for (s, y) in [(0.0, 1.0), (1.5, -4.0), (-7.0, 0.25)] {
            let t = tangential_gradient(&p, &[s, y]).unwrap();
            assert!((norm(&t) - 1.0 / (1.0 + s * s)).abs() <= 1e-15);
        }
    }

    #[test]
    fn degenerate_grad_g_rejected() {
        let p = ProblemPair::parse("x", "y^2", 2).unwrap();
        assert!(matches!(
            tangential_gradient(&p, &[1.0, 0.0]),
            Err(GeometryError::DegenerateGradient { .. })
        ));
    }

    #[test]
    fn bump_plateaus_and_band() {
        let r = 3.0;
        assert_eq!(bump_pair(&[r / 2.0, 0.0], r), (1.0, 0.0));
        assert_eq!(bump_pair(&[0.0, r + 2.0], r), (0.0, 1.0));
        assert_eq!(bump_pair(&[r, 0.0], r), (1.0, 0.0));
        assert_eq!(bump_pair(&[r + 1.0, 0.0], r), (0.0, 1.0));
        let (a, b) = bump_pair(&[r + 0.5, 0.0], r);
        assert!(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0);
        assert_eq!(a + b, 1.0);
        // monotone across the band
        let mut last = 1.0;
        for k in 1..100 {
            let (a, _) = bump_pair(&[r + k as f64 / 100.0], r);
            assert!(a <= last);
            last = a;
        }
    }

    #[test]
    fn field_w_regions() {
        let p = ProblemPair::parse("y/(1+x^2)", "x", 2).unwrap();
        let inner = [0.3, 0.4];
        assert_eq!(field_w(&p, &inner, 1.0).unwrap(), p.f.grad(&inner).unwrap());
        let outer = [3.0, 1.0];
        let w = field_w(&p, &outer, 1.0).unwrap();
        assert!(close(&w, &[0.0, 0.1], 1e-16));
        // ∇_g f = 0 in the band: only α∇f survives
        let q = ProblemPair::parse("x + y", "x + y", 2).unwrap();
        let band = [1.2, 0.8];
        let (alpha, _) = bump_pair(&band, 1.0);
        let w = field_w(&q, &band, 1.0).unwrap();
        assert!(close(&w, &[alpha, alpha], 1e-15));
    }

    #[test]
    fn field_u_examples() {
        let p = ProblemPair::parse("x", "y", 2).unwrap();
        assert_eq!(field_u(&p, &[0.2, 0.1], 1.0).unwrap(), vec![1.0, 0.0]);
        let p2 = ProblemPair::parse("2*x", "y", 2).unwrap();
        assert_eq!(field_u(&p2, &[0.2, 0.1], 1.0).unwrap(), vec![0.5, 0.0]);
        let q = ProblemPair::parse("y/(1+x^2)", "x", 2).unwrap();
        assert_eq!(field_u(&q, &[0.0, 5.0], 1.0).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn field_u_degenerate_pairing() {
        // outside the ball w = ∇_g f = 0 when g = f
        let p = ProblemPair::parse("x + y", "x + y", 2).unwrap();
        assert!(matches!(
            field_u(&p, &[5.0, 5.0], 1.0),
            Err(GeometryError::DegeneratePairing { .. })
        ));
    }

    #[test]
    fn field_v_published_values() {
        let p = ellipse_cylinder();
        for z in [0.1, -0.1, 1.0, -1.0, 10.0, -10.0] {
            let v = field_v(&p, &[1.0, 0.0, z]).unwrap();
            assert!((v[1] - 1.0).abs() <= 1e-10, "{v:?}");
        }
        for theta in [0.3, 1.0, 2.0, 4.0] {
            let x = on_cylinder(theta, 0.0);
            let v = field_v(&p, &x).unwrap();
            assert!(v[1].abs() <= 1e-10, "{v:?}");
            assert!(dot(&v, &x).abs() <= 1e-12);
        }
    }

    #[test]
    fn field_v_closed_form_matches_symbolic() {
        // symbolic v on the cylinder, reduced with x² = 1 − 2y²
        let p = ellipse_cylinder();
        let (x, y, z) = {
            let q = on_cylinder(0.7, 1.3);
            (q[0], q[1], q[2])
        };
        let den = x * x * y * y + x * x * z * z + 4.0 * y * y * z * z;
        let expected = [
            -2.0 * x * y * z * z / den,
            x * x * z * z / den,
            x * x * y * z / den,
        ];
        let v = field_v(&p, &[x, y, z]).unwrap();
        assert!(close(&v, &expected, 1e-12), "{v:?} vs {expected:?}");
    }

    #[test]
    fn field_v_routes_agree() {
        let p = ellipse_cylinder();
        for (theta, z) in [(0.4, 2.0), (2.5, -0.3), (4.0, 7.0)] {
            let x = on_cylinder(theta, z);
            let a = field_v(&p, &x).unwrap();
            let b = field_v_by_projection(&p, &x).unwrap();
            let c = field_v_by_sphere_projection(&p, &x).unwrap();
            assert!(close(&a, &b, 1e-12));
            assert!(close(&a, &c, 1e-12));
        }
    }

    #[test]
    fn field_v_degenerate_and_off_manifold() {
        let p = ellipse_cylinder();
        assert!(matches!(
            field_v(&p, &[1.0, 0.0, 0.0]),
            Err(GeometryError::MilnorDegenerate { .. })
        ));
        assert!(matches!(
            field_v(&p, &[1.0, 1.0, 0.0]),
            Err(GeometryError::OffManifold { .. })
        ));
        // ∇f ∥ ∇g gives ∇f_M = 0 and v = 0 from both routes
        let q = ProblemPair::parse("x", "0.5*x^2 + y^2 - 0.5", 3).unwrap();
        let x = [1.0, 0.0, 2.0];
        assert!(norm(&field_v(&q, &x).unwrap()) <= 1e-15);
        assert!(norm(&field_v_by_projection(&q, &x).unwrap()) <= 1e-15);
    }

    #[test]
    fn milnor_residual_cases() {
        let p = ellipse_cylinder();
        let r = milnor_residual(&p, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(
            r,
            MilnorResidual {
                value: 0.0,
                in_v_set: true
            }
        );
        let r = milnor_residual(&p, &on_cylinder(0.6, 3.0)).unwrap();
        assert!(r.value > 0.0 && !r.in_v_set);
        // x = 0 branch of the Milnor set: (0, ±1/√2, z)
        let r = milnor_residual(&p, &[0.0, 0.5f64.sqrt(), 3.0]).unwrap();
        assert!(r.value < 1e-20 && !r.in_v_set);
    }

    #[test]
    fn sample_records_quantities() {
        let p = ProblemPair::parse("y/(1+x^2)", "x", 2).unwrap();
        let s = FieldSample::at(&p, &[3.0, 4.0]).unwrap();
        assert_eq!(s.f_value, 0.4);
        assert!((s.fiber_malgrange - 5.0 / 10.0).abs() < 1e-15);
        assert!(s.degenerate.is_none());
        assert!(dot(&s.tangential, &s.grad_g).abs() < 1e-15);
    }

    #[test]
    fn level_projection() {
        let g = Expression::parse("x^2 + y^2 - 1", 2).unwrap();
        let y = project_to_level(&g, &[1.3, 0.4], 0.0, 1e-13, 30).unwrap();
        assert!(g.eval(&y).unwrap().abs() <= 1e-13);
    }
}
