//! Built-in example problems, plus expression sets shared by the tests,
//! the CLI `examples` command and the benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::{ExprError, Expression};
use crate::geometry::{GeometryError, ProblemPair};
use crate::interval::{Interval, IntervalSet};

/// A pair `(f, g)` with the data of a `(g,S)`-Malgrange check.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub name: &'static str,
    pub n: usize,
    pub f: String,
    pub g: String,
    pub s_set: IntervalSet,
    pub window: Interval,
    pub radius: f64,
}

impl Example {
    pub fn pair(&self) -> Result<ProblemPair, GeometryError> {
        ProblemPair::parse(&self.f, &self.g, self.n)
    }
}

fn example(name: &'static str, n: usize, f: &str, g: &str) -> Example {
    Example {
        name,
        n,
        f: f.to_string(),
        g: g.to_string(),
        s_set: IntervalSet::real_line(),
        window: Interval::REAL_LINE,
        radius: 1.0,
    }
}

/// `f = x − x³y²` restricted to the fibers of `g = y`.
pub fn ex1() -> Example {
    example("ex1", 2, "x - x^3*y^2", "y")
}

/// Points `(nε/2, 2/(√3·nε))`, `n = 1..=count`, where `∇_g f` of [`ex1`] vanishes.
pub fn ex1_points(eps: f64, count: usize) -> Vec<[f64; 2]> {
    (1..=count)
        .map(|n| {
            let t = n as f64 * eps;
            [t / 2.0, 2.0 / (3f64.sqrt() * t)]
        })
        .collect()
}

/// `f = y/(1+x²)`, `g = x`: no Malgrange bound at 0, but a fiberwise one.
pub fn exa2() -> Example {
    example("exa2", 2, "y/(1+x^2)", "x")
}

/// The Păunescu–Zaharia polynomial `x − 3x^{2p+1}y^{2q} + 2x^{3p+1}y^{3q} + yz`, `g = y`.
pub fn exa3(p: u32, q: u32) -> Example {
    let f = format!(
        "x - 3*x^{}*y^{} + 2*x^{}*y^{} + y*z",
        2 * p + 1,
        2 * q,
        3 * p + 1,
        3 * q
    );
    example("exa3", 3, &f, "y")
}

/// Elliptic cylinder `M = {½x² + y² = ½}` in `R³` with `f = y`.
pub fn sec4() -> Example {
    example("sec4", 3, "y", "0.5*x^2 + y^2 - 0.5")
}

/// All checkable examples, in a fixed order.
pub fn examples() -> Vec<Example> {
    vec![ex1(), exa2(), exa3(2, 1), sec4()]
}

/// A polynomial map `F = (f1, f2): R² → R²` with `Jac(F) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianPair {
    pub f1: String,
    pub f2: String,
}

/// The shear `(x + y², y)` followed by `count − 1` random compositions of
/// triangular maps `(x + c·y^k, y)` and `(x, y + c·x^k)`, each of Jacobian 1.
/// Coefficients stay small so gradients on `[−1, 1]²` stay moderate.
pub fn jacobian_pairs(count: usize, seed: u64) -> Vec<JacobianPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![JacobianPair {
        f1: "x + y^2".into(),
        f2: "y".into(),
    }];
    while out.len() < count {
        let (mut a, mut b) = ("x".to_string(), "y".to_string());
        let steps = rng.random_range(2..=3);
        let mut first_moves_x = rng.random_bool(0.5);
        for _ in 0..steps {
            let c = rng.random_range(1..=4) as f64
                * 0.25
                * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let k = rng.random_range(1..=2);
            if first_moves_x {
                a = format!("({a}) + {c}*({b})^{k}");
            } else {
                b = format!("({b}) + {c}*({a})^{k}");
            }
            first_moves_x = !first_moves_x;
        }
        out.push(JacobianPair { f1: a, f2: b });
    }
    out
}

/// Expressions with transcendental functions, as `(formula, arity)`.
pub const TRANSCENDENTAL: &[(&str, usize)] = &[
    ("exp(x)*sin(y)", 2),
    ("log(1 + x^2 + y^2)", 2),
    ("sqrt(1 + x^2*y^2)*cos(x - y)", 2),
    ("y/(1+x^2) + 0.0001*log(1+x^2)", 2),
    ("x/(1 + y^2)^2 - exp(-x^2)", 2),
    ("exp(-(x^2 + y^2))*z + sin(x*y*z)", 3),
];

/// Every expression of the corpus: the examples' `f` and `g`, eight random
/// Jacobian pairs besides the shear, and the transcendental set.
pub fn expressions() -> Result<Vec<Expression>, ExprError> {
    let mut out = Vec::new();
    for e in examples() {
        out.push(Expression::parse(&e.f, e.n)?);
        out.push(Expression::parse(&e.g, e.n)?);
    }
    for pair in jacobian_pairs(10, 0) {
        out.push(Expression::parse(&pair.f1, 2)?);
        out.push(Expression::parse(&pair.f2, 2)?);
    }
    for (text, n) in TRANSCENDENTAL {
        out.push(Expression::parse(text, *n)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::jacobian2;

    #[test]
    fn everything_parses() {
        for e in examples() {
            e.pair().unwrap();
        }
        assert!(expressions().unwrap().len() > 30);
    }

    #[test]
    fn jacobian_pairs_are_unimodular() {
        let pairs = jacobian_pairs(10, 0);
        assert_eq!(pairs.len(), 10);
        for pair in &pairs {
            let f1 = Expression::parse(&pair.f1, 2).unwrap();
            let f2 = Expression::parse(&pair.f2, 2).unwrap();
            for x in [[0.3, -0.7], [1.0, 1.0], [-0.9, 0.2]] {
                assert!(
                    (jacobian2(&f1, &f2, &x).unwrap() - 1.0).abs() < 1e-12,
                    "{pair:?}"
                );
            }
        }
    }

    #[test]
    fn ex1_points_grow() {
        let pts = ex1_points(1.0, 3);
        assert_eq!(pts[1], [1.0, 1.0 / 3f64.sqrt()]);
    }

    #[test]
    fn exa3_formula() {
        assert_eq!(exa3(2, 1).f, "x - 3*x^5*y^2 + 2*x^7*y^3 + y*z");
    }
}
