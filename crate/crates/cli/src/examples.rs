//! The built-in examples with pinned configurations, checked against their
//! known values. Each check becomes one row of a pass/fail matrix.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use bifurc::corpus::{self, Example};
use bifurc::flow::{round_trip, transport_ambient, transport_on_manifold};
use bifurc::geometry::{
    field_v, field_v_by_projection, field_v_by_sphere_projection, tangential_gradient,
};
use bifurc::scan::{check_gs, scan_k_infinity, scan_s_zero};
use bifurc::vecops::{dot, norm, norm2};
use bifurc::{jacobian2, Expression, Mode, ProblemPair, SweepConfig, TransportOptions, Vector};

use crate::args::ExampleName;

/// Everything the matrix depends on besides the seed; hashed into the
/// report's input digest.
pub const INPUTS: &str = "\
ex1: f = x - x^3*y^2, g = y
exa2: f = y/(1+x^2), g = x, S = R, U = R, R = 1
exa3: f = x - 3*x^5*y^2 + 2*x^7*y^3 + y*z, g = y, S = R, U = R, R = 1
exa4: 10 Jacobian pairs starting with the shear (x + y^2, y), 1000 points each
sec4: f = y, g = 0.5*x^2 + y^2 - 0.5
sweeps: default SweepConfig with the run seed; transports: default TransportOptions
";

/// Starts per example for the flow rows.
const FLOW_STARTS: usize = 10;
const EXA3_TRANSPORTS: usize = 100;
const JACOBIAN_POINTS: usize = 1000;

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub example: &'static str,
    pub check: String,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Matrix {
    pub rows: Vec<Row>,
}

impl Matrix {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let mark = if r.pass { "pass" } else { "FAIL" };
            let _ = writeln!(out, "{mark}  {:<5} {}: {}", r.example, r.check, r.observed);
        }
        out
    }

    /// Expected against observed for every failing row.
    pub fn diff(&self) -> String {
        let mut out = String::new();
        for r in self.rows.iter().filter(|r| !r.pass) {
            let _ = writeln!(
                out,
                "{} / {}\n  - expected: {}\n  + observed: {}",
                r.example, r.check, r.expected, r.observed
            );
        }
        out
    }

    fn push(
        &mut self,
        example: &'static str,
        check: &str,
        expected: &str,
        observed: String,
        pass: bool,
    ) {
        self.rows.push(Row {
            example,
            check: check.to_string(),
            expected: expected.to_string(),
            observed,
            pass,
        });
    }

    /// A row for a failed computation.
    fn error(
        &mut self,
        example: &'static str,
        check: &str,
        expected: &str,
        err: impl std::fmt::Display,
    ) {
        self.push(example, check, expected, format!("error: {err}"), false);
    }
}

pub fn run(which: ExampleName, seed: u64) -> Matrix {
    let mut m = Matrix::default();
    let all = which == ExampleName::All;
    if all || which == ExampleName::Ex1 {
        ex1(&mut m, seed);
    }
    if all || which == ExampleName::Exa2 {
        exa2(&mut m, seed);
    }
    if all || which == ExampleName::Exa3 {
        exa3(&mut m, seed);
    }
    if all || which == ExampleName::Exa4 {
        exa4(&mut m, seed);
    }
    if all || which == ExampleName::Sec4 {
        sec4(&mut m, seed);
    }
    m
}

fn sweep(seed: u64) -> SweepConfig {
    SweepConfig {
        seed,
        ..SweepConfig::default()
    }
}

fn fmt_max(v: f64) -> String {
    format!("max {v:.3e}")
}

fn ex1(m: &mut Matrix, seed: u64) {
    let e = corpus::ex1();
    let p = e.pair().expect("built-in example parses");
    let mut worst = 0f64;
    for x in corpus::ex1_points(1.0, 10) {
        match tangential_gradient(&p, &x) {
            Ok(t) => worst = worst.max(norm(&t)),
            Err(_) => worst = f64::INFINITY,
        }
    }
    m.push(
        "ex1",
        "|grad_g f| at (n/2, 2/(sqrt3 n)), n = 1..10",
        "<= 1e-12",
        fmt_max(worst),
        worst <= 1e-12,
    );

    let exact = (-20..=20).all(|k| {
        let x = [k as f64 * 0.25, 0.0];
        tangential_gradient(&p, &x).is_ok_and(|t| t == [1.0, 0.0])
    });
    m.push(
        "ex1",
        "grad f_M on y = 0",
        "(1, 0) exactly",
        if exact { "(1, 0)" } else { "differs" }.into(),
        exact,
    );

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts = (0..FLOW_STARTS)
        .map(|_| {
            let x = vec![rng.random_range(-3.0..3.0), rng.random_range(-0.1..0.1)];
            (x, rng.random_range(-1.0..1.0))
        })
        .collect();
    flow_rows(m, &e, starts, Mode::Ambient);
}

fn exa2(m: &mut Matrix, seed: u64) {
    let e = corpus::exa2();
    let p = e.pair().expect("built-in example parses");
    let cfg = sweep(seed);
    match check_gs(&p, &e.s_set, e.window, e.radius, &cfg) {
        Ok(v) => {
            m.push(
                "exa2",
                "(g,S)-Malgrange items 1-3",
                "pass",
                verdict(&v),
                v.pass,
            );
            let mut worst = 0f64;
            let mut count = 0;
            for s in v.slices.iter().flat_map(|s| &s.samples) {
                let expected = 1.0 / (1.0 + s.g_value * s.g_value);
                worst = worst.max((s.tangential_norm - expected).abs());
                count += 1;
            }
            let ok = count > 0 && worst <= 1e-12;
            m.push(
                "exa2",
                "|grad_g f| = 1/(1+s^2) on slice samples",
                "within 1e-12",
                format!("{count} samples, {}", fmt_max(worst)),
                ok,
            );
        }
        Err(err) => m.error("exa2", "(g,S)-Malgrange items 1-3", "pass", err),
    }
    match scan_k_infinity(&p.f, &cfg) {
        Ok(r) => {
            let hit = r.candidates.iter().find(|c| c.value.abs() <= 1e-3);
            let observed = match hit {
                Some(c) => format!("candidate {:.2e}, confidence {:.3}", c.value, c.confidence),
                None => format!("{} candidates, none near 0", r.candidates.len()),
            };
            let ok = hit.is_some_and(|c| c.confidence >= 0.9);
            m.push(
                "exa2",
                "K_inf candidate 0",
                "confidence >= 0.9",
                observed,
                ok,
            );
        }
        Err(err) => m.error("exa2", "K_inf candidate 0", "confidence >= 0.9", err),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts = (0..FLOW_STARTS)
        .map(|_| {
            let x = vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            (x, rng.random_range(-1.0..1.0))
        })
        .collect();
    flow_rows(m, &e, starts, Mode::Ambient);
}

fn verdict(v: &bifurc::scan::GsVerdict) -> String {
    let mark = |b: bool| if b { "pass" } else { "fail" };
    format!(
        "items {}/{}/{}",
        mark(v.item1.pass),
        mark(v.item2.pass),
        mark(v.item3.pass)
    )
}

/// A start with `‖x‖` uniform in `[lo, hi]` and a uniform direction.
fn shell_point(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vector {
    loop {
        let d: Vector = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let len = norm(&d);
        if len > 1e-3 && len <= 1.0 {
            let r = rng.random_range(lo..hi);
            return d.iter().map(|c| c * r / len).collect();
        }
    }
}

fn exa3(m: &mut Matrix, seed: u64) {
    let e = corpus::exa3(2, 1);
    let p = e.pair().expect("built-in example parses");
    match check_gs(&p, &e.s_set, e.window, e.radius, &sweep(seed)) {
        Ok(v) => {
            m.push(
                "exa3",
                "(g,S)-Malgrange items 1-3",
                "pass",
                verdict(&v),
                v.pass,
            );
            // |grad_g f| >= |s| off s = 0 and = 1 on it.
            let mut worst = 0f64;
            let mut count = 0;
            for sample in v.slices.iter().flat_map(|s| &s.samples) {
                let s = sample.g_value;
                let miss = if s == 0.0 {
                    (sample.tangential_norm - 1.0).abs()
                } else {
                    (s.abs() - 1e-12 - sample.tangential_norm).max(0.0)
                };
                worst = worst.max(miss);
                count += 1;
            }
            let ok = count > 0 && worst <= 1e-12;
            m.push(
                "exa3",
                "slice bounds |grad_g f| >= |s|, = 1 at s = 0",
                "miss <= 1e-12",
                format!("{count} samples, {}", fmt_max(worst)),
                ok,
            );
        }
        Err(err) => m.error("exa3", "(g,S)-Malgrange items 1-3", "pass", err),
    }
    let opts = TransportOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0;
    let mut worst = 0f64;
    for k in 0..EXA3_TRANSPORTS {
        let x = shell_point(&mut rng, 3, 5.0, 50.0);
        let lambda = [-1.0, 0.0, 1.0][k % 3];
        match transport_ambient(&p, &x, lambda, e.radius, &opts) {
            Ok(r) => {
                successes += usize::from(r.success);
                worst = worst.max(r.f_error);
            }
            Err(_) => worst = f64::INFINITY,
        }
    }
    let ok = successes == EXA3_TRANSPORTS && worst <= 1e-8;
    m.push(
        "exa3",
        "ambient transports, |x| in [5,50], lambda in {-1,0,1}",
        "100/100 succeed, f_error <= 1e-8",
        format!("{successes}/{EXA3_TRANSPORTS}, f_error {}", fmt_max(worst)),
        ok,
    );
    let starts = (0..FLOW_STARTS)
        .map(|_| {
            (
                shell_point(&mut rng, 3, 5.0, 50.0),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    flow_rows(m, &e, starts, Mode::Ambient);
}

fn exa4(m: &mut Matrix, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0f64;
    let mut count = 0;
    for pair in corpus::jacobian_pairs(10, seed) {
        let (Ok(f1), Ok(f2)) = (
            Expression::parse(&pair.f1, 2),
            Expression::parse(&pair.f2, 2),
        ) else {
            m.error("exa4", "Jacobian pair parses", "ok", &pair.f1);
            return;
        };
        let Ok(p) = ProblemPair::new(f1.clone(), f2.clone()) else {
            m.error("exa4", "Jacobian pair parses", "ok", &pair.f1);
            return;
        };
        for _ in 0..JACOBIAN_POINTS {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            match jacobian_identity_error(&p, &f1, &f2, &x) {
                Some(err) => {
                    worst = worst.max(err);
                    count += 1;
                }
                None => continue,
            }
        }
    }
    let ok = count > 0 && worst <= 1e-9;
    m.push(
        "exa4",
        "|grad_f2 f1|^2 |grad f2|^2 = Jac(F)^2",
        "relative <= 1e-9",
        format!("{count} points, {}", fmt_max(worst)),
        ok,
    );
}

/// Relative gap between the two sides of the identity, or `None` where
/// `∇f₂` vanishes.
pub fn jacobian_identity_error(
    p: &ProblemPair,
    f1: &Expression,
    f2: &Expression,
    x: &[f64],
) -> Option<f64> {
    let t = tangential_gradient(p, x).ok()?;
    let g2 = f2.grad(x).ok()?;
    let lhs = norm2(&t) * norm2(&g2);
    let jac = jacobian2(f1, f2, x).ok()?;
    let rhs = jac * jac;
    let scale = lhs.abs().max(rhs.abs());
    Some(if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    })
}

fn sec4(m: &mut Matrix, seed: u64) {
    let e = corpus::sec4();
    let p = e.pair().expect("built-in example parses");
    let mut worst = 0f64;
    for z in [0.1, -0.1, 1.0, -1.0, 10.0, -10.0] {
        worst =
            worst.max(field_v(&p, &[1.0, 0.0, z]).map_or(f64::INFINITY, |v| (v[1] - 1.0).abs()));
    }
    m.push(
        "sec4",
        "v2(1, 0, z) for z in {+-0.1, +-1, +-10}",
        "1 +- 1e-10",
        fmt_max(worst),
        worst <= 1e-10,
    );

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut on_surface = || {
        let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let z: f64 = rng.random_range(-20.0..20.0);
        [t.cos(), t.sin() / 2f64.sqrt(), z]
    };
    let mut worst = 0f64;
    let mut count = 0;
    while count < 100 {
        let [x, y, _] = on_surface();
        if x.abs() < 1e-3 || y.abs() < 1e-3 {
            continue;
        }
        worst = worst.max(field_v(&p, &[x, y, 0.0]).map_or(f64::INFINITY, |v| v[1].abs()));
        count += 1;
    }
    m.push(
        "sec4",
        "v2(x, y, 0) at 100 surface points",
        "0 +- 1e-10",
        fmt_max(worst),
        worst <= 1e-10,
    );

    let (mut agree, mut ortho, mut count) = (0f64, 0f64, 0);
    while count < 500 {
        let x = on_surface();
        let Ok(v) = field_v(&p, &x) else { continue };
        count += 1;
        for w in [
            field_v_by_projection(&p, &x),
            field_v_by_sphere_projection(&p, &x),
        ] {
            let gap = w.map_or(f64::INFINITY, |w| {
                v.iter()
                    .zip(&w)
                    .fold(0f64, |m, (a, b)| m.max((a - b).abs() / a.abs().max(1.0)))
            });
            agree = agree.max(gap);
        }
        let gg = p.g.grad(&x).unwrap_or_default();
        let scale = norm(&v).max(f64::MIN_POSITIVE);
        ortho = ortho
            .max(dot(&v, &x).abs() / (scale * norm(&x)))
            .max(dot(&v, &gg).abs() / (scale * norm(&gg)));
    }
    m.push(
        "sec4",
        "v formulas agree at 500 surface points",
        "<= 1e-9",
        fmt_max(agree),
        agree <= 1e-9,
    );
    m.push(
        "sec4",
        "<v, x> and <v, grad g> relative",
        "<= 1e-10",
        fmt_max(ortho),
        ortho <= 1e-10,
    );

    match scan_s_zero(&p, &sweep(seed)) {
        Ok(r) => {
            let root = 0.5f64.sqrt();
            let found = |target: f64| {
                r.candidates
                    .iter()
                    .any(|c| (c.value - target).abs() <= 1e-6)
            };
            let values: Vec<String> = r
                .candidates
                .iter()
                .map(|c| format!("{:.6}", c.value))
                .collect();
            let ok = found(root) && found(-root) && r.candidates.len() == 2;
            m.push(
                "sec4",
                "S_0 candidates",
                "exactly +-0.707107",
                format!("[{}]", values.join(", ")),
                ok,
            );
        }
        Err(err) => m.error("sec4", "S_0 candidates", "exactly +-0.707107", err),
    }

    let starts = (0..FLOW_STARTS)
        .map(|_| {
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let z: f64 =
                rng.random_range(1.0..20.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (
                vec![t.cos(), t.sin() / 2f64.sqrt(), z],
                rng.random_range(-0.6..0.6),
            )
        })
        .collect();
    flow_rows(m, &e, starts, Mode::Manifold);
}

/// Transports and round trips from `starts`, checking the flow invariants
/// on every trajectory.
fn flow_rows(m: &mut Matrix, e: &Example, starts: Vec<(Vector, f64)>, mode: Mode) {
    let name = e.name;
    let p = e.pair().expect("built-in example parses");
    let opts = TransportOptions::default();
    let tol = opts.tol;
    let total = starts.len();
    let (mut ok, mut affine, mut drift, mut adherence, mut trip) = (0, 0f64, 0f64, 0f64, 0f64);
    for (x, lambda) in &starts {
        let result = match mode {
            Mode::Ambient => transport_ambient(&p, x, *lambda, e.radius, &opts),
            Mode::Manifold => transport_on_manifold(&p, x, *lambda, &opts),
        };
        let Ok(r) = result else { continue };
        if !r.success {
            continue;
        }
        ok += 1;
        affine = affine.max(r.trajectory.scaled_affine_residual());
        if mode == Mode::Manifold {
            drift = drift.max(r.norm_drift.unwrap_or(f64::INFINITY));
            adherence = adherence.max(
                r.trajectory
                    .g_values
                    .iter()
                    .fold(0f64, |m, g| m.max(g.abs())),
            );
        }
        let err = round_trip(&p, x, *lambda, mode, e.radius, &opts)
            .map_or(f64::INFINITY, |rt| rt.error / (1.0 + norm(x)));
        trip = trip.max(err);
    }
    let label = match mode {
        Mode::Ambient => "ambient",
        Mode::Manifold => "manifold",
    };
    m.push(
        name,
        &format!("{label} transports succeed"),
        &format!("{total}/{total}"),
        format!("{ok}/{total}"),
        ok == total,
    );
    m.push(
        name,
        "affine law on every step",
        &format!("<= {:e}", 10.0 * tol),
        fmt_max(affine),
        affine <= 10.0 * tol,
    );
    if mode == Mode::Manifold {
        m.push(
            name,
            "norm drift",
            &format!("<= {:e}", 10.0 * tol),
            fmt_max(drift),
            drift <= 10.0 * tol,
        );
        m.push(
            name,
            "|g| along paths",
            "<= 1e-10",
            fmt_max(adherence),
            adherence <= 1e-10,
        );
    }
    m.push(
        name,
        "round trip / (1 + |x|)",
        "<= 1e-5",
        fmt_max(trip),
        ok > 0 && trip <= 1e-5,
    );
}
