use bifurc::corpus;
use bifurc::scan::{check_gs, refine_candidate, scan_k_infinity, scan_s_zero, ScanError};
use bifurc::vecops::norm;
use bifurc::{
    scaled_milnor_residual, AsymptoticReport, Expression, Interval, IntervalSet, ProblemPair,
    SweepConfig,
};

fn small() -> SweepConfig {
    SweepConfig {
        radius_steps: 6,
        directions: 512,
        intersection_seeds: 128,
        slices: 7,
        ..SweepConfig::default()
    }
}

fn cylinder() -> ProblemPair {
    corpus::sec4().pair().unwrap()
}

fn kinf(f: &str, n: usize, cfg: &SweepConfig) -> AsymptoticReport {
    scan_k_infinity(&Expression::parse(f, n).unwrap(), cfg).unwrap()
}

#[test]
fn exa2_has_candidate_zero() {
    let r = kinf("y/(1+x^2)", 2, &small());
    assert_eq!(r.candidates.len(), 1, "{:?}", r.candidates);
    let c = &r.candidates[0];
    assert!(c.value.abs() < 1e-3, "{}", c.value);
    assert!(c.confidence >= 0.9, "{}", c.confidence);
    assert!(!r.partial);
}

#[test]
fn linear_function_has_no_candidates() {
    let r = kinf("x + 2*y - 3", 2, &small());
    assert!(r.candidates.is_empty());
    assert!(r.non_candidates_floor.unwrap() > 1.0);
    let r = kinf("x - y + z", 3, &small());
    assert!(r.candidates.is_empty());
}

#[test]
fn window_only_filters() {
    let cfg = small();
    let all = kinf(&corpus::ex1().f, 2, &cfg);
    assert!(
        all.candidates.iter().any(|c| c.value.abs() < 1e-3),
        "{:?}",
        all.candidates
    );

    let away = SweepConfig {
        f_window: Some(Interval::new(1.0, 3.0)),
        ..cfg.clone()
    };
    let r = kinf(&corpus::ex1().f, 2, &away);
    assert!(r.candidates.iter().all(|c| c.value > 1.0 && c.value < 3.0));
    assert!(r.candidates.iter().all(|c| all.candidates.contains(c)));

    let around = SweepConfig {
        f_window: Some(Interval::new(-0.5, 0.5)),
        ..cfg
    };
    let r = kinf(&corpus::ex1().f, 2, &around);
    assert!(r.candidates.iter().any(|c| c.value.abs() < 1e-3));
    assert!(r.candidates.iter().all(|c| all.candidates.contains(c)));
}

#[test]
fn malgrange_witnesses_reevaluate() {
    let r = kinf("y/(1+x^2)", 2, &small());
    let f = Expression::parse("y/(1+x^2)", 2).unwrap();
    for c in &r.candidates {
        assert!(!c.witnesses.is_empty() && c.witnesses.len() <= 4);
        for w in &c.witnesses {
            assert!(w.points.len() >= 3);
            for k in 0..w.points.len() {
                let x = &w.points[k];
                assert_eq!(w.quantity_values[k], norm(x) * norm(&f.grad(x).unwrap()));
                assert_eq!(w.f_values[k], f.eval(x).unwrap());
                assert!((norm(x) - w.radii[k]).abs() <= 1e-9 * w.radii[k]);
                if k > 0 {
                    assert!(norm(x) > norm(&w.points[k - 1]));
                }
            }
        }
    }
}

#[test]
fn sweeps_are_deterministic() {
    let a = kinf("y/(1+x^2)", 2, &small());
    let b = kinf("y/(1+x^2)", 2, &small());
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    let other = kinf("y/(1+x^2)", 2, &SweepConfig { seed: 9, ..small() });
    assert_ne!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&other).unwrap()
    );
}

#[test]
fn longer_sweeps_extend_tracks() {
    let short = kinf(
        "y/(1+x^2)",
        2,
        &SweepConfig {
            radius_steps: 4,
            ..small()
        },
    );
    let long = kinf(
        "y/(1+x^2)",
        2,
        &SweepConfig {
            radius_steps: 6,
            ..small()
        },
    );
    let mut compared = 0;
    for ws in short.candidates.iter().flat_map(|c| &c.witnesses) {
        for wl in long.candidates.iter().flat_map(|c| &c.witnesses) {
            if ws.seed_index != wl.seed_index {
                continue;
            }
            for (r, x) in ws.radii.iter().zip(&ws.points) {
                if let Some(k) = wl.radii.iter().position(|q| q == r) {
                    assert_eq!(&wl.points[k], x);
                    compared += 1;
                }
            }
        }
    }
    assert!(compared > 0);
}

#[test]
fn evaluation_budget_marks_partial() {
    let cfg = SweepConfig {
        max_evaluations: Some(1),
        ..small()
    };
    let r = kinf("y/(1+x^2)", 2, &cfg);
    assert!(r.partial);
    assert!(r.radii.len() < cfg.radii().len());
}

#[test]
fn exa2_satisfies_fiberwise_condition() {
    let e = corpus::exa2();
    let v = check_gs(&e.pair().unwrap(), &e.s_set, e.window, e.radius, &small()).unwrap();
    assert!(
        v.pass,
        "{} / {} / {}",
        v.item1.note, v.item2.note, v.item3.note
    );
    let mut samples = 0;
    for slice in &v.slices {
        for s in &slice.samples {
            let expected = 1.0 / (1.0 + slice.s * slice.s);
            assert!((s.tangential_norm - expected).abs() <= 1e-12, "{s:?}");
            samples += 1;
        }
    }
    // In the plane each slice meets each sphere in two points.
    assert_eq!(samples, 2 * v.slices.len() * v.report.radii.len());
}

#[test]
fn paunescu_zaharia_satisfies_fiberwise_condition() {
    let e = corpus::exa3(2, 1);
    let cfg = SweepConfig {
        radius_steps: 4,
        directions: 256,
        intersection_seeds: 64,
        slices: 5,
        ..SweepConfig::default()
    };
    let v = check_gs(&e.pair().unwrap(), &e.s_set, e.window, e.radius, &cfg).unwrap();
    assert!(v.pass, "{}", v.item3.note);
    for slice in &v.slices {
        assert!(!slice.samples.is_empty());
        for s in &slice.samples {
            if slice.s == 0.0 {
                assert!((s.tangential_norm - 1.0).abs() <= 1e-12, "{s:?}");
            } else {
                assert!(s.tangential_norm >= slice.s.abs() - 1e-12, "{s:?}");
            }
        }
    }
}

#[test]
fn g_equal_to_f_fails_item_three() {
    let p = ProblemPair::parse("y/(1+x^2)", "y/(1+x^2)", 2).unwrap();
    let v = check_gs(
        &p,
        &IntervalSet::real_line(),
        Interval::REAL_LINE,
        1.0,
        &small(),
    )
    .unwrap();
    assert!(!v.pass);
    assert!(!v.item3.pass);
    let zero = v.slices.iter().find(|s| s.s == 0.0).unwrap();
    assert!(!zero.skipped && zero.vanishing && !zero.pass);
    assert!(v.slices.iter().filter(|s| !s.skipped).all(|s| !s.pass));
}

#[test]
fn slices_respect_s() {
    let e = corpus::exa2();
    let s_set = IntervalSet(vec![Interval::new(0.5, 2.0)]);
    let v = check_gs(&e.pair().unwrap(), &s_set, e.window, e.radius, &small()).unwrap();
    // g = x takes every value far out, so item 2 catches points outside S.
    assert!(!v.item2.pass);
    assert!(v.slices.iter().all(|s| s.s > 0.5 && s.s < 2.0));
}

/// Minimum f-values of the scaled residual along `{g = 0} ∩ {‖x‖ = r}`,
/// parametrized as `(cos t, sin t/√2, ±√(r² − x² − y²))`.
fn cylinder_oracle(r: f64) -> Vec<f64> {
    let p = cylinder();
    let m = 200_000;
    let mut values: Vec<(f64, f64)> = Vec::new();
    for sign in [1.0, -1.0] {
        let res: Vec<(f64, f64)> = (0..m)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / m as f64;
                let (x, y) = (t.cos(), t.sin() / 2f64.sqrt());
                let z = sign * (r * r - x * x - y * y).sqrt();
                (scaled_milnor_residual(&p, &[x, y, z]).unwrap(), y)
            })
            .collect();
        for k in 0..m {
            let (prev, next) = (res[(k + m - 1) % m].0, res[(k + 1) % m].0);
            if res[k].0 < 1e-8 && res[k].0 <= prev && res[k].0 <= next {
                values.push(res[k]);
            }
        }
    }
    let mut f: Vec<f64> = values.iter().map(|v| v.1).collect();
    f.sort_by(f64::total_cmp);
    f.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    f
}

#[test]
fn cylinder_milnor_values() {
    let oracle = cylinder_oracle(40.0);
    assert_eq!(oracle.len(), 2, "{oracle:?}");
    assert!((oracle[1] - 0.5f64.sqrt()).abs() < 1e-4);

    let cfg = small();
    let r = scan_s_zero(&cylinder(), &cfg).unwrap();
    let values: Vec<f64> = r.candidates.iter().map(|c| c.value).collect();
    assert_eq!(values.len(), 2, "{values:?}");
    for (v, o) in values.iter().zip(&oracle) {
        assert!((v - o).abs() < 1e-4, "{v} vs {o}");
        assert!((v.abs() - 0.5f64.sqrt()).abs() < 1e-6);
    }
    let p = cylinder();
    for c in &r.candidates {
        for w in &c.witnesses {
            assert!(w.points.len() >= 3);
            for (x, q) in w.points.iter().zip(&w.quantity_values) {
                let again = scaled_milnor_residual(&p, x).unwrap();
                assert_eq!(again, *q);
                assert!(again < 1e-8);
            }
        }
    }
}

#[test]
fn unbounded_milnor_values_are_not_candidates() {
    // M = {z = 0}; the Milnor set is the x-axis where f = x runs off to ±∞.
    let p = ProblemPair::parse("x", "z", 3).unwrap();
    let r = scan_s_zero(&p, &small()).unwrap();
    assert!(r.candidates.is_empty(), "{:?}", r.candidates);
}

#[test]
fn compact_manifold_leaves_every_radius_empty() {
    let p = ProblemPair::parse("x", "x^2 + y^2 - 1", 2).unwrap();
    let cfg = small();
    let r = scan_s_zero(&p, &cfg).unwrap();
    assert!(r.candidates.is_empty());
    assert_eq!(r.empty_radii, cfg.radii());
    assert!(r.failed_projections > 0);
}

#[test]
fn refinement_strengthens_a_true_candidate() {
    let r = kinf("y/(1+x^2)", 2, &small());
    let refined = refine_candidate(&r, 0, 3).unwrap();
    assert_eq!(refined.radii.len(), r.radii.len() + 3);
    assert!(refined.candidates[0].confidence >= r.candidates[0].confidence);
    assert!(
        refined.candidates[0].witnesses[0].points.len() > r.candidates[0].witnesses[0].points.len()
    );
}

#[test]
fn refinement_weakens_a_plateau() {
    // ‖x‖‖∇f‖ falls like 1/‖x‖ until it meets the 2e-4 floor of the log term.
    let cfg = SweepConfig {
        radius_steps: 3,
        ..small()
    };
    let r = kinf("y/(1+x^2) + 0.0001*log(1+x^2)", 2, &cfg);
    assert!(!r.candidates.is_empty());
    let before = r.candidates[0].confidence;
    let refined = refine_candidate(&r, 0, 8).unwrap();
    assert!(
        refined.candidates[0].confidence < before,
        "{before} -> {}",
        refined.candidates[0].confidence
    );
}

#[test]
fn refine_checks_the_index() {
    let r = kinf("x + y", 2, &small());
    assert_eq!(
        refine_candidate(&r, 0, 2).unwrap_err(),
        ScanError::IndexOutOfRange { index: 0, len: 0 }
    );
}

#[test]
fn invalid_configs_are_rejected() {
    let f = Expression::parse("x*y", 2).unwrap();
    for cfg in [
        SweepConfig {
            ratio: 1.0,
            ..small()
        },
        SweepConfig { r0: 0.0, ..small() },
        SweepConfig {
            directions: 0,
            ..small()
        },
    ] {
        assert!(matches!(
            scan_k_infinity(&f, &cfg),
            Err(ScanError::Config(_))
        ));
    }
}
