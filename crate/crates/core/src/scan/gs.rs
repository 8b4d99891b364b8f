use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::{assemble, run_sweep, Rule, Sweep};
use super::search::{Probe, Target};
use super::sphere::directions;
use super::stats::log_slope;
use super::{AsymptoticReport, ProblemEcho, ReportKind, ScanError, SweepConfig, DECAY_SLOPE};
use crate::geometry::ProblemPair;
use crate::interval::{Interval, IntervalSet};
use crate::vecops::{distance, norm, reject, scale, Vector};

/// Most sample points kept per slice in the evidence.
const MAX_SLICE_SAMPLES: usize = 512;
/// Most violating points quoted per item.
const MAX_EXAMPLES: usize = 8;

/// Outcome of one item of the condition on the sampled region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemCheck {
    pub pass: bool,
    /// Sample points of `D = f⁻¹(U) \ B(R)` examined.
    pub checked: usize,
    pub violations: usize,
    pub examples: Vec<Vector>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSample {
    pub radius: f64,
    pub x: Vector,
    pub f_value: f64,
    pub g_value: f64,
    /// `‖∇_g f(x)‖`
    pub tangential_norm: f64,
    pub grad_f_norm: f64,
}

/// Evidence for item 3 on the slice `g = s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceEvidence {
    pub s: f64,
    pub radii: Vec<f64>,
    /// Smallest `‖x‖‖∇_g f(x)‖` found at each radius within `D`.
    pub min_quantity: Vec<Option<f64>>,
    /// Estimated `δ_s`: the smallest of those minima.
    pub delta_s: Option<f64>,
    pub slope: Option<f64>,
    /// Some minimum is zero up to rounding (`‖∇_g f‖ ≤ 1e-10‖∇f‖`).
    pub vanishing: bool,
    pub decaying: bool,
    /// No sample of this slice fell in `D`; the slice is skipped.
    pub skipped: bool,
    pub pass: bool,
    pub empty_radii: Vec<f64>,
    pub samples: Vec<SliceSample>,
    pub samples_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsVerdict {
    pub pass: bool,
    pub s_set: IntervalSet,
    pub window: Interval,
    pub radius: f64,
    /// `∇g` does not vanish on the sampled part of `D`.
    pub item1: ItemCheck,
    /// The sampled part of `D` lies in `g⁻¹(S)`.
    pub item2: ItemCheck,
    /// On every slice the fiberwise Malgrange quantity stays bounded away
    /// from zero without decaying in `r`.
    pub item3: ItemCheck,
    pub slices: Vec<SliceEvidence>,
    /// Values `λ` at which slice tracks decay or vanish.
    pub report: AsymptoticReport,
}

#[derive(Default)]
struct Tally {
    checked: usize,
    bad_gradient: Vec<Vector>,
    bad_level: Vec<Vector>,
    skipped: usize,
}

impl Tally {
    fn visit(&mut self, p: &ProblemPair, s_set: &IntervalSet, x: &[f64]) {
        self.checked += 1;
        match p.g.value_and_grad(x) {
            Ok((gv, gg)) => {
                if !(norm(&gg) >= p.thresholds.grad_g_rel) {
                    self.bad_gradient.push(x.to_vec());
                }
                if !s_set.contains(gv) {
                    self.bad_level.push(x.to_vec());
                }
            }
            Err(_) => self.skipped += 1,
        }
    }
}

fn item(violations: &[Vector], checked: usize, what: &str) -> ItemCheck {
    ItemCheck {
        pass: violations.is_empty() && checked > 0,
        checked,
        violations: violations.len(),
        examples: violations.iter().take(MAX_EXAMPLES).cloned().collect(),
        note: if checked == 0 {
            "no sample fell in D".to_string()
        } else {
            format!("{} of {checked} samples {what}", violations.len())
        },
    }
}

/// Sampled check of the `(g,S)`-Malgrange condition on
/// `D = f⁻¹(U) \ {‖x‖ ≤ R}`. Items 1 and 2 are tested on sphere samples and
/// slice points; item 3 minimizes `‖x‖‖∇_g f‖` on `{g = s} ∩ sphere` for a
/// grid of `s ∈ S` across the sweep radii beyond `R`.
pub fn check_gs(
    p: &ProblemPair,
    s_set: &IntervalSet,
    window: Interval,
    radius: f64,
    cfg: &SweepConfig,
) -> Result<GsVerdict, ScanError> {
    cfg.validate()?;
    if !(radius > 0.0) {
        return Err(ScanError::Config("R must be positive".into()));
    }
    let radii: Vec<f64> = cfg.radii().into_iter().filter(|r| *r > radius).collect();
    if radii.is_empty() {
        return Err(ScanError::Config(format!(
            "no sweep radius exceeds R = {radius}"
        )));
    }
    let n = p.dim();
    let mut tally = Tally::default();

    let sphere_seeds = directions(n, cfg.directions, cfg.seed);
    for &r in &radii {
        let inside: Vec<Option<Vector>> = sphere_seeds
            .par_iter()
            .map(|d| {
                let x = scale(r, d);
                match p.f.eval(&x) {
                    Ok(fv) if window.contains(fv) => Some(x),
                    _ => None,
                }
            })
            .collect();
        for x in inside.into_iter().flatten() {
            tally.visit(p, s_set, &x);
        }
    }

    let seeds = directions(n, cfg.intersection_seeds, cfg.seed);
    let mut slices = Vec::new();
    let mut candidates = Vec::new();
    let mut sweeps: Vec<Sweep> = Vec::new();
    for s in s_set.grid(cfg.slices, cfg.slice_extent) {
        let target = Target::Fiber {
            f: &p.f,
            g: &p.g,
            level: s,
        };
        let sweep = run_sweep(
            &target,
            &seeds,
            &radii,
            cfg.refine_iters,
            cfg.max_evaluations,
        );
        let evidence = slice_evidence(p, s, &sweep, window);
        for sample in &evidence.samples {
            tally.visit(p, s_set, &sample.x);
        }
        candidates.extend(assemble(&sweep, Rule::Decay, Some(window), Some(s)).candidates);
        slices.push(evidence);
        sweeps.push(sweep);
    }
    candidates.sort_by(|a, b| a.value.total_cmp(&b.value));

    let item1 = item(
        &tally.bad_gradient,
        tally.checked,
        "have a vanishing gradient of g",
    );
    let item2 = item(&tally.bad_level, tally.checked, "have g outside S");
    let examined: Vec<&SliceEvidence> = slices.iter().filter(|e| !e.skipped).collect();
    let failing: Vec<&SliceEvidence> = examined.iter().copied().filter(|e| !e.pass).collect();
    let item3 = ItemCheck {
        pass: !examined.is_empty() && failing.is_empty(),
        checked: examined
            .iter()
            .map(|e| e.samples.len() + e.samples_dropped)
            .sum(),
        violations: failing.len(),
        examples: failing
            .iter()
            .filter_map(|e| e.samples.first().map(|s| s.x.clone()))
            .take(MAX_EXAMPLES)
            .collect(),
        note: format!(
            "{} of {} examined slices fail ({} skipped as empty){}",
            failing.len(),
            examined.len(),
            slices.len() - examined.len(),
            if failing.is_empty() {
                String::new()
            } else {
                let levels: Vec<String> = failing.iter().map(|e| e.s.to_string()).collect();
                format!(": s = {}", levels.join(", "))
            }
        ),
    };

    let empty_radii = radii
        .iter()
        .copied()
        .filter(|r| slices.iter().all(|e| e.empty_radii.contains(r)))
        .collect();
    let report = AsymptoticReport {
        kind: ReportKind::KInfGs,
        problem: ProblemEcho {
            n,
            f: p.f.to_string(),
            g: Some(p.g.to_string()),
        },
        candidates,
        swept_config: cfg.clone(),
        radii: radii.clone(),
        non_candidates_floor: slices
            .iter()
            .filter_map(|e| e.min_quantity.last().copied().flatten())
            .min_by(f64::total_cmp),
        skipped_samples: sweeps.iter().map(|s| s.skipped()).sum::<usize>() + tally.skipped,
        failed_projections: sweeps.iter().map(|s| s.failed_projections()).sum(),
        empty_radii,
        partial: sweeps.iter().any(|s| s.partial),
        evaluations: sweeps.iter().map(|s| s.evaluations).sum(),
    };
    Ok(GsVerdict {
        pass: item1.pass && item2.pass && item3.pass,
        s_set: s_set.clone(),
        window,
        radius,
        item1,
        item2,
        item3,
        slices,
        report,
    })
}

fn slice_evidence(p: &ProblemPair, s: f64, sweep: &Sweep, window: Interval) -> SliceEvidence {
    let mut radii = Vec::new();
    let mut min_quantity = Vec::new();
    let mut empty_radii = Vec::new();
    let mut samples: Vec<SliceSample> = Vec::new();
    let mut dropped = 0;
    let mut vanishing = false;
    for shell in &sweep.shells {
        radii.push(shell.radius);
        let mut best: Option<f64> = None;
        let mut kept: Vec<&Vector> = Vec::new();
        for probe in &shell.probes {
            let Probe::Found(found) = probe else { continue };
            if !window.contains(found.f) {
                continue;
            }
            best = Some(best.map_or(found.quantity, |b| b.min(found.quantity)));
            vanishing |= found.vanishing;
            if kept
                .iter()
                .any(|k| distance(k, &found.x) <= 1e-9 * shell.radius)
            {
                continue;
            }
            kept.push(&found.x);
            if samples.len() >= MAX_SLICE_SAMPLES {
                dropped += 1;
                continue;
            }
            let (Ok(gf), Ok((gv, gg))) = (p.f.grad(&found.x), p.g.value_and_grad(&found.x)) else {
                continue;
            };
            samples.push(SliceSample {
                radius: shell.radius,
                x: found.x.clone(),
                f_value: found.f,
                g_value: gv,
                tangential_norm: norm(&reject(&gf, &gg)),
                grad_f_norm: norm(&gf),
            });
        }
        if best.is_none() {
            empty_radii.push(shell.radius);
        }
        min_quantity.push(best);
    }
    let (r, q): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .zip(&min_quantity)
        .filter_map(|(r, q)| q.map(|q| (*r, q)))
        .unzip();
    let slope = if r.len() >= 3 {
        log_slope(&r, &q)
    } else {
        None
    };
    let decaying = slope.is_some_and(|s| s < DECAY_SLOPE);
    let skipped = r.is_empty();
    SliceEvidence {
        s,
        radii,
        min_quantity,
        delta_s: q.iter().copied().min_by(f64::total_cmp),
        slope,
        vanishing,
        decaying,
        skipped,
        pass: !skipped && !vanishing && !decaying,
        empty_radii,
        samples,
        samples_dropped: dropped,
    }
}
