use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::engine::{confidence, Rule};
use super::search::{descend, Found, Probe, Target};
use super::sphere::directions;
use super::{AsymptoticReport, ReportKind, ScanError, MILNOR_WITNESS};
use crate::expr::Expression;
use crate::vecops::{norm, scale};

const JITTER_STARTS: usize = 8;

/// Extends the witnesses of candidate `index` by `extra_radii` further
/// radii. Each new point is the best of a local search from the scaled
/// previous witness point, jittered copies of it and the original seed
/// direction, with twice the configured iterations. The confidence is
/// recomputed from the extended sequences.
pub fn refine_candidate(
    report: &AsymptoticReport,
    index: usize,
    extra_radii: usize,
) -> Result<AsymptoticReport, ScanError> {
    let len = report.candidates.len();
    let candidate = report
        .candidates
        .get(index)
        .ok_or(ScanError::IndexOutOfRange { index, len })?;
    let cfg = &report.swept_config;
    let n = report.problem.n;
    let f = Expression::parse(&report.problem.f, n)?;
    let g = match (&report.problem.g, report.kind) {
        (Some(text), _) => Some(Expression::parse(text, n)?),
        (None, ReportKind::KInf) => None,
        (None, _) => return Err(ScanError::MissingG("fiberwise")),
    };
    let (target, rule, seed_count) = match (report.kind, &g) {
        (ReportKind::KInf, _) => (Target::Malgrange { f: &f }, Rule::Decay, cfg.directions),
        (ReportKind::KInfGs, Some(g)) => (
            Target::Fiber {
                f: &f,
                g,
                level: candidate.slice.unwrap_or(0.0),
            },
            Rule::Decay,
            cfg.intersection_seeds,
        ),
        (ReportKind::SZero, Some(g)) => (
            Target::Milnor { f: &f, g },
            Rule::Witness,
            cfg.intersection_seeds,
        ),
        _ => return Err(ScanError::MissingG("fiberwise")),
    };
    let seeds = directions(n, seed_count, cfg.seed);
    let last_radius = *report.radii.last().unwrap_or(&cfg.r0);
    let new_radii: Vec<f64> = (1..=extra_radii)
        .map(|j| last_radius * cfg.ratio.powi(j as i32))
        .collect();

    let mut extended = Vec::with_capacity(candidate.witnesses.len());
    for w in &candidate.witnesses {
        let mut w = w.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(
            cfg.seed ^ (w.seed_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        let mut anchor = w
            .points
            .last()
            .cloned()
            .unwrap_or_else(|| scale(cfg.r0, &seeds[w.seed_index]));
        for &r in &new_radii {
            let base = scale(r / norm(&anchor), &anchor);
            let mut starts = vec![base.clone(), scale(r, &seeds[w.seed_index])];
            for _ in 0..JITTER_STARTS {
                let jittered: Vec<f64> = base
                    .iter()
                    .map(|c| c + 0.05 * r * rng.random_range(-1.0..1.0))
                    .collect();
                starts.push(jittered);
            }
            let mut best: Option<Found> = None;
            for s in &starts {
                let mut evals = 0;
                if let Probe::Found(found) =
                    descend(&target, s, r, 2 * cfg.refine_iters, &mut evals)
                {
                    if best.as_ref().is_none_or(|b| found.objective < b.objective) {
                        best = Some(found);
                    }
                }
            }
            w.probed += 1;
            let Some(found) = best else { continue };
            anchor = found.x.clone();
            if rule == Rule::Witness && found.quantity >= MILNOR_WITNESS {
                continue;
            }
            w.radii.push(r);
            w.points.push(found.x);
            w.f_values.push(found.f);
            w.quantity_values.push(found.quantity);
        }
        extended.push(w);
    }

    let flagged: Vec<_> = extended
        .iter()
        .map(|w| {
            let vanishing = rule == Rule::Decay
                && w.quantity_values.len() >= 3
                && w.points[w.points.len() - 3..]
                    .iter()
                    .all(|x| target.quantity(x).is_ok_and(|(_, v)| v));
            (w.clone(), vanishing)
        })
        .collect();
    let mut out = report.clone();
    let c = &mut out.candidates[index];
    c.confidence = confidence(rule, &flagged);
    c.witnesses = extended;
    out.radii.extend(new_radii);
    Ok(out)
}
