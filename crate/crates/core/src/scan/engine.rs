//! Radius sweeps, track classification and clustering into candidates.

use super::search::{shell, Found, Probe, Shell, Target};
use super::stats::{log_slope, median, single_linkage};
use super::{
    AsymptoticReport, Candidate, ProblemEcho, ReportKind, SweepConfig, WitnessSequence,
    DECAY_SLOPE, MAX_WITNESSES, MILNOR_WITNESS,
};
use crate::interval::Interval;
use crate::vecops::{distance, Vector};

pub(crate) struct Sweep {
    pub shells: Vec<Shell>,
    pub partial: bool,
    pub evaluations: u64,
    pub seeds: usize,
}

/// One shell per radius, stopping early once the evaluation budget is spent.
pub(crate) fn run_sweep(
    target: &Target,
    seeds: &[Vector],
    radii: &[f64],
    iters: usize,
    budget: Option<u64>,
) -> Sweep {
    let mut shells = Vec::with_capacity(radii.len());
    let mut evaluations = 0;
    let mut partial = false;
    for &r in radii {
        if budget.is_some_and(|b| evaluations >= b) {
            partial = true;
            break;
        }
        let s = shell(target, seeds, r, iters);
        evaluations += s.evaluations;
        shells.push(s);
    }
    Sweep {
        shells,
        partial,
        evaluations,
        seeds: seeds.len(),
    }
}

impl Sweep {
    pub fn radii(&self) -> Vec<f64> {
        self.shells.iter().map(|s| s.radius).collect()
    }

    /// Points found along seed `i`, by increasing radius.
    pub fn track(&self, i: usize) -> Vec<(f64, &Found)> {
        self.shells
            .iter()
            .filter_map(|s| match &s.probes[i] {
                Probe::Found(f) => Some((s.radius, f)),
                _ => None,
            })
            .collect()
    }

    pub fn skipped(&self) -> usize {
        self.count(|p| matches!(p, Probe::Skipped))
    }

    pub fn failed_projections(&self) -> usize {
        self.count(|p| matches!(p, Probe::ProjectionFailed))
    }

    fn count(&self, pred: impl Fn(&Probe) -> bool) -> usize {
        self.shells
            .iter()
            .map(|s| s.probes.iter().filter(|p| pred(p)).count())
            .sum()
    }

    pub fn empty_radii(&self) -> Vec<f64> {
        self.shells
            .iter()
            .filter(|s| !s.probes.iter().any(|p| matches!(p, Probe::Found(_))))
            .map(|s| s.radius)
            .collect()
    }
}

/// How a track qualifies as evidence for a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Rule {
    /// The quantity decays in `r` (or vanishes); all points are kept.
    Decay,
    /// Only points with quantity below [`MILNOR_WITNESS`] are kept.
    Witness,
}

fn tail_converges(points: &[(f64, &Found)]) -> bool {
    match points {
        [.., (_, a), (_, b)] => (b.f - a.f).abs() <= 1e-2 * (1.0 + b.f.abs()),
        _ => false,
    }
}

fn tail_vanishes(points: &[(f64, &Found)]) -> bool {
    points.len() >= 3 && points[points.len() - 3..].iter().all(|(_, p)| p.vanishing)
}

/// The evidence points of a track, if the track supports a value.
pub(crate) fn qualify(rule: Rule, track: Vec<(f64, &Found)>) -> Option<Vec<(f64, &Found)>> {
    let points: Vec<(f64, &Found)> = match rule {
        Rule::Decay => track,
        Rule::Witness => track
            .into_iter()
            .filter(|(_, p)| p.quantity < MILNOR_WITNESS)
            .collect(),
    };
    if points.len() < 3 || !tail_converges(&points) {
        return None;
    }
    if rule == Rule::Decay && !tail_vanishes(&points) {
        let r: Vec<f64> = points.iter().map(|(r, _)| *r).collect();
        let q: Vec<f64> = points.iter().map(|(_, p)| p.quantity).collect();
        if !log_slope(&r, &q).is_some_and(|s| s < DECAY_SLOPE) {
            return None;
        }
    }
    Some(points)
}

pub(crate) fn witness_sequence(
    seed_index: usize,
    points: &[(f64, &Found)],
    probed: usize,
    rule: Rule,
) -> (WitnessSequence, bool) {
    let vanishing = rule == Rule::Decay && tail_vanishes(points);
    let seq = WitnessSequence {
        seed_index,
        radii: points.iter().map(|(r, _)| *r).collect(),
        points: points.iter().map(|(_, p)| p.x.clone()).collect(),
        f_values: points.iter().map(|(_, p)| p.f).collect(),
        quantity_values: points.iter().map(|(_, p)| p.quantity).collect(),
        probed,
    };
    (seq, vanishing)
}

/// Decay: `clamp(−slope, 0, 1)` per witness (1 when the quantity vanishes).
/// Witness: fraction of probed radii that produced a Milnor point. The
/// candidate takes the median over its witnesses.
pub(crate) fn confidence(rule: Rule, witnesses: &[(WitnessSequence, bool)]) -> f64 {
    let per: Vec<f64> = witnesses
        .iter()
        .map(|(w, vanishing)| match rule {
            Rule::Decay if *vanishing => 1.0,
            Rule::Decay => {
                log_slope(&w.radii, &w.quantity_values).map_or(0.0, |s| (-s).clamp(0.0, 1.0))
            }
            Rule::Witness => w.points.len() as f64 / w.probed.max(1) as f64,
        })
        .collect();
    median(&per).unwrap_or(0.0)
}

pub(crate) struct Assembly {
    pub candidates: Vec<Candidate>,
    pub floor: Option<f64>,
}

/// Clusters the tail `f`-values of qualifying tracks into candidates.
/// The window only filters finished candidates.
pub(crate) fn assemble(
    sweep: &Sweep,
    rule: Rule,
    window: Option<Interval>,
    slice: Option<f64>,
) -> Assembly {
    let mut entries = Vec::new();
    let mut qualified = vec![false; sweep.seeds];
    for (i, q) in qualified.iter_mut().enumerate() {
        if let Some(points) = qualify(rule, sweep.track(i)) {
            *q = true;
            entries.push((i, points));
        }
    }
    let tails: Vec<f64> = entries
        .iter()
        .map(|(_, p)| p.last().expect("≥ 3 points").1.f)
        .collect();
    let mut candidates = Vec::new();
    for cluster in single_linkage(&tails) {
        let mut members = cluster.clone();
        members.sort_unstable();
        let values: Vec<f64> = members.iter().map(|&k| tails[k]).collect();
        let mut witnesses: Vec<(WitnessSequence, bool)> = Vec::new();
        for &k in &members {
            if witnesses.len() == MAX_WITNESSES {
                break;
            }
            let (i, points) = &entries[k];
            let (seq, vanishing) = witness_sequence(*i, points, sweep.shells.len(), rule);
            let end = seq.points.last().expect("non-empty");
            let r = *seq.radii.last().expect("non-empty");
            let duplicate = witnesses.iter().any(|(w, _)| {
                w.radii.last() == Some(&r)
                    && distance(w.points.last().expect("non-empty"), end) <= 1e-6 * r
            });
            if !duplicate {
                witnesses.push((seq, vanishing));
            }
        }
        candidates.push(Candidate {
            value: median(&values).expect("non-empty cluster"),
            confidence: confidence(rule, &witnesses),
            support: members.len(),
            slice,
            witnesses: witnesses.into_iter().map(|(w, _)| w).collect(),
        });
    }
    let floor = sweep.shells.last().and_then(|s| {
        s.probes
            .iter()
            .enumerate()
            .filter(|(i, _)| !qualified[*i])
            .filter_map(|(_, p)| match p {
                Probe::Found(f) => Some(f.quantity),
                _ => None,
            })
            .min_by(f64::total_cmp)
    });
    if let Some(w) = window {
        candidates.retain(|c| w.contains(c.value));
    }
    Assembly { candidates, floor }
}

pub(crate) fn report(
    kind: ReportKind,
    problem: ProblemEcho,
    sweep: &Sweep,
    assembly: Assembly,
    cfg: &SweepConfig,
) -> AsymptoticReport {
    AsymptoticReport {
        kind,
        problem,
        candidates: assembly.candidates,
        swept_config: cfg.clone(),
        radii: sweep.radii(),
        non_candidates_floor: assembly.floor,
        skipped_samples: sweep.skipped(),
        failed_projections: sweep.failed_projections(),
        empty_radii: sweep.empty_radii(),
        partial: sweep.partial,
        evaluations: sweep.evaluations,
    }
}
