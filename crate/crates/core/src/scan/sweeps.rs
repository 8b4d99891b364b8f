use super::engine::{assemble, report, run_sweep, Rule};
use super::search::Target;
use super::sphere::directions;
use super::{AsymptoticReport, ProblemEcho, ReportKind, ScanError, SweepConfig};
use crate::expr::Expression;
use crate::geometry::{GeometryError, ProblemPair};

/// Candidates for `K∞(f)`: on each sphere, minimize `‖x‖‖∇f(x)‖` from every
/// seed direction, then cluster the `f`-values of tracks whose quantity
/// decays with the radius.
pub fn scan_k_infinity(f: &Expression, cfg: &SweepConfig) -> Result<AsymptoticReport, ScanError> {
    cfg.validate()?;
    let n = f.arity();
    if n < 2 {
        return Err(GeometryError::Arity { f: n, g: n }.into());
    }
    let seeds = directions(n, cfg.directions, cfg.seed);
    let target = Target::Malgrange { f };
    let sweep = run_sweep(
        &target,
        &seeds,
        &cfg.radii(),
        cfg.refine_iters,
        cfg.max_evaluations,
    );
    let assembly = assemble(&sweep, Rule::Decay, cfg.f_window, None);
    let echo = ProblemEcho {
        n,
        f: f.to_string(),
        g: None,
    };
    Ok(report(ReportKind::KInf, echo, &sweep, assembly, cfg))
}

/// Candidates for `S₀(f_M)`: on each sphere, Gauss–Newton from seed
/// directions onto `{g = 0} ∩ sphere`, minimize the Milnor residual along
/// that intersection, and cluster the `f`-values of tracks with residual
/// below the witness threshold at three or more radii.
pub fn scan_s_zero(p: &ProblemPair, cfg: &SweepConfig) -> Result<AsymptoticReport, ScanError> {
    cfg.validate()?;
    let seeds = directions(p.dim(), cfg.intersection_seeds, cfg.seed);
    let target = Target::Milnor { f: &p.f, g: &p.g };
    let sweep = run_sweep(
        &target,
        &seeds,
        &cfg.radii(),
        cfg.refine_iters,
        cfg.max_evaluations,
    );
    let assembly = assemble(&sweep, Rule::Witness, cfg.f_window, None);
    let echo = ProblemEcho {
        n: p.dim(),
        f: p.f.to_string(),
        g: Some(p.g.to_string()),
    };
    Ok(report(ReportKind::SZero, echo, &sweep, assembly, cfg))
}
