//! Sphere sweeps that estimate asymptotic critical values `K∞(f)`, check the
//! `(g,S)`-Malgrange condition, and locate asymptotic Milnor values `S₀`.
//!
//! Everything here produces *candidates*: values backed by finite witness
//! sequences and a decay fit, never proofs of membership.

mod engine;
mod gs;
mod refine;
mod search;
pub mod sphere;
pub mod stats;
mod sweeps;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::ExprError;
use crate::geometry::GeometryError;
use crate::interval::Interval;
use crate::vecops::Vector;

pub use gs::{check_gs, GsVerdict, ItemCheck, SliceEvidence, SliceSample};
pub use refine::refine_candidate;
pub use sweeps::{scan_k_infinity, scan_s_zero};

/// A point counts as a Milnor witness below this residual.
pub const MILNOR_WITNESS: f64 = 1e-8;
/// Decay slopes of `ln q` against `ln r` below this mark a decaying track.
pub const DECAY_SLOPE: f64 = -0.25;
/// `‖∇_g f‖ ≤ VANISHING·‖∇f‖` is indistinguishable from zero.
pub const VANISHING: f64 = 1e-10;
/// Most witness sequences kept per candidate.
pub const MAX_WITNESSES: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid sweep configuration: {0}")]
    Config(String),
    #[error("candidate index {index} out of range for a report with {len} candidates")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{0} scans need an auxiliary function g")]
    MissingG(&'static str),
}

/// Geometric radius sweep and local-search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub r0: f64,
    /// Ratio `q > 1` between consecutive radii.
    pub ratio: f64,
    /// `K`: radii are `r0·q^k` for `k = 0..=K`.
    pub radius_steps: usize,
    pub directions: usize,
    /// Seeds per radius for searches on `{g = s} ∩ sphere`.
    pub intersection_seeds: usize,
    pub f_window: Option<Interval>,
    pub refine_iters: usize,
    pub seed: u64,
    /// Stop after the radius at which this many objective evaluations
    /// have been spent; the report is then flagged partial.
    pub max_evaluations: Option<u64>,
    /// Slices `g = s` examined per interval of `S`.
    pub slices: usize,
    /// Slices are taken from `S ∩ [−slice_extent, slice_extent]`.
    pub slice_extent: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            r0: 10.0,
            ratio: 2.0,
            radius_steps: 12,
            directions: 4096,
            intersection_seeds: 256,
            f_window: None,
            refine_iters: 100,
            seed: 0,
            max_evaluations: None,
            slices: 11,
            slice_extent: 5.0,
        }
    }
}

impl SweepConfig {
    pub fn radii(&self) -> Vec<f64> {
        (0..=self.radius_steps)
            .map(|k| self.r0 * self.ratio.powi(k as i32))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ScanError> {
        let bad = |m: &str| Err(ScanError::Config(m.to_string()));
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return bad("r0 must be positive");
        }
        if !(self.ratio > 1.0 && self.ratio.is_finite()) {
            return bad("ratio must exceed 1");
        }
        if self.directions == 0 || self.intersection_seeds == 0 || self.slices == 0 {
            return bad("direction, seed and slice counts must be positive");
        }
        if !(self.slice_extent > 0.0) {
            return bad("slice_extent must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportKind {
    #[serde(rename = "K_inf")]
    KInf,
    #[serde(rename = "K_inf_gS")]
    KInfGs,
    #[serde(rename = "S_zero")]
    SZero,
}

/// The formulas a report was computed from, in re-parseable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemEcho {
    pub n: usize,
    pub f: String,
    pub g: Option<String>,
}

/// Points of one search track with strictly increasing norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessSequence {
    /// Index of the seed direction the track started from at every radius.
    pub seed_index: usize,
    pub radii: Vec<f64>,
    pub points: Vec<Vector>,
    pub f_values: Vec<f64>,
    /// `‖x‖‖∇f‖`, `‖x‖‖∇_g f‖` or the Milnor residual, by report kind.
    pub quantity_values: Vec<f64>,
    /// Radii searched along this track, including those without a point.
    pub probed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub value: f64,
    pub confidence: f64,
    /// Number of tracks in the cluster.
    pub support: usize,
    /// Slice level `s` for fiberwise reports.
    pub slice: Option<f64>,
    pub witnesses: Vec<WitnessSequence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub kind: ReportKind,
    pub problem: ProblemEcho,
    pub candidates: Vec<Candidate>,
    pub swept_config: SweepConfig,
    pub radii: Vec<f64>,
    /// Smallest quantity at the largest radius among tracks that support
    /// no candidate.
    pub non_candidates_floor: Option<f64>,
    pub skipped_samples: usize,
    pub failed_projections: usize,
    /// Radii at which no search produced a point.
    pub empty_radii: Vec<f64>,
    pub partial: bool,
    pub evaluations: u64,
}
