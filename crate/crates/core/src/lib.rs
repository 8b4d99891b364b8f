//! Numerical toolkit for candidate bifurcation values of smooth functions
//! `f: R^n → R` and for fiber-to-fiber trivialization flows.

// NaN has to fail the guards, so they are written `!(x > y)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod export;
pub mod expr;
pub mod flow;
pub mod geometry;
pub mod interval;
pub mod scan;
pub mod vecops;

pub use expr::{jacobian2, ExprError, Expression};
pub use flow::{Mode, Termination, Trajectory, TransportOptions, TransportResult};
pub use geometry::{
    scaled_milnor_residual, FieldSample, GeometryError, MilnorResidual, ProblemPair, Thresholds,
};
pub use interval::{Interval, IntervalSet};
pub use scan::{AsymptoticReport, Candidate, ReportKind, SweepConfig, WitnessSequence};
pub use vecops::Vector;
