//! Trivialization flows: transport points from one fiber of `f` to another
//! by integrating the normalized fields, ambient or on `M = g⁻¹(0)`.

pub mod integrator;
mod transport;

pub use integrator::{integrate_field, integrate_with_hook, Path, StepControls, Stop};
pub use transport::{
    round_trip, transport_ambient, transport_on_manifold, FlowError, Mode, RoundTrip, Termination,
    Trajectory, TransportOptions, TransportResult,
};
