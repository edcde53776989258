//! Non-Markovian memory effects in the zero-temperature, unbiased spin-boson model.
//!
//! The crate bundles three dynamics backends for the spin-boson Hamiltonian
//!
//! ```text
//! H = Δσx + Σn ωn (an†an + 1/2) + σz Σn cn qn
//! ```
//!
//! with an Ohmic, exponentially cut-off spectral density, and a measurement layer
//! that turns Bloch trajectories into trace-distance series and the cumulative
//! backflow measure N:
//!
//! * [`exact`]: excitation-truncated state-vector propagation of spin + discretized bath
//!   with a Lanczos exponential integrator.
//! * [`tcl2`]: second-order time-convolutionless master equation as Bloch equations.
//! * [`analytic`]: weak-coupling closed forms, including the geometric resummation of N.
//! * [`measure`]: mirror map, trace distance, backflow intervals and N.
//!
//! Units: ħ = 1, energies in units of Δ, times in 1/Δ.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod exact;
pub mod measure;
pub mod model;
pub mod tcl2;

pub use error::{Error, Result};
pub use measure::{BlochTrajectory, NonMarkovianityReport, TraceDistanceSeries};
pub use model::{DiscretizedBath, ModelConfig, OhmicSpectralDensity};
