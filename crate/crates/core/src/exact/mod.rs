//! Spin plus discretized bath as a state vector in an excitation-truncated Fock
//! space, propagated with a Lanczos exponential integrator.

pub mod basis;
pub mod hamiltonian;
pub mod krylov;
pub mod ladder;
pub mod propagate;

pub use basis::{bath_dimension, FockBasis, FockTruncation};
pub use hamiltonian::{build_hamiltonian_action, LinearOperator, SpinBosonHamiltonian, DEFAULT_MAX_JOINT_DIM};
pub use krylov::{krylov_step, LanczosBasis};
pub use ladder::{convergence_scan, LadderReport, LadderRung, LadderSpec};
pub use propagate::{initial_state, propagate, propagate_with, JointState, Propagation, PropagatorConfig};
