//! Hybrid classical-quantum dynamics: a Trotterized circuit state multiplied by
//! a classical correction factor that is integrated with the time-dependent
//! variational principle.

pub mod ansatz;
pub mod config;
pub mod density;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod models;
pub mod pauli;
pub mod report;
pub mod rng;
pub mod statevector;
pub mod tdvp;

pub use error::{CqdError, Result};
pub use pauli::{Letter, PauliString, PauliSum, Phase, SpinConfig};
pub use statevector::{Component, ExactPropagator, MeasurementBasis, StateVector};
