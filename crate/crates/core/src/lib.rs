//! Simulator for an engineered atomic reservoir that stabilises
//! non-classical states of a cavity field.
//!
//! Atoms cross the cavity one at a time and interact with the field
//! dispersively, then resonantly, then dispersively again with the opposite
//! detuning. The reservoir's pointer states are Kerr-evolved coherent states:
//! squeezed states, "banana" states and superpositions of several coherent
//! components.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod lindblad;
pub mod metrics;
pub mod reservoir;
pub mod scenario;

mod optim;
mod quad;

pub use error::{Error, Result};
