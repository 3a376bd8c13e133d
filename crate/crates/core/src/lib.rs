//! Exact simulator for linear-optics quantum communication with polarization
//! qubits: teleportation through two polarizing beam splitters and QND photon
//! counting, entanglement swapping, and repeater chains over lossy channels.

pub mod cli;
pub mod error;
pub mod fock;
pub mod measurement;
pub mod noise;
pub mod optics;
pub mod protocols;
pub mod rng;
pub mod symbolic;
pub mod verify;

pub use error::{Error, Result};
