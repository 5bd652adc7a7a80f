//! Heralded preparation of non-classical matter states by shaped single-photon
//! drives of a lossy cavity: a collective spin or a mechanical oscillator
//! dispersively coupled to one cavity mode.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod evolve;
pub mod herald;
pub mod linalg;
pub mod phasespace;
pub mod pulses;
pub mod statespace;

pub use error::{Error, Result};
