//! Gate design toolkit for neutral atoms held in a two-color optical
//! superlattice.
//!
//! The crate is organised bottom-up:
//!
//! * [`atomphys`] holds species data and the closed-form light shift and
//!   photon scattering formulas.
//! * [`superlattice`] combines two standing waves into the long-period
//!   potential and locates its wells.
//! * [`addressing`] turns per-well hyperfine shifts into microwave gate times
//!   and scattering-limited success probabilities.
//! * [`dynamics`] is the 1D wave-packet engine: grids, finite-difference
//!   eigenstates, split-step propagation and contact interactions.
//! * [`mergeopt`] designs the well-merging pulse for the collisional
//!   SWAP / sqrt(SWAP) gate.
//! * [`cli`] wires everything to the `slgate` command line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod addressing;
pub mod atomphys;
pub mod cli;
pub mod constants;
pub mod dynamics;
mod error;
pub mod mergeopt;
pub mod superlattice;

pub use error::{Error, Result};
