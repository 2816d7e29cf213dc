//! Slot-level models and analysis for information velocity over a tandem of
//! binary erasure channels.
//!
//! A line network has `k` hops; hop `i` connects node `i` to node `i + 1` and
//! erases each slot's symbol independently with probability `eps_i`. Node `0`
//! is the source and node `k` the destination. Slots are numbered from `1`.
//!
//! The crate is `no_std` (it needs `alloc`) and deterministic: every random
//! quantity is a pure function of a [`model::RandomnessSpec`].
//!
//! * [`model`]: erasure profiles, channel-state matrices, geometric gaps.
//! * [`simnet`]: forward-the-last-received, bit-separation and GSI-control
//!   network simulators.
//! * [`wavefront`]: the coupled wave-front chains and their success events.
//! * [`bounds`]: closed-form escape and success bounds.
//! * [`converse`]: the `g(i, n)` recursion, geometric-sum CDF and Fano floors.
//! * [`lpp`]: last-passage percolation and the tandem-queue oracle.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bounds;
pub mod converse;
mod error;
pub mod lpp;
pub mod model;
pub mod simnet;
pub mod wavefront;

pub use error::{Error, Result};
pub use model::{ErasureProfile, ProfileKind, RandomnessSpec, StateMatrix};
pub use simnet::{Regime, Schedule};
