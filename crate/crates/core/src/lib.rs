//! Irreversibility of quantum processes and the measurement error, disturbance
//! and scrambling quantities it encodes.
//!
//! The crate is organized bottom-up: [`qcore`] holds states, channels and
//! metrics; [`irrev`] measures how well a process can be undone; [`comb`]
//! builds the ancilla protocols whose small-coupling irreversibility yields
//! measurement error and disturbance; [`oracles`] gives closed forms to check
//! them against; [`way`] verifies conservation-law bounds; [`otoc`] treats
//! out-of-time-ordered correlators the same way.

pub mod comb;
pub mod error;
pub mod irrev;
pub mod oracles;
pub mod otoc;
pub mod qcore;
pub mod way;

pub use error::{Error, Result};
