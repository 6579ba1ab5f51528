//! Option Iteration: discovering a set of option policies by distilling
//! Monte-Carlo search results into a joint mixture likelihood, and searching
//! in the joint space of first actions and options with them.
//!
//! This crate is `no_std` (with `alloc`) and carries the algorithmic core:
//! environments, the dense network stack, the search, the losses, the
//! trainer state machine, termination learning, and analysis routines.
//! IO, threads, and file formats live in the `optit` companion crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
pub mod env;
pub mod envs;
pub mod exec;
pub mod learn;
pub mod math;
pub mod nn;
pub mod rng;
pub mod search;
pub mod termination;

pub use env::{Environment, EpisodeEnd, EpisodeRecord, MdpSpec, Observation, Transition};
pub use exec::{Executor, Sequential};
pub use math::Scalar;
pub use rng::{stream, Rng, StreamKey};

/// Primitive action ids shared by every gridworld in this crate.
pub mod action {
    pub const UP: usize = 0;
    pub const DOWN: usize = 1;
    pub const LEFT: usize = 2;
    pub const RIGHT: usize = 3;
    pub const NAMES: [&str; 4] = ["up", "down", "left", "right"];

    /// Row/column displacement of a cardinal action.
    pub fn delta(action: usize) -> (isize, isize) {
        match action {
            UP => (-1, 0),
            DOWN => (1, 0),
            LEFT => (0, -1),
            _ => (0, 1),
        }
    }
}
