//! Explicit-state model checking for discrete-time Markov chains.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure
//! computation: the guarded-command front end ([`gcl`]), the explicit
//! chain ([`dtmc`]), the PCTL checker ([`pctl`]), the battery model
//! ([`battery`]), the wind-farm inspection mission generator
//! ([`mission`]) and a seeded path simulator ([`sim`]). File formats,
//! configuration files and the command line live in the `windcheck`
//! crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod battery;
pub mod dtmc;
pub mod gcl;
pub mod mission;
pub mod pctl;
pub mod rational;
pub mod sim;

pub use dtmc::{Dtmc, RewardStructure, StateSet};
pub use pctl::{check, parse_formula, CheckResult, Formula};
