//! Inkblot-based password hardening.
//!
//! Passwords are bound to a set of machine-generated inkblots that only the
//! account holder has labelled. Verifying a password guess offline requires
//! solving the matching between those labels and the inkblots regenerated
//! from the guess, which needs a human in the loop for every guess.

pub mod attacklab;
pub mod authcore;
pub mod authservice;
pub mod challengekit;
pub mod cli;
pub mod gotcha;
pub mod inkblot;
pub mod matching;
pub mod seedcore;

/// Protocol version carried by every wire and file format.
pub const PROTOCOL_VERSION: u32 = 1;
