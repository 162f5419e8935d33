//! Optical spin-memory simulation for a single charge-tunable quantum dot.
//!
//! An electron spin is written by a circularly polarized laser pulse, stored
//! while holes tunnel out, and read back as the circular polarization of
//! positive-trion emission after a bias pulse returns two holes.

pub mod analysis;
pub mod engine;
pub mod levels;
pub mod optics;
pub mod pulses;
pub mod report;
pub mod cli;
