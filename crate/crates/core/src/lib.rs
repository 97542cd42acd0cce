//! Channel impulse response and time-of-flight estimation from multi-band
//! WiFi channel state information.
//!
//! The pipeline removes per-band phase distortion with atomic norm denoising
//! ([`andenoise`], [`cleaner`]), splices the cleaned bands and recovers a
//! relative channel with orthogonal matching pursuit ([`splicer`]), then
//! resolves the remaining delay and phase ambiguity from a two-way carrier
//! handshake ([`handshake`]). [`chronos`] implements the squared-carrier
//! sparse baseline and [`harness`] runs seeded Monte-Carlo comparisons.

pub mod andenoise;
pub mod chronos;
pub mod cleaner;
pub mod error;
pub mod harness;
pub mod handshake;
pub mod io;
pub mod model;
pub mod phase;
pub mod rng;
pub mod splicer;

pub use error::{Error, Result};
