//! Robustness probing for audio source-separation systems.
//!
//! The crate synthesizes diagnostic harmonic stimuli ([`stimulus`]), deforms
//! them with spectral filters and mutes ([`deform`]), runs separators
//! ([`separators`]), scores them with permutation-invariant metrics and swap
//! detection ([`metrics`]) and summarizes which F0 lands in which output
//! channel ([`analysis`]). [`harness`] ties these into reproducible batch
//! experiments. All signals are mono `f64` waveforms at 8 kHz.

pub mod analysis;
pub mod deform;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod separators;
pub mod signal;
pub mod stimulus;

pub use error::{Error, Result};
