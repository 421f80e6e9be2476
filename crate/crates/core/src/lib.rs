//! Core of a latent-steered rhythm sequencer.
//!
//! Everything here is pure and allocation-only: the 32-step pattern codec,
//! MIDI file encoding, the autoencoder and its trainer, latent atlases, the
//! decoder-driven generator, the step sequencer state machine and the OSC
//! wire format with its control schema. IO lives in the companion crate.
#![no_std]

extern crate alloc;

pub mod atlas;
pub mod control;
pub mod engine;
pub mod error;
pub mod generator;
pub mod nn;
pub mod osc;
pub mod pattern;
pub mod sequencer;
pub mod smf;

pub use error::{Error, Result};
pub use pattern::{ManyHotPattern, TimeBase, STEPS};
