//! Simulator for a two-qudit sensing-and-communication link.
//!
//! The library models a superdense-coding transmission through a
//! parameter-dependent phase channel. The receiver applies a Bell-measurement
//! transform followed by a trainable circuit, and classical neural networks
//! turn measurement outcomes into a decoded message and a channel-parameter
//! estimate. An alternating training loop optimizes the circuit angles (by the
//! two-term shift rule) together with the networks, and the sweep harness maps
//! out the throughput-versus-sensing-accuracy trade-off as the sender backs
//! off its rate.
//!
//! Modules:
//! - [`qudit`]: dense two-qudit state vectors, gates, Born sampling.
//! - [`protocol`]: message encoding, channel, decoding circuit, rate plans.
//! - [`nn`]: feed-forward softmax networks, backprop, Adam, checkpoints.
//! - [`training`]: batches, alternating epochs, shift-rule gradients.
//! - [`eval`]: exact success/accuracy metrics, back-off sweep, CSV output.
//! - [`selftest`]: fast invariant suite for the command-line `selftest`.

pub mod error;
pub mod eval;
pub mod nn;
pub mod protocol;
pub mod qudit;
pub mod selftest;
pub mod training;

pub use error::{Error, Result};
