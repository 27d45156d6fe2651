//! Agent-based simulation of collective opinion dynamics under the influence
//! of a constant LLM opinion source.
//!
//! The model is a bounded-confidence (Hegselmann–Krause style) update on an
//! Erdős–Rényi graph with three agent classes, authority weighting,
//! stubbornness and random exogenous events. Around it sit the indicator
//! computations, a deterministic parallel parameter sweep, correlation and
//! extremal analyses, and agent-injection intervention experiments.

pub mod analysis;
pub mod clustering;
pub mod config;
pub mod error;
pub mod indicators;
pub mod interventions;
pub mod io;
pub mod model;
pub mod network;
pub mod rng;
pub mod sweep;

pub use error::{Error, Result};
