//! Word metrics, distortion and divergence on finitely generated groups, and
//! a numerical untwisting pipeline for Hölder cocycles over full shifts.

pub mod cocycle;
pub mod divergence;
pub mod error;
pub mod group;
pub mod harness;
pub mod invariants;
pub mod report;
pub mod shift;

pub use error::{Error, Result};
