//! Real-time hand-pose interaction engine.
//!
//! Landmark frames are canonicalized in the palm frame ([`geometry`]),
//! windowed and embedded into a 2D pose space by a jointly trained
//! autoencoder and gesture classifier ([`nets`], [`training`]). The pose space
//! is mapped onto a 2D music space built from track profiles
//! ([`musicspace`]), and a streaming session state machine ([`engine`]) turns
//! live frames into interaction events, served over a line protocol
//! ([`service`]). [`synth`] generates gesture clips and catalogs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod geometry;
pub mod gesture;
pub mod musicspace;
pub mod nets;
pub mod scaling;
pub mod service;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use gesture::GestureClass;
