//! Graph prompting over text-attributed graphs.
//!
//! Arbitrary graphs become text-attributed graphs ([`tag`], [`dataset`]);
//! their texts are embedded by a pluggable provider ([`embedding`]); every
//! node-, link- or graph-level task is phrased as a prompted graph
//! ([`prompt`]) scored by one relational message-passing network
//! ([`model`]), trained and evaluated by [`train`] over task streams built by
//! [`tasks`].

pub mod convert;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod model;
pub mod prompt;
pub mod rng;
pub mod synthetic;
pub mod tag;
pub mod tasks;
pub mod train;

pub use error::{Error, Result};
