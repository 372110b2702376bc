//! Simulation and verification toolkit for simple nested fragmentation
//! processes: continuous-time Markov dynamics on nested partitions (gene
//! lineages inside species lineages) driven by erosion and by paintbox
//! dislocations, with exact small-n generator oracles validating every
//! sampler.

#![forbid(unsafe_code)]

pub mod error;
pub mod export;
pub mod fixtures;
pub mod mass;
pub mod paintbox;
pub mod partitions;
pub mod rates;
pub mod rng;
pub mod simulator;
pub mod verify;

pub use error::{Error, Result};
