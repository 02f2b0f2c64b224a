//! Projection-method simulator for 2D droplets with moving contact lines on
//! impermeable textured and inclined substrates, including droplet splitting
//! and merging.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod droplet;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod par;
pub mod pinned;
pub mod scheme;
pub mod stability;
pub mod substrate;
pub mod topology;
pub mod trace;

pub use droplet::{DropletState, SimParams};
pub use error::{Error, Result};
pub use par::Execution;
pub use substrate::{Substrate, SubstrateSpec};
