//! Finite-stage toolkit for box spaces of residually finite groups.
//!
//! The crate builds quotient Cayley graphs along normal chains, assembles
//! their box-space metric, verifies and enumerates controlled coarse maps,
//! extracts group-level partial maps by a diagonal argument, and measures
//! Gromov–Hausdorff and Prokhorov evidence for the limit objects.

pub mod boxspace;
pub mod coarse;
pub mod coupling;
pub mod error;
pub mod gh;
pub mod groups;
pub mod limits;
pub mod measures;
pub mod metric;
pub mod pipeline;
mod search;

pub use error::{Error, Result};
