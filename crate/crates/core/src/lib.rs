//! Symmetry-reduced inflation feasibility for the triangle network.

pub mod certificate;
pub mod constraints;
pub mod error;
pub mod events;
pub mod exact;
pub mod perm;
pub mod problem;
pub mod qp;
pub mod solver;
pub mod symmetry;
pub mod target;

pub use error::{Error, Result};
