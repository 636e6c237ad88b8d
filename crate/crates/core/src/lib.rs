pub mod color;
pub mod error;
pub mod grid;
pub mod pile;
pub mod rng;

pub use error::{Error, Result};
pub mod perception;
pub mod reasoner;
pub mod affordance;
pub mod pipeline;
pub mod harness;
