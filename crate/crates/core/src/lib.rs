pub mod cli;
pub mod energy;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod lamination;
pub mod linalg;
pub mod slipsys;
pub mod smoothing;
pub mod verify;

pub use error::{Error, Result};
