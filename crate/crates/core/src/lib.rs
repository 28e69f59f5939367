pub mod banded;
pub mod asymptotics;
pub mod closed_forms;
pub mod cylinder;
pub mod dual;
pub mod error;
pub mod grid;
pub mod reconstruction;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
