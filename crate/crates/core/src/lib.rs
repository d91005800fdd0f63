pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod fields;
pub mod frozen;
pub mod grid;
pub mod linalg;
pub mod penalty;
pub mod problem;
pub mod profile;
pub mod reduction;
pub mod region;
pub mod solvers;

pub use error::{Error, Result};
