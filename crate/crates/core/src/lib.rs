pub mod error;
pub mod levy_models;
pub mod montecarlo;
pub mod numerics;
pub mod occupation;
pub mod refracted;
pub mod scale;

pub use error::{Error, Result};
